"""The acceptance corpus: twelve checks run into one deterministic JSON report.

Criteria 1-11 are computed here; criterion 12 (byte-identical reruns under
different thread counts) is checked by running the whole suite twice, so
it lives in the caller.  Reports carry no timings, so equal seeds give
equal bytes.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import blocks, bounds, corpus, graphs, linalg, melon
from .polymatrix import DistributionSpec, PolyMatrix, gaussian, pbiased, rademacher
from .sampling import SampleConfig, decoupling_ratio, derive_seed, dominated, estimate_moment, rosenthal_empirical

DEFAULT_SEED = 20240917


@dataclass
class CriterionResult:
    id: int
    name: str
    passed: bool
    checks: int
    failures: list = field(default_factory=list)
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "name": self.name,
            "passed": self.passed,
            "checks": self.checks,
            "failures": self.failures,
            "details": self.details,
        }


def _rel_err(a: float, b: float) -> float:
    scale = max(abs(a), abs(b))
    return 0.0 if scale == 0 else abs(a - b) / scale


def _fin(x):
    return float(x) if x is not None and math.isfinite(x) else None


# --- 1-3: exact linear algebra ---------------------------------------------


def criterion_1(seed: int, threads=None) -> CriterionResult:
    """Trace-formula Schatten powers against singular-value sums."""
    worst, fails = 0.0, []
    for idx in range(200):
        rng = np.random.default_rng(derive_seed(seed, 1, idx))
        r, c = (int(v) for v in rng.integers(1, 201, size=2))
        A = rng.standard_normal((r, c))
        t = 1 + idx % 3
        a = linalg.schatten_power_trace(A, 2 * t)
        b = linalg.schatten_power(A, 2 * t)
        err = _rel_err(a, b)
        worst = max(worst, err)
        if err > 1e-9:
            fails.append({"index": idx, "shape": [r, c], "t": t, "rel_err": err})
    return CriterionResult(1, "schatten_trace_vs_svd", not fails, 200, fails, {"max_rel_err": worst, "tolerance": 1e-9})


def criterion_2(seed: int, threads=None) -> CriterionResult:
    """Dilation doubles the Schatten power."""
    worst, fails, checks = 0.0, [], 0
    for idx in range(100):
        rng = np.random.default_rng(derive_seed(seed, 2, idx))
        r, c = (int(v) for v in rng.integers(1, 41, size=2))
        A = rng.standard_normal((r, c))
        H = linalg.hermitian_dilation(A)
        for t in (1, 2, 3):
            checks += 1
            err = _rel_err(linalg.schatten_power(H, 2 * t), 2 * linalg.schatten_power(A, 2 * t))
            worst = max(worst, err)
            if err > 1e-9:
                fails.append({"index": idx, "t": t, "rel_err": err})
    return CriterionResult(2, "dilation_identity", not fails, checks, fails, {"max_rel_err": worst, "tolerance": 1e-9})


def order_invariance_instances(seed: int) -> list[PolyMatrix]:
    out = []
    for idx in range(20):
        rng = np.random.default_rng(derive_seed(seed, 3, idx))
        d = 1 + idx % 3
        n = int(rng.integers(max(d, 3), 9))
        mixed = idx % 4 == 3 and d > 1
        degree = tuple(range(1, d + 1)) if mixed else d
        out.append(corpus.random_multilinear(derive_seed(seed, 3, idx, 1), n, degree, dims=(2, 3), density=0.5))
    return out


def criterion_3(seed: int, threads=None) -> CriterionResult:
    """Every increment order of ``F_{a,b,c}`` gives the same Schatten norm.

    Blocks below full degree are evaluated at a seeded point first.
    """
    worst, fails, checks = 0.0, [], 0
    for idx, F in enumerate(order_invariance_instances(seed)):
        x = np.random.default_rng(derive_seed(seed, 3, idx, 2)).standard_normal(F.n)
        for total in range(F.degree + 1):
            for a, b, c in bounds.all_triples(total):
                vals = {}
                for order in blocks.all_orders(a, b, c):
                    B = blocks.evaluate_block(blocks.build_block(F, a, b, c, order), x)
                    vals[order] = [blocks.block_schatten_power(B, p) for p in (4, 8)]
                ref = next(iter(vals.values()))
                for order, v in vals.items():
                    for p_idx in range(2):
                        checks += 1
                        err = _rel_err(v[p_idx], ref[p_idx])
                        worst = max(worst, err)
                        if err > 1e-9:
                            fails.append({"instance": idx, "abc": [a, b, c], "order": "".join(order), "rel_err": err})
    return CriterionResult(3, "order_invariance", not fails, checks, fails, {"max_rel_err": worst, "tolerance": 1e-9})


# --- 4-7: Monte Carlo dominance --------------------------------------------


def decoupling_instances(seed: int) -> list[PolyMatrix]:
    out = [corpus.example_quadratic()]
    for idx in range(10):
        d = 2 + idx % 2
        out.append(corpus.random_multilinear(derive_seed(seed, 4, idx), 6, d, dims=(3, 3), density=0.5))
    return out


def criterion_4(seed: int, threads=None) -> CriterionResult:
    """Decoupling with ``d^d`` (polynomials) and ``k^k`` (graph shapes)."""
    fails, rows = [], []
    for idx, F in enumerate(decoupling_instances(seed)):
        cfg = SampleConfig(rademacher(), F.n, 20_000, derive_seed(seed, 4, idx, 1), t=2)
        res = decoupling_ratio(F, cfg, "norm", threads=threads)
        rows.append({"instance": idx, "degree": F.degree, **_cmp_row(res)})
        if not res.holds:
            fails.append(rows[-1])
    for idx, sh in enumerate((graphs.single_edge(), graphs.path_shape(), graphs.triangle_shape())):
        cfg = SampleConfig(pbiased(0.5), graphs.num_pairs(6), 20_000, derive_seed(seed, 4, 100 + idx), t=2)
        res = graphs.graph_decoupling_ratio(sh, 6, cfg, threads=threads)
        rows.append({"shape": sh.to_dict(), "n": 6, **_cmp_row(res)})
        if not res.holds:
            fails.append(rows[-1])
    return CriterionResult(4, "decoupling", not fails, len(rows), fails, {"rows": rows, "samples": 20_000, "t": 2})


def _cmp_row(res) -> dict:
    return {
        "lhs": res.lhs.mean,
        "lhs_se": res.lhs.stderr,
        "rhs": res.rhs.mean,
        "rhs_se": res.rhs.stderr,
        "constant": res.constant,
        "holds": res.holds,
    }


def criterion_5(seed: int, threads=None) -> CriterionResult:
    """Matrix Rosenthal on seeded linear series."""
    dists = (rademacher(), pbiased(0.3), gaussian())
    fails, worst = [], -math.inf
    for idx in range(100):
        Cs = corpus.random_linear_series(derive_seed(seed, 5, idx), max_terms=10, dims=(4, 4))
        dist = dists[idx % 3]
        cfg = SampleConfig(dist, len(Cs), 10_000, derive_seed(seed, 5, idx, 1), t=2)
        est, rhs, holds = rosenthal_empirical(Cs, dist, 2, cfg, threads=threads)
        gap = est.log_upper() - rhs.log_total
        worst = max(worst, gap)
        if not holds:
            fails.append({"instance": idx, "dist": dist.label, "log_lhs_plus_4se": est.log_upper(), "log_rhs": rhs.log_total})
    return CriterionResult(5, "matrix_rosenthal", not fails, 100, fails, {"max_log_gap": worst, "samples": 10_000, "t": 2})


def recursion_instances(seed: int) -> list[tuple[str, PolyMatrix, DistributionSpec]]:
    ex = corpus.example_quadratic()
    out = [("example_rademacher", ex, rademacher()), ("example_pbiased_0.5", ex, pbiased(0.5)), ("example_pbiased_0.1", ex, pbiased(0.1))]
    for idx in range(10):
        degree = (2, 3, (1, 2), (1, 2, 3), 2)[idx % 5]
        F = corpus.random_multilinear(derive_seed(seed, 6, idx), 5, degree, dims=(3, 3), density=0.5)
        dist = rademacher() if idx % 2 == 0 else pbiased(0.3)
        out.append((f"seeded_{idx}", F, dist))
    return out


def criterion_6(seed: int, threads=None) -> CriterionResult:
    """Quadratic, homogeneous and general multilinear bounds dominate ``E||F - EF||_8^8``."""
    t = 2
    fails, rows, checks = [], [], 0
    for idx, (name, F, dist) in enumerate(recursion_instances(seed)):
        cfg = SampleConfig(dist, F.n, 10_000, derive_seed(seed, 6, idx, 1), t=t)
        est = estimate_moment(F, cfg, 4 * t, threads=threads)
        reports = {"multilinear": bounds.multilinear_bound(F, dist, t)}
        if F.is_homogeneous:
            reports["homogeneous_multilinear"] = bounds.homogeneous_multilinear_bound(F, dist, t)
            if F.degree == 2:
                reports["quadratic"] = bounds.quadratic_bound(F, dist, t)
        row = {"instance": name, "dist": dist.label, "log_estimate_plus_4se": est.log_upper(), "bounds": {}}
        for key, rep in reports.items():
            checks += 1
            dom = dominated(est, rep.log_moment_power)
            row["bounds"][key] = {"log_bound": rep.log_moment_power, "holds": dom.holds}
            if not dom.holds:
                fails.append({"instance": name, "bound": key})
        rows.append(row)
    return CriterionResult(6, "multilinear_recursions", not fails, checks, fails, {"rows": rows, "samples": 10_000, "t": t})


def gaussian_instances(seed: int) -> list[PolyMatrix]:
    out = []
    for idx in range(10):
        rng = np.random.default_rng(derive_seed(seed, 7, idx))
        d = 1 + idx % 3
        n = int(rng.integers(2, 7))
        out.append(corpus.random_gaussian_poly(derive_seed(seed, 7, idx, 1), n, d, dims=(3, 3), n_terms=6))
    return out


def criterion_7(seed: int, threads=None) -> CriterionResult:
    """Gaussian recursion dominates ``E||P - EP||_4^4``."""
    t = 2
    fails, rows = [], []
    for idx, P in enumerate(gaussian_instances(seed)):
        cfg = SampleConfig(gaussian(), P.n, 10_000, derive_seed(seed, 7, idx, 2), t=t)
        est = estimate_moment(P, cfg, 2 * t, threads=threads)
        rep = bounds.gaussian_bound(P, t)
        dom = dominated(est, rep.log_total)
        rows.append({"instance": idx, "degree": P.degree, "n": P.n, "log_estimate_plus_4se": est.log_upper(), "log_bound": rep.log_total, "holds": dom.holds})
        if not dom.holds:
            fails.append(rows[-1])
    return CriterionResult(7, "gaussian_recursion", not fails, len(rows), fails, {"rows": rows, "samples": 10_000, "t": t})


# --- 8-9: exact combinatorial checks ---------------------------------------


def criterion_8(seed: int, threads=None) -> CriterionResult:
    """Trace inequality on seeded tuples, no statistical margin."""
    fails, worst = [], 0.0
    for idx in range(300):
        rng = np.random.default_rng(derive_seed(seed, 8, idx))
        m = int(rng.integers(1, 6))
        size = int(rng.integers(1, 7))
        r = (2, 3, 4)[idx % 3]
        mats = [rng.standard_normal((size, size)) for _ in range(m)]
        chk = bounds.trace_inequality_check(mats, r)
        worst = max(worst, chk.lhs / chk.rhs if chk.rhs > 0 else 0.0)
        if not chk.holds:
            fails.append({"index": idx, "m": m, "r": r, "lhs": chk.lhs, "rhs": chk.rhs})
    return CriterionResult(8, "trace_inequality", not fails, 300, fails, {"max_lhs_over_rhs": worst})


def random_shape(seed: int, max_k: int = 8) -> graphs.Shape:
    rng = np.random.default_rng(seed)
    k = int(rng.integers(2, max_k + 1))
    edges = tuple(e for e in itertools.combinations(range(1, k + 1), 2) if rng.random() < 0.4)
    U = tuple(int(v) + 1 for v in rng.permutation(k)[: int(rng.integers(1, 3))])
    V = tuple(int(v) + 1 for v in rng.permutation(k)[: int(rng.integers(1, 3))])
    return graphs.Shape(k, edges, U, V)


def brute_force_min_separator(shape: graphs.Shape) -> int:
    """Minimum separator size over all ``2^k`` masks, connectivity via union-find."""
    best = shape.k
    for mask in range(1 << shape.k):
        removed = {w for w in shape.vertices if mask >> (w - 1) & 1}
        parent = {w: w for w in shape.vertices if w not in removed}

        def find(u):
            while parent[u] != u:
                u = parent[u]
            return u

        for u, v in shape.edges:
            if u in parent and v in parent:
                parent[find(u)] = find(v)
        left = {find(u) for u in shape.U if u in parent}
        right = {find(v) for v in shape.V if v in parent}
        if not left & right:
            best = min(best, len(removed))
    return best


def hand_shapes() -> list[tuple[str, graphs.Shape, int]]:
    return [
        ("path", graphs.path_shape(), 1),
        ("single_edge", graphs.single_edge(), 1),
        ("U_equals_V", graphs.Shape(3, ((1, 3), (2, 3)), (1, 2), (1, 2)), 2),
        ("U_meets_V", graphs.Shape(4, ((1, 2), (2, 3), (3, 4)), (1, 2), (2, 4)), 1),
    ]


def criterion_9(seed: int, threads=None) -> CriterionResult:
    """Minimum separators against the exhaustive mask oracle and hand cases."""
    fails, checks = [], 0
    for idx in range(50):
        sh = random_shape(derive_seed(seed, 9, idx))
        res = graphs.min_vertex_separator(sh)
        oracle = brute_force_min_separator(sh)
        checks += 1
        if res.size != oracle or not res.verified:
            fails.append({"shape": sh.to_dict(), "found": res.size, "oracle": oracle})
    hand = {}
    for name, sh, expected in hand_shapes():
        res = graphs.min_vertex_separator(sh)
        checks += 1
        ok = res.size == expected and res.verified and set(sh.U) & set(sh.V) <= set(res.separator)
        hand[name] = {"separator": list(res.separator), "size": res.size, "expected": expected}
        if not ok:
            fails.append({"hand_case": name, **hand[name]})
    return CriterionResult(9, "separator_oracle", not fails, checks, fails, {"hand_cases": hand})


# --- 10-11: graph matrices and melon ---------------------------------------

SHAPES = (("single_edge", graphs.single_edge), ("path", graphs.path_shape), ("triangle", graphs.triangle_shape))
SLOPE_NS = (8, 12, 16, 20, 24)


def criterion_10(seed: int, threads=None) -> CriterionResult:
    """Shape bound dominance at ``n in {6, 8, 10}`` and the dense scaling slope."""
    fails, rows, slopes, checks = [], [], {}, 0
    for s_idx, (name, make) in enumerate(SHAPES):
        sh = make()
        for n in (6, 8, 10):
            cfg = SampleConfig(pbiased(0.5), graphs.num_pairs(n), 2_000, derive_seed(seed, 10, s_idx, n), t=2)
            est = graphs.estimate_graph_moment(sh, n, cfg, threads=threads)
            rep = graphs.shape_bound(sh, n, 0.5, 2, C=3.0)
            dom = dominated(est, rep.log_total)
            checks += 1
            rows.append({"shape": name, "n": n, "log_estimate_plus_4se": est.log_upper(), "log_bound": rep.log_total, "holds": dom.holds})
            if not dom.holds:
                fails.append(rows[-1])
        fit = graphs.spectral_norm_slope(sh, SLOPE_NS, 100, derive_seed(seed, 10, s_idx, 99), p=0.5, tolerance=0.4, threads=threads)
        checks += 1
        slopes[name] = fit.to_dict()
        if not fit.within:
            fails.append({"shape": name, "slope": fit.slope, "target": fit.target})
    return CriterionResult(10, "graph_matrix_bound", not fails, checks, fails, {"dominance": rows, "slopes": slopes})


MELON_SLOPE_NS = tuple(range(4, 17))


def criterion_11(seed: int, threads=None) -> CriterionResult:
    """Melon bound dominance and the log-log slope of ``E||M - EM||_4^4``."""
    t = 2
    fails, rows = [], []
    for n in (4, 6, 8):
        est = melon.melon_moment(n, t, 2_000, derive_seed(seed, 11, n), threads=threads)
        rep = melon.melon_bound(n, t)
        dom = dominated(est, rep.log_total)
        rows.append({"n": n, "log_estimate_plus_4se": est.log_upper(), "log_bound": rep.log_total, "holds": dom.holds})
        if not dom.holds:
            fails.append(rows[-1])
    fit = melon.melon_moment_slope(MELON_SLOPE_NS, t, 2_000, derive_seed(seed, 11, 99), tolerance=0.5, threads=threads)
    if not fit.within:
        fails.append({"slope": fit.slope, "target": fit.target, "tolerance": fit.tolerance})
    return CriterionResult(11, "melon", not fails, len(rows) + 1, fails, {"dominance": rows, "slope": fit.to_dict()})


CRITERIA: dict[int, Callable[..., CriterionResult]] = {
    1: criterion_1,
    2: criterion_2,
    3: criterion_3,
    4: criterion_4,
    5: criterion_5,
    6: criterion_6,
    7: criterion_7,
    8: criterion_8,
    9: criterion_9,
    10: criterion_10,
    11: criterion_11,
}


def run_criterion(cid: int, seed: int = DEFAULT_SEED, threads=None) -> CriterionResult:
    if cid not in CRITERIA:
        raise KeyError(f"no criterion {cid}")
    return CRITERIA[cid](seed, threads)


def build_report(results: list[CriterionResult], seed: int) -> dict:
    return {
        "seed": seed,
        "criteria": [r.to_dict() for r in results],
        "summary": {
            "passed": sum(r.passed for r in results),
            "failed": sum(not r.passed for r in results),
            "failed_ids": [r.id for r in results if not r.passed],
        },
    }


def run_suite(seed: int = DEFAULT_SEED, threads=None, only=None) -> dict:
    ids = sorted(CRITERIA) if only is None else sorted(only)
    return build_report([run_criterion(i, seed, threads) for i in ids], seed)


def report_json(report: dict) -> str:
    return json.dumps(_clean(report), indent=2, sort_keys=True) + "\n"


def _clean(obj):
    """Replace non-finite floats with ``None`` so the output is strict JSON."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        return _fin(float(obj))
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def summary_table(report: dict) -> str:
    lines = [f"{'id':>3}  {'criterion':<26} {'result':<6} checks"]
    for c in report["criteria"]:
        lines.append(f"{c['id']:>3}  {c['name']:<26} {'PASS' if c['passed'] else 'FAIL':<6} {c['checks']}")
    s = report["summary"]
    lines.append(f"passed {s['passed']}, failed {s['failed']}")
    return "\n".join(lines)
