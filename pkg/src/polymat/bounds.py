"""Right-hand sides of the moment bounds, evaluated in log space.

Every bound is a sum of terms ``constant * schatten``.  Constants such as
``(48dt)^{4dt}`` overflow doubles quickly, so each term stores
``log_constant`` and ``log_schatten`` and the total is assembled with
log-sum-exp.  ``normalization`` records whether the total bounds the moment
power ``E||.||_p^p`` or its root ``(E||.||_p^p)^{1/p}``; ``power`` is ``p``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .blocks import block_log_schatten_power, build_block, build_gaussian_block, expected_block
from .errors import InputError
from .polymatrix import DistributionSpec, PolyMatrix, gaussian, homogeneous_part

THEOREMS = ("rosenthal", "quadratic", "homogeneous_multilinear", "multilinear", "gaussian", "graph_shape", "melon")
NORMALIZATIONS = ("moment_power", "moment_root")

#: totals above this are reported only as (mantissa, exponent)
FLOAT_REPORT_CAP = 1e300


def log_sum(values) -> float:
    """``log(sum(exp(v)))`` over finite-or-``-inf`` logs; ``-inf`` when empty."""
    vals = [v for v in values if v != -math.inf]
    if not vals:
        return -math.inf
    top = max(vals)
    return top + math.log(math.fsum(math.exp(v - top) for v in vals))


def _safe_log(x: float) -> float:
    return math.log(x) if x > 0 else -math.inf


def _finite_or_none(x):
    return float(x) if x is not None and math.isfinite(x) else None


def mantissa_exponent(log_value: float) -> tuple[float | None, int | None]:
    """Base-10 ``(m, e)`` with ``exp(log_value) = m * 10**e`` and ``1 <= m < 10``."""
    if not math.isfinite(log_value):
        return (0.0, 0) if log_value == -math.inf else (None, None)
    l10 = log_value / math.log(10)
    e = math.floor(l10)
    return 10 ** (l10 - e), int(e)


def check_t(t) -> int:
    if isinstance(t, bool) or int(t) != t or t < 2:
        raise InputError(f"t must be an integer >= 2, got {t!r}")
    return int(t)


@dataclass
class BoundTerm:
    label: str
    log_constant: float
    log_schatten: float

    @property
    def log_contribution(self) -> float:
        if self.log_schatten == -math.inf:
            return -math.inf
        return self.log_constant + self.log_schatten

    @property
    def schatten(self) -> float:
        return math.exp(self.log_schatten) if self.log_schatten < 690 else math.inf

    @property
    def constant(self) -> float:
        return math.exp(self.log_constant) if self.log_constant < 690 else math.inf

    @property
    def contribution(self) -> float:
        lc = self.log_contribution
        return math.exp(lc) if lc < 690 else math.inf

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "log_constant": _finite_or_none(self.log_constant),
            "schatten": _finite_or_none(self.schatten),
            "log_schatten": _finite_or_none(self.log_schatten),
            "log_contribution": _finite_or_none(self.log_contribution),
        }


@dataclass
class BoundReport:
    theorem: str
    t: int
    normalization: str
    power: int
    terms: list[BoundTerm] = field(default_factory=list)
    config: dict = field(default_factory=dict)
    factors: dict = field(default_factory=dict)
    subreports: list["BoundReport"] = field(default_factory=list)

    def __post_init__(self):
        if self.theorem not in THEOREMS:
            raise InputError(f"unknown theorem id {self.theorem!r}")
        if self.normalization not in NORMALIZATIONS:
            raise InputError(f"unknown normalization {self.normalization!r}")

    @property
    def log_total(self) -> float:
        """Log of the bound in its own normalization."""
        return log_sum(t.log_contribution for t in self.terms)

    @property
    def total(self) -> float:
        lt = self.log_total
        return math.exp(lt) if lt < math.log(FLOAT_REPORT_CAP) else math.inf

    @property
    def log_moment_power(self) -> float:
        """Log of the implied bound on ``E||.||_p^p``."""
        lt = self.log_total
        if self.normalization == "moment_power" or lt == -math.inf:
            return lt
        return self.power * lt

    def term(self, label: str) -> BoundTerm:
        for tm in self.terms:
            if tm.label == label:
                return tm
        raise KeyError(label)

    def to_dict(self) -> dict:
        lt = self.log_total
        m, e = mantissa_exponent(lt)
        out = {
            "theorem": self.theorem,
            "t": self.t,
            "normalization": self.normalization,
            "power": self.power,
            "terms": [tm.to_dict() for tm in self.terms],
            "log_total": _finite_or_none(lt),
            "total": _finite_or_none(self.total) if lt != -math.inf else 0.0,
            "total_mantissa10": m,
            "total_exponent10": e,
            "log_moment_power": _finite_or_none(self.log_moment_power),
            "config": self.config,
        }
        if self.factors:
            out["factors"] = {k: _finite_or_none(v) for k, v in self.factors.items()}
        if self.subreports:
            out["subreports"] = [r.to_dict() for r in self.subreports]
        return out

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent, sort_keys=True)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["theorem", "label", "log_constant", "schatten", "log_contribution"])
        for tm in self.terms:
            d = tm.to_dict()
            w.writerow([self.theorem, d["label"], _csv(d["log_constant"]), _csv(d["schatten"]), _csv(d["log_contribution"])])
        return buf.getvalue()


def _csv(x):
    return "" if x is None else repr(x)


def _abc_triples(d: int) -> list[tuple[int, int, int]]:
    return sorted((a, b, d - a - b) for a in range(d + 1) for b in range(d + 1 - a))


def _ab_pairs(d: int) -> list[tuple[int, int]]:
    return sorted((a, s - a) for s in range(1, d + 1) for a in range(s + 1))


def _require_bounded(dist: DistributionSpec, where: str):
    if not dist.bounded:
        raise InputError(f"{where} needs a bounded distribution; use gaussian_bound for Gaussian inputs")


def _log_L(dist: DistributionSpec) -> float:
    return math.log(dist.L)


# --- matrix Rosenthal -------------------------------------------------------


def rosenthal_rhs(coefficients, dist: DistributionSpec, t: int, moment_mode: str = "exact") -> BoundReport:
    """RHS of the non-Hermitian matrix Rosenthal inequality for ``sum_k C_k x_k``.

    ``||(sum C C^T)^{1/2}||_{4t}^{4t}`` equals the Schatten power of the
    horizontal stack ``[C_1 ... C_m]``; the column version uses the vertical
    stack.  ``moment_mode="exact"`` uses ``E x^{4t}``; ``"L"`` uses
    ``L^{4t}``.
    """
    t = check_t(t)
    p = 4 * t
    if moment_mode not in ("exact", "L"):
        raise InputError("moment_mode must be 'exact' or 'L'")
    if moment_mode == "L":
        _require_bounded(dist, "moment_mode='L'")
    Cs = [linalg.as_matrix(C) for C in coefficients]
    if Cs and len({C.shape for C in Cs}) != 1:
        raise InputError("all coefficient matrices must share a shape")
    if Cs:
        row_var = linalg.log_schatten_power(np.hstack(Cs), p)
        col_var = linalg.log_schatten_power(np.vstack(Cs), p)
        diag = log_sum(linalg.log_schatten_power(C, p) for C in Cs)
    else:
        row_var = col_var = diag = -math.inf
    log_moment = p * _log_L(dist) if moment_mode == "L" else math.log(dist.moment(p))
    terms = [
        BoundTerm("row_variance", 3 * t * math.log(16 * t), row_var),
        BoundTerm("column_variance", 3 * t * math.log(16 * t), col_var),
        BoundTerm("diagonal", p * math.log(8 * t) + log_moment, diag),
    ]
    config = {"dist": dist.to_dict(), "t": t, "m": len(Cs), "moment_mode": moment_mode}
    return BoundReport("rosenthal", t, "moment_power", p, terms, config)


# --- bounded multilinear recursions ----------------------------------------


def quadratic_bound(F: PolyMatrix, dist: DistributionSpec, t: int) -> BoundReport:
    """Root-normalized bound ``2(32t)^2 sum_{a+b+c=2} L^c ||F_{a,b,c}||_{4t}``."""
    t = check_t(t)
    _require_bounded(dist, "quadratic_bound")
    if not F.is_zero and not (F.is_homogeneous and F.degree == 2 and F.is_multilinear):
        raise InputError("quadratic_bound needs a homogeneous multilinear polynomial of degree 2")
    p = 4 * t
    base = math.log(2) + 2 * math.log(32 * t)
    terms = []
    for a, b, c in _abc_triples(2):
        B = build_block(F, a, b, c) if not F.is_zero else None
        lsp = block_log_schatten_power(B, p) if B is not None else -math.inf
        terms.append(BoundTerm(f"({a},{b},{c})", base + c * _log_L(dist), lsp / p if lsp != -math.inf else -math.inf))
    config = {"dist": dist.to_dict(), "t": t, "degree": 2, "n": F.n, "dims": list(F.dims)}
    return BoundReport("quadratic", t, "moment_root", p, terms, config)


def _homogeneous_terms(F: PolyMatrix, d: int, dist: DistributionSpec, t: int, extra_log: float, prefix: str = ""):
    p = 4 * t
    base = p * d * math.log(48 * d * t) + extra_log
    terms = []
    for a, b, c in _abc_triples(d):
        lsp = block_log_schatten_power(build_block(F, a, b, c), p) if not F.is_zero else -math.inf
        terms.append(BoundTerm(f"{prefix}({a},{b},{c})", base + p * c * _log_L(dist), lsp))
    return terms


def homogeneous_multilinear_bound(F: PolyMatrix, dist: DistributionSpec, t: int, degree: int | None = None) -> BoundReport:
    """``sum_{a+b+c=d} (48dt)^{4dt} L^{4ct} ||F_{a,b,c}||_{4t}^{4t}``.

    ``degree`` is only needed for the zero polynomial, whose degree is not
    recorded in its terms.
    """
    t = check_t(t)
    _require_bounded(dist, "homogeneous_multilinear_bound")
    if not F.is_multilinear or not F.is_homogeneous:
        raise InputError("homogeneous_multilinear_bound needs a homogeneous multilinear polynomial")
    d = degree if degree is not None else F.degree
    if d < 1:
        raise InputError("homogeneous_multilinear_bound needs degree >= 1")
    if not F.is_zero and d != F.degree:
        raise InputError(f"degree={d} does not match the polynomial's degree {F.degree}")
    terms = _homogeneous_terms(F, d, dist, t, 0.0)
    config = {"dist": dist.to_dict(), "t": t, "degree": d, "n": F.n, "dims": list(F.dims)}
    return BoundReport("homogeneous_multilinear", t, "moment_power", 4 * t, terms, config)


def multilinear_bound(F: PolyMatrix, dist: DistributionSpec, t: int) -> BoundReport:
    """Sum over homogeneous parts with the extra ``D^{4t}`` factor.

    The constant part cancels in ``F - EF`` and contributes nothing.
    """
    t = check_t(t)
    _require_bounded(dist, "multilinear_bound")
    if not F.is_multilinear:
        raise InputError("multilinear_bound needs a multilinear polynomial")
    D = F.degree
    terms, subs = [], []
    for d in range(1, D + 1):
        part = homogeneous_part(F, d)
        if part.is_zero:
            continue
        terms += _homogeneous_terms(part, d, dist, t, 4 * t * math.log(D), prefix=f"d={d}:")
        subs.append(homogeneous_multilinear_bound(part, dist, t))
    config = {"dist": dist.to_dict(), "t": t, "max_degree": D, "n": F.n, "dims": list(F.dims)}
    return BoundReport("multilinear", t, "moment_power", 4 * t, terms, config, subreports=subs)


# --- Gaussian recursion -----------------------------------------------------


def gaussian_bound(P: PolyMatrix, t: int) -> BoundReport:
    """``(2^d sqrt(2) t)^{2t} sum_{1<=a+b<=d} ||E P_{a,b}||_{2t}^{2t}`` for Gaussian inputs."""
    t = check_t(t)
    if not P.is_homogeneous:
        raise InputError("gaussian_bound needs a homogeneous polynomial")
    d = P.degree
    p = 2 * t
    base = p * (d * math.log(2) + 0.5 * math.log(2) + math.log(t))
    g = gaussian()
    terms = []
    for a, b in _ab_pairs(d):
        EB = expected_block(build_gaussian_block(P, a, b), g)
        terms.append(BoundTerm(f"({a},{b})", base, block_log_schatten_power(EB, p)))
    config = {"dist": g.to_dict(), "t": t, "degree": d, "n": P.n, "dims": list(P.dims)}
    return BoundReport("gaussian", t, "moment_power", p, terms, config)


# --- trace inequality and tails --------------------------------------------


@dataclass(frozen=True)
class TraceCheck:
    lhs: float
    rhs: float
    holds: bool


def trace_inequality_check(matrices, r: float) -> TraceCheck:
    """``tr|sum A_i|^r <= m^{r-1} sum_i tr|A_i|^r`` with ``|A| = (A^T A)^{1/2}``."""
    if r < 1:
        raise InputError("r must be >= 1")
    mats = [linalg.as_matrix(A) for A in matrices]
    if not mats:
        raise InputError("need at least one matrix")
    shape = mats[0].shape
    if shape[0] != shape[1] or any(A.shape != shape for A in mats):
        raise InputError("trace inequality needs square matrices of one size")
    m = len(mats)
    lhs = linalg.trace_abs_power(sum(mats[1:], mats[0].copy()), r)
    rhs = m ** (r - 1) * math.fsum(linalg.trace_abs_power(A, r) for A in mats)
    return TraceCheck(lhs, rhs, lhs <= rhs * (1 + 1e-9))


def tail_from_log_moment(log_moment_bound: float, power: int, threshold: float) -> float:
    """Markov: ``min(1, exp(log_moment_bound) / threshold^power)``."""
    if not threshold > 0:
        raise InputError("threshold must be positive")
    if log_moment_bound == -math.inf:
        return 0.0
    x = log_moment_bound - power * math.log(threshold)
    return 1.0 if x >= 0 else math.exp(x)


def tail_from_moment(moment_bound: float, power: int, threshold: float) -> float:
    if moment_bound < 0:
        raise InputError("moment bound must be nonnegative")
    return tail_from_log_moment(_safe_log(moment_bound), power, threshold)


def all_triples(d: int) -> list[tuple[int, int, int]]:
    return _abc_triples(d)


def all_pairs(d: int) -> list[tuple[int, int]]:
    return _ab_pairs(d)


__all__ = [
    "BoundReport",
    "BoundTerm",
    "TraceCheck",
    "all_pairs",
    "all_triples",
    "gaussian_bound",
    "homogeneous_multilinear_bound",
    "log_sum",
    "mantissa_exponent",
    "multilinear_bound",
    "quadratic_bound",
    "rosenthal_rhs",
    "tail_from_log_moment",
    "tail_from_moment",
    "trace_inequality_check",
]
