"""Command-line front end.

Exit codes: 0 success, 1 a requested check failed, 2 invalid input,
3 a resource cap was hit.  Reports go to ``--out`` (or stdout) and always
embed the resolved configuration; diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

from . import bounds, graphs, melon, suite
from .errors import InputError, ResourceCapError
from .polymatrix import DistributionSpec, PolyMatrix, load_polymatrix
from .sampling import SampleConfig, decoupling_ratio, dominated, estimate_moment, rosenthal_empirical, worker_count

BOUND_THEOREMS = ("auto", "quadratic", "homogeneous_multilinear", "multilinear", "gaussian")


class CheckFailed(Exception):
    """Carries a finished report whose requested check did not hold."""

    def __init__(self, payload):
        super().__init__("check failed")
        self.payload = payload


def _json(obj) -> str:
    return json.dumps(suite._clean(obj), indent=2, sort_keys=True) + "\n"


def _rows_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow(["" if v is None or (isinstance(v, float) and not math.isfinite(v)) else v for v in r])
    return buf.getvalue()


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _seed(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("seed must be nonnegative")
    return v


def _check_bound_t(t: int) -> int:
    if t < 2:
        raise InputError("t must be >= 2 for bounds")
    return t


def _dist(args) -> DistributionSpec:
    text = args.dist
    if getattr(args, "p", None) is not None and text == "pbiased":
        text = f"pbiased:{args.p}"
    return DistributionSpec.parse(text)


def _load(args) -> PolyMatrix:
    return load_polymatrix(args.spec, max_degree=args.max_degree, max_n=args.max_n)


def _poly_config(args, F: PolyMatrix, dist: DistributionSpec) -> dict:
    return {"spec": args.spec, "n": F.n, "dims": list(F.dims), "degree": F.degree, "dist": dist.to_dict(), "t": args.t}


# --- commands ---------------------------------------------------------------


def cmd_bound(args):
    F = _load(args)
    dist = _dist(args)
    t = _check_bound_t(args.t)
    theorem = args.theorem
    if theorem == "auto":
        if dist.kind == "gaussian" or not F.multilinear:
            theorem = "gaussian"
        else:
            theorem = "homogeneous_multilinear" if F.is_homogeneous else "multilinear"
    if theorem == "gaussian":
        if dist.kind != "gaussian":
            raise InputError("the Gaussian recursion needs --dist gaussian")
        rep = bounds.gaussian_bound(F, t)
    elif theorem == "quadratic":
        rep = bounds.quadratic_bound(F, dist, t)
    elif theorem == "homogeneous_multilinear":
        rep = bounds.homogeneous_multilinear_bound(F, dist, t)
    else:
        rep = bounds.multilinear_bound(F, dist, t)
    payload = {"command": "bound", "config": {**_poly_config(args, F, dist), "theorem": theorem}, "report": rep.to_dict()}
    return payload, rep.to_csv()


def _estimate_csv(name, est) -> str:
    d = est.to_dict()
    return _rows_csv(["quantity", "mean", "stderr", "N", "log_mean"], [[name or d["quantity"], d["mean"], d["stderr"], d["N"], d["log_mean"]]])


def cmd_mc(args):
    F = _load(args)
    dist = _dist(args)
    cfg = SampleConfig(dist, F.n, args.samples, args.seed, t=args.t)
    est = estimate_moment(F, cfg, args.schatten, centered=not args.raw, threads=args.threads)
    config = {**_poly_config(args, F, dist), "sample": cfg.to_dict(), "schatten": args.schatten or 2 * args.t, "centered": not args.raw}
    payload = {"command": "mc", "config": config, "estimate": est.to_dict()}
    return payload, _estimate_csv(None, est)


def _comparison_csv(res) -> str:
    return _rows_csv(
        ["mode", "lhs", "lhs_stderr", "rhs", "rhs_stderr", "constant", "holds"],
        [[res.mode, res.lhs.mean, res.lhs.stderr, res.rhs.mean, res.rhs.stderr, res.constant, res.holds]],
    )


def cmd_decouple(args):
    dist = _dist(args)
    if args.shape:
        shape = graphs.load_shape(args.shape)
        if args.n is None:
            raise InputError("--n is required with --shape")
        if dist.kind != "pbiased":
            raise InputError("graph decoupling samples edge variables; use --dist pbiased --p P")
        cfg = SampleConfig(dist, graphs.num_pairs(args.n), args.samples, args.seed, t=args.t, chunk_size=graphs.GRAPH_CHUNK)
        res = graphs.graph_decoupling_ratio(shape, args.n, cfg, threads=args.threads)
        config = {"shape": shape.to_dict(), "shape_file": args.shape, "n": args.n, "sample": cfg.to_dict()}
    else:
        if not args.spec:
            raise InputError("decouple needs --spec or --shape")
        F = _load(args)
        cfg = SampleConfig(dist, F.n, args.samples, args.seed, t=args.t)
        res = decoupling_ratio(F, cfg, args.mode, threads=args.threads)
        config = {**_poly_config(args, F, dist), "sample": cfg.to_dict(), "mode": args.mode}
    payload = {"command": "decouple", "config": config, "comparison": res.to_dict()}
    if args.check and not res.holds:
        raise CheckFailed((payload, _comparison_csv(res)))
    return payload, _comparison_csv(res)


def cmd_rosenthal(args):
    F = _load(args)
    if F.degree != 1 or not F.is_homogeneous:
        raise InputError("rosenthal needs a homogeneous linear spec (every term has one variable)")
    dist = _dist(args)
    t = _check_bound_t(args.t)
    coefs = [F.terms.get((i,), None) for i in range(1, F.n + 1)]
    coefs = [c for c in coefs if c is not None]
    rep = bounds.rosenthal_rhs(coefs, dist, t, moment_mode=args.moment_mode)
    payload = {"command": "rosenthal", "config": {**_poly_config(args, F, dist), "moment_mode": args.moment_mode}, "report": rep.to_dict()}
    if args.check:
        cfg = SampleConfig(dist, len(coefs), args.samples, args.seed, t=t)
        est, _, holds = rosenthal_empirical(coefs, dist, t, cfg, threads=args.threads)
        payload["config"]["sample"] = cfg.to_dict()
        payload["estimate"] = est.to_dict()
        payload["holds"] = holds
        if not holds:
            raise CheckFailed((payload, rep.to_csv()))
    return payload, rep.to_csv()


def cmd_shape(args):
    shape = graphs.load_shape(args.shape)
    if args.n is None:
        raise InputError("--n is required")
    p = 0.5 if args.p is None else args.p
    t = _check_bound_t(args.t)
    rep = graphs.shape_bound(shape, args.n, p, t, C=args.C)
    payload = {
        "command": "shape",
        "config": {"shape_file": args.shape, "shape": shape.to_dict(), "n": args.n, "p": p, "t": t, "C": args.C},
        "warnings": shape.warnings,
        "report": rep.to_dict(),
    }
    if args.eps is not None:
        payload["tail"] = graphs.shape_tail_bound(shape, args.n, p, args.eps, C=args.C).to_dict()
    if args.check:
        cfg = SampleConfig(DistributionSpec("pbiased", p), graphs.num_pairs(args.n), args.samples, args.seed, t=t, chunk_size=graphs.GRAPH_CHUNK)
        est = graphs.estimate_graph_moment(shape, args.n, cfg, threads=args.threads)
        dom = dominated(est, rep.log_total)
        payload["config"]["sample"] = cfg.to_dict()
        payload["dominance"] = dom.to_dict()
        if not dom.holds:
            raise CheckFailed((payload, rep.to_csv()))
    return payload, rep.to_csv()


def cmd_melon(args):
    if args.n is None:
        raise InputError("--n is required")
    t = _check_bound_t(args.t)
    rep = melon.melon_bound(args.n, t, mode=args.mode)
    payload = {"command": "melon", "config": {"n": args.n, "t": t, "mode": args.mode}, "report": rep.to_dict()}
    if args.check:
        est = melon.melon_moment(args.n, t, args.samples, args.seed, threads=args.threads)
        dom = dominated(est, rep.log_total)
        payload["config"].update(samples=args.samples, seed=args.seed)
        payload["dominance"] = dom.to_dict()
        if not dom.holds:
            raise CheckFailed((payload, rep.to_csv()))
    return payload, rep.to_csv()


def cmd_suite(args):
    only = None
    if args.only:
        only = [int(v) for v in args.only.split(",")]
        unknown = [v for v in only if v not in suite.CRITERIA]
        if unknown:
            raise InputError(f"unknown criteria {unknown}; valid ids are {sorted(suite.CRITERIA)}")
    report = suite.run_suite(args.seed, threads=args.threads, only=only)
    rows = [[c["id"], c["name"], c["passed"], c["checks"]] for c in report["criteria"]]
    print(suite.summary_table(report), file=sys.stderr)
    csv_text = _rows_csv(["id", "name", "passed", "checks"], rows)
    if report["summary"]["failed"]:
        raise CheckFailed((report, csv_text))
    return report, csv_text


COMMANDS = {
    "bound": cmd_bound,
    "mc": cmd_mc,
    "decouple": cmd_decouple,
    "rosenthal": cmd_rosenthal,
    "shape": cmd_shape,
    "melon": cmd_melon,
    "suite": cmd_suite,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="polymat", description="Moment bounds and Monte Carlo checks for random polynomial matrices.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, *, spec=False, shape=False, sampling=True, t_default=2):
        p.add_argument("--t", type=_positive_int, default=t_default, help="moment parameter (Schatten index 2t or 4t)")
        p.add_argument("--out", help="write the report here instead of stdout")
        p.add_argument("--format", choices=("json", "csv"), default="json")
        if spec:
            p.add_argument("--spec", help="polynomial-matrix JSON document")
            p.add_argument("--dist", default="rademacher", help="rademacher, gaussian, pbiased or pbiased:P")
            p.add_argument("--p", type=float, help="bias for --dist pbiased")
            p.add_argument("--max-degree", type=_positive_int, default=6)
            p.add_argument("--max-n", type=_positive_int, default=64)
        if shape:
            p.add_argument("--shape", help="shape JSON document")
            p.add_argument("--n", type=_positive_int)
        if sampling:
            p.add_argument("--samples", type=_positive_int, default=10_000)
            p.add_argument("--seed", type=_seed, default=0)
            p.add_argument("--threads", type=_positive_int, help="worker threads (default: POLYMAT_THREADS or the CPU count)")

    p = sub.add_parser("bound", help="recursive moment bound for a polynomial matrix")
    common(p, spec=True, sampling=False)
    p.add_argument("--theorem", choices=BOUND_THEOREMS, default="auto")

    p = sub.add_parser("mc", help="Monte Carlo Schatten moment of a polynomial matrix")
    common(p, spec=True, t_default=1)
    p.add_argument("--schatten", type=_positive_int, help="Schatten index (default 2t)")
    p.add_argument("--raw", action="store_true", help="do not subtract the expectation")

    p = sub.add_parser("decouple", help="compare a polynomial or graph matrix with its decoupled version")
    common(p, spec=True, shape=True)
    p.add_argument("--mode", choices=("norm", "power"), default="norm")
    p.add_argument("--check", action="store_true", help="exit 1 if the inequality fails")

    p = sub.add_parser("rosenthal", help="matrix Rosenthal bound for a linear series")
    common(p, spec=True)
    p.add_argument("--moment-mode", choices=("exact", "L"), default="exact")
    p.add_argument("--check", action="store_true", help="add a Monte Carlo estimate and exit 1 if it is not dominated")

    p = sub.add_parser("shape", help="moment bound for a graph matrix shape")
    common(p, shape=True)
    p.add_argument("--p", type=float, help="edge probability (default 0.5)")
    p.add_argument("--C", type=float, default=3.0, help="absolute constant in the bound")
    p.add_argument("--eps", type=float, help="also report the tail bound at failure probability eps")
    p.add_argument("--check", action="store_true", help="add a Monte Carlo estimate and exit 1 if it is not dominated")

    p = sub.add_parser("melon", help="melon network moment bound")
    common(p)
    p.add_argument("--n", type=_positive_int)
    p.add_argument("--mode", choices=melon.BOUND_MODES, default="closed_form")
    p.add_argument("--check", action="store_true", help="add a Monte Carlo estimate and exit 1 if it is not dominated")

    p = sub.add_parser("suite", help="run the acceptance corpus")
    p.add_argument("--seed", type=_seed, default=suite.DEFAULT_SEED)
    p.add_argument("--threads", type=_positive_int)
    p.add_argument("--only", help="comma-separated criterion ids")
    p.add_argument("--out")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    return parser


def _emit(args, payload, csv_text):
    text = csv_text if args.format == "csv" else _json(payload)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "spec", None) is None and args.command in ("bound", "mc", "rosenthal"):
        print("error: --spec is required", file=sys.stderr)
        return 2
    try:
        if getattr(args, "threads", None) is None:
            worker_count()
        payload, csv_text = COMMANDS[args.command](args)
    except CheckFailed as exc:
        payload, csv_text = exc.payload
        _emit(args, payload, csv_text)
        print("check failed", file=sys.stderr)
        return 1
    except ResourceCapError as exc:
        print(f"resource cap: {exc}", file=sys.stderr)
        return 3
    except (InputError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    _emit(args, payload, csv_text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
