"""Seeded samplers and the Monte Carlo moment engine.

Randomness is counter-based: chunk ``k`` of stream ``s`` under seed ``seed``
draws from ``default_rng([seed, s, k])`` and always holds the same sample
indices, so results do not depend on how many worker threads ran the
chunks.  Per-sample statistics are carried as logs (``log ||.||^power``)
and reduced with ``math.fsum`` after rescaling, which is exact up to the
final rounding and therefore order-independent.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .errors import InputError, ResourceCapError
from .polymatrix import (
    DistributionSpec,
    PolyMatrix,
    evaluate_batch,
    evaluate_decoupled_batch,
    expectation,
)

CHUNK_SIZE = 512
MAX_MATRIX_ENTRIES = 4_000_000
THREADS_ENV = "POLYMAT_THREADS"
_SEED_LIMIT = 2**64


def worker_count(threads: int | None = None) -> int:
    """Explicit ``threads``, else ``$POLYMAT_THREADS``, else the CPU count (max 8)."""
    if threads is None:
        env = os.environ.get(THREADS_ENV)
        if env:
            try:
                threads = int(env)
            except ValueError:
                raise InputError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
        else:
            threads = min(os.cpu_count() or 1, 8)
    if threads < 1:
        raise InputError("thread count must be >= 1")
    return threads


def _check_seed(seed) -> int:
    if isinstance(seed, bool) or int(seed) != seed or not 0 <= seed < _SEED_LIMIT:
        raise InputError(f"seed must be an integer in [0, 2^64), got {seed!r}")
    return int(seed)


@dataclass(frozen=True)
class SampleConfig:
    dist: DistributionSpec
    n: int
    samples: int
    seed: int
    t: int = 2
    stream: int = 0
    chunk_size: int = CHUNK_SIZE

    def __post_init__(self):
        _check_seed(self.seed)
        if self.samples < 1:
            raise InputError("samples must be >= 1")
        if self.n < 0:
            raise InputError("n must be nonnegative")
        if self.t < 1:
            raise InputError("t must be >= 1")
        if self.stream < 0 or self.chunk_size < 1:
            raise InputError("stream must be >= 0 and chunk_size >= 1")

    def to_dict(self) -> dict:
        return {
            "dist": self.dist.to_dict(),
            "n": self.n,
            "samples": self.samples,
            "seed": self.seed,
            "t": self.t,
            "stream": self.stream,
            "chunk_size": self.chunk_size,
        }


@dataclass(frozen=True)
class MomentEstimate:
    mean: float
    stderr: float
    N: int
    quantity: str
    log_mean: float = field(default=-math.inf)

    def log_upper(self, k: float = 4.0) -> float:
        """``log(mean + k * stderr)``."""
        if self.mean == 0 and self.stderr == 0:
            return -math.inf
        if math.isfinite(self.mean) and math.isfinite(self.stderr):
            return math.log(self.mean + k * self.stderr)
        return self.log_mean

    def to_dict(self) -> dict:
        return {
            "quantity": self.quantity,
            "mean": self.mean if math.isfinite(self.mean) else None,
            "stderr": self.stderr if math.isfinite(self.stderr) else None,
            "log_mean": self.log_mean if math.isfinite(self.log_mean) else None,
            "N": self.N,
        }


def derive_seed(*parts: int) -> int:
    """Deterministic 64-bit seed from a tuple of nonnegative integers."""
    return int(np.random.SeedSequence(list(parts)).generate_state(1, np.uint64)[0])


def chunk_rng(seed: int, stream: int, chunk: int) -> np.random.Generator:
    return np.random.default_rng([_check_seed(seed), stream, chunk])


def sample_vector(dist: DistributionSpec, n: int, seed: int, stream_index: int = 0) -> np.ndarray:
    """``n`` independent draws, reproducible from ``(seed, stream_index)``."""
    rng = np.random.default_rng([_check_seed(seed), stream_index, 0x5645])
    return dist.sample(rng, n)


def run_chunks(
    fn: Callable[[np.random.Generator, int], np.ndarray],
    samples: int,
    seed: int,
    stream: int = 0,
    chunk_size: int = CHUNK_SIZE,
    threads: int | None = None,
) -> np.ndarray:
    """Apply ``fn(rng, m)`` to every chunk and concatenate in chunk order."""
    sizes = [min(chunk_size, samples - start) for start in range(0, samples, chunk_size)]
    workers = min(worker_count(threads), len(sizes))

    def job(k):
        return np.asarray(fn(chunk_rng(seed, stream, k), sizes[k]), dtype=float)

    if workers <= 1:
        parts = [job(k) for k in range(len(sizes))]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(job, range(len(sizes))))
    return np.concatenate(parts)


def summarize_logs(log_values: np.ndarray, quantity: str) -> MomentEstimate:
    """Mean and standard error of ``exp(log_values)`` without overflow."""
    lv = np.asarray(log_values, dtype=float)
    N = lv.size
    if N == 0:
        raise InputError("no samples")
    top = float(np.max(lv))
    if top == -math.inf:
        return MomentEstimate(0.0, 0.0, N, quantity, -math.inf)
    scaled = np.exp(lv - top)
    m = math.fsum(scaled) / N
    var = math.fsum((scaled - m) ** 2) / (N - 1) if N > 1 else 0.0
    log_mean = top + math.log(m)
    if top < 650:
        scale = math.exp(top)
        return MomentEstimate(m * scale, math.sqrt(var / N) * scale, N, quantity, log_mean)
    return MomentEstimate(math.inf, math.inf, N, quantity, log_mean)


def summarize(values: np.ndarray, quantity: str) -> MomentEstimate:
    v = np.asarray(values, dtype=float)
    if np.any(v < 0):
        raise InputError("summarize expects nonnegative values; use summarize_logs otherwise")
    with np.errstate(divide="ignore"):
        return summarize_logs(np.log(v), quantity)


def batch_log_schatten(stack: np.ndarray, p: int) -> np.ndarray:
    """``log ||M||_p^p`` for every matrix of a ``(N, d1, d2)`` stack."""
    s = np.linalg.svd(stack, compute_uv=False)
    top = s[:, 0]
    out = np.full(top.shape, -math.inf)
    nz = top > 0
    if np.any(nz):
        ratio = s[nz] / top[nz, None]
        out[nz] = p * np.log(top[nz]) + np.log(np.sum(ratio**p, axis=1))
    return out


def _check_size(dims, chunk_size):
    entries = dims[0] * dims[1]
    if entries > MAX_MATRIX_ENTRIES:
        raise ResourceCapError(f"matrix of {dims[0]} x {dims[1]} exceeds the sampling cap", entries, MAX_MATRIX_ENTRIES)


def _index_and_power(cfg: SampleConfig, schatten: int | None, power: float | None) -> tuple[int, float]:
    p = 2 * cfg.t if schatten is None else int(schatten)
    if p < 2 or p % 2:
        raise InputError(f"Schatten index must be an even integer >= 2, got {schatten!r}")
    return p, float(p if power is None else power)


def _label(p: int, power: float, centered: bool) -> str:
    inner = "F(x) - EF" if centered else "F(x)"
    pw = int(power) if float(power).is_integer() else power
    return f"E||{inner}||_{p}^{pw}"


def estimate_statistic(
    log_stat: Callable[[np.random.Generator, int], np.ndarray],
    samples: int,
    seed: int,
    quantity: str,
    stream: int = 0,
    chunk_size: int = CHUNK_SIZE,
    threads: int | None = None,
) -> MomentEstimate:
    """Generic estimator: ``log_stat(rng, m)`` returns ``m`` per-sample logs."""
    lv = run_chunks(log_stat, samples, seed, stream, chunk_size, threads)
    return summarize_logs(lv, quantity)


def estimate_moment(
    F: PolyMatrix,
    cfg: SampleConfig,
    schatten: int | None = None,
    power: float | None = None,
    centered: bool = True,
    threads: int | None = None,
) -> MomentEstimate:
    """Estimate ``E||F(x) - EF||_p^power`` (``p`` defaults to ``2t``, ``power`` to ``p``)."""
    if cfg.n != F.n:
        raise InputError(f"config n = {cfg.n} does not match the polynomial's n = {F.n}")
    _check_size(F.dims, cfg.chunk_size)
    p, pw = _index_and_power(cfg, schatten, power)
    EF = expectation(F, cfg.dist) if centered else np.zeros(F.dims)

    def stat(rng, m):
        X = cfg.dist.sample(rng, (m, F.n))
        vals = evaluate_batch(F, X) - EF
        return (pw / p) * batch_log_schatten(vals, p)

    return estimate_statistic(stat, cfg.samples, cfg.seed, _label(p, pw, centered), cfg.stream, cfg.chunk_size, threads)


def estimate_decoupled_moment(
    F: PolyMatrix,
    cfg: SampleConfig,
    schatten: int | None = None,
    power: float | None = None,
    threads: int | None = None,
) -> MomentEstimate:
    """Estimate ``E||F(x^(1), ..., x^(d))||_p^power`` with independent copies."""
    if cfg.n != F.n:
        raise InputError(f"config n = {cfg.n} does not match the polynomial's n = {F.n}")
    _check_size(F.dims, cfg.chunk_size)
    p, pw = _index_and_power(cfg, schatten, power)
    d = F.degree

    def stat(rng, m):
        copies = cfg.dist.sample(rng, (m, d, F.n))
        return (pw / p) * batch_log_schatten(evaluate_decoupled_batch(F, copies), p)

    pw_label = int(pw) if pw.is_integer() else pw
    return estimate_statistic(
        stat, cfg.samples, cfg.seed, f"E||F(x^(1..{d}))||_{p}^{pw_label}", cfg.stream, cfg.chunk_size, threads
    )


@dataclass(frozen=True)
class ComparisonResult:
    """``lhs`` versus ``constant * rhs`` with a combined 4-stderr margin."""

    lhs: MomentEstimate
    rhs: MomentEstimate
    constant: float
    mode: str
    holds: bool
    margin: float

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "lhs": self.lhs.to_dict(),
            "rhs": self.rhs.to_dict(),
            "constant": self.constant,
            "margin": self.margin,
            "holds": self.holds,
        }


def compare_scaled(lhs: MomentEstimate, rhs: MomentEstimate, constant: float, mode: str, k: float = 4.0) -> ComparisonResult:
    """Holds when ``lhs - C rhs <= k sqrt(se_l^2 + C^2 se_r^2)``."""
    margin = k * math.hypot(lhs.stderr, constant * rhs.stderr)
    gap = lhs.mean - constant * rhs.mean
    return ComparisonResult(lhs, rhs, constant, mode, bool(gap <= margin), margin)


DECOUPLING_MODES = ("norm", "power")


def decoupling_ratio(F: PolyMatrix, cfg: SampleConfig, mode: str = "norm", threads: int | None = None) -> ComparisonResult:
    """Empirical decoupling check with constant ``d^d``.

    ``mode="norm"`` compares first moments ``E||.||_{2t}``; ``mode="power"``
    compares ``E||.||_{4t}^{4t}`` against ``(d^d)^{4t}`` times the decoupled
    moment.  The two sides use independent streams.
    """
    if not (F.is_multilinear and F.is_homogeneous) or F.degree < 1:
        raise InputError("decoupling needs a homogeneous multilinear polynomial of degree >= 1")
    d = F.degree
    if mode == "norm":
        p, pw, const = 2 * cfg.t, 1.0, float(d**d)
    elif mode == "power":
        p = 4 * cfg.t
        pw, const = float(p), float(d ** (d * p))
    else:
        raise InputError(f"mode must be one of {DECOUPLING_MODES}")
    lhs = estimate_moment(F, cfg, p, pw, centered=False, threads=threads)
    rhs = estimate_decoupled_moment(F, replace(cfg, stream=cfg.stream + 1), p, pw, threads=threads)
    return compare_scaled(lhs, rhs, const, mode)


@dataclass(frozen=True)
class DominanceResult:
    """Empirical moment against a bound (both as ``E||.||_p^p``)."""

    estimate: MomentEstimate
    log_bound: float
    holds: bool

    def to_dict(self) -> dict:
        return {
            "estimate": self.estimate.to_dict(),
            "log_bound": self.log_bound if math.isfinite(self.log_bound) else None,
            "log_estimate_plus_4se": _fin(self.estimate.log_upper()),
            "holds": self.holds,
        }


def _fin(x):
    return x if math.isfinite(x) else None


def dominated(est: MomentEstimate, log_bound: float, k: float = 4.0) -> DominanceResult:
    """``mean + k stderr <= bound``, compared in log space."""
    return DominanceResult(est, log_bound, bool(est.log_upper(k) <= log_bound))


def rosenthal_empirical(coefficients, dist: DistributionSpec, t: int, cfg: SampleConfig, threads: int | None = None):
    """``E||sum_k C_k x_k||_{4t}^{4t}`` against :func:`bounds.rosenthal_rhs`.

    ``cfg.n`` is replaced by the number of coefficients.  Returns
    ``(lhs, rhs_report, holds)`` with a 4-stderr margin on the left side.
    """
    from .bounds import rosenthal_rhs

    Cs = [np.asarray(C, dtype=float) for C in coefficients]
    rhs = rosenthal_rhs(Cs, dist, t)
    if not Cs:
        est = MomentEstimate(0.0, 0.0, cfg.samples, f"E||sum C_k x_k||_{4 * t}^{4 * t}", -math.inf)
        return est, rhs, True
    F = PolyMatrix(len(Cs), Cs[0].shape, {(k + 1,): C for k, C in enumerate(Cs)})
    run_cfg = replace(cfg, n=len(Cs), dist=dist, t=t)
    est = estimate_moment(F, run_cfg, 4 * t, centered=False, threads=threads)
    est = replace(est, quantity=f"E||sum C_k x_k||_{4 * t}^{4 * t}")
    return est, rhs, dominated(est, rhs.log_total).holds
