"""The melon tensor network ``M[i, j] = <T_i, T_j>`` over first-mode slices.

``T`` is an ``n x n x n`` tensor of independent standard Gaussians and ``M``
is a degree-2 Gaussian polynomial matrix in its ``n^3`` entries.  Entry
``T[i, k, l]`` (0-based) is polynomial variable ``1 + i n^2 + k n + l``.

The second derivatives are ``B_{ijkl} = d/dT_{ikl} d/dT_{jkl} M``, equal to
``2 E_ii`` when ``i = j`` and ``E_ij + E_ji`` otherwise.  Summing
``B^T B`` over all ordered ``(i, j, k, l)`` gives ``(2n^3 + 2n^2) I``, so
``||M_{0,2}||_{2t}^{2t} = n (2n^3 + 2n^2)^t`` exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .blocks import DerivativeBlock, block_log_schatten_power
from .bounds import BoundReport, BoundTerm, check_t
from .errors import InputError, ResourceCapError
from .polymatrix import PolyMatrix
from .sampling import CHUNK_SIZE, MomentEstimate, batch_log_schatten, estimate_statistic

MAX_BLOCK_N = 12
BOUND_MODES = ("closed_form", "exact")


def variable(i: int, k: int, l: int, n: int) -> int:
    """1-based polynomial variable of the 0-based tensor entry ``T[i, k, l]``."""
    return 1 + i * n * n + k * n + l


@dataclass(frozen=True, eq=False)
class MelonInstance:
    n: int
    T: np.ndarray
    M: np.ndarray

    @property
    def expected(self) -> np.ndarray:
        return self.n**2 * np.eye(self.n)


def _symmetric_gram(flat: np.ndarray) -> np.ndarray:
    """``flat @ flat^T`` over the last two axes, symmetrized bit-exactly."""
    M = flat @ np.swapaxes(flat, -1, -2)
    upper = np.triu(M)
    return upper + np.swapaxes(np.triu(M, 1), -1, -2)


def melon_from_tensor(T) -> MelonInstance:
    T = np.asarray(T, dtype=float)
    if T.ndim != 3 or len(set(T.shape)) != 1:
        raise InputError(f"expected a cubic order-3 tensor, got shape {T.shape}")
    n = T.shape[0]
    return MelonInstance(n, T, _symmetric_gram(T.reshape(n, n * n)))


def build_melon(n: int, seed: int) -> MelonInstance:
    if n < 2:
        raise InputError("melon needs n >= 2")
    rng = np.random.default_rng([seed, 0x6D65])
    return melon_from_tensor(rng.standard_normal((n, n, n)))


def melon_polymatrix(n: int) -> PolyMatrix:
    """``M`` as a (non-multilinear) Gaussian polynomial in the ``n^3`` tensor entries."""
    if n < 1:
        raise InputError("n must be positive")
    terms = {}
    for k in range(n):
        for l in range(n):
            for i in range(n):
                for j in range(i, n):
                    C = np.zeros((n, n))
                    C[i, j] = C[j, i] = 1.0
                    terms[(variable(i, k, l, n), variable(j, k, l, n))] = C
    return PolyMatrix(n**3, (n, n), terms, multilinear=False)


def second_derivative(i: int, j: int, n: int) -> np.ndarray:
    """``B_{ijkl}``; independent of ``k, l``."""
    B = np.zeros((n, n))
    if i == j:
        B[i, i] = 2.0
    else:
        B[i, j] = B[j, i] = 1.0
    return B


def melon_blocks(n: int) -> dict[str, DerivativeBlock]:
    """Exact ``M_{2,0}``, ``M_{0,2}`` and ``M_{1,1}`` built from ``B_{ijkl}``."""
    if n > MAX_BLOCK_N:
        raise ResourceCapError(f"melon blocks are built for n <= {MAX_BLOCK_N}", n, MAX_BLOCK_N)
    B = {(i, j): second_derivative(i, j, n) for i in range(n) for j in range(n)}
    m20, m02, m11 = {}, {}, {}
    for k in range(n):
        for l in range(n):
            for i in range(n):
                vi = variable(i, k, l, n)
                for j in range(n):
                    vj = variable(j, k, l, n)
                    m20[((vi, vj), ())] = B[i, j]
                    m02[((), (vi, vj))] = B[i, j]
                    m11[((vi,), (vj,))] = B[i, j]
    N = n**3
    return {
        "M20": DerivativeBlock((n, n), N, 2, 0, 0, m20, ("a", "a")),
        "M02": DerivativeBlock((n, n), N, 0, 2, 0, m02, ("b", "b")),
        "M11": DerivativeBlock((n, n), N, 1, 1, 0, m11, ("a", "b")),
    }


def log_m02_closed_form(n: int, t: int) -> float:
    """``log(n (2n^3 + 2n^2)^t)``, the exact ``||M_{0,2}||_{2t}^{2t}``."""
    return math.log(n) + t * math.log(2 * n**3 + 2 * n**2)


def m02_as_printed(n: int, t: int) -> float:
    """``n (2n^2 + n^3)^t``: a common undercount of the same quantity, kept for comparison.

    It sits below the exact value because the diagonal derivatives
    contribute ``4 E_ii`` to the Gram sum, not ``2 E_ii``.
    """
    return n * (2 * n**2 + n**3) ** t


def log_m11_frobenius(n: int, t: int) -> float:
    """``log(n^2 (4n + 2n^2)^t)``: Frobenius bound on each of the ``n^2`` diagonal blocks."""
    return 2 * math.log(n) + t * math.log(4 * n + 2 * n**2)


def melon_bound(n: int, t: int, mode: str = "closed_form") -> BoundReport:
    """``(8t)^{2t} (||M_{2,0}|| + ||M_{0,2}|| + ||M_{1,1}||)`` in ``2t``-th powers.

    ``closed_form`` uses the exact ``M_{0,2}`` value and the Frobenius bound
    for ``M_{1,1}``; ``exact`` computes all three from the sparse blocks.
    """
    t = check_t(t)
    if n < 2:
        raise InputError("melon needs n >= 2")
    if mode not in BOUND_MODES:
        raise InputError(f"mode must be one of {BOUND_MODES}")
    p = 2 * t
    const = p * math.log(8 * t)
    if mode == "exact":
        blocks = melon_blocks(n)
        vals = {k: block_log_schatten_power(b, p) for k, b in blocks.items()}
    else:
        m02 = log_m02_closed_form(n, t)
        vals = {"M20": m02, "M02": m02, "M11": log_m11_frobenius(n, t)}
    terms = [
        BoundTerm("(2,0)", const, vals["M20"]),
        BoundTerm("(0,2)", const, vals["M02"]),
        BoundTerm("(1,1)", const, vals["M11"]),
    ]
    config = {"n": n, "t": t, "mode": mode, "constant": "(8t)^(2t)"}
    return BoundReport("melon", t, "moment_power", p, terms, config)


def melon_moment(
    n: int,
    t: int,
    samples: int,
    seed: int,
    stream: int = 0,
    threads: int | None = None,
) -> MomentEstimate:
    """Monte Carlo ``E||M - EM||_{2t}^{2t}``."""
    if n < 2:
        raise InputError("melon needs n >= 2")
    p = 2 * t
    EM = n**2 * np.eye(n)

    def stat(rng, m):
        T = rng.standard_normal((m, n, n * n))
        return batch_log_schatten(_symmetric_gram(T) - EM, p)

    return estimate_statistic(stat, samples, seed, f"E||M - EM||_{p}^{p}", stream, CHUNK_SIZE, threads)


@dataclass(frozen=True)
class MomentSlope:
    ns: tuple[int, ...]
    log_means: tuple[float, ...]
    slope: float
    target: float
    tolerance: float

    @property
    def within(self) -> bool:
        return abs(self.slope - self.target) <= self.tolerance

    def to_dict(self) -> dict:
        return {
            "ns": list(self.ns),
            "log_means": list(self.log_means),
            "slope": self.slope,
            "target": self.target,
            "tolerance": self.tolerance,
            "within": self.within,
        }


def melon_moment_slope(ns, t: int, samples: int, seed: int, tolerance: float = 0.5, threads=None) -> MomentSlope:
    """Slope of ``log E||M - EM||_{2t}^{2t}`` against ``log n``; target ``3t``."""
    logs = [melon_moment(n, t, samples, seed, stream=idx, threads=threads).log_mean for idx, n in enumerate(ns)]
    slope = float(np.polyfit(np.log(np.asarray(ns, dtype=float)), logs, 1)[0])
    return MomentSlope(tuple(int(n) for n in ns), tuple(float(v) for v in logs), slope, 3.0 * t, tolerance)
