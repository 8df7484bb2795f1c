"""Matrix-valued polynomials in independent scalar random variables.

A :class:`PolyMatrix` stores ``F(x) = sum_S C_S prod_{i in S} x_i^{mult_S(i)}``
with one coefficient matrix per variable multiset ``S``.  Keys are sorted
tuples of 1-based variable indices, repeats encoding multiplicity, so
``(1, 1, 3)`` is the monomial ``x_1^2 x_3``.

``C_S`` is the full monomial coefficient.  The permutation-symmetric
ordered-tuple coefficient used by decoupling and the derivative block
matrices is ``C_S / d!`` for a degree-``d`` multilinear monomial.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import InputError, SchemaError

DEFAULT_MAX_DEGREE = 6
DEFAULT_MAX_N = 64

KINDS = ("rademacher", "pbiased", "gaussian")


@dataclass(frozen=True)
class DistributionSpec:
    """Law of each input variable; every kind has mean 0 and variance 1.

    ``pbiased`` takes ``-sqrt((1-p)/p)`` with probability ``p`` and
    ``sqrt(p/(1-p))`` with probability ``1-p`` (a normalized edge indicator).
    """

    kind: str
    p: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InputError(f"unknown distribution kind {self.kind!r}; expected one of {KINDS}")
        if self.kind == "pbiased":
            if self.p is None or not (0.0 < self.p < 1.0):
                raise InputError(f"pbiased needs 0 < p < 1, got {self.p!r}")
        elif self.p is not None:
            raise InputError(f"{self.kind} takes no p parameter")

    @classmethod
    def parse(cls, text: str) -> "DistributionSpec":
        """``"rademacher"``, ``"gaussian"`` or ``"pbiased:0.1"``."""
        kind, _, arg = text.strip().partition(":")
        if kind == "pbiased":
            if not arg:
                raise InputError("pbiased needs a probability, e.g. pbiased:0.1")
            try:
                p = float(arg)
            except ValueError:
                raise InputError(f"pbiased probability must be a number, got {arg!r}") from None
            return cls("pbiased", p)
        if arg:
            raise InputError(f"{kind} takes no parameter")
        return cls(kind)

    @property
    def label(self) -> str:
        return f"pbiased:{self.p!r}" if self.kind == "pbiased" else self.kind

    @property
    def values(self) -> tuple[float, float] | None:
        """The two support points ``(low, high)`` of a two-point law."""
        if self.kind == "rademacher":
            return (-1.0, 1.0)
        if self.kind == "pbiased":
            return (-math.sqrt((1 - self.p) / self.p), math.sqrt(self.p / (1 - self.p)))
        return None

    @property
    def bounded(self) -> bool:
        return self.kind != "gaussian"

    @property
    def L(self) -> float:
        """Almost-sure bound on ``|x|``; ``inf`` for Gaussian."""
        if self.kind == "gaussian":
            return math.inf
        lo, hi = self.values
        return max(-lo, hi)

    def moment(self, k: int) -> float:
        """Exact ``E[x^k]``."""
        if k < 0:
            raise InputError("moment order must be nonnegative")
        if k == 0:
            return 1.0
        if self.kind == "gaussian":
            return 0.0 if k % 2 else float(math.prod(range(k - 1, 0, -2)))
        if self.kind == "rademacher":
            return 0.0 if k % 2 else 1.0
        lo, hi = self.values
        return self.p * lo**k + (1 - self.p) * hi**k

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        if self.kind == "gaussian":
            return rng.standard_normal(size)
        lo, hi = self.values
        if self.kind == "rademacher":
            return np.where(rng.random(size) < 0.5, lo, hi)
        return np.where(rng.random(size) < self.p, lo, hi)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "p": self.p, "L": None if not self.bounded else self.L}


def rademacher() -> DistributionSpec:
    return DistributionSpec("rademacher")


def pbiased(p: float) -> DistributionSpec:
    return DistributionSpec("pbiased", p)


def gaussian() -> DistributionSpec:
    return DistributionSpec("gaussian")


def _freeze(M: np.ndarray) -> np.ndarray:
    M = np.array(M, dtype=float)
    M.setflags(write=False)
    return M


@dataclass(frozen=True, eq=False)
class PolyMatrix:
    """Immutable matrix-valued polynomial; see the module docstring."""

    n: int
    dims: tuple[int, int]
    terms: Mapping[tuple[int, ...], np.ndarray] = field(default_factory=dict)
    multilinear: bool = True

    def __post_init__(self):
        if self.n < 0:
            raise InputError("variable count must be nonnegative")
        d1, d2 = (int(d) for d in self.dims)
        if d1 < 1 or d2 < 1:
            raise InputError(f"dims must be positive, got {self.dims}")
        object.__setattr__(self, "dims", (d1, d2))
        canon = {}
        for raw_key, M in self.terms.items():
            key = tuple(sorted(int(i) for i in raw_key))
            if key in canon:
                raise InputError(f"duplicate monomial {key}")
            if any(i < 1 or i > self.n for i in key):
                raise InputError(f"monomial {key} has an index outside [1, {self.n}]")
            if self.multilinear and len(set(key)) != len(key):
                raise InputError(f"monomial {key} repeats a variable but multilinear=True")
            M = np.asarray(M, dtype=float)
            if M.shape != (d1, d2):
                raise InputError(f"coefficient of {key} has shape {M.shape}, expected {(d1, d2)}")
            if not np.all(np.isfinite(M)):
                raise InputError(f"coefficient of {key} has non-finite entries")
            canon[key] = _freeze(M)
        object.__setattr__(self, "terms", dict(sorted(canon.items(), key=lambda kv: (len(kv[0]), kv[0]))))

    @property
    def degree(self) -> int:
        """Largest monomial degree; ``0`` for the zero polynomial."""
        return max((len(k) for k in self.terms), default=0)

    @property
    def degrees(self) -> set[int]:
        return {len(k) for k in self.terms}

    @property
    def is_zero(self) -> bool:
        return not self.terms

    @property
    def is_homogeneous(self) -> bool:
        return len(self.degrees) <= 1

    @property
    def is_multilinear(self) -> bool:
        """True when every stored key has distinct indices (regardless of the flag)."""
        return all(len(set(k)) == len(k) for k in self.terms)

    def coefficient(self, key) -> np.ndarray:
        key = tuple(sorted(key))
        if key in self.terms:
            return self.terms[key]
        return np.zeros(self.dims)

    def variables(self) -> set[int]:
        return {i for k in self.terms for i in k}

    def transpose(self) -> "PolyMatrix":
        return PolyMatrix(self.n, self.dims[::-1], {k: M.T for k, M in self.terms.items()}, self.multilinear)

    def scaled(self, alpha: float) -> "PolyMatrix":
        return PolyMatrix(self.n, self.dims, {k: alpha * M for k, M in self.terms.items()}, self.multilinear)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "dims": list(self.dims),
            "multilinear": self.multilinear,
            "terms": [{"vars": list(k), "matrix": M.tolist()} for k, M in self.terms.items()],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def __repr__(self):
        return (
            f"PolyMatrix(n={self.n}, dims={self.dims}, terms={len(self.terms)}, "
            f"degrees={sorted(self.degrees)}, multilinear={self.multilinear})"
        )


def zero_polymatrix(n: int, dims, multilinear: bool = True) -> PolyMatrix:
    return PolyMatrix(n, tuple(dims), {}, multilinear)


def _prune(terms: dict) -> dict:
    return {k: M for k, M in terms.items() if np.any(M != 0)}


def parse_polymatrix(
    document,
    *,
    max_degree: int = DEFAULT_MAX_DEGREE,
    max_n: int = DEFAULT_MAX_N,
    allow_constant: bool = False,
) -> PolyMatrix:
    """Build a validated :class:`PolyMatrix` from a JSON string or decoded dict.

    Schema::

        {"n": int, "dims": [d1, d2], "multilinear": bool,
         "terms": [{"vars": [ints, repeats = multiplicity], "matrix": [[...], ...]}]}

    Keys are canonicalized to sorted order.  A constant term under
    ``multilinear: true`` needs ``allow_constant=True``.
    """
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"not valid JSON: {exc}") from None
    if not isinstance(document, dict):
        raise SchemaError("document must be a JSON object")
    for field_name in ("n", "dims", "terms"):
        if field_name not in document:
            raise SchemaError(f"missing field {field_name!r}")
    n = document["n"]
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise SchemaError(f"n must be a positive integer, got {n!r}")
    if n > max_n:
        raise SchemaError(f"n = {n} exceeds the cap max_n = {max_n}")
    dims = document["dims"]
    if not (isinstance(dims, list) and len(dims) == 2 and all(isinstance(d, int) and d >= 1 for d in dims)):
        raise SchemaError(f"dims must be two positive integers, got {dims!r}")
    multilinear = document.get("multilinear", True)
    if not isinstance(multilinear, bool):
        raise SchemaError("multilinear must be a boolean")
    if not isinstance(document["terms"], list):
        raise SchemaError("terms must be a list")

    terms = {}
    for idx, term in enumerate(document["terms"]):
        if not isinstance(term, dict) or "vars" not in term or "matrix" not in term:
            raise SchemaError("each term needs 'vars' and 'matrix'", idx)
        vars_ = term["vars"]
        if not isinstance(vars_, list) or not all(isinstance(i, int) and not isinstance(i, bool) for i in vars_):
            raise SchemaError("vars must be a list of integers", idx)
        if any(i < 1 or i > n for i in vars_):
            raise SchemaError(f"variable index out of range [1, {n}] in {vars_}", idx)
        key = tuple(sorted(vars_))
        if len(key) > max_degree:
            raise SchemaError(f"degree {len(key)} exceeds the cap max_degree = {max_degree}", idx)
        if multilinear and len(set(key)) != len(key):
            raise SchemaError(f"repeated index in {vars_} under multilinear=true", idx)
        if multilinear and not key and not allow_constant:
            raise SchemaError("constant term not allowed for a multilinear polynomial", idx)
        if key in terms:
            raise SchemaError(f"duplicate vars {list(key)}", idx)
        try:
            M = np.array(term["matrix"], dtype=float)
        except (TypeError, ValueError):
            raise SchemaError("matrix must be a rectangular list of numbers", idx) from None
        if M.shape != tuple(dims):
            raise SchemaError(f"matrix has shape {M.shape}, expected {tuple(dims)}", idx)
        if not np.all(np.isfinite(M)):
            raise SchemaError("matrix has non-finite entries", idx)
        terms[key] = M
    return PolyMatrix(n, tuple(dims), terms, multilinear)


def load_polymatrix(path, **kwargs) -> PolyMatrix:
    with open(path) as fh:
        return parse_polymatrix(json.load(fh), **kwargs)


def _check_vector(F: PolyMatrix, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (F.n,):
        raise InputError(f"expected a vector of length {F.n}, got shape {x.shape}")
    return x


def evaluate(F: PolyMatrix, x) -> np.ndarray:
    """``sum_S C_S prod_{i in S} x_i^{mult(i)}`` at a single point."""
    x = _check_vector(F, x)
    out = np.zeros(F.dims)
    for key, M in F.terms.items():
        out += math.prod(x[i - 1] for i in key) * M
    return out


def _padded_keys(F: PolyMatrix) -> np.ndarray:
    width = max(F.degree, 1)
    K = np.zeros((len(F.terms), width), dtype=np.intp)
    for row, key in enumerate(F.terms):
        K[row, : len(key)] = key
    return K


def _coefficient_stack(F: PolyMatrix) -> np.ndarray:
    if not F.terms:
        return np.zeros((0, F.dims[0] * F.dims[1]))
    return np.stack([M.ravel() for M in F.terms.values()])


def evaluate_batch(F: PolyMatrix, X) -> np.ndarray:
    """Evaluate at every row of ``X`` (shape ``(N, n)``); returns ``(N, d1, d2)``."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != F.n:
        raise InputError(f"expected samples of shape (N, {F.n}), got {X.shape}")
    N = X.shape[0]
    if not F.terms:
        return np.zeros((N, *F.dims))
    padded = np.concatenate([np.ones((N, 1)), X], axis=1)
    mono = np.prod(padded[:, _padded_keys(F)], axis=2)
    return (mono @ _coefficient_stack(F)).reshape(N, *F.dims)


def _check_decoupled(F: PolyMatrix) -> int:
    if not F.is_multilinear:
        raise InputError("decoupled evaluation needs a multilinear polynomial")
    if not F.is_homogeneous:
        raise InputError("decoupled evaluation needs a homogeneous polynomial")
    return F.degree


def evaluate_decoupled(F: PolyMatrix, copies) -> np.ndarray:
    """``sum_{ordered i} A_i x^(1)_{i_1} ... x^(d)_{i_d}`` with ``A_i = C_S / d!``.

    ``copies`` holds ``d`` vectors of length ``n``.  Identical copies give back
    :func:`evaluate` up to rounding.
    """
    d = _check_decoupled(F)
    C = np.asarray(copies, dtype=float)
    if C.shape != (d, F.n):
        raise InputError(f"expected {d} copies of length {F.n}, got shape {C.shape}")
    return evaluate_decoupled_batch(F, C[None])[0]


def evaluate_decoupled_batch(F: PolyMatrix, copies) -> np.ndarray:
    """Batched :func:`evaluate_decoupled`; ``copies`` has shape ``(N, d, n)``."""
    d = _check_decoupled(F)
    C = np.asarray(copies, dtype=float)
    if C.ndim != 3 or C.shape[1:] != (d, F.n):
        raise InputError(f"expected copies of shape (N, {d}, {F.n}), got {C.shape}")
    N = C.shape[0]
    if not F.terms:
        return np.zeros((N, *F.dims))
    if d == 0:
        return np.broadcast_to(F.terms[()], (N, *F.dims)).copy()
    K = np.array(list(F.terms), dtype=np.intp) - 1
    perm_sum = np.zeros((N, K.shape[0]))
    for perm in itertools.permutations(range(d)):
        prod = np.ones((N, K.shape[0]))
        for slot, pos in enumerate(perm):
            prod *= C[:, slot, K[:, pos]]
        perm_sum += prod
    perm_sum /= math.factorial(d)
    return (perm_sum @ _coefficient_stack(F)).reshape(N, *F.dims)


def partial_derivative(F: PolyMatrix, i: int) -> PolyMatrix:
    """Formal ``d/dx_i``: drop one copy of ``i``, scale by its multiplicity."""
    if not 1 <= i <= F.n:
        raise InputError(f"variable index {i} outside [1, {F.n}]")
    terms = {}
    for key, M in F.terms.items():
        m = key.count(i)
        if m == 0:
            continue
        pos = key.index(i)
        terms[key[:pos] + key[pos + 1 :]] = m * M
    return PolyMatrix(F.n, F.dims, _prune(terms), F.multilinear)


def homogeneous_part(F: PolyMatrix, d: int) -> PolyMatrix:
    if d < 0:
        raise InputError("degree must be nonnegative")
    return PolyMatrix(F.n, F.dims, {k: M for k, M in F.terms.items() if len(k) == d}, F.multilinear)


def expectation(F: PolyMatrix, dist: DistributionSpec) -> np.ndarray:
    """``E F(x) = sum_S C_S prod_i E[x^{mult_S(i)}]`` using exact moments."""
    out = np.zeros(F.dims)
    for key, M in F.terms.items():
        w = 1.0
        for i, grp in itertools.groupby(key):
            w *= dist.moment(len(list(grp)))
            if w == 0.0:
                break
        if w:
            out += w * M
    return out


def add(F: PolyMatrix, G: PolyMatrix) -> PolyMatrix:
    if F.n != G.n or F.dims != G.dims:
        raise InputError("polynomials must share n and dims")
    terms = dict(F.terms)
    for k, M in G.terms.items():
        terms[k] = terms[k] + M if k in terms else M
    return PolyMatrix(F.n, F.dims, _prune(terms), F.multilinear and G.multilinear)
