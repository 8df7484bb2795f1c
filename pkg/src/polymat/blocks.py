"""Partial-derivative block matrices ``F_{a,b,c}`` and Gaussian ``P_{a,b}``.

Each increment differentiates every block by every variable and stacks the
results: ``a`` vertically (new row index), ``b`` horizontally (new column
index), ``c`` diagonally (the same index on both sides).  Blocks are kept in
a sparse map keyed by ``(row_key, col_key)``, where the keys record the
differentiation indices in application order.  With the canonical order
(all ``a``, then ``b``, then ``c``) the last ``c`` entries of both keys
coincide.

Multilinear blocks use the ordered-tuple normalization: a block reached
after ``k`` derivatives from a degree-``m`` monomial carries
``(m-k)!/m!`` times the literal derivative, so fully differentiated blocks
equal ``C_S / d!``.  Gaussian blocks are literal iterated derivatives.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from . import linalg
from .errors import InputError, ResourceCapError
from .polymatrix import DistributionSpec, PolyMatrix, evaluate, expectation, partial_derivative

DEFAULT_GRAM_CAP = 20_000

Key = tuple[int, ...]


@dataclass(frozen=True, eq=False)
class DerivativeBlock:
    base_dims: tuple[int, int]
    n: int
    a: int
    b: int
    c: int
    blocks: dict = field(default_factory=dict)
    order: tuple[str, ...] = ()

    @property
    def shape(self) -> tuple[int, int]:
        """Logical dimensions ``d1 n^{a+c} x d2 n^{b+c}``."""
        d1, d2 = self.base_dims
        return d1 * self.n ** (self.a + self.c), d2 * self.n ** (self.b + self.c)

    @property
    def is_deterministic(self) -> bool:
        return all(isinstance(v, np.ndarray) for v in self.blocks.values())

    @property
    def is_zero(self) -> bool:
        return not self.blocks

    def transpose(self) -> "DerivativeBlock":
        swap = {"a": "b", "b": "a", "c": "c"}
        blocks = {(ck, rk): (v.T if isinstance(v, np.ndarray) else v.transpose()) for (rk, ck), v in self.blocks.items()}
        return DerivativeBlock(
            self.base_dims[::-1], self.n, self.b, self.a, self.c, blocks, tuple(swap[s] for s in self.order)
        )

    def to_dense(self, cap: int = 4_000_000) -> np.ndarray:
        """Materialize the full logical matrix, zero rows and columns included."""
        if not self.is_deterministic:
            raise InputError("only deterministic block matrices can be materialized")
        rows, cols = self.shape
        if rows * cols > cap:
            raise ResourceCapError(
                f"dense block matrix would have {rows} x {cols} entries (cap {cap})", rows * cols, cap
            )
        d1, d2 = self.base_dims
        out = np.zeros((rows, cols))
        for (rk, ck), M in self.blocks.items():
            r0 = _radix(rk, self.n) * d1
            c0 = _radix(ck, self.n) * d2
            out[r0 : r0 + d1, c0 : c0 + d2] = M
        return out


def _radix(key: Key, n: int) -> int:
    pos = 0
    for i in key:
        pos = pos * n + (i - 1)
    return pos


def _check_order(a: int, b: int, c: int, order) -> tuple[str, ...]:
    if min(a, b, c) < 0:
        raise InputError("a, b, c must be nonnegative")
    if order is None:
        return ("a",) * a + ("b",) * b + ("c",) * c
    order = tuple(order)
    if sorted(order) != sorted(("a",) * a + ("b",) * b + ("c",) * c):
        raise InputError(f"order {order!r} does not contain a={a}, b={b}, c={c} increments")
    return order


def _extend(rk: Key, ck: Key, step: str, i: int) -> tuple[Key, Key]:
    if step == "a":
        return rk + (i,), ck
    if step == "b":
        return rk, ck + (i,)
    return rk + (i,), ck + (i,)


def _differentiate(F: PolyMatrix, order: tuple[str, ...]) -> dict:
    blocks = {((), ()): F}
    for step in order:
        nxt = {}
        for (rk, ck), P in blocks.items():
            for i in sorted(P.variables()):
                D = partial_derivative(P, i)
                if not D.is_zero:
                    nxt[_extend(rk, ck, step, i)] = D
        blocks = nxt
    return blocks


def _collapse(P: PolyMatrix):
    """Constant polynomial -> its matrix; anything else is returned unchanged."""
    if P.degree == 0:
        return np.array(P.terms[()]) if P.terms else None
    return P


def all_orders(a: int, b: int, c: int) -> list[tuple[str, ...]]:
    """Every distinct increment sequence with the given counts."""
    return sorted(set(itertools.permutations(("a",) * a + ("b",) * b + ("c",) * c)))


def build_block(F: PolyMatrix, a: int, b: int, c: int, order=None) -> DerivativeBlock:
    """``F_{a,b,c}`` of a multilinear polynomial (ordered-tuple normalization).

    When ``a + b + c`` exceeds the degree the result is the zero block matrix.
    """
    if not F.is_multilinear:
        raise InputError("build_block needs a multilinear polynomial; use build_gaussian_block")
    order = _check_order(a, b, c, order)
    k = len(order)
    if k > F.degree or F.is_zero:
        return DerivativeBlock(F.dims, F.n, a, b, c, {}, order)
    if F.is_homogeneous and k == F.degree:
        return DerivativeBlock(F.dims, F.n, a, b, c, _full_degree_blocks(F, order), order)

    blocks = {}
    for key, P in _differentiate(F, order).items():
        scaled = {t: M * (math.factorial(len(t)) / math.factorial(len(t) + k)) for t, M in P.terms.items()}
        v = _collapse(PolyMatrix(F.n, F.dims, scaled, F.multilinear))
        if v is not None:
            blocks[key] = v
    return DerivativeBlock(F.dims, F.n, a, b, c, blocks, order)


def _full_degree_blocks(F: PolyMatrix, order: tuple[str, ...]) -> dict:
    # every ordering of a monomial's indices lands in its own block
    d = len(order)
    inv = 1.0 / math.factorial(d)
    blocks = {}
    for S, C in F.terms.items():
        A = C * inv
        for perm in itertools.permutations(S):
            rk, ck = (), ()
            for step, i in zip(order, perm):
                rk, ck = _extend(rk, ck, step, i)
            blocks[(rk, ck)] = A
    return blocks


def build_gaussian_block(P: PolyMatrix, a: int, b: int, order=None) -> DerivativeBlock:
    """``P_{a,b}``: literal iterated derivatives, repeats allowed, ``c = 0``."""
    order = _check_order(a, b, 0, order)
    blocks = {}
    if len(order) <= P.degree:
        for key, D in _differentiate(P, order).items():
            v = _collapse(D)
            if v is not None:
                blocks[key] = v
    return DerivativeBlock(P.dims, P.n, a, b, 0, blocks, order)


def expected_block(B: DerivativeBlock, dist: DistributionSpec) -> DerivativeBlock:
    """Replace each polynomial block by its expectation; zero blocks are dropped."""
    blocks = {}
    for key, v in B.blocks.items():
        M = v if isinstance(v, np.ndarray) else expectation(v, dist)
        if np.any(M != 0):
            blocks[key] = M
    return DerivativeBlock(B.base_dims, B.n, B.a, B.b, B.c, blocks, B.order)


def evaluate_block(B: DerivativeBlock, x) -> DerivativeBlock:
    """Evaluate every polynomial block at the point ``x``; zero blocks are dropped."""
    blocks = {}
    for key, v in B.blocks.items():
        M = v if isinstance(v, np.ndarray) else evaluate(v, x)
        if np.any(M != 0):
            blocks[key] = M
    return DerivativeBlock(B.base_dims, B.n, B.a, B.b, B.c, blocks, B.order)


def _components(B: DerivativeBlock) -> list[tuple[list, list, list]]:
    """Split into independent sub-matrices (connected row/column key groups)."""
    parent = {}

    def find(u):
        while parent[u] != u:
            parent[u] = parent[parent[u]]
            u = parent[u]
        return u

    for rk, ck in B.blocks:
        r, c = ("r", rk), ("c", ck)
        parent.setdefault(r, r)
        parent.setdefault(c, c)
        ra, ca = find(r), find(c)
        if ra != ca:
            parent[max(ra, ca)] = min(ra, ca)
    groups = {}
    for key in B.blocks:
        groups.setdefault(find(("r", key[0])), []).append(key)
    out = []
    for root in sorted(groups):
        keys = sorted(groups[root])
        rows = sorted({rk for rk, _ in keys})
        cols = sorted({ck for _, ck in keys})
        out.append((rows, cols, keys))
    return out


def _component_gram_eigs(B: DerivativeBlock, rows, cols, keys, cap: int) -> np.ndarray:
    d1, d2 = B.base_dims
    nr, nc = len(rows) * d1, len(cols) * d2
    gram_dim = min(nr, nc)
    if gram_dim > cap:
        raise ResourceCapError(
            f"block Schatten norm needs a {gram_dim} x {gram_dim} Gram matrix (cap {cap})", gram_dim, cap
        )
    rpos = {rk: i for i, rk in enumerate(rows)}
    cpos = {ck: j for j, ck in enumerate(cols)}
    ri, ci, vals = [], [], []
    base_r, base_c = np.indices((d1, d2))
    for rk, ck in keys:
        M = B.blocks[(rk, ck)]
        ri.append((rpos[rk] * d1 + base_r).ravel())
        ci.append((cpos[ck] * d2 + base_c).ravel())
        vals.append(M.ravel())
    S = sparse.csr_matrix((np.concatenate(vals), (np.concatenate(ri), np.concatenate(ci))), shape=(nr, nc))
    G = (S @ S.T) if nr <= nc else (S.T @ S)
    ev = np.linalg.eigvalsh(G.toarray())
    ev = np.clip(ev, 0.0, None)
    if ev.size and ev[-1] > 0:
        ev = np.where(ev < linalg.ZERO_CUTOFF**2 * ev[-1], 0.0, ev)
    return ev


def block_schatten_power(B: DerivativeBlock, two_t: int, cap: int = DEFAULT_GRAM_CAP) -> float:
    """``||B||_{2t}^{2t}`` from the sparse structure.

    The matrix splits into a direct sum over connected groups of row/column
    keys; each group is reduced to its smaller Gram matrix.
    """
    t = _half(two_t)
    if not B.is_deterministic:
        raise InputError("block matrix still has polynomial blocks; take expected_block first")
    parts = []
    for rows, cols, keys in _components(B):
        ev = _component_gram_eigs(B, rows, cols, keys, cap)
        parts.extend(ev**t)
    return math.fsum(parts)


def block_log_schatten_power(B: DerivativeBlock, two_t: int, cap: int = DEFAULT_GRAM_CAP) -> float:
    """Log of :func:`block_schatten_power`; ``-inf`` for the zero block matrix."""
    t = _half(two_t)
    if not B.is_deterministic:
        raise InputError("block matrix still has polynomial blocks; take expected_block first")
    logs = []
    for rows, cols, keys in _components(B):
        ev = _component_gram_eigs(B, rows, cols, keys, cap)
        ev = ev[ev > 0]
        logs.extend(float(v) for v in t * np.log(ev))
    if not logs:
        return -math.inf
    top = max(logs)
    return top + math.log(math.fsum(math.exp(v - top) for v in logs))


def _half(two_t) -> int:
    if int(two_t) != two_t or two_t < 2 or int(two_t) % 2:
        raise InputError(f"Schatten index must be an even integer >= 2, got {two_t!r}")
    return int(two_t) // 2
