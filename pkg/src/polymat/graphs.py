"""Shapes, graph matrices over edge variables, vertex separators and shape bounds.

Conventions:

* Edge variables ``G_{ij}`` for ``1 <= i < j <= n`` are numbered
  lexicographically over the pairs, 0-based in arrays and 1-based as
  :class:`PolyMatrix` variable indices.
* Rows and columns of a graph matrix are the injective tuples of length
  ``|U|`` (resp. ``|V|``) over ``[n]`` in lexicographic order.
* A shape edge ``(u, v)`` maps to the unordered pair ``{phi(u), phi(v)}``.
"""

from __future__ import annotations

import itertools
import json
import math
from collections import deque
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import sparse

from .bounds import BoundReport, BoundTerm, check_t, tail_from_log_moment
from .errors import InputError, ResourceCapError, SchemaError
from .polymatrix import DistributionSpec, PolyMatrix
from .sampling import (
    ComparisonResult,
    MomentEstimate,
    SampleConfig,
    batch_log_schatten,
    compare_scaled,
    estimate_statistic,
    run_chunks,
)

MAX_EXHAUSTIVE_K = 16
MAX_BOUNDARY = 2
MAX_EMBEDDINGS = 2_000_000
MAX_POLY_ENTRIES = 20_000_000


@dataclass(frozen=True)
class Shape:
    """Template graph on vertices ``1..k`` with ordered boundary lists ``U`` and ``V``."""

    k: int
    edges: tuple[tuple[int, int], ...]
    U: tuple[int, ...]
    V: tuple[int, ...]

    def __post_init__(self):
        if not isinstance(self.k, int) or self.k < 1:
            raise InputError(f"k must be a positive integer, got {self.k!r}")
        edges = []
        seen = set()
        for e in self.edges:
            if len(e) != 2:
                raise InputError(f"edge {e!r} must have two endpoints")
            u, v = int(e[0]), int(e[1])
            for w in (u, v):
                if not 1 <= w <= self.k:
                    raise InputError(f"edge {e!r} references vertex {w} outside [1, {self.k}]")
            if u == v:
                raise InputError(f"self-loop at vertex {u}")
            key = frozenset((u, v))
            if key in seen:
                raise InputError(f"duplicate edge {{{u}, {v}}}")
            seen.add(key)
            edges.append((u, v))
        for name, side in (("U", self.U), ("V", self.V)):
            if any(not 1 <= w <= self.k for w in side):
                raise InputError(f"{name} references a vertex outside [1, {self.k}]")
            if len(set(side)) != len(side):
                raise InputError(f"{name} repeats a vertex")
        object.__setattr__(self, "edges", tuple(edges))
        object.__setattr__(self, "U", tuple(int(w) for w in self.U))
        object.__setattr__(self, "V", tuple(int(w) for w in self.V))

    @property
    def vertices(self) -> tuple[int, ...]:
        return tuple(range(1, self.k + 1))

    @property
    def warnings(self) -> list[str]:
        touched = {w for e in self.edges for w in e} | set(self.U) | set(self.V)
        return [f"vertex {w} is isolated and outside U and V" for w in self.vertices if w not in touched]

    def adjacency(self) -> dict[int, set[int]]:
        adj = {w: set() for w in self.vertices}
        for u, v in self.edges:
            adj[u].add(v)
            adj[v].add(u)
        return adj

    @classmethod
    def from_dict(cls, doc) -> "Shape":
        if not isinstance(doc, dict):
            raise SchemaError("shape document must be a JSON object")
        for name in ("k", "edges", "U", "V"):
            if name not in doc:
                raise SchemaError(f"missing field {name!r}")
        try:
            return cls(doc["k"], tuple(tuple(e) for e in doc["edges"]), tuple(doc["U"]), tuple(doc["V"]))
        except TypeError as exc:
            raise SchemaError(f"malformed shape: {exc}") from None
        except InputError as exc:
            raise SchemaError(str(exc)) from None

    def to_dict(self) -> dict:
        return {"k": self.k, "edges": [list(e) for e in self.edges], "U": list(self.U), "V": list(self.V)}


def load_shape(path) -> Shape:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"not valid JSON: {exc}") from None
    return Shape.from_dict(doc)


def single_edge() -> Shape:
    return Shape(2, ((1, 2),), (1,), (2,))


def path_shape() -> Shape:
    """``u - w - v`` with ``U = (u)``, ``V = (v)``.

    The middle vertex is numbered 1 (w=1, u=2, v=3) so the lexicographic
    tie-break among the size-1 separators ``{u}``, ``{w}``, ``{v}`` picks ``{w}``.
    """
    return Shape(3, ((2, 1), (1, 3)), (2,), (3,))


def triangle_shape() -> Shape:
    """Triangle on ``u=1, v=2, w=3`` with ``U = (u)``, ``V = (v)``."""
    return Shape(3, ((1, 2), (1, 3), (2, 3)), (1,), (2,))


# --- edge numbering ---------------------------------------------------------


def num_pairs(n: int) -> int:
    return n * (n - 1) // 2


def edge_index(i: int, j: int, n: int) -> int:
    """0-based lexicographic position of the pair ``{i, j}`` (1-based vertices)."""
    if i == j:
        raise InputError("an edge needs two distinct endpoints")
    if i > j:
        i, j = j, i
    return (i - 1) * n - (i - 1) * i // 2 + (j - i - 1)


def edge_pairs(n: int) -> list[tuple[int, int]]:
    return list(itertools.combinations(range(1, n + 1), 2))


def _pair_index_table(n: int) -> np.ndarray:
    T = np.full((n + 1, n + 1), -1, dtype=np.intp)
    for idx, (i, j) in enumerate(edge_pairs(n)):
        T[i, j] = T[j, i] = idx
    return T


# --- graph matrices ---------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GraphMatrixPlan:
    """Precomputed embedding data for one ``(shape, n)``.

    ``rows[m]``, ``cols[m]`` and ``edge_idx[m, :]`` describe the ``m``-th
    injective map ``phi`` in lexicographic order.
    """

    shape: Shape
    n: int
    rows: np.ndarray
    cols: np.ndarray
    edge_idx: np.ndarray
    dims: tuple[int, int]

    @cached_property
    def incidence(self) -> sparse.csr_matrix:
        m = self.rows.size
        flat = self.rows * self.dims[1] + self.cols
        return sparse.csr_matrix((np.ones(m), (np.arange(m), flat)), shape=(m, self.dims[0] * self.dims[1]))

    @property
    def num_vars(self) -> int:
        return num_pairs(self.n)

    def _scatter(self, weights: np.ndarray) -> np.ndarray:
        flat = np.asarray(weights @ self.incidence)
        return flat.reshape(weights.shape[0], *self.dims)

    def evaluate_batch(self, G: np.ndarray) -> np.ndarray:
        """``(N, C(n,2))`` edge values -> ``(N, rows, cols)`` graph matrices."""
        G = np.asarray(G, dtype=float)
        if G.ndim != 2 or G.shape[1] != self.num_vars:
            raise InputError(f"expected edge values of shape (N, {self.num_vars}), got {G.shape}")
        w = np.ones((G.shape[0], self.rows.size))
        for e in range(self.edge_idx.shape[1]):
            w *= G[:, self.edge_idx[:, e]]
        return self._scatter(w)

    def evaluate(self, G) -> np.ndarray:
        return self.evaluate_batch(np.asarray(G, dtype=float)[None])[0]

    def evaluate_decoupled_batch(self, copies: np.ndarray) -> np.ndarray:
        """Edge ``j`` of the shape reads copy ``j``; ``copies`` is ``(N, |E|, C(n,2))``."""
        copies = np.asarray(copies, dtype=float)
        E = self.edge_idx.shape[1]
        if copies.ndim != 3 or copies.shape[1:] != (E, self.num_vars):
            raise InputError(f"expected copies of shape (N, {E}, {self.num_vars}), got {copies.shape}")
        w = np.ones((copies.shape[0], self.rows.size))
        for e in range(E):
            w *= copies[:, e, self.edge_idx[:, e]]
        return self._scatter(w)


def _check_n(shape: Shape, n: int):
    if not isinstance(n, (int, np.integer)) or n < shape.k:
        raise InputError(f"n = {n} must be an integer >= k = {shape.k}")
    if len(shape.U) > MAX_BOUNDARY or len(shape.V) > MAX_BOUNDARY:
        raise ResourceCapError(
            f"|U|, |V| <= {MAX_BOUNDARY} at desk scale (got {len(shape.U)}, {len(shape.V)})",
            max(len(shape.U), len(shape.V)),
            MAX_BOUNDARY,
        )


def _falling(n: int, r: int) -> int:
    return math.perm(n, r)


def _tuple_rank(T: np.ndarray, n: int) -> np.ndarray:
    """Lexicographic rank of each injective tuple (rows of ``T``, 1-based)."""
    m, r = T.shape
    rank = np.zeros(m, dtype=np.intp)
    for pos in range(r):
        smaller_used = np.zeros(m, dtype=np.intp)
        for prev in range(pos):
            smaller_used += T[:, prev] < T[:, pos]
        digit = T[:, pos] - 1 - smaller_used
        rank = rank * (n - pos) + digit
    return rank


def graph_matrix_plan(shape: Shape, n: int) -> GraphMatrixPlan:
    _check_n(shape, n)
    count = _falling(n, shape.k)
    if count > MAX_EMBEDDINGS:
        raise ResourceCapError(f"{count} injective maps exceed the cap {MAX_EMBEDDINGS}", count, MAX_EMBEDDINGS)
    phi = np.array(list(itertools.permutations(range(1, n + 1), shape.k)), dtype=np.intp).reshape(count, shape.k)
    U = [u - 1 for u in shape.U]
    V = [v - 1 for v in shape.V]
    rows = _tuple_rank(phi[:, U], n)
    cols = _tuple_rank(phi[:, V], n)
    table = _pair_index_table(n)
    E = len(shape.edges)
    edge_idx = np.empty((count, E), dtype=np.intp)
    for j, (u, v) in enumerate(shape.edges):
        edge_idx[:, j] = table[phi[:, u - 1], phi[:, v - 1]]
    dims = (_falling(n, len(U)), _falling(n, len(V)))
    return GraphMatrixPlan(shape, n, rows, cols, edge_idx, dims)


def build_graph_matrix(shape: Shape, n: int, G) -> np.ndarray:
    """``M[I, J] = sum_{phi: phi(U)=I, phi(V)=J} prod_{(u,v) in E} G_{phi(u) phi(v)}``."""
    return graph_matrix_plan(shape, n).evaluate(G)


def build_graph_matrix_decoupled(shape: Shape, n: int, copies) -> np.ndarray:
    return graph_matrix_plan(shape, n).evaluate_decoupled_batch(np.asarray(copies, dtype=float)[None])[0]


def to_polymatrix(shape: Shape, n: int) -> PolyMatrix:
    """The graph matrix as a multilinear polynomial in the ``C(n,2)`` edge variables.

    Maps that use the same edge set share one multiset-keyed coefficient,
    so a coefficient can hold several unit entries.
    """
    plan = graph_matrix_plan(shape, n)
    keys = np.sort(plan.edge_idx, axis=1) + 1
    uniq, inverse = np.unique(keys, axis=0, return_inverse=True)
    inverse = np.asarray(inverse).ravel()
    entries = uniq.shape[0] * plan.dims[0] * plan.dims[1]
    if entries > MAX_POLY_ENTRIES:
        raise ResourceCapError(f"polynomial form needs {entries} coefficient entries", entries, MAX_POLY_ENTRIES)
    coef = np.zeros((uniq.shape[0], *plan.dims))
    np.add.at(coef, (inverse, plan.rows, plan.cols), 1.0)
    terms = {tuple(int(i) for i in key): coef[m] for m, key in enumerate(uniq)}
    return PolyMatrix(num_pairs(n), plan.dims, terms, multilinear=True)


# --- separators -------------------------------------------------------------


@dataclass(frozen=True)
class SeparatorResult:
    separator: tuple[int, ...]
    size: int
    adjacent_edges: int
    verified: bool

    def to_dict(self) -> dict:
        return {
            "separator": list(self.separator),
            "size": self.size,
            "adjacent_edges": self.adjacent_edges,
            "verified": self.verified,
        }


def separates(shape: Shape, S) -> bool:
    """BFS check that no ``U -> V`` path survives in ``shape - S``.

    A vertex in both ``U`` and ``V`` is a path of length zero, so it must be
    in ``S``.
    """
    S = set(S)
    targets = set(shape.V) - S
    frontier = deque(w for w in shape.U if w not in S)
    seen = set(frontier)
    adj = shape.adjacency()
    while frontier:
        w = frontier.popleft()
        if w in targets:
            return False
        for x in adj[w]:
            if x not in S and x not in seen:
                seen.add(x)
                frontier.append(x)
    return True


def adjacent_edge_count(shape: Shape, S) -> int:
    S = set(S)
    return sum(1 for u, v in shape.edges if u in S or v in S)


def inner_edge_count(shape: Shape, S) -> int:
    S = set(S)
    return sum(1 for u, v in shape.edges if u in S and v in S)


def _result(shape: Shape, S) -> SeparatorResult:
    S = tuple(sorted(S))
    return SeparatorResult(S, len(S), adjacent_edge_count(shape, S), separates(shape, S))


def _check_exhaustive(shape: Shape):
    if shape.k > MAX_EXHAUSTIVE_K:
        raise ResourceCapError(f"exhaustive search supports k <= {MAX_EXHAUSTIVE_K}", shape.k, MAX_EXHAUSTIVE_K)


def all_separators(shape: Shape):
    """Every separating vertex set, by size and then lexicographically."""
    _check_exhaustive(shape)
    for size in range(shape.k + 1):
        for S in itertools.combinations(shape.vertices, size):
            if separates(shape, S):
                yield S


def min_vertex_separator(shape: Shape) -> SeparatorResult:
    """Smallest separator; the lexicographically least one among ties."""
    return _result(shape, next(all_separators(shape)))


@dataclass(frozen=True)
class CoverSeparator:
    """Outcome of building a separator from an edge cover.

    ``accepted`` is False when the containment hypothesis fails or the
    candidate does not actually separate; ``reason`` says which.
    """

    candidate: tuple[int, ...]
    hypothesis_holds: bool
    bfs_separates: bool
    accepted: bool
    reason: str | None
    result: SeparatorResult | None

    def to_dict(self) -> dict:
        return {
            "candidate": list(self.candidate),
            "hypothesis_holds": self.hypothesis_holds,
            "bfs_separates": self.bfs_separates,
            "accepted": self.accepted,
            "reason": self.reason,
        }


def separator_from_cover(shape: Shape, E1, E2) -> CoverSeparator:
    """``S = V(E1) & V(E2)``; accepted when ``S`` holds ``V(E1) & V`` and ``V(E2) & U``."""
    canon = {frozenset(e) for e in shape.edges}
    e1 = {frozenset(e) for e in E1}
    e2 = {frozenset(e) for e in E2}
    if not (e1 <= canon and e2 <= canon):
        raise InputError("cover contains an edge that is not in the shape")
    if e1 | e2 != canon:
        raise InputError("E1 and E2 do not cover the edge set")
    v1 = {w for e in e1 for w in e}
    v2 = {w for e in e2 for w in e}
    S = v1 & v2
    hyp = (v1 & set(shape.V)) <= S and (v2 & set(shape.U)) <= S
    bfs = separates(shape, S)
    cand = tuple(sorted(S))
    if not hyp:
        return CoverSeparator(cand, False, bfs, False, "containment hypothesis fails", None)
    if not bfs:
        return CoverSeparator(cand, True, False, False, "a U-V path avoids the candidate set", None)
    return CoverSeparator(cand, True, True, True, None, _result(shape, S))


@dataclass(frozen=True)
class SparseSeparator:
    separator: tuple[int, ...]
    inner_edges: int
    log_score: float

    @property
    def score(self) -> float:
        return math.exp(self.log_score)


def sparse_separator(shape: Shape, L: float, n: int) -> SparseSeparator:
    """Separator maximizing ``L^{e(S)} n^{(k-|S|)/2}``, ``e(S)`` = edges inside ``S``.

    Ties go to the smallest, then lexicographically least, set.
    """
    if L <= 0 or n < 1:
        raise InputError("need L > 0 and n >= 1")
    best = None
    for S in all_separators(shape):
        e = inner_edge_count(shape, S)
        score = e * math.log(L) + 0.5 * (shape.k - len(S)) * math.log(n)
        if best is None or score > best.log_score:
            best = SparseSeparator(tuple(S), e, score)
    return best


# --- bounds -----------------------------------------------------------------


def _log_delta(p: float) -> float:
    if not 0 < p < 1:
        raise InputError(f"p must lie in (0, 1), got {p!r}")
    return 0.5 * math.log((1 - p) / p)


def _xlogx(m: int, C: float) -> float:
    return 0.0 if m == 0 else m * math.log(C * m)


def shape_bound(shape: Shape, n: int, p: float, t: int, C: float = 3.0) -> BoundReport:
    """Moment bound ``E||M||_{4t}^{4t}`` from the minimum separator.

    One term: the constant ``(48t|V|)^{4t|V|} (C|E|)^{|E|} Delta^{4t|E(S)|}``
    times the combinatorial Schatten count ``n^{|V|} n^{2t(|V|-|S|)}``.
    ``factors`` itemizes the three factor groups in log space.
    """
    t = check_t(t)
    if C <= 0:
        raise InputError("C must be positive")
    if n < shape.k:
        raise InputError(f"n = {n} must be >= k = {shape.k}")
    sep = min_vertex_separator(shape)
    k, E = shape.k, len(shape.edges)
    ld = _log_delta(p)
    g_const = 4 * t * k * math.log(48 * t * k) + _xlogx(E, C) + k * math.log(n)
    g_sparse = 4 * t * sep.adjacent_edges * ld
    g_sep = 2 * t * (k - sep.size) * math.log(n)
    term = BoundTerm(
        f"S={list(sep.separator)}",
        4 * t * k * math.log(48 * t * k) + _xlogx(E, C) + g_sparse,
        k * math.log(n) + g_sep,
    )
    config = {
        "shape": shape.to_dict(),
        "n": n,
        "p": p,
        "t": t,
        "C": C,
        "separator": sep.to_dict(),
        "edge_numbering": "lexicographic pairs i<j",
    }
    factors = {"constant_group": g_const, "sparsity_group": g_sparse, "separator_group": g_sep}
    return BoundReport("graph_shape", t, "moment_power", 4 * t, [term], config, factors)


@dataclass(frozen=True)
class TailBound:
    theta: float
    log_theta: float
    t: int
    probability: float
    epsilon: float

    def to_dict(self) -> dict:
        return {
            "theta": self.theta if math.isfinite(self.theta) else None,
            "log_theta": self.log_theta,
            "t": self.t,
            "probability": self.probability,
            "epsilon": self.epsilon,
        }


def tail_t(shape: Shape, n: int, eps: float) -> int:
    E = len(shape.edges)
    raw = 0.25 * (_xlogx(E, 1.0) + shape.k * math.log(n) - math.log(eps))
    return max(2, math.ceil(raw))


def shape_tail_bound(shape: Shape, n: int, p: float, eps: float, C: float = 3.0) -> TailBound:
    """Threshold with ``P(||M|| >= theta) <= eps`` via Markov on the shape bound."""
    if not 0 < eps < 1:
        raise InputError("epsilon must lie in (0, 1)")
    t = tail_t(shape, n, eps)
    rep = shape_bound(shape, n, p, t, C)
    sep = min_vertex_separator(shape)
    k, E = shape.k, len(shape.edges)
    log_theta = (
        -math.log(eps) / (4 * t)
        + k * math.log(48 * t * k)
        + _xlogx(E, C) / (4 * t)
        + k * math.log(n) / (4 * t)
        + sep.adjacent_edges * _log_delta(p)
        + 0.5 * (k - sep.size) * math.log(n)
    )
    # nudge up so rounding cannot push the Markov bound above eps
    log_theta += 1e-12 * max(1.0, abs(log_theta))
    prob = tail_from_log_moment(rep.log_total, 4 * t, math.exp(log_theta))
    return TailBound(math.exp(log_theta), log_theta, t, prob, eps)


# --- sampling ---------------------------------------------------------------

GRAPH_CHUNK = 64


def estimate_graph_moment(
    shape: Shape,
    n: int,
    cfg: SampleConfig,
    schatten: int | None = None,
    power: float | None = None,
    threads: int | None = None,
) -> MomentEstimate:
    """``E||M||_p^power`` over edge variables drawn from ``cfg.dist``."""
    plan = graph_matrix_plan(shape, n)
    p = 4 * cfg.t if schatten is None else int(schatten)
    pw = float(p if power is None else power)

    def stat(rng, m):
        G = cfg.dist.sample(rng, (m, plan.num_vars))
        return (pw / p) * batch_log_schatten(plan.evaluate_batch(G), p)

    label = f"E||M||_{p}^{int(pw) if pw.is_integer() else pw}"
    return estimate_statistic(stat, cfg.samples, cfg.seed, label, cfg.stream, min(cfg.chunk_size, GRAPH_CHUNK), threads)


def graph_decoupling_ratio(shape: Shape, n: int, cfg: SampleConfig, threads: int | None = None) -> ComparisonResult:
    """``E||M||_{2t} <= k^k E||M_dec||_{2t}`` where edge ``j`` reads copy ``j``."""
    plan = graph_matrix_plan(shape, n)
    p = 2 * cfg.t
    E = len(shape.edges)
    if E == 0:
        raise InputError("decoupling needs at least one edge")
    chunk = min(cfg.chunk_size, GRAPH_CHUNK)

    def lhs_stat(rng, m):
        return batch_log_schatten(plan.evaluate_batch(cfg.dist.sample(rng, (m, plan.num_vars))), p) / p

    def rhs_stat(rng, m):
        copies = cfg.dist.sample(rng, (m, E, plan.num_vars))
        return batch_log_schatten(plan.evaluate_decoupled_batch(copies), p) / p

    lhs = estimate_statistic(lhs_stat, cfg.samples, cfg.seed, f"E||M||_{p}", cfg.stream, chunk, threads)
    rhs = estimate_statistic(rhs_stat, cfg.samples, cfg.seed, f"E||M_dec||_{p}", cfg.stream + 1, chunk, threads)
    return compare_scaled(lhs, rhs, float(shape.k**shape.k), "graph_norm")


@dataclass(frozen=True)
class SlopeFit:
    ns: tuple[int, ...]
    medians: tuple[float, ...]
    slope: float
    target: float
    tolerance: float

    @property
    def within(self) -> bool:
        return abs(self.slope - self.target) <= self.tolerance

    def to_dict(self) -> dict:
        return {
            "ns": list(self.ns),
            "medians": list(self.medians),
            "slope": self.slope,
            "target": self.target,
            "tolerance": self.tolerance,
            "within": self.within,
        }


def spectral_norm_slope(
    shape: Shape,
    ns,
    samples: int,
    seed: int,
    p: float = 0.5,
    tolerance: float = 0.4,
    threads: int | None = None,
) -> SlopeFit:
    """Least-squares slope of log(median spectral norm) against log n.

    The target is ``(|V(tau)| - |S_tau|) / 2``.
    """
    dist = DistributionSpec("pbiased", p)
    meds = []
    for idx, n in enumerate(ns):
        plan = graph_matrix_plan(shape, n)

        def stat(rng, m, plan=plan):
            Ms = plan.evaluate_batch(dist.sample(rng, (m, plan.num_vars)))
            return np.linalg.norm(Ms, ord=2, axis=(1, 2))

        vals = run_chunks(stat, samples, seed, stream=1000 + idx, chunk_size=GRAPH_CHUNK, threads=threads)
        meds.append(float(np.median(vals)))
    slope = float(np.polyfit(np.log(np.asarray(ns, dtype=float)), np.log(meds), 1)[0])
    target = 0.5 * (shape.k - min_vertex_separator(shape).size)
    return SlopeFit(tuple(int(n) for n in ns), tuple(meds), slope, target, tolerance)


__all__ = [
    "CoverSeparator",
    "GraphMatrixPlan",
    "SeparatorResult",
    "Shape",
    "SlopeFit",
    "SparseSeparator",
    "TailBound",
    "build_graph_matrix",
    "build_graph_matrix_decoupled",
    "edge_index",
    "edge_pairs",
    "estimate_graph_moment",
    "graph_decoupling_ratio",
    "graph_matrix_plan",
    "load_shape",
    "min_vertex_separator",
    "path_shape",
    "separates",
    "separator_from_cover",
    "shape_bound",
    "shape_tail_bound",
    "single_edge",
    "sparse_separator",
    "spectral_norm_slope",
    "to_polymatrix",
    "triangle_shape",
]
