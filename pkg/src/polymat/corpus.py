"""Fixed and seeded test instances shared by the tests, the suite and the CLI."""

from __future__ import annotations

import itertools

import numpy as np

from .polymatrix import PolyMatrix


def example_quadratic() -> PolyMatrix:
    """Order-2 Rademacher chaos ``[[x1 x2, x2 x3], [x2 x3, x1 x3]]`` on 3 variables."""
    return PolyMatrix(
        3,
        (2, 2),
        {
            (1, 2): [[1.0, 0.0], [0.0, 0.0]],
            (1, 3): [[0.0, 0.0], [0.0, 1.0]],
            (2, 3): [[0.0, 1.0], [1.0, 0.0]],
        },
    )


def random_multilinear(
    seed: int,
    n: int,
    degree: int | tuple[int, ...],
    dims=(3, 3),
    density: float = 0.6,
) -> PolyMatrix:
    """Seeded multilinear instance with Gaussian coefficients.

    ``degree`` may be a tuple to produce a mixed-degree polynomial.  Each
    candidate monomial is kept with probability ``density``; at least one
    monomial per degree survives.
    """
    rng = np.random.default_rng([seed, 0x6D6C])
    degrees = (degree,) if isinstance(degree, int) else tuple(degree)
    terms = {}
    for d in degrees:
        keys = list(itertools.combinations(range(1, n + 1), d))
        keep = rng.random(len(keys)) < density
        if not keep.any():
            keep[rng.integers(len(keys))] = True
        for key, k in zip(keys, keep):
            if k:
                terms[key] = rng.standard_normal(dims)
    return PolyMatrix(n, tuple(dims), terms)


def random_gaussian_poly(seed: int, n: int, degree: int, dims=(3, 3), n_terms: int = 6) -> PolyMatrix:
    """Seeded homogeneous polynomial whose monomials may repeat variables."""
    rng = np.random.default_rng([seed, 0x6761])
    keys = list(itertools.combinations_with_replacement(range(1, n + 1), degree))
    pick = rng.choice(len(keys), size=min(n_terms, len(keys)), replace=False)
    terms = {keys[i]: rng.standard_normal(dims) for i in sorted(pick)}
    return PolyMatrix(n, tuple(dims), terms, multilinear=False)


def random_linear_series(seed: int, max_terms: int = 10, dims=(4, 4)) -> list[np.ndarray]:
    """Between 1 and ``max_terms`` Gaussian coefficient matrices."""
    rng = np.random.default_rng([seed, 0x726F])
    m = int(rng.integers(1, max_terms + 1))
    return [rng.standard_normal(dims) for _ in range(m)]
