from __future__ import annotations

import itertools
import math

import numpy as np
import pytest

from polymat import blocks, corpus, linalg
from polymat.errors import InputError, ResourceCapError
from polymat.polymatrix import PolyMatrix, evaluate, gaussian, homogeneous_part, partial_derivative, rademacher


def tensor_oracle(F, a, b, c, x):
    """Dense ``F_{a,b,c}(x)`` from the symmetric ordered-tuple tensor of each homogeneous part."""
    n, (d1, d2) = F.n, F.dims
    k = a + b + c
    out = np.zeros((d1 * n ** (a + c), d2 * n ** (b + c)))
    for m in range(k, F.degree + 1):
        part = homogeneous_part(F, m)
        for S, C in part.terms.items():
            A = C / math.factorial(m)
            for tup in itertools.permutations(S):
                I, J, K, R = tup[:a], tup[a : a + b], tup[a + b : k], tup[k:]
                r = 0
                for i in I + K:
                    r = r * n + i - 1
                s = 0
                for j in J + K:
                    s = s * n + j - 1
                w = np.prod([x[i - 1] for i in R]) if R else 1.0
                out[r * d1 : (r + 1) * d1, s * d2 : (s + 1) * d2] += w * A
    return out


def test_example_f110():
    F = corpus.example_quadratic()
    B = blocks.build_block(F, 1, 1, 0)
    assert B.shape == (6, 6) and B.is_deterministic
    D = B.to_dense()
    for i in range(3):
        for j in range(3):
            blk = D[2 * i : 2 * i + 2, 2 * j : 2 * j + 2]
            want = np.zeros((2, 2)) if i == j else F.coefficient((i + 1, j + 1)) / 2
            assert np.array_equal(blk, want)


def test_f000_is_f():
    F = corpus.example_quadratic()
    B = blocks.build_block(F, 0, 0, 0)
    x = np.array([0.5, -2.0, 3.0])
    assert list(B.blocks) == [((), ())]
    assert np.array_equal(blocks.evaluate_block(B, x).to_dense(), evaluate(F, x))
    assert blocks.block_schatten_power(blocks.evaluate_block(B, x), 4) == pytest.approx(
        linalg.schatten_power(evaluate(F, x), 4), rel=1e-12
    )


def test_example_f011_structure():
    F = corpus.example_quadratic()
    B = blocks.build_block(F, 0, 1, 1)
    assert B.shape == (6, 18)
    for (rk, ck), _ in B.blocks.items():
        assert len(rk) == 1 and len(ck) == 2 and rk[0] == ck[1]
    assert np.allclose(B.to_dense(), tensor_oracle(F, 0, 1, 1, np.zeros(3)))


@pytest.mark.parametrize("seed", range(4))
def test_blocks_match_tensor_oracle(seed):
    F = corpus.random_multilinear(seed, 4, (1, 2, 3), dims=(2, 3), density=0.6)
    x = np.random.default_rng(seed).standard_normal(F.n)
    for total in range(4):
        for a, b, c in itertools.product(range(total + 1), repeat=3):
            if a + b + c != total:
                continue
            got = blocks.evaluate_block(blocks.build_block(F, a, b, c), x).to_dense()
            assert np.allclose(got, tensor_oracle(F, a, b, c, x), atol=1e-12), (a, b, c)


def test_orders_give_equal_norms():
    F = corpus.random_multilinear(8, 5, 3, dims=(2, 2))
    vals = [blocks.block_schatten_power(blocks.build_block(F, 1, 1, 1, o), 4) for o in blocks.all_orders(1, 1, 1)]
    assert len(vals) == 6
    assert max(vals) == pytest.approx(min(vals), rel=1e-9)


def test_sparse_norm_matches_dense():
    F = corpus.random_multilinear(2, 5, 3, dims=(2, 3))
    x = np.random.default_rng(0).standard_normal(F.n)
    for abc in [(1, 1, 0), (2, 1, 0), (0, 1, 2), (1, 1, 1), (3, 0, 0)]:
        B = blocks.evaluate_block(blocks.build_block(F, *abc), x)
        dense = B.to_dense()
        for p in (2, 4, 8):
            assert blocks.block_schatten_power(B, p) == pytest.approx(linalg.schatten_power(dense, p), rel=1e-9)
            assert blocks.block_log_schatten_power(B, p) == pytest.approx(
                linalg.log_schatten_power(dense, p), rel=1e-9
            )


def test_transpose_swaps_a_and_b():
    F = corpus.random_multilinear(4, 4, 2, dims=(2, 3))
    B = blocks.build_block(F, 2, 0, 0)
    T = B.transpose()
    assert (T.a, T.b, T.c) == (0, 2, 0)
    assert np.array_equal(T.to_dense(), B.to_dense().T)


def test_degree_overflow_and_errors():
    F = corpus.example_quadratic()
    assert blocks.build_block(F, 2, 1, 0).is_zero
    assert blocks.block_log_schatten_power(blocks.build_block(F, 3, 0, 0), 4) == -math.inf
    P = PolyMatrix(1, (1, 1), {(1, 1): [[1.0]]}, multilinear=False)
    with pytest.raises(InputError):
        blocks.build_block(P, 1, 0, 0)
    with pytest.raises(InputError):
        blocks.build_block(F, 1, 0, 0, order=("b",))
    with pytest.raises(InputError):
        blocks.block_schatten_power(blocks.build_block(F, 1, 0, 0), 4)


def test_gram_cap():
    F = corpus.random_multilinear(1, 6, 2, dims=(3, 3), density=1.0)
    B = blocks.build_block(F, 1, 1, 0)
    with pytest.raises(ResourceCapError) as info:
        blocks.block_schatten_power(B, 4, cap=5)
    assert info.value.cap == 5 and info.value.required > 5


def test_expected_block_of_multilinear_vanishes():
    F = corpus.random_multilinear(6, 4, 3, dims=(2, 2))
    B = blocks.build_block(F, 1, 0, 0)
    assert not B.is_deterministic
    assert blocks.expected_block(B, rademacher()).is_zero


def test_gaussian_linear_stacks():
    rng = np.random.default_rng(5)
    Cs = [rng.standard_normal((2, 3)) for _ in range(3)]
    P = PolyMatrix(3, (2, 3), {(i + 1,): C for i, C in enumerate(Cs)}, multilinear=False)
    assert np.array_equal(blocks.build_gaussian_block(P, 1, 0).to_dense(), np.vstack(Cs))
    assert np.array_equal(blocks.build_gaussian_block(P, 0, 1).to_dense(), np.hstack(Cs))


def test_gaussian_block_is_literal_derivative():
    A = np.array([[1.0, 2.0], [0.0, 1.0]])
    P = PolyMatrix(2, (2, 2), {(1, 1, 2): A}, multilinear=False)
    B = blocks.build_gaussian_block(P, 2, 1)
    # d/dx1 d/dx1 d/dx2 of x1^2 x2 is 2, on every ordering of (1, 1, 2) over the three slots
    assert set(B.blocks) == {((1, 1), (2,)), ((1, 2), (1,)), ((2, 1), (1,))}
    assert all(np.array_equal(M, 2 * A) for M in B.blocks.values())
    E = blocks.expected_block(blocks.build_gaussian_block(P, 1, 0), gaussian())
    # d/dx1 = 2 x1 x2, mean zero; d/dx2 = x1^2, mean one
    assert list(E.blocks) == [((2,), ())] and np.array_equal(E.blocks[((2,), ())], A)
    assert np.array_equal(partial_derivative(P, 2).coefficient((1, 1)), A)
