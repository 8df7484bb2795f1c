from __future__ import annotations

import numpy as np
import pytest

from polymat import linalg
from polymat.errors import InputError


def sv_oracle(A, two_t):
    s = np.linalg.svd(A, compute_uv=False)
    return float(np.sum(s**two_t))


def test_diag_second_power():
    assert linalg.schatten_power(np.diag([3.0, 4.0]), 2) == pytest.approx(25.0, rel=1e-12)


@pytest.mark.parametrize("t", [1, 2, 3, 5])
def test_identity_power_is_dimension(t):
    assert linalg.schatten_power(np.eye(7), 2 * t) == pytest.approx(7.0, rel=1e-12)


def test_random_sixth_power_matches_svd(rng):
    A = rng.standard_normal((5, 5))
    assert linalg.schatten_power(A, 6) == pytest.approx(sv_oracle(A, 6), rel=1e-9)
    assert linalg.schatten_power_trace(A, 6) == pytest.approx(sv_oracle(A, 6), rel=1e-9)


def test_norms():
    assert linalg.schatten_norm(np.eye(16), 4) == pytest.approx(2.0, rel=1e-12)
    assert linalg.schatten_norm(np.ones((2, 2)), 4) == pytest.approx(2.0, rel=1e-12)


def test_log_power_survives_overflow():
    A = 1e200 * np.eye(3)
    assert linalg.log_schatten_power(A, 8) == pytest.approx(np.log(3) + 8 * np.log(1e200), rel=1e-12)
    assert linalg.log_schatten_power(np.zeros((2, 2)), 4) == -np.inf


def test_rectangular_trace_formula(rng):
    A = rng.standard_normal((9, 4))
    for p in (2, 4, 6):
        assert linalg.schatten_power_trace(A, p) == pytest.approx(sv_oracle(A, p), rel=1e-9)
        assert linalg.schatten_power_trace(A.T, p) == pytest.approx(sv_oracle(A, p), rel=1e-9)


def test_batch_matches_loop(rng):
    stack = rng.standard_normal((6, 3, 5))
    got = linalg.batch_schatten_power(stack, 4)
    assert np.allclose(got, [sv_oracle(A, 4) for A in stack], rtol=1e-12)


def test_dilation_structure():
    A = np.array([[1.0, 2.0], [3.0, 4.0]])
    H = linalg.hermitian_dilation(A)
    assert H.shape == (4, 4)
    assert np.array_equal(H[:2, :2], np.zeros((2, 2)))
    assert np.array_equal(H[2:, 2:], np.zeros((2, 2)))
    assert np.array_equal(H[:2, 2:], A)
    assert np.array_equal(H[2:, :2], A.T)
    assert not linalg.hermitian_dilation(np.zeros((2, 3))).any()


@pytest.mark.parametrize("t", [1, 2, 3])
def test_dilation_doubles_power(rng, t):
    A = rng.standard_normal((4, 6))
    H = linalg.hermitian_dilation(A)
    assert linalg.schatten_power(H, 2 * t) == pytest.approx(2 * sv_oracle(A, 2 * t), rel=1e-9)


def test_matrix_abs():
    assert np.allclose(linalg.matrix_abs(np.diag([-2.0, 5.0])), np.diag([2.0, 5.0]))
    Q, _ = np.linalg.qr(np.random.default_rng(3).standard_normal((4, 4)))
    assert np.allclose(linalg.matrix_abs(Q), np.eye(4), atol=1e-12)


def test_matrix_abs_eigenvalues_are_singular_values(rng):
    A = rng.standard_normal((5, 5))
    ev = np.sort(np.linalg.eigvalsh(linalg.matrix_abs(A)))
    assert np.allclose(ev, np.sort(np.linalg.svd(A, compute_uv=False)), atol=1e-12)


def test_rejects_bad_input():
    with pytest.raises(InputError):
        linalg.schatten_power(np.array([[np.nan]]), 2)
    with pytest.raises(InputError):
        linalg.schatten_power(np.eye(2), 3)
    with pytest.raises(InputError):
        linalg.schatten_power(np.ones(3), 2)
