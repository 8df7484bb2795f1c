"""Dense real matrix kernels: Schatten norms, dilation, matrix absolute value.

All functions accept anything ``numpy.asarray`` turns into a 2-D float array
and never mutate their input.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import InputError

#: singular values below ``ZERO_CUTOFF * sigma_max`` are treated as zero
ZERO_CUTOFF = 1e-12
#: max-abs asymmetry under which a matrix is routed to ``eigvalsh``
SYMMETRY_TOL = 1e-12


def as_matrix(A) -> np.ndarray:
    """Validate ``A`` as a finite 2-D real matrix with at least one entry."""
    M = np.asarray(A, dtype=float)
    if M.ndim != 2:
        raise InputError(f"expected a 2-D matrix, got array of shape {M.shape}")
    if M.shape[0] < 1 or M.shape[1] < 1:
        raise InputError(f"matrix must have at least one row and column, got {M.shape}")
    if not np.all(np.isfinite(M)):
        raise InputError("matrix has non-finite entries")
    return M


def _check_two_t(two_t) -> int:
    if int(two_t) != two_t or two_t < 2 or int(two_t) % 2:
        raise InputError(f"Schatten index must be an even integer >= 2, got {two_t!r}")
    return int(two_t)


def is_symmetric(M: np.ndarray, tol: float = SYMMETRY_TOL) -> bool:
    return M.shape[0] == M.shape[1] and bool(np.max(np.abs(M - M.T), initial=0.0) <= tol)


def singular_values(A) -> np.ndarray:
    """Singular values in descending order, tiny ones snapped to zero.

    Symmetric input goes through ``eigvalsh`` (absolute eigenvalues), which is
    more accurate on dilations and Gram matrices.
    """
    M = as_matrix(A)
    if is_symmetric(M):
        s = np.sort(np.abs(np.linalg.eigvalsh(M)))[::-1]
    else:
        s = np.linalg.svd(M, compute_uv=False)
    if s.size and s[0] > 0:
        s = np.where(s < ZERO_CUTOFF * s[0], 0.0, s)
    return s


def schatten_power(A, two_t) -> float:
    """``||A||_{2t}^{2t} = tr(A^T A)^t = sum_j sigma_j^{2t}``."""
    p = _check_two_t(two_t)
    s = singular_values(A)
    return math.fsum(s**p)


def log_schatten_power(A, two_t) -> float:
    """Natural log of :func:`schatten_power`, safe for huge ``t``.

    Returns ``-inf`` for the zero matrix.
    """
    p = _check_two_t(two_t)
    s = singular_values(A)
    if s.size == 0 or s[0] == 0:
        return -math.inf
    top = s[0]
    return p * math.log(top) + math.log(math.fsum((s / top) ** p))


def schatten_norm(A, two_t) -> float:
    p = _check_two_t(two_t)
    return schatten_power(A, p) ** (1.0 / p)


def schatten_power_trace(A, two_t) -> float:
    """Literal ``tr((A^T A)^t)`` by repeated multiplication.

    Kept as an independent oracle for :func:`schatten_power`; uses whichever
    Gram matrix (``A^T A`` or ``A A^T``) is smaller.
    """
    p = _check_two_t(two_t)
    M = as_matrix(A)
    G = M.T @ M if M.shape[1] <= M.shape[0] else M @ M.T
    return float(np.trace(np.linalg.matrix_power(G, p // 2)))


def batch_schatten_power(stack, two_t) -> np.ndarray:
    """Schatten power of every matrix in a ``(N, d1, d2)`` stack."""
    p = _check_two_t(two_t)
    S = np.asarray(stack, dtype=float)
    if S.ndim != 3:
        raise InputError(f"expected a (N, d1, d2) stack, got shape {S.shape}")
    if not np.all(np.isfinite(S)):
        raise InputError("stack has non-finite entries")
    s = np.linalg.svd(S, compute_uv=False)
    return np.sum(s**p, axis=1)


def hermitian_dilation(A) -> np.ndarray:
    """``[[0, A], [A^T, 0]]``, an ``(r+c) x (r+c)`` symmetric matrix."""
    M = as_matrix(A)
    r, c = M.shape
    H = np.zeros((r + c, r + c))
    H[:r, r:] = M
    H[r:, :r] = M.T
    return H


def matrix_abs(A) -> np.ndarray:
    """``|A| = (A^T A)^{1/2}``, the PSD square root of the Gram matrix.

    Built from the SVD ``A = U S V^T`` as ``V S V^T`` so it never squares
    the condition number.
    """
    M = as_matrix(A)
    _, s, Vt = np.linalg.svd(M, full_matrices=True)
    c = M.shape[1]
    sig = np.zeros(c)
    sig[: s.size] = s
    R = (Vt.T * sig) @ Vt
    return 0.5 * (R + R.T)


def trace_abs_power(A, r: float) -> float:
    """``tr |A|^r`` for real ``r >= 1`` via the eigenvalues of ``matrix_abs``."""
    ev = np.linalg.eigvalsh(matrix_abs(A))
    ev = np.clip(ev, 0.0, None)
    return math.fsum(ev**r)
