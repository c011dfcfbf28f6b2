"""Norms, scalar products and small symmetric eigenproblems.

Vectors and matrices are plain float64 numpy arrays. Every sum runs in
ascending index order so that results are reproducible bit for bit; the
smallest and largest eigenvalues come from a cyclic Jacobi solver.
"""
import math

import numpy as np

from relugd._backend import kernels
from relugd.errors import ContractError, DimensionError, DomainError

SYMMETRY_RTOL = 1e-12


def as_vector(v, name="vector"):
    """Validate and convert to a finite, non-empty 1-D float64 array."""
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise DimensionError(f"{name} must be a non-empty 1-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} has non-finite entries")
    return arr


def as_matrix(a, name="matrix"):
    """Validate and convert to a finite 2-D float64 array with positive dimensions."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise DimensionError(f"{name} must be a non-empty 2-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} has non-finite entries")
    return np.ascontiguousarray(arr)


def as_symmetric(a, name="matrix"):
    """Validate symmetry within ``SYMMETRY_RTOL`` and return an exactly symmetric copy."""
    arr = as_matrix(a, name)
    if arr.shape[0] != arr.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {arr.shape}")
    scale = float(np.max(np.abs(arr)))
    asym = float(np.max(np.abs(arr - arr.T)))
    if asym > SYMMETRY_RTOL * scale:
        raise ContractError(f"{name} is not symmetric (max |A - A^T| = {asym:.3e})")
    if asym == 0.0:
        return arr.copy()
    return 0.5 * (arr + arr.T)


def ordered_sum(values):
    """Left-to-right sum of a 1-D array (no pairwise or compensated tricks)."""
    arr = np.asarray(values, dtype=np.float64).ravel()
    if arr.size == 0:
        return 0.0
    return float(np.cumsum(arr)[-1])


def scalar_product(u, v):
    """``sum_i u_i v_i`` accumulated in ascending index order."""
    u = as_vector(u, "u")
    v = as_vector(v, "v")
    if u.shape != v.shape:
        raise DimensionError(f"length mismatch: {u.size} vs {v.size}")
    return ordered_sum(u * v)


_SAFE_SQ_MIN = 2.0**-960
_SAFE_SQ_MAX = 2.0**960


def _root_sum_squares(arr):
    with np.errstate(over="ignore", under="ignore"):
        sq = ordered_sum(arr * arr)
    if _SAFE_SQ_MIN <= sq <= _SAFE_SQ_MAX or not np.any(arr):
        return math.sqrt(sq)
    # squares under- or overflowed: rescale by an exact power of two
    _, e = math.frexp(float(np.max(np.abs(arr))))
    scaled = np.ldexp(arr, -e)
    return math.ldexp(math.sqrt(ordered_sum(scaled * scaled)), e)


def euclidean_norm(v):
    """``(sum_i v_i**2) ** 0.5``; rescaled by a power of two if the squares would under- or overflow."""
    return _root_sum_squares(as_vector(v))


def frobenius_norm(a):
    return _root_sum_squares(as_matrix(a))


def entrywise_abs_sum(a):
    return ordered_sum(np.abs(as_matrix(a)))


def gram_of_columns(a):
    """``A^T A`` with each entry summed over rows in ascending order."""
    a = as_matrix(a)
    acc = np.outer(a[0], a[0])
    for i in range(1, a.shape[0]):
        acc = acc + np.outer(a[i], a[i])
    return acc


def eigenvalues(a):
    """All eigenvalues of a symmetric matrix, ascending (cyclic Jacobi)."""
    return kernels.jacobi_eigenvalues(as_symmetric(a))


def lambda_min(a):
    """Smallest eigenvalue of a symmetric matrix.

    Raises
    ------
    ContractError
        If ``a`` is asymmetric beyond a relative tolerance of 1e-12.
    """
    return float(eigenvalues(a)[0])


def lambda_max(a):
    return float(eigenvalues(a)[-1])


def spectral_norm(a):
    """Largest singular value, ``sqrt(lambda_max(A^T A))``."""
    ata = gram_of_columns(a)
    return math.sqrt(max(lambda_max(ata), 0.0))
