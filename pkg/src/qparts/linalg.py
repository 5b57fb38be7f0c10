"""
Dense complex-matrix helpers shared by every other module.

All functions take and return plain ``numpy`` arrays and never mutate their
inputs. Tolerances are absolute; matrix comparisons use the Frobenius norm
scaled by ``sqrt(dim)`` so a single ``tol`` means the same thing at every size.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
import numpy.typing as npt

from .errors import DimensionError, ValidationError

DEFAULT_TOL = 1e-9

CMatrix = npt.NDArray[np.complex128]


def as_matrix(m) -> CMatrix:
    """Coerce ``m`` to a finite 2-d complex array."""
    arr = np.asarray(m, dtype=np.complex128)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    if arr.ndim != 2:
        raise DimensionError(f"expected a 2-d matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError("matrix has non-finite entries")
    return arr


def require_square(m: CMatrix) -> int:
    rows, cols = m.shape
    if rows != cols:
        raise DimensionError(f"expected a square matrix, got shape {m.shape}")
    return rows


def dagger(m: CMatrix) -> CMatrix:
    return m.conj().T


def hermitian_part(m, tol: float = DEFAULT_TOL) -> CMatrix:
    """
    Return ``(m + m^dagger) / 2`` after checking ``m`` is Hermitian within tol.

    Raises
    ------
    ValidationError
        If the anti-Hermitian residual exceeds ``tol * sqrt(dim)``.
    """
    m = as_matrix(m)
    n = require_square(m)
    residual = np.linalg.norm(m - dagger(m)) / 2
    if residual > tol * np.sqrt(n):
        raise ValidationError(f"matrix is not Hermitian (residual {residual:.3e})")
    return (m + dagger(m)) / 2


def eigh_clamped(m, tol: float = DEFAULT_TOL) -> tuple[np.ndarray, CMatrix]:
    """Eigen-decompose a Hermitian matrix, zeroing eigenvalues in [-tol, 0)."""
    h = hermitian_part(m, tol)
    w, v = np.linalg.eigh(h)
    w = np.where((w < 0) & (w >= -tol), 0.0, w)
    return w, v


def is_hermitian(m, tol: float = DEFAULT_TOL) -> bool:
    try:
        hermitian_part(m, tol)
    except ValidationError:
        return False
    return True


def is_psd(m, tol: float = DEFAULT_TOL) -> bool:
    """
    Loewner test ``m >= 0``.

    True iff ``m`` is Hermitian within ``tol`` and its smallest eigenvalue is
    at least ``-tol``.

    Examples
    --------
    >>> is_psd(np.eye(2))
    True
    >>> is_psd(-np.eye(2))
    False
    """
    m = as_matrix(m)
    require_square(m)
    if not is_hermitian(m, tol):
        return False
    return bool(min_eigenvalue(m, tol) >= -tol)


def min_eigenvalue(m, tol: float = DEFAULT_TOL) -> float:
    h = hermitian_part(m, tol)
    return float(np.linalg.eigvalsh(h)[0])


def principal_sqrt(m, tol: float = DEFAULT_TOL) -> CMatrix:
    """
    Unique positive square root of a PSD matrix.

    Eigenvalues within ``tol`` below zero are treated as zero; anything more
    negative is rejected. Eigenvalues at the rounding floor of the
    decomposition are zeroed as well, otherwise their square roots (~1e-8)
    would leak into rank-deficient results.
    """
    w, v = eigh_clamped(m, tol)
    if w.size and w[0] < -tol:
        raise ValidationError(f"matrix is not PSD (min eigenvalue {w[0]:.3e})")
    floor = 10 * w.size * np.finfo(float).eps * max(1.0, float(np.abs(w).max(initial=0.0)))
    w = np.where(np.abs(w) <= floor, 0.0, w)
    root = (v * np.sqrt(w)) @ dagger(v)
    return (root + dagger(root)) / 2


def inverse_sqrt(m, tol: float = DEFAULT_TOL) -> CMatrix:
    w, v = eigh_clamped(m, tol)
    if w.size and w[0] <= tol:
        raise ValidationError("matrix is singular or not positive definite")
    return (v / np.sqrt(w)) @ dagger(v)


def tensor(*mats) -> CMatrix:
    """Kronecker product of one or more matrices, left to right."""
    if not mats:
        return np.ones((1, 1), dtype=np.complex128)
    out = as_matrix(mats[0])
    for m in mats[1:]:
        out = np.kron(out, as_matrix(m))
    return out


def _normalize_dims(dims: Sequence[int]) -> tuple[int, ...]:
    dims = tuple(int(d) for d in dims)
    if not dims or any(d < 1 for d in dims):
        raise DimensionError(f"invalid factor dimensions {dims}")
    return dims


def partial_trace(m, dims: Sequence[int], which: int | Sequence[int] = 2) -> CMatrix:
    """
    Trace out one or more tensor factors.

    Parameters
    ----------
    m : array_like
        Square operator on ``H_1 (x) ... (x) H_k`` with ``dims = (n_1, ..., n_k)``.
    dims : sequence of int
        Factor dimensions, in tensor order.
    which : int or sequence of int
        1-based indices of the factors to trace out. For a pair ``(n1, n2)``,
        ``which=2`` returns the ``n1 x n1`` operator and ``which=1`` the
        ``n2 x n2`` one.

    Examples
    --------
    >>> partial_trace(np.eye(6), (2, 3), 2).real
    array([[3., 0.],
           [0., 3.]])
    """
    m = as_matrix(m)
    dims = _normalize_dims(dims)
    total = int(np.prod(dims))
    if m.shape != (total, total):
        raise DimensionError(f"operator shape {m.shape} does not match dims {dims}")
    traced = {which} if isinstance(which, (int, np.integer)) else set(which)
    if not traced or any(not 1 <= t <= len(dims) for t in traced):
        raise DimensionError(f"factor index {which} out of range for {len(dims)} factors")

    k = len(dims)
    t = m.reshape(dims + dims)
    # einsum subscripts: row indices a.., column indices b..; traced factors share a letter
    letters = [chr(ord("a") + i) for i in range(2 * k)]
    row = letters[:k]
    col = [letters[k + i] if (i + 1) not in traced else letters[i] for i in range(k)]
    kept = [i for i in range(k) if (i + 1) not in traced]
    out_sub = "".join(row[i] for i in kept) + "".join(col[i] for i in kept)
    res = np.einsum("".join(row) + "".join(col) + "->" + out_sub, t)
    d = int(np.prod([dims[i] for i in kept])) if kept else 1
    return res.reshape(d, d)


def frobenius(m) -> float:
    return float(np.linalg.norm(as_matrix(m)))


def scaled_distance(a, b) -> float:
    """Frobenius distance divided by ``sqrt(dim)``."""
    a, b = as_matrix(a), as_matrix(b)
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch {a.shape} vs {b.shape}")
    return float(np.linalg.norm(a - b) / np.sqrt(a.shape[0]))


def approx_eq(a, b, tol: float = DEFAULT_TOL) -> bool:
    """True iff ``||a - b||_F <= tol * sqrt(dim)``."""
    return scaled_distance(a, b) <= tol


def schmidt(psi, dims: Sequence[int], tol: float = DEFAULT_TOL):
    """
    Schmidt decomposition of a unit vector on ``H_1 (x) H_2``.

    Returns ``(coeffs, left, right)`` where ``coeffs`` are the nonzero Schmidt
    coefficients in descending order and ``left[:, i]``, ``right[:, i]`` are the
    matching orthonormal vectors, so that
    ``psi = sum_i coeffs[i] * kron(left[:, i], right[:, i])``.
    """
    n1, n2 = _normalize_dims(dims)
    psi = np.asarray(psi, dtype=np.complex128).reshape(-1)
    if psi.size != n1 * n2:
        raise DimensionError(f"vector length {psi.size} does not match dims {(n1, n2)}")
    norm = np.linalg.norm(psi)
    if abs(norm - 1) > tol:
        raise ValidationError(f"vector is not normalized (norm {norm:.12g})")
    u, s, vh = np.linalg.svd(psi.reshape(n1, n2), full_matrices=False)
    # numpy returns descending singular values; a stable sort keeps first-occurrence ties
    order = np.argsort(-s, kind="stable")
    s, u, vh = s[order], u[:, order], vh[order]
    keep = s > tol
    return s[keep], u[:, keep], vh[keep].T


def projector(vec) -> CMatrix:
    v = np.asarray(vec, dtype=np.complex128).reshape(-1, 1)
    return v @ dagger(v)


def matrix_units(n: int):
    """Yield ``(i, j, E_ij)`` over the standard matrix basis of size n."""
    for i in range(n):
        for j in range(n):
            e = np.zeros((n, n), dtype=np.complex128)
            e[i, j] = 1.0
            yield i, j, e


def commutator_norm(a, b) -> float:
    a, b = as_matrix(a), as_matrix(b)
    return frobenius(a @ b - b @ a)
