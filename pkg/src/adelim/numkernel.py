"""Dense complex linear-algebra kernels.

Matrices are plain ``complex128`` numpy arrays. ``as_matrix`` is the single
validation gate: it enforces two dimensions and finite entries.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np


class NumericalError(ArithmeticError):
    """A kernel could not produce a trustworthy result."""


class SvdFactors(NamedTuple):
    u: np.ndarray
    s: np.ndarray
    vh: np.ndarray


def as_matrix(a, *, square: bool = False) -> np.ndarray:
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise ValueError(f"expected a non-empty 2-D matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    if square and m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    return m


def dag(a: np.ndarray) -> np.ndarray:
    return np.asarray(a).conj().T


def kron(a, b) -> np.ndarray:
    """Kronecker product; entry (i*rb + k, j*cb + l) is a[i, j] * b[k, l]."""
    return np.kron(as_matrix(a), as_matrix(b))


def svd(a) -> SvdFactors:
    """Thin SVD with singular values in descending order."""
    m = as_matrix(a)
    try:
        u, s, vh = np.linalg.svd(m, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD did not converge: {exc}") from exc
    return SvdFactors(u, s, vh)


def default_cutoff(shape: tuple[int, int], smax: float) -> float:
    return max(shape) * np.finfo(float).eps * smax


def _cutoff(m: np.ndarray, s: np.ndarray, rank_tol: float) -> float:
    smax = float(s[0]) if s.size else 0.0
    if rank_tol < 0:
        raise ValueError("rank_tol must be >= 0")
    if rank_tol == 0:
        return default_cutoff(m.shape, smax)
    return rank_tol * smax


def pinv(a, rank_tol: float = 0.0) -> np.ndarray:
    """Moore-Penrose pseudoinverse through the SVD.

    Singular values at or below ``rank_tol * s_max`` (or the default
    ``max(m, n) * eps * s_max`` when ``rank_tol == 0``) are treated as zero.
    """
    m = as_matrix(a)
    u, s, vh = svd(m)
    cut = _cutoff(m, s, rank_tol)
    keep = s > cut
    inv_s = np.zeros_like(s)
    inv_s[keep] = 1.0 / s[keep]
    return (dag(vh) * inv_s) @ dag(u)


def rank(a, rank_tol: float = 0.0) -> int:
    m = as_matrix(a)
    s = svd(m).s
    return int(np.sum(s > _cutoff(m, s, rank_tol)))


def nullspace(a, rank_tol: float = 0.0) -> list[np.ndarray]:
    """Orthonormal basis of the numerical right nullspace.

    Uses a full SVD so that wide matrices report their structural kernel too.
    """
    m = as_matrix(a)
    try:
        _, s, vh = np.linalg.svd(m, full_matrices=True)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD did not converge: {exc}") from exc
    cut = _cutoff(m, s, rank_tol)
    r = int(np.sum(s > cut))
    return [vh[k].conj().copy() for k in range(r, m.shape[1])]


# Pade(13) numerator coefficients (denominator uses alternating signs).
_PADE13 = (
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
    1187353796428800.0, 129060195264000.0, 10559470521600.0,
    670442572800.0, 33522128640.0, 1323241920.0, 40840800.0,
    960960.0, 16380.0, 182.0, 1.0,
)

_MAX_SQUARINGS = 1100


def expm(a) -> np.ndarray:
    """Matrix exponential by scaling and squaring around a Pade(13) core.

    The scaling power ``s`` is the smallest integer with ``||A||_1 / 2**s <= 0.5``.
    """
    m = as_matrix(a, square=True)
    n = m.shape[0]
    norm = float(np.linalg.norm(m, 1))
    if norm == 0.0:
        return np.eye(n, dtype=complex)
    s = 0 if norm <= 0.5 else int(np.ceil(np.log2(norm / 0.5)))
    if s > _MAX_SQUARINGS:
        raise NumericalError(f"expm input norm {norm:.3e} beyond representable range")
    x = m / (2.0 ** s)

    b = _PADE13
    ident = np.eye(n, dtype=complex)
    x2 = x @ x
    x4 = x2 @ x2
    x6 = x4 @ x2
    u = x @ (x6 @ (b[13] * x6 + b[11] * x4 + b[9] * x2)
             + b[7] * x6 + b[5] * x4 + b[3] * x2 + b[1] * ident)
    v = (x6 @ (b[12] * x6 + b[10] * x4 + b[8] * x2)
         + b[6] * x6 + b[4] * x4 + b[2] * x2 + b[0] * ident)
    try:
        r = np.linalg.solve(v - u, v + u)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"expm Pade denominator singular: {exc}") from exc
    with np.errstate(over="raise", invalid="raise"):
        try:
            for _ in range(s):
                r = r @ r
        except FloatingPointError as exc:
            raise NumericalError("expm overflowed during squaring") from exc
    if not np.all(np.isfinite(r)):
        raise NumericalError("expm produced non-finite entries")
    return r
