"""su(2) / sl(2,C) algebra with the normalized Killing inner product.

Two representations are used throughout the package:

* 2x2 complex matrices (``...x2x2`` arrays), the "matrix" API below;
* coordinate vectors in the orthonormal basis {sigma, e2, e3}
  (``3`` along some axis), used by the grid kernels.

With inner(X, Y) = -1/2 tr(XY) the basis is orthonormal and
[B_a, B_b] = 2 eps_abc B_c, so the bracket in coordinates is twice the
cross product.  Complex coordinates describe sl(2,C) = su(2) + i su(2).
"""
from __future__ import annotations

import numpy as np

SIGMA = np.array([[-1j, 0], [0, 1j]], dtype=complex)
E2 = np.array([[0, -1], [1, 0]], dtype=complex)
E3 = np.array([[0, 1j], [1j, 0]], dtype=complex)
BASIS = np.stack([SIGMA, E2, E3])

# eigenvectors of [i sigma, .] with eigenvalue 2j
H_PLUS = np.array([[0, 1], [0, 0]], dtype=complex)
H_MINUS = np.array([[0, 0], [1, 0]], dtype=complex)
IDENTITY = np.eye(2, dtype=complex)


def h_basis(j: int) -> np.ndarray:
    """Matrix h_j with [i sigma, h_j] = 2j h_j (h_0 = sigma)."""
    return {1: H_PLUS, -1: H_MINUS, 0: SIGMA}[int(j)]


# ---------------------------------------------------------------- matrix API

def bracket(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return x @ y - y @ x


def inner(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Killing form -1/2 tr(XY), real part (exact for su(2) arguments)."""
    return -0.5 * np.trace(x @ y, axis1=-2, axis2=-1).real


def herm_inner(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Hermitian extension 1/2 tr(X^dagger Y) to sl(2,C)."""
    return 0.5 * np.trace(np.conj(np.swapaxes(x, -1, -2)) @ y, axis1=-2, axis2=-1)


def norm(x: np.ndarray) -> np.ndarray:
    return np.sqrt(np.abs(herm_inner(x, x)))


def is_su2(x: np.ndarray, tol: float = 1e-14) -> bool:
    x = np.asarray(x)
    scale = max(1.0, float(np.max(np.abs(x))))
    tr = np.abs(np.trace(x, axis1=-2, axis2=-1))
    ah = np.abs(x + np.conj(np.swapaxes(x, -1, -2)))
    return bool(np.all(tr <= tol * scale) and np.all(ah <= tol * scale))


def to_coords(x: np.ndarray) -> np.ndarray:
    """Coordinates in {sigma, e2, e3}; complex for sl(2,C) input."""
    c = -0.5 * np.einsum("aij,...ji->...a", BASIS, x)
    if np.iscomplexobj(c) and np.all(np.abs(c.imag) <= 1e-15 * (1 + np.abs(c.real))):
        return c.real
    return c


def from_coords(c: np.ndarray) -> np.ndarray:
    return np.einsum("...a,aij->...ij", np.asarray(c), BASIS)


def split_parallel_perp(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """X = X_par + X_perp with X_par along sigma."""
    coef = -0.5 * np.trace(SIGMA @ x, axis1=-2, axis2=-1)
    par = coef[..., None, None] * SIGMA
    return par, x - par


def exp_su2(x: np.ndarray) -> np.ndarray:
    """exp of su(2) matrices; X^2 = -|X|^2 gives cos|X| + sin|X|/|X| X."""
    x = np.asarray(x, dtype=complex)
    n = np.sqrt(np.maximum(inner(x, x), 0.0))
    # sinc written to stay accurate for tiny |X|
    s = np.sinc(n / np.pi)
    return np.cos(n)[..., None, None] * IDENTITY + s[..., None, None] * x


def log_su2(u: np.ndarray) -> np.ndarray:
    """Principal logarithm of SU(2) matrices, angle in [0, pi)."""
    u = np.asarray(u, dtype=complex)
    c = np.clip(0.5 * np.trace(u, axis1=-2, axis2=-1).real, -1.0, 1.0)
    ang = np.arccos(c)
    if np.any(np.pi - ang < 1e-9):
        raise ValueError("logarithm branch failure: element too close to -identity")
    skew = 0.5 * (u - np.conj(np.swapaxes(u, -1, -2)))
    skew = skew - 0.5 * np.trace(skew, axis1=-2, axis2=-1)[..., None, None] * IDENTITY
    sin_ang = np.sin(ang)
    fac = np.where(ang < 1e-12, 1.0, ang / np.where(sin_ang == 0, 1.0, sin_ang))
    return fac[..., None, None] * skew


def su2_angle(u: np.ndarray) -> np.ndarray:
    """Rotation angle |log u| in [0, pi]."""
    return np.arccos(np.clip(0.5 * np.trace(u, axis1=-2, axis2=-1).real, -1.0, 1.0))


# ----------------------------------------------------------- coordinate API

def cbracket(x: np.ndarray, y: np.ndarray, axis: int = 0) -> np.ndarray:
    """Bracket of coordinate vectors stored along ``axis``: 2 (x cross y)."""
    return 2.0 * np.cross(x, y, axisa=axis, axisb=axis, axisc=axis)


def cinner(x: np.ndarray, y: np.ndarray, axis: int = 0) -> np.ndarray:
    return np.sum(np.conj(x) * y, axis=axis).real if np.iscomplexobj(x) else np.sum(x * y, axis=axis)


def csq(x: np.ndarray, axis: int = 0) -> np.ndarray:
    return np.sum(np.abs(x) ** 2, axis=axis)


def ad_matrix(x: np.ndarray) -> np.ndarray:
    """3x3 matrix of [x, .] in coordinates (x has shape (..., 3))."""
    x = np.asarray(x)
    z = np.zeros_like(x[..., 0])
    rows = [
        np.stack([z, -x[..., 2], x[..., 1]], -1),
        np.stack([x[..., 2], z, -x[..., 0]], -1),
        np.stack([-x[..., 1], x[..., 0], z], -1),
    ]
    return 2.0 * np.stack(rows, -2)


def h_coords(j: int) -> np.ndarray:
    return np.asarray(to_coords(h_basis(j)), dtype=complex)


def su2_part(c: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split complex coordinates Z = X + iY with X, Y in su(2)."""
    c = np.asarray(c)
    return c.real.copy(), c.imag.copy()
