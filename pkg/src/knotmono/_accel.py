"""Hot kernels with an optional numba backend.

Set ``KNOTMONO_NO_NUMBA=1`` to force the pure-numpy implementations.
Both backends return the same numbers up to roundoff; see
``benchmarks/bench_accel.py`` for a timing comparison.
"""
from __future__ import annotations

import os

import numpy as np

_DISABLED = os.environ.get("KNOTMONO_NO_NUMBA", "").strip() not in ("", "0", "false", "False")

try:
    if _DISABLED:
        raise ImportError("numba disabled by environment")
    from numba import njit, prange

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised with the env flag
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def wrapper(f):
            return f

        return wrapper

    prange = range


def backend() -> str:
    return "numba" if HAVE_NUMBA else "numpy"


# ------------------------------------------------------------ Biot-Savart

@njit(cache=True, fastmath=False)
def _biot_savart_nb(points, curve, tangent, weight):
    n = points.shape[0]
    m = curve.shape[0]
    out = np.zeros((n, 3))
    for i in range(n):
        ox = 0.0
        oy = 0.0
        oz = 0.0
        for k in range(m):
            dx = points[i, 0] - curve[k, 0]
            dy = points[i, 1] - curve[k, 1]
            dz = points[i, 2] - curve[k, 2]
            r2 = dx * dx + dy * dy + dz * dz
            inv = weight[k] / (r2 * np.sqrt(r2))
            tx = tangent[k, 0]
            ty = tangent[k, 1]
            tz = tangent[k, 2]
            ox += (ty * dz - tz * dy) * inv
            oy += (tz * dx - tx * dz) * inv
            oz += (tx * dy - ty * dx) * inv
        out[i, 0] = 0.5 * ox
        out[i, 1] = 0.5 * oy
        out[i, 2] = 0.5 * oz
    return out


def _biot_savart_np(points, curve, tangent, weight, chunk=2048):
    out = np.empty((points.shape[0], 3))
    for lo in range(0, points.shape[0], chunk):
        p = points[lo:lo + chunk]
        d = p[:, None, :] - curve[None, :, :]
        r2 = np.einsum("ijk,ijk->ij", d, d)
        inv = weight[None, :] / (r2 * np.sqrt(r2))
        cr = np.cross(tangent[None, :, :], d)
        out[lo:lo + chunk] = 0.5 * np.einsum("ij,ijk->ik", inv, cr)
    return out


def biot_savart(points, curve, tangent, weight, use_numba: bool | None = None):
    """Half the Biot-Savart field of a closed curve: 1/2 sum w T x (x-K)/|x-K|^3.

    Its circulation around a small meridian loop is 2 pi.
    """
    points = np.ascontiguousarray(points, dtype=float).reshape(-1, 3)
    args = (points, np.ascontiguousarray(curve, float), np.ascontiguousarray(tangent, float),
            np.ascontiguousarray(weight, float))
    if use_numba is None:
        use_numba = HAVE_NUMBA
    return _biot_savart_nb(*args) if use_numba and HAVE_NUMBA else _biot_savart_np(*args)


# ----------------------------------------------------- path-ordered products

@njit(cache=True)
def _path_product_nb(steps):
    # steps: (n, s, 3) su(2) coordinates of A(dot gamma) dt at midpoints
    n, s = steps.shape[0], steps.shape[1]
    out = np.empty((n, 2, 2), dtype=np.complex128)
    for i in range(n):
        g00 = 1.0 + 0j
        g01 = 0j
        g10 = 0j
        g11 = 1.0 + 0j
        for k in range(s):
            a = steps[i, k, 0]
            b = steps[i, k, 1]
            c = steps[i, k, 2]
            nrm = np.sqrt(a * a + b * b + c * c)
            co = np.cos(nrm)
            si = np.sin(nrm) / nrm if nrm > 1e-300 else 1.0
            # a sigma + b e2 + c e3 = [[-ia, -b+ic], [b+ic, ia]]
            e00 = co + si * (-1j * a)
            e01 = si * (-b + 1j * c)
            e10 = si * (b + 1j * c)
            e11 = co + si * (1j * a)
            h00 = g00 * e00 + g01 * e10
            h01 = g00 * e01 + g01 * e11
            h10 = g10 * e00 + g11 * e10
            h11 = g10 * e01 + g11 * e11
            g00, g01, g10, g11 = h00, h01, h10, h11
        out[i, 0, 0] = g00
        out[i, 0, 1] = g01
        out[i, 1, 0] = g10
        out[i, 1, 1] = g11
    return out


def _path_product_np(steps):
    from .su2 import exp_su2, from_coords

    n, s = steps.shape[:2]
    g = np.broadcast_to(np.eye(2, dtype=complex), (n, 2, 2)).copy()
    for k in range(s):
        g = g @ exp_su2(from_coords(steps[:, k, :]))
    return g


def path_product(steps, use_numba: bool | None = None):
    """Ordered product exp(X_1) exp(X_2) ... exp(X_s) for each row of ``steps``."""
    steps = np.ascontiguousarray(steps, dtype=float)
    if use_numba is None:
        use_numba = HAVE_NUMBA
    return _path_product_nb(steps) if use_numba and HAVE_NUMBA else _path_product_np(steps)
