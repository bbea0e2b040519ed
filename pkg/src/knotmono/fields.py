"""Grid-sampled 0+1 forms and the Bogomolny operators acting on them.

A configuration psi = a + phi is stored as an array of shape
``(4, 3, *grid.shape)``: index 0..2 of the first axis are the 1-form
coefficients in the grid's coordinate coframe, index 3 is the 0-form; the
second axis holds su(2) coordinates in the basis {sigma, e2, e3}.  Complex
arrays represent sl(2,C)-valued fields; all operators are complex-linear.

Two grids are provided.  ``CartesianGrid`` (Euclidean metric g0, centered
finite differences) and ``TubularGrid`` on N_eps in coordinates
(rho, theta, s) with the flat tube metric d rho^2 + rho^2 d theta^2 + ds^2,
which is exactly g_delta on N_delta.  Every operator is written for an
orthogonal metric with scale factors h_k, so one code path serves both.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.interpolate import BarycentricInterpolator

from .radial import RadialGrid
from .su2 import cbracket

# cyclic triples (i, j, k): the 2-form slot k stores F_ij
CYCLIC = ((1, 2, 0), (2, 0, 1), (0, 1, 2))


# ------------------------------------------------------------------ grids

class CartesianGrid:
    """Uniform box with Euclidean metric; fd2 or fd4 centered differences."""

    kind = "cartesian"
    metric_tag = "g0"

    def __init__(self, origin, spacing, shape, scheme: str = "fd2", rho=None):
        self.origin = np.asarray(origin, dtype=float)
        self.spacing = np.broadcast_to(np.asarray(spacing, dtype=float), (3,)).copy()
        self.shape = tuple(int(n) for n in shape)
        if scheme not in ("fd2", "fd4"):
            raise ValueError("scheme must be fd2 or fd4")
        if min(self.shape) < (3 if scheme == "fd2" else 5):
            raise ValueError("grid too small for the stencil")
        if np.any(self.spacing <= 0):
            raise ValueError("grid spacings must be positive")
        self.scheme = scheme
        # optional distance-to-knot array for weighted norms
        self.rho = rho
        self.one_sided = True  # boundary rows use one-sided differences

    @staticmethod
    def box(center, half_width, n, scheme="fd2", offset=0.0):
        center = np.asarray(center, float)
        h = 2 * half_width / (n - 1)
        origin = center - half_width + offset * h
        return CartesianGrid(origin, h, (n, n, n), scheme)

    def axis_coords(self, k):
        return self.origin[k] + self.spacing[k] * np.arange(self.shape[k])

    def points(self):
        xs = [self.axis_coords(k) for k in range(3)]
        return np.stack(np.meshgrid(*xs, indexing="ij"), axis=-1)

    def scale(self, k):
        return 1.0

    @property
    def sqrt_g(self):
        return 1.0

    def deriv(self, f, k: int):
        axis = f.ndim - 3 + k
        h = self.spacing[k]
        if self.scheme == "fd2":
            return np.gradient(f, h, axis=axis, edge_order=2)
        out = np.gradient(f, h, axis=axis, edge_order=2)
        sl = [slice(None)] * f.ndim

        def take(a, b):
            s = list(sl)
            s[axis] = slice(a, b)
            return f[tuple(s)]

        n = f.shape[axis]
        inner = (-take(4, n) + 8 * take(3, n - 1) - 8 * take(1, n - 3) + take(0, n - 4)) / (12 * h)
        s = list(sl)
        s[axis] = slice(2, n - 2)
        out[tuple(s)] = inner
        return out

    def volume_weights(self):
        return np.full(self.shape, float(np.prod(self.spacing)))

    def manifest(self):
        return {"region": "cartesian", "origin": self.origin.tolist(), "spacing": self.spacing.tolist(),
                "shape": list(self.shape), "scheme": self.scheme, "metric": self.metric_tag}


class TubularGrid:
    """N_eps minus N_{rho_min} in (rho, theta, s); spectral in every direction.

    rho uses LGL nodes in log(rho), theta and s use FFT differentiation.
    """

    kind = "tubular"
    metric_tag = "g_delta"

    def __init__(self, eps: float, n_rho: int, n_theta: int, n_s: int, length: float,
                 rho_min: float | None = None, tube=None):
        if eps <= 0 or length <= 0:
            raise ValueError("eps and length must be positive")
        if tube is not None and eps >= tube.rho_max:
            raise ValueError("eps larger than the tube radius")
        self.eps = float(eps)
        self.length = float(length)
        self.radial = RadialGrid(rho_min if rho_min is not None else eps * 2.0 ** -20, eps, n_rho)
        self.rho_1d = self.radial.rho
        self.theta_1d = 2 * np.pi * np.arange(n_theta) / n_theta
        self.s_1d = self.length * np.arange(n_s) / n_s
        self.shape = (n_rho, n_theta, n_s)
        self.tube = tube
        self.rho = np.broadcast_to(self.rho_1d[:, None, None], self.shape)
        self.theta = np.broadcast_to(self.theta_1d[None, :, None], self.shape)
        self.s = np.broadcast_to(self.s_1d[None, None, :], self.shape)

    def scale(self, k):
        return self.rho_1d[:, None, None] if k == 1 else 1.0

    @property
    def sqrt_g(self):
        return self.rho_1d[:, None, None]

    def _spectral(self, f, axis, period):
        n = f.shape[axis]
        base = np.take(f, [0], axis=axis)
        k = 2 * np.pi / period * np.fft.fftfreq(n, 1.0 / n)
        if n % 2 == 0:
            k[n // 2] = 0.0
        shape = [1] * f.ndim
        shape[axis] = n
        g = np.fft.ifft(np.fft.fft(f - base, axis=axis) * (1j * k).reshape(shape), axis=axis)
        return g if np.iscomplexobj(f) else g.real

    def deriv(self, f, k: int):
        axis = f.ndim - 3 + k
        if k == 0:
            return self.radial.deriv(f, axis=axis)
        if k == 1:
            return self._spectral(f, axis, 2 * np.pi)
        return self._spectral(f, axis, self.length)

    def volume_weights(self):
        w = self.radial.drho_weights * self.rho_1d
        return np.broadcast_to(w[:, None, None] * (2 * np.pi / self.shape[1]) * (self.length / self.shape[2]),
                               self.shape)

    def surface_weights(self):
        return (2 * np.pi / self.shape[1]) * (self.length / self.shape[2])

    def points(self):
        if self.tube is None:
            raise ValueError("tubular grid has no embedding")
        return self.tube.to_cartesian(self.s, self.rho, self.theta)

    def interpolate_rho(self, f, rho0: float):
        """Spectral interpolation of f (last three axes = grid) to rho = rho0."""
        if not (self.radial.rho_min <= rho0 <= self.eps * (1 + 1e-12)):
            raise ValueError("rho0 outside the radial grid")
        axis = f.ndim - 3
        hit = np.isclose(self.rho_1d, rho0, rtol=1e-13, atol=0)
        if np.any(hit):
            return np.take(f, int(np.argmax(hit)), axis=axis)
        moved = np.moveaxis(f, axis, 0)
        interp = BarycentricInterpolator(self.radial.t, moved.reshape(moved.shape[0], -1))
        return interp(np.log(rho0)).reshape(moved.shape[1:])

    def manifest(self):
        return {"region": "tubular", "eps": self.eps, "rho_min": self.radial.rho_min,
                "shape": list(self.shape), "length": self.length, "metric": self.metric_tag}


# ------------------------------------------------------------------ fields

@dataclass
class ConfigField:
    grid: object
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.values.shape != (4, 3) + tuple(self.grid.shape):
            raise ValueError(f"values shape {self.values.shape} does not match grid {self.grid.shape}")

    @staticmethod
    def zeros(grid, dtype=float):
        return ConfigField(grid, np.zeros((4, 3) + tuple(grid.shape), dtype=dtype))

    @staticmethod
    def from_parts(grid, a, phi):
        vals = np.concatenate([np.asarray(a), np.asarray(phi)[None]], axis=0)
        return ConfigField(grid, vals)

    @property
    def a(self):
        return self.values[:3]

    @property
    def phi(self):
        return self.values[3]

    def copy(self):
        return ConfigField(self.grid, self.values.copy(), dict(self.meta))

    def _like(self, vals):
        return ConfigField(self.grid, vals)

    def __add__(self, other):
        return self._like(self.values + other.values)

    def __sub__(self, other):
        return self._like(self.values - other.values)

    def __mul__(self, c):
        return self._like(self.values * c)

    __rmul__ = __mul__

    def __neg__(self):
        return self._like(-self.values)


# ------------------------------------------------------------ pointwise ops

def clifford_mul(tau, a, phi, metric=None):
    """Clifford action of a covector on a 0+1 form at a point.

    tau.(a + phi) = <tau, a> + *(tau ^ a) - phi tau.  ``a`` has shape
    (3, ...) (covector index first), ``phi`` shape (...).  The sign of the
    last term makes the action square to -|tau|^2.
    """
    tau = np.asarray(tau, float)
    g = np.eye(3) if metric is None else np.asarray(metric, float)
    ginv = np.linalg.inv(g)
    vol = np.sqrt(np.linalg.det(g))
    a = np.asarray(a)
    zero_part = np.einsum("i,ij,j...->...", tau, ginv, a)
    # (*(tau ^ a))_k = sqrt(g) eps_{ijk} tau^i a^j with both factors raised
    tr = ginv @ tau
    ar = np.einsum("ij,j...->i...", ginv, a)
    cross = np.stack([tr[1] * ar[2] - tr[2] * ar[1], tr[2] * ar[0] - tr[0] * ar[2], tr[0] * ar[1] - tr[1] * ar[0]])
    one_part = vol * cross - np.einsum("k,...->k...", tau, np.asarray(phi))
    return one_part, zero_part


def pointwise_sq(grid, vals):
    """|psi|^2 at each node for values of shape (4, 3, *grid)."""
    tot = np.sum(np.abs(vals[3]) ** 2, axis=0)
    for k in range(3):
        tot = tot + np.sum(np.abs(vals[k]) ** 2, axis=0) / np.asarray(grid.scale(k)) ** 2
    return tot


def _br(x, y):
    return cbracket(x, y, axis=0)


def _d_form(grid, A, a):
    """(d_A a)_ij = D_i a_j - D_j a_i + [A_i, a_j] - [A_j, a_i], stored as slot k."""
    out = []
    for i, j, _ in CYCLIC:
        t = grid.deriv(a[j], i) - grid.deriv(a[i], j)
        if A is not None:
            t = t + _br(A[i], a[j]) - _br(A[j], a[i])
        out.append(t)
    return np.stack(out)


def _star2(grid, two):
    return np.stack([two[k] * np.asarray(grid.scale(k)) ** 2 / grid.sqrt_g for k in range(3)])


def _d_func(grid, A, f):
    out = [grid.deriv(f, k) for k in range(3)]
    if A is not None:
        out = [out[k] + _br(A[k], f) for k in range(3)]
    return np.stack(out)


def _codiff(grid, A, a):
    """*d_A*a: (1/sqrt g) sum_k D_k(sqrt g a_k / h_k^2) + [A_k, a_k] / h_k^2."""
    sg = grid.sqrt_g
    tot = 0
    for k in range(3):
        hk2 = np.asarray(grid.scale(k)) ** 2
        tot = tot + grid.deriv(sg * a[k] / hk2, k) / sg
        if A is not None:
            tot = tot + _br(A[k], a[k]) / hk2
    return tot


def curvature(A: ConfigField, scheme: str | None = None):
    """F = dA + 1/2 [A ^ A] in slots (F_23, F_31, F_12).

    ``scheme`` overrides the Cartesian difference order.  Returns the array
    and metadata recording whether one-sided boundary differences were used.
    """
    grid = A.grid
    if scheme is not None and grid.kind == "cartesian" and scheme != grid.scheme:
        grid = CartesianGrid(grid.origin, grid.spacing, grid.shape, scheme, grid.rho)
    a = A.a
    out = []
    for i, j, _ in CYCLIC:
        out.append(grid.deriv(a[j], i) - grid.deriv(a[i], j) + _br(a[i], a[j]))
    meta = {"one_sided_boundary": grid.kind == "cartesian"}
    return np.stack(out), meta


def bogomolny_residual(Psi: ConfigField) -> np.ndarray:
    """V = *F^A - d_A Phi (coordinate-coframe components)."""
    grid = Psi.grid
    F, _ = curvature(Psi)
    return _star2(grid, F) - _d_func(grid, Psi.a, Psi.phi)


def apply_linearization(Psi: ConfigField, psi: ConfigField) -> np.ndarray:
    """L_Psi psi = *d_A a - d_A phi + [Phi, a]."""
    grid = Psi.grid
    A, Phi = Psi.a, Psi.phi
    out = _star2(grid, _d_form(grid, A, psi.a)) - _d_func(grid, A, psi.phi)
    return out + np.stack([_br(Phi, psi.a[k]) for k in range(3)])


def quadratic(psi1: ConfigField, psi2: ConfigField) -> ConfigField:
    """Symmetrized Q: 1/2 *[a1 ^ a2] - 1/2([a1, phi2] + [a2, phi1]); no 0-form part."""
    grid = psi1.grid
    a1, a2 = psi1.a, psi2.a
    two = np.stack([0.5 * (_br(a1[i], a2[j]) - _br(a1[j], a2[i])) for i, j, _ in CYCLIC])
    one = _star2(grid, two)
    one = one - 0.5 * np.stack([_br(a1[k], psi2.phi) + _br(a2[k], psi1.phi) for k in range(3)])
    return ConfigField.from_parts(grid, one, np.zeros_like(psi1.phi * psi2.phi))


def apply_extended(Psi: ConfigField, psi: ConfigField, dagger: bool = False) -> ConfigField:
    """Extended linearization (Dirac operator plus gauge-fixing row).

    1-form part *d_A a - d_A phi +/- [Phi, a]; 0-form part *d_A*a +/- [Phi, phi];
    the adjoint flips the sign of [Phi, .].
    """
    grid = Psi.grid
    A, Phi = Psi.a, Psi.phi
    sgn = -1.0 if dagger else 1.0
    one = _star2(grid, _d_form(grid, A, psi.a)) - _d_func(grid, A, psi.phi)
    one = one + sgn * np.stack([_br(Phi, psi.a[k]) for k in range(3)])
    zero = _codiff(grid, A, psi.a) + sgn * _br(Phi, psi.phi)
    return ConfigField.from_parts(grid, one, zero)


def gauge_functional(Psi: ConfigField, psi: ConfigField):
    """*d_A*a + [Phi, phi] for the corrected field (background Psi)."""
    return _codiff(Psi.grid, Psi.a, psi.a) + _br(Psi.phi, psi.phi)


# ------------------------------------------------------------------ norms

def tube_components(grid: TubularGrid, vals):
    """Components (a1, a2, a3, phi) in the orthonormal frame dz1, dz2, ds."""
    c, s = np.cos(grid.theta), np.sin(grid.theta)
    rho = grid.rho
    a1 = c * vals[0] - s * vals[1] / rho
    a2 = s * vals[0] + c * vals[1] / rho
    return np.stack([a1, a2, vals[2], vals[3]])


def coframe_components(grid: TubularGrid, comps):
    """Inverse of ``tube_components``."""
    c, s = np.cos(grid.theta), np.sin(grid.theta)
    rho = grid.rho
    a_rho = c * comps[0] + s * comps[1]
    a_th = rho * (-s * comps[0] + c * comps[1])
    return np.stack([a_rho, a_th, comps[2], comps[3]])


def _perp(x):
    out = np.array(x, copy=True)
    out[..., 0, :, :, :] = 0
    return out


def _sq(x):
    return np.sum(np.abs(x) ** 2, axis=(0, 1))


def _sigma_bracket(x):
    sig = np.zeros_like(x)
    sig[:, 0] = 1.0
    return cbracket(sig, x, axis=1)


NORM_KINDS = ("L2_N", "Htilde_N", "H_N", "L2_global", "H_global", "boundary")


def norm(psi: ConfigField, kind: str, eps: float | None = None, gamma: float = 0.0, M: float = 0.0,
         fiducial: ConfigField | None = None, rho0: float | None = None, squared: bool = True):
    """Weighted norms of a configuration (squared by default).

    Tube kinds (L2_N, Htilde_N, H_N) use the orthonormal frame components
    and the model fiducial (gamma, M).  Global kinds weight by
    rho_eps = min(rho, eps) and need ``grid.rho``; on a Cartesian grid the
    background connection comes from ``fiducial``.  ``boundary`` returns
    rho0 * int |psi(rho0)|^2 d theta ds.
    """
    grid = psi.grid
    if kind not in NORM_KINDS:
        raise ValueError(f"unknown norm kind {kind}")
    if kind == "boundary":
        if grid.kind != "tubular":
            raise ValueError("boundary norm needs a tubular grid")
        comps = tube_components(grid, psi.values)
        edge = grid.interpolate_rho(comps, rho0)
        val = rho0 * grid.surface_weights() * float(np.sum(np.abs(edge) ** 2))
        return val if squared else np.sqrt(val)
    if grid.kind == "tubular":
        if eps is not None and eps > grid.eps * (1 + 1e-12):
            raise ValueError("eps larger than the tube radius")
        w = grid.volume_weights()
        rho = grid.rho
        comps = tube_components(grid, psi.values)
        if eps is not None and eps < grid.eps * (1 - 1e-12) and kind in ("L2_N", "Htilde_N", "H_N"):
            raise ValueError("tube kinds integrate over the full tubular grid; build it with eps")
        if kind in ("L2_N",):
            val = np.sum(w * rho * _sq(comps))
        elif kind in ("L2_global",):
            val = np.sum(w * np.minimum(rho, eps) * _sq(comps))
        else:
            grads = [grid.deriv(comps, k) for k in range(3)]
            if kind == "Htilde_N":
                dens = sum(_sq(g) / np.asarray(grid.scale(k)) ** 2 for k, g in enumerate(grads))
                val = np.sum(w * (rho * dens + _sq(_perp(comps)) / rho))
            else:
                grads[1] = grads[1] + gamma * _sigma_bracket(comps)
                dens = sum(_sq(g) / np.asarray(grid.scale(k)) ** 2 for k, g in enumerate(grads))
                dens = dens + M ** 2 * _sq(_sigma_bracket(comps))
                weight = rho if kind == "H_N" else np.minimum(rho, eps)
                val = np.sum(w * weight * dens)
    else:
        if kind in ("L2_N", "Htilde_N", "H_N"):
            raise ValueError("tube norms need a tubular grid")
        if grid.rho is None:
            raise ValueError("global norms need the distance to the knot on the grid")
        w = grid.volume_weights()
        weight = np.minimum(grid.rho, eps)
        vals = psi.values
        if kind == "L2_global":
            val = np.sum(w * weight * _sq(vals))
        else:
            A = fiducial.a if fiducial is not None else None
            Phi = fiducial.phi if fiducial is not None else np.zeros_like(vals[3])
            dens = 0
            for k in range(3):
                d = grid.deriv(vals, k)
                if A is not None:
                    d = d + cbracket(np.broadcast_to(A[k], vals.shape), vals, axis=1)
                dens = dens + _sq(d)
            dens = dens + _sq(cbracket(np.broadcast_to(Phi, vals.shape), vals, axis=1))
            val = np.sum(w * weight * dens)
    val = float(np.real(val))
    return val if squared else np.sqrt(val)


def weighted_inner(grid, x, y, weight=None):
    """sum_nodes w * weight * <x, y> for value arrays of shape (4, 3, *grid)."""
    w = grid.volume_weights()
    if weight is not None:
        w = w * weight
    dens = np.conj(x[3]) * y[3]
    dens = np.sum(dens, axis=0)
    for k in range(3):
        dens = dens + np.sum(np.conj(x[k]) * y[k], axis=0) / np.asarray(grid.scale(k)) ** 2
    return np.sum(w * dens)


# ------------------------------------------------------------------ file IO

def save_field(psi: ConfigField, path, extra: dict | None = None):
    """Write <path>.json manifest and <path>.bin raw little-endian float64."""
    if np.iscomplexobj(psi.values):
        raise ValueError("only real su(2)-valued fields can be written")
    path = Path(path)
    base = path.with_suffix("")
    manifest = dict(psi.grid.manifest())
    manifest.update({"layout": "node-major, 9 one-form reals then 3 zero-form reals",
                     "dtype": "<f8", "data": base.with_suffix(".bin").name})
    manifest.update(psi.meta)
    if extra:
        manifest.update(extra)
    data = np.moveaxis(psi.values.reshape((12,) + tuple(psi.grid.shape)), 0, -1)
    data.astype("<f8").tofile(base.with_suffix(".bin"))
    base.with_suffix(".json").write_text(json.dumps(manifest, indent=2))
    return base.with_suffix(".json")


def load_field(path, tube=None) -> ConfigField:
    path = Path(path)
    base = path.with_suffix("")
    man = json.loads(base.with_suffix(".json").read_text())
    if man["region"] == "cartesian":
        grid = CartesianGrid(man["origin"], man["spacing"], man["shape"], man.get("scheme", "fd2"))
    elif man["region"] == "tubular":
        n_rho, n_th, n_s = man["shape"]
        grid = TubularGrid(man["eps"], n_rho, n_th, n_s, man["length"], man["rho_min"], tube)
    else:
        raise ValueError(f"unknown region {man['region']}")
    raw = np.fromfile(base.with_suffix(".bin"), dtype="<f8")
    expect = 12 * int(np.prod(grid.shape))
    if raw.size != expect:
        raise ValueError(f"field file has {raw.size} values, expected {expect}")
    vals = np.moveaxis(raw.reshape(tuple(grid.shape) + (12,)), -1, 0).reshape((4, 3) + tuple(grid.shape))
    keep = {k: v for k, v in man.items() if k in ("gamma", "M", "delta", "eps")}
    return ConfigField(grid, vals, keep)
