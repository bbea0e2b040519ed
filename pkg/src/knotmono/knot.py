"""Closed curves, normal frames, tubular coordinates and the knot-adapted metric."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree
from scipy.stats import qmc

from ._accel import biot_savart


class OutsideTubeError(ValueError):
    """Raised when a point is not inside the tubular neighbourhood."""


def smoothstep(t):
    """Quintic smoothstep 6t^5 - 15t^4 + 10t^3 clipped to [0, 1]."""
    t = np.clip(t, 0.0, 1.0)
    return t * t * t * (t * (6.0 * t - 15.0) + 10.0)


def smoothstep_deriv(t):
    inside = (t > 0.0) & (t < 1.0)
    t = np.clip(t, 0.0, 1.0)
    return np.where(inside, 30.0 * t * t * (t - 1.0) ** 2, 0.0)


class _FourierCurve:
    """Periodic vector function given by samples at uniform parameter values."""

    def __init__(self, samples: np.ndarray, period: float):
        self.samples = np.asarray(samples, dtype=float)
        self.period = float(period)
        n = self.samples.shape[0]
        self.coef = np.fft.rfft(self.samples, axis=0) / n
        self.freq = np.arange(self.coef.shape[0])
        # the Nyquist term of an even-length series is split symmetrically
        self.weights = np.full(self.coef.shape[0], 2.0)
        self.weights[0] = 1.0
        if n % 2 == 0:
            self.weights[-1] = 1.0

    def __call__(self, s, order: int = 0, chunk: int = 4096):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        w = 2.0 * np.pi / self.period
        fac = (1j * w * self.freq) ** order * self.weights
        out = np.empty(s.shape + (self.samples.shape[1],))
        flat_s = s.reshape(-1)
        flat_out = out.reshape(-1, self.samples.shape[1])
        for lo in range(0, flat_s.size, chunk):
            ph = np.exp(1j * w * np.outer(flat_s[lo:lo + chunk], self.freq))
            # real part of the two-sided series
            flat_out[lo:lo + chunk] = np.real((ph * fac) @ self.coef)
        return out


@dataclass(frozen=True)
class KnotCurve:
    """Unit-speed closed curve sampled at uniform arc length."""

    samples: np.ndarray
    length: float
    _series: _FourierCurve = field(repr=False, compare=False, default=None)

    def __post_init__(self):
        if self._series is None:
            object.__setattr__(self, "_series", _FourierCurve(self.samples, self.length))

    @property
    def n(self) -> int:
        return self.samples.shape[0]

    def s_grid(self) -> np.ndarray:
        return np.arange(self.n) * self.length / self.n

    def position(self, s):
        return self._series(np.mod(s, self.length), 0)

    def tangent(self, s):
        return self._series(np.mod(s, self.length), 1)

    def d2(self, s):
        return self._series(np.mod(s, self.length), 2)

    def d3(self, s):
        return self._series(np.mod(s, self.length), 3)

    def closure_error(self) -> float:
        return float(np.linalg.norm(self.position(0.0) - self.position(self.length)))

    def speed_error(self) -> float:
        return float(np.max(np.abs(np.linalg.norm(self.tangent(self.s_grid()), axis=-1) - 1.0)))

    def max_curvature(self) -> float:
        s = np.linspace(0.0, self.length, 4 * self.n, endpoint=False)
        return float(np.max(np.linalg.norm(self.d2(s), axis=-1)))

    def injectivity_radius(self) -> float:
        """min(0.5 / max|K''|, half the least distance of non-adjacent samples)."""
        kmax = max(self.max_curvature(), 1e-12)
        pts = self.samples
        s = self.s_grid()
        gap = np.pi / kmax
        best = np.inf
        for i in range(self.n):
            ds = np.abs(s - s[i])
            ds = np.minimum(ds, self.length - ds)
            far = ds >= gap
            if np.any(far):
                best = min(best, float(np.min(np.linalg.norm(pts[far] - pts[i], axis=1))))
        return float(min(0.5 / kmax, 0.5 * best))

    # ------------------------------------------------------------ factories
    @staticmethod
    def from_function(func, n: int = 256, dense: int = 4096) -> "KnotCurve":
        """Reparametrize a periodic map [0, 1) -> R^3 by arc length."""
        t = np.arange(dense) / dense
        raw = _FourierCurve(np.asarray(func(t), dtype=float), 1.0)
        speed_t = np.linalg.norm(raw(t, 1), axis=-1)
        # arc length s(t) through the Fourier series of the speed
        sp = np.fft.rfft(speed_t) / dense
        length = float(sp[0].real)
        k = np.arange(1, sp.size)
        wt = np.full(k.size, 2.0)
        if dense % 2 == 0:
            wt[-1] = 1.0

        def s_of(tt):
            ph = np.exp(2j * np.pi * np.outer(tt, k))
            return length * tt + np.real(ph @ (wt * sp[1:] / (2j * np.pi * k)) - np.sum(wt * sp[1:] / (2j * np.pi * k)).real)

        def speed(tt):
            return np.linalg.norm(raw(tt, 1), axis=-1)

        target = np.arange(n) * length / n
        tt = target / length
        for _ in range(30):
            err = s_of(tt) - target
            tt = tt - err / speed(tt)
            if np.max(np.abs(err)) < 1e-14 * max(length, 1.0):
                break
        return KnotCurve(raw(tt, 0), length)

    @staticmethod
    def from_samples(points, n: int = 256) -> "KnotCurve":
        pts = np.asarray(points, dtype=float)
        if np.linalg.norm(pts[0] - pts[-1]) < 1e-12 * (1 + np.abs(pts).max()):
            pts = pts[:-1]
        series = _FourierCurve(pts, 1.0)
        return KnotCurve.from_function(lambda t: series(t, 0), n=n, dense=max(4 * pts.shape[0], 2048))

    @staticmethod
    def unknot(radius: float = 1.0, n: int = 256) -> "KnotCurve":
        s = np.arange(n) / n * 2 * np.pi
        pts = radius * np.stack([np.cos(s), np.sin(s), np.zeros_like(s)], axis=1)
        return KnotCurve(pts, 2 * np.pi * radius)

    @staticmethod
    def torus_knot(p: int = 2, q: int = 3, big: float = 1.0, small: float = 0.4, n: int = 512) -> "KnotCurve":
        def f(t):
            a = 2 * np.pi * t
            r = big + small * np.cos(q * a)
            return np.stack([r * np.cos(p * a), r * np.sin(p * a), small * np.sin(q * a)], axis=-1)

        return KnotCurve.from_function(f, n=n, dense=8 * n)

    @staticmethod
    def trefoil(n: int = 512) -> "KnotCurve":
        return KnotCurve.torus_knot(2, 3, n=n)

    @staticmethod
    def load(path) -> "KnotCurve":
        data = json.loads(Path(path).read_text())
        pts = np.asarray(data["samples"] if isinstance(data, dict) else data, dtype=float)
        curve = KnotCurve.from_samples(pts, n=max(64, pts.shape[0]))
        if isinstance(data, dict) and "length" in data:
            if abs(curve.length - float(data["length"])) > 1e-3 * curve.length:
                raise ValueError("declared length disagrees with the resampled curve")
        return curve


# ------------------------------------------------------------------ frames

def _rotate_about(v, axis, ang):
    c, s = np.cos(ang)[..., None], np.sin(ang)[..., None]
    return v * c + np.cross(axis, v) * s + axis * np.sum(axis * v, -1, keepdims=True) * (1 - c)


@dataclass(frozen=True)
class FrameField:
    curve: KnotCurve
    e1_samples: np.ndarray
    twist_correction: float
    rmf_closure_angle: float
    _e1: _FourierCurve = field(repr=False, compare=False, default=None)

    def __post_init__(self):
        if self._e1 is None:
            object.__setattr__(self, "_e1", _FourierCurve(self.e1_samples, self.curve.length))

    def frame(self, s):
        """(T, e1, e2) at arc length s, re-orthonormalized against T."""
        s = np.mod(s, self.curve.length)
        t = self.curve.tangent(s)
        t = t / np.linalg.norm(t, axis=-1, keepdims=True)
        e1 = self._e1(s, 0)
        e1 = e1 - np.sum(e1 * t, -1, keepdims=True) * t
        e1 = e1 / np.linalg.norm(e1, axis=-1, keepdims=True)
        return t, e1, np.cross(t, e1)

    def derivatives(self, s):
        """Curvatures kappa1, kappa2 and twist rate omega with
        K'' = -kappa1 e1 - kappa2 e2 and e1' = kappa1 T + omega e2."""
        t, e1, e2 = self.frame(s)
        k2 = self.curve.d2(s)
        de1 = self._e1(np.mod(s, self.curve.length), 1)
        return -np.sum(k2 * e1, -1), -np.sum(k2 * e2, -1), np.sum(de1 * e2, -1)

    def closure_error(self) -> float:
        _, a, b = self.frame(np.array([0.0]))
        _, c, d = self.frame(np.array([self.curve.length]))
        return float(max(np.abs(a - c).max(), np.abs(b - d).max()))


def rmf_double_reflection(curve: KnotCurve, n: int, e1_start=None):
    """Rotation-minimizing frame transported once around the curve (n steps)."""
    s = np.arange(n + 1) * curve.length / n
    x = curve.position(s)
    t = curve.tangent(s)
    t /= np.linalg.norm(t, axis=1, keepdims=True)
    if e1_start is None:
        k2 = curve.d2(np.array([0.0]))[0]
        if np.linalg.norm(k2) > 1e-8:
            r0 = -k2 / np.linalg.norm(k2)
        else:
            trial = np.eye(3)[np.argmin(np.abs(t[0]))]
            r0 = trial - trial.dot(t[0]) * t[0]
    else:
        r0 = np.asarray(e1_start, float)
    r0 = r0 - r0.dot(t[0]) * t[0]
    r = np.empty((n + 1, 3))
    r[0] = r0 / np.linalg.norm(r0)
    for i in range(n):
        v1 = x[i + 1] - x[i]
        c1 = v1.dot(v1)
        rl = r[i] - (2.0 / c1) * v1.dot(r[i]) * v1
        tl = t[i] - (2.0 / c1) * v1.dot(t[i]) * v1
        v2 = t[i + 1] - tl
        c2 = v2.dot(v2)
        r[i + 1] = rl - (2.0 / c2) * v2.dot(rl) * v2 if c2 > 0 else rl
    return s, t, r


def _signed_angle(a, b, axis):
    return float(np.arctan2(np.dot(np.cross(a, b), axis), np.dot(a, b)))


def linking_number(curve_a: np.ndarray, curve_b: np.ndarray) -> float:
    """Gauss linking integral of two closed polygons (midpoint rule)."""
    da = np.roll(curve_a, -1, axis=0) - curve_a
    db = np.roll(curve_b, -1, axis=0) - curve_b
    ma = curve_a + 0.5 * da
    mb = curve_b + 0.5 * db
    total = 0.0
    for i in range(ma.shape[0]):
        r = ma[i] - mb
        d3 = np.linalg.norm(r, axis=1) ** 3
        total += np.sum(np.einsum("j,ij->i", da[i], np.cross(db, r)) / d3)
    return total / (4 * np.pi)


def build_frame(curve: KnotCurve, n: int = 1024, tube_radius: float | None = None,
                seifert: bool = True) -> FrameField:
    """Rotation-minimizing frame with a linear twist making it close up.

    The integer number of extra turns is chosen so that the push-off along
    e1 has linking number zero with the knot (Seifert framing); then the
    tubular angle form d(theta) extends to a closed form off the knot.
    """
    if n < 16:
        raise ValueError("need n >= 16 frame samples")
    inj = curve.injectivity_radius()
    if tube_radius is not None and tube_radius >= inj:
        raise ValueError(f"tube radius {tube_radius} exceeds injectivity radius estimate {inj:.4g}")
    s, t, r = rmf_double_reflection(curve, n)
    phi0 = _signed_angle(r[0], r[-1], t[0])

    def corrected(total):
        ang = -total * s[:-1] / curve.length
        return _rotate_about(r[:-1], t[:-1], ang)

    turns = 0
    if seifert:
        e1 = corrected(phi0)
        push = 0.25 * inj
        lk = linking_number(curve.position(s[:-1]), curve.position(s[:-1]) + push * e1)
        turns = int(np.rint(lk))
    total = phi0 + 2 * np.pi * turns
    e1 = corrected(total)
    if seifert and turns != 0:
        lk = linking_number(curve.position(s[:-1]), curve.position(s[:-1]) + 0.25 * inj * e1)
        if abs(lk) > 0.25:
            e1 = corrected(phi0 - 2 * np.pi * turns)
            total = phi0 - 2 * np.pi * turns
    return FrameField(curve, e1, float(total), float(phi0))


# ------------------------------------------------------- tubular coordinates

@dataclass(frozen=True)
class TubularCoords:
    s: np.ndarray
    rho: np.ndarray
    theta: np.ndarray


class Tube:
    """Curve + frame with conversions between R^3 and (s, rho, theta)."""

    def __init__(self, curve: KnotCurve, frame: FrameField | None = None):
        self.curve = curve
        self.frame = frame if frame is not None else build_frame(curve)
        self.rho_max = curve.injectivity_radius()
        self._dense_s = np.linspace(0, curve.length, 8 * curve.n, endpoint=False)
        self._tree = cKDTree(curve.position(self._dense_s))

    @property
    def length(self) -> float:
        return self.curve.length

    def to_cartesian(self, s, rho, theta):
        s, rho, theta = np.broadcast_arrays(np.asarray(s, float), np.asarray(rho, float), np.asarray(theta, float))
        _, e1, e2 = self.frame.frame(s.reshape(-1))
        k = self.curve.position(s.reshape(-1))
        rr, th = rho.reshape(-1, 1), theta.reshape(-1, 1)
        x = k + rr * (np.cos(th) * e1 + np.sin(th) * e2)
        return x.reshape(s.shape + (3,))

    def closest_s(self, x):
        x = np.asarray(x, float).reshape(-1, 3)
        _, idx = self._tree.query(x)
        s = self._dense_s[idx]
        for _ in range(30):
            d = x - self.curve.position(s)
            k1 = self.curve.tangent(s)
            k2 = self.curve.d2(s)
            f = np.sum(d * k1, -1)
            fp = -np.sum(k1 * k1, -1) + np.sum(d * k2, -1)
            step = f / fp
            s = s - step
            if np.max(np.abs(step)) < 1e-15 * max(1.0, self.length):
                break
        return np.mod(s, self.length)

    def from_cartesian(self, x, check: bool = True) -> TubularCoords:
        x = np.asarray(x, float)
        shape = x.shape[:-1]
        flat = x.reshape(-1, 3)
        s = self.closest_s(flat)
        _, e1, e2 = self.frame.frame(s)
        z = flat - self.curve.position(s)
        z1, z2 = np.sum(z * e1, -1), np.sum(z * e2, -1)
        rho = np.hypot(z1, z2)
        if check and np.any(rho >= self.rho_max):
            raise OutsideTubeError("outside tubular neighborhood")
        theta = np.mod(np.arctan2(z2, z1), 2 * np.pi)
        return TubularCoords(s.reshape(shape), rho.reshape(shape), theta.reshape(shape))

    def distance(self, x):
        """Distance to the knot (exact closest point, no tube check)."""
        x = np.asarray(x, float)
        flat = x.reshape(-1, 3)
        s = self.closest_s(flat)
        return np.linalg.norm(flat - self.curve.position(s), axis=-1).reshape(x.shape[:-1])

    # ------------------------------------------------------------ metric
    def tube_jacobian(self, s, rho, theta):
        """Columns d x/d s, e1, e2 at tubular point (s, z1, z2)."""
        t, e1, e2 = self.frame.frame(s)
        k1, k2, om = self.frame.derivatives(s)
        z1 = (rho * np.cos(theta))[..., None]
        z2 = (rho * np.sin(theta))[..., None]
        # e1' = k1 T + om e2, e2' = k2 T - om e1
        dxds = t * (1 + z1 * k1[..., None] + z2 * k2[..., None]) + om[..., None] * (z1 * e2 - z2 * e1)
        return np.stack([dxds, e1, e2], axis=-1)

    def metric_at(self, x, delta: float):
        """g_delta in Cartesian components; identity outside N_{2 delta}."""
        if 2 * delta >= self.rho_max:
            raise ValueError("delta too large for the tubular neighbourhood")
        x = np.asarray(x, float)
        shape = x.shape[:-1]
        flat = x.reshape(-1, 3)
        g = np.broadcast_to(np.eye(3), (flat.shape[0], 3, 3)).copy()
        dist = self.distance(flat)
        near = dist < 2 * delta
        if np.any(near):
            c = self.from_cartesian(flat[near])
            jac = self.tube_jacobian(c.s, c.rho, c.theta)
            jinv = np.linalg.inv(jac)
            gt = np.swapaxes(jinv, -1, -2) @ jinv
            chi = 1.0 - smoothstep((c.rho - delta) / delta)
            g[near] = (1 - chi)[:, None, None] * np.eye(3) + chi[:, None, None] * gt
        return g.reshape(shape + (3, 3))

    def metric_deviation_stats(self, delta: float, n_samples: int, seed: int = 0,
                               fd_step: float | None = None, region: str = "tube"):
        """sup |g_delta - g_0| / rho and sup |grad g_delta| over sampled points.

        region='tube' samples N_{2 delta}; region='outside' samples the shell
        2 delta < rho < 3 delta where both quantities must vanish.
        """
        if n_samples < 100:
            raise ValueError("n_samples >= 100 required")
        u = qmc.Halton(d=3, scramble=True, seed=seed).random(n_samples)
        s = u[:, 0] * self.length
        th = u[:, 1] * 2 * np.pi
        if region == "tube":
            rho = 2 * delta * np.maximum(u[:, 2], 1e-6)
        else:
            rho = delta * (2.0 + 1e-9 + 0.99 * u[:, 2])
        x = self.to_cartesian(s, rho, th)
        g = self.metric_at(x, delta)
        dev = np.linalg.norm(g - np.eye(3), ord=2, axis=(-2, -1)) / rho
        h = fd_step if fd_step is not None else 1e-4 * delta
        grad = np.zeros(n_samples)
        acc = np.zeros((n_samples, 3, 3, 3))
        for k in range(3):
            e = np.zeros(3)
            e[k] = h
            acc[..., k] = (self.metric_at(x + e, delta) - self.metric_at(x - e, delta)) / (2 * h)
        grad = np.sqrt(np.sum(acc ** 2, axis=(1, 2, 3)))
        return float(dev.max()), float(grad.max())

    # ------------------------------------------------------------ angle form
    def dtheta(self, x):
        """Cartesian components of d(theta) of the tubular chart."""
        c = self.from_cartesian(x)
        jac = self.tube_jacobian(c.s, c.rho, c.theta)
        jinv = np.linalg.inv(jac)
        # rows of J^{-1}: ds, dz1, dz2 ; dtheta = (z1 dz2 - z2 dz1)/rho^2
        z1 = (c.rho * np.cos(c.theta))[..., None]
        z2 = (c.rho * np.sin(c.theta))[..., None]
        return (z1 * jinv[..., 2, :] - z2 * jinv[..., 1, :]) / (c.rho[..., None] ** 2)

    def curve_quadrature(self, n: int | None = None):
        n = n or self.curve.n
        s = np.arange(n) * self.length / n
        return self.curve.position(s), self.curve.tangent(s), np.full(n, self.length / n)

    def biot_savart_form(self, x, n: int | None = None):
        k, t, w = self.curve_quadrature(n)
        x = np.asarray(x, float)
        return biot_savart(x.reshape(-1, 3), k, t, w).reshape(x.shape)
