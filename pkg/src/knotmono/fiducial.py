"""Fiducial configurations: the closed linking form, the model fiducial
field, and the closed-form charge-one monopole.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._accel import biot_savart
from .fields import CYCLIC, ConfigField
from .knot import Tube, smoothstep, smoothstep_deriv
from .su2 import SIGMA, to_coords

E21 = np.array([[0, 0], [1, 0]], dtype=complex)
FLIP = np.array([[0, 1], [-1, 0]], dtype=complex)  # conjugation by FLIP sends sigma to -sigma


class SingularPointError(ValueError):
    pass


def _wrap(x):
    return np.mod(x + np.pi, 2 * np.pi) - np.pi


# -------------------------------------------------------------- linking form

class LinkingForm:
    """Closed 1-form omega on R^3 minus K with bounded support, omega = d theta on N_{2 delta}.

    omega = d P for the multivalued potential
        P = Theta - chi_tube * f - chi_far * Theta
    where Theta is half the (negated) solid angle of the knot, so that
    d Theta is half the Biot-Savart field, f = Theta - theta is single
    valued on N_{3 delta} (Seifert framing), chi_tube = 1 on N_{2 delta} and
    0 outside N_{3 delta}, and chi_far switches on between r_far and 2 r_far.
    """

    def __init__(self, tube: Tube, delta: float, r_far: float | None = None, n_quad: int | None = None):
        if 3 * delta >= tube.rho_max:
            raise ValueError("3 delta must stay below the tube radius")
        self.tube = tube
        self.delta = float(delta)
        curve = tube.curve
        n = n_quad or 4 * curve.n
        s = np.arange(n) * curve.length / n
        self._k = curve.position(s)
        self._t = curve.tangent(s)
        self._w = np.full(n, curve.length / n)
        self.center = self._k.mean(axis=0)
        self.extent = float(np.max(np.linalg.norm(self._k - self.center, axis=1)))
        self.r_far = float(r_far) if r_far is not None else 2.0 * (self.extent + 3 * delta)
        if self.r_far <= self.extent + 3 * delta:
            raise ValueError("r_far must exceed the knot extent plus 3 delta")
        self._lift_s = np.linspace(0.0, curve.length, 513)[:-1]
        base = tube.to_cartesian(self._lift_s, np.full_like(self._lift_s, delta), np.zeros_like(self._lift_s))
        raw = self.theta_potential(base)
        lift = np.unwrap(np.append(raw, raw[0]))
        # zero linking of the pushed-off longitude makes the lift periodic
        self.lift_winding = int(round((lift[-1] - lift[0]) / (2 * np.pi)))
        self._lift = lift[:-1]

    # -- pieces
    def theta_potential(self, x):
        """Theta mod 2 pi in (-pi, pi]; d Theta = half the Biot-Savart field."""
        x = np.asarray(x, float)
        flat = x.reshape(-1, 3)
        out = np.empty(flat.shape[0])
        dirs = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, -1.0], [1.0, 0.0, 0.0], [-1.0, 0.0, 0.0],
                         [0.0, 1.0, 0.0], [0.0, -1.0, 0.0]])
        for lo in range(0, flat.shape[0], 512):
            p = flat[lo:lo + 512]
            r = self._k[None] - p[:, None]
            rn = np.linalg.norm(r, axis=-1)
            if np.any(rn < 1e-12):
                raise SingularPointError("point on the knot")
            # pick, per point, the string direction farthest from every chord
            cosang = np.einsum("ijk,dk->ijd", r, dirs) / rn[..., None]
            best = np.argmin(cosang.max(axis=1), axis=1)
            nvec = dirs[best]
            denom = rn * (rn - np.einsum("ijk,ik->ij", r, nvec))
            g = np.cross(nvec[:, None, :], r) / denom[..., None]
            omega_n = np.einsum("ijk,jk,j->i", g, self._t, self._w)
            out[lo:lo + 512] = _wrap(-0.5 * omega_n)
        return out.reshape(x.shape[:-1])

    def omega_bs(self, x):
        x = np.asarray(x, float)
        return biot_savart(x.reshape(-1, 3), self._k, self._t, self._w).reshape(x.shape)

    def _f_lift(self, s):
        return np.interp(np.mod(s, self.tube.length), self._lift_s, self._lift, period=self.tube.length)

    def chi_tube(self, rho):
        return 1.0 - smoothstep((rho - 2 * self.delta) / self.delta)

    def _far(self, x):
        d = x - self.center
        r = np.linalg.norm(d, axis=-1)
        t = (r - self.r_far) / self.r_far
        chi = smoothstep(t)
        grad = (smoothstep_deriv(t) / self.r_far / np.maximum(r, 1e-300))[..., None] * d
        return chi, grad

    # -- evaluation
    def __call__(self, x, return_potential: bool = False):
        """Cartesian components of omega (and optionally the potential mod 2 pi)."""
        x = np.asarray(x, float)
        shape = x.shape[:-1]
        flat = x.reshape(-1, 3)
        dist = self.tube.distance(flat)
        if np.any(dist < 1e-12):
            raise SingularPointError("point on the knot")
        omega = np.zeros_like(flat)
        pot = np.zeros(flat.shape[0])
        chi_f, grad_f = self._far(flat)
        near = dist < 3 * self.delta
        inner = dist < 2 * self.delta
        active = chi_f < 1.0
        # pure Biot-Savart where no cutoff is active
        need_bs = active & ~inner
        if np.any(need_bs):
            omega[need_bs] = self.omega_bs(flat[need_bs])
        need_pot = (need_bs & (chi_f > 0)) | near | return_potential
        theta_pot = np.zeros(flat.shape[0])
        if np.any(need_pot & active):
            sel = need_pot & active
            theta_pot[sel] = self.theta_potential(flat[sel])
        if np.any(near):
            c = self.tube.from_cartesian(flat[near])
            dth = self.tube.dtheta(flat[near])
            chi = self.chi_tube(c.rho)
            lift = self._f_lift(c.s)
            f = lift + _wrap(theta_pot[near] - c.theta - lift)
            # d chi_tube = chi'(rho) d rho with d rho the radial unit covector
            _, e1, e2 = self.tube.frame.frame(c.s)
            drho = np.cos(c.theta)[:, None] * e1 + np.sin(c.theta)[:, None] * e2
            dchi = (-smoothstep_deriv((c.rho - 2 * self.delta) / self.delta) / self.delta)[:, None] * drho
            bs = omega[near]
            omega[near] = (1 - chi)[:, None] * bs + chi[:, None] * dth - f[:, None] * dchi
            pot[near] = c.theta + (1 - chi) * f
        far_part = ~near
        pot[far_part] = theta_pot[far_part]
        # far truncation (the region there is simply connected, Theta small)
        fz = chi_f > 0
        if np.any(fz):
            th = _wrap(theta_pot[fz])
            omega[fz] = (1 - chi_f[fz])[:, None] * omega[fz] - th[:, None] * grad_f[fz]
            pot[fz] = (1 - chi_f[fz]) * th
        omega[~active] = 0.0
        pot[~active] = 0.0
        if return_potential:
            return omega.reshape(shape + (3,)), _wrap(pot).reshape(shape)
        return omega.reshape(shape + (3,))

    def potential(self, x):
        return self(x, return_potential=True)[1]

    def circulation(self, loop_points):
        """Line integral of omega around a closed polygon (midpoint rule)."""
        p = np.asarray(loop_points, float)
        seg = np.roll(p, -1, axis=0) - p
        mid = p + 0.5 * seg
        return float(np.sum(np.einsum("ij,ij->i", self(mid), seg)))


def meridian_loop(tube: Tube, s: float, rho: float, n: int = 400):
    th = 2 * np.pi * np.arange(n) / n
    return tube.to_cartesian(np.full(n, s), np.full(n, rho), th)


# ----------------------------------------------------------- model fiducial

@dataclass(frozen=True)
class FiducialParams:
    gamma: float
    M: float
    delta: float = 0.05

    def __post_init__(self):
        if not (0 <= self.gamma < 0.5):
            raise ValueError("gamma must lie in [0, 1/2)")
        if self.M == 0:
            raise ValueError("M must be nonzero")

    def require_admissible_range(self):
        g = self.gamma
        if not ((0 < g < 0.125) or (0.375 < g < 0.5)):
            raise ValueError("gamma must lie in (0, 1/8) or (3/8, 1/2) for this route")


def model_fiducial(params: FiducialParams, grid, linking: LinkingForm | None = None,
                   discrete: bool = True) -> ConfigField:
    """A = gamma sigma omega, Phi = M sigma on a grid.

    On a tubular grid omega = d theta exactly.  On a Cartesian grid the
    1-form is either the pointwise omega (``discrete=False``) or the
    centered difference of its potential with 2 pi unwrapping
    (``discrete=True``), which is closed to roundoff under the same
    difference operator used for curvature.
    """
    vals = np.zeros((4, 3) + tuple(grid.shape))
    vals[3, 0] = params.M
    if params.gamma == 0:
        return ConfigField(grid, vals, {"gamma": 0.0, "M": params.M})
    if grid.kind == "tubular":
        vals[1, 0] = params.gamma
    else:
        if linking is None:
            raise ValueError("Cartesian fiducial needs the linking form")
        pts = grid.points()
        if discrete:
            pot = linking.potential(pts)
            for k in range(3):
                vals[k, 0] = params.gamma * _wrapped_gradient(pot, k, grid.spacing[k])
        else:
            om = linking(pts)
            for k in range(3):
                vals[k, 0] = params.gamma * om[..., k]
    return ConfigField(grid, vals, {"gamma": params.gamma, "M": params.M})


def fiducial_evaluator(params: FiducialParams, linking: LinkingForm):
    """Pointwise (a, phi) of the model fiducial with the exact closed form omega."""

    def evaluate(x):
        x = np.asarray(x, float)
        a = np.zeros(x.shape[:-1] + (3, 3))
        a[..., :, 0] = params.gamma * linking(x)
        phi = np.zeros(x.shape[:-1] + (3,))
        phi[..., 0] = params.M
        return a, phi

    return evaluate


def _wrapped_gradient(pot, axis, h):
    """Second-order difference of an angle-valued function (mod 2 pi)."""
    out = np.empty_like(pot)
    sl = lambda a, b: tuple(slice(a, b) if i == axis else slice(None) for i in range(pot.ndim))
    n = pot.shape[axis]
    out[sl(1, n - 1)] = _wrap(pot[sl(2, n)] - pot[sl(0, n - 2)]) / (2 * h)
    d1 = _wrap(pot[sl(1, 2)] - pot[sl(0, 1)])
    d2 = _wrap(pot[sl(2, 3)] - pot[sl(1, 2)])
    out[sl(0, 1)] = (1.5 * d1 - 0.5 * d2) / h
    e1 = _wrap(pot[sl(n - 1, n)] - pot[sl(n - 2, n - 1)])
    e2 = _wrap(pot[sl(n - 2, n - 1)] - pot[sl(n - 3, n - 2)])
    out[sl(n - 1, n)] = (1.5 * e1 - 0.5 * e2) / h
    return out


# ----------------------------------------------------------------- monopole

def _rotation_to(axis):
    """Rotation matrix sending e_z to the unit vector ``axis``."""
    a = np.asarray(axis, float)
    a = a / np.linalg.norm(a)
    z = np.array([0.0, 0.0, 1.0])
    v = np.cross(z, a)
    c = float(np.dot(z, a))
    if np.linalg.norm(v) < 1e-14:
        return np.eye(3) if c > 0 else np.diag([1.0, -1.0, -1.0])
    vx = np.array([[0, -v[2], v[1]], [v[2], 0, -v[0]], [-v[1], v[0], 0]])
    return np.eye(3) + vx + vx @ vx / (1 + c)


@dataclass(frozen=True)
class MonopolePose:
    """Charge-one monopole at ``center`` with asymptotic |Phi| = M.

    ``axis`` is the direction of the Dirac ray; ``flip`` applies the constant
    gauge rotation that turns the far-field direction -sigma into +sigma.
    """

    center: np.ndarray
    M: float
    axis: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))
    flip: bool = False

    def __post_init__(self):
        if self.M <= 0:
            raise ValueError("monopole mass must be positive")
        object.__setattr__(self, "center", np.asarray(self.center, float))
        object.__setattr__(self, "axis", np.asarray(self.axis, float) / np.linalg.norm(self.axis))

    @property
    def scale(self) -> float:
        # |v| = 1/2 under the unit-|sigma| normalization, hence the factor 2
        return 2.0 * self.M

    @property
    def rotation(self):
        return _rotation_to(self.axis)


def _coth_minus_inv(r):
    small = r < 1e-3
    rs = np.where(small, 1.0, r)
    big = 1.0 / np.tanh(rs) - 1.0 / rs
    ser = r / 3 - r ** 3 / 45 + 2 * r ** 5 / 945
    return np.where(small, ser, big)


def _rcoth_minus_one(r):
    small = r < 1e-3
    rs = np.where(small, 1.0, r)
    return np.where(small, r * r / 3 - r ** 4 / 45 + 2 * r ** 6 / 945, rs / np.tanh(rs) - 1.0)


def _invsinh_minus_cosh_over_r(r):
    small = r < 1e-3
    rs = np.where(small, 1.0, r)
    return np.where(small, -2 * r / 3 - r ** 3 / 45, 1.0 / np.sinh(rs) - np.cosh(rs) / rs)


def _local(pose: MonopolePose, x):
    x = np.asarray(x, float)
    loc = (x - pose.center) @ pose.rotation  # R^T (x - P)
    lam = pose.scale
    w = lam * (loc[..., 0] + 1j * loc[..., 1])
    t = lam * loc[..., 2]
    r = np.sqrt(np.abs(w) ** 2 + t ** 2)
    return loc, lam, w, t, r


def _w_matrix(w):
    out = np.zeros(w.shape + (2, 2), dtype=complex)
    out[..., 0, 1] = w
    out[..., 1, 0] = -np.conj(w)
    return out


def _finish(pose, phi_m, a_m):
    """Apply the gauge flip and the rotation, return su(2) coordinates."""
    if pose.flip:
        g, gi = FLIP, np.linalg.inv(FLIP)
        phi_m = g @ phi_m @ gi
        a_m = g @ a_m @ gi
    phi = to_coords(phi_m)
    a = to_coords(a_m)  # (..., 3 spatial, 3 algebra)
    a = np.einsum("ij,...ja->...ia", pose.rotation, a)
    return np.asarray(a, float), np.asarray(phi, float)


def eval_monopole(pose: MonopolePose, x):
    """(a, phi): a has shape (..., 3 spatial, 3 algebra), phi (..., 3).

    Uses D = r cosh r - t sinh r, which stays positive off the center, so
    the Dirac ray needs no special treatment; small r uses series.
    """
    loc, lam, w, t, r = _local(pose, x)
    if np.any(r == 0):
        rr = np.where(r == 0, 1.0, r)
    else:
        rr = r
    ch, sh = np.cosh(rr), np.sinh(rr)
    D = rr * ch - t * sh
    E = t * ch - rr * sh
    W = _w_matrix(w)
    rc1 = _rcoth_minus_one(r)
    pref = np.where(r == 0, 0.0, rc1 / (2 * rr * D))
    phi_m = (lam * pref)[..., None, None] * (E[..., None, None] * SIGMA + W)
    wm3 = np.zeros(w.shape + (2, 2), dtype=complex)
    wm3[..., 0, 1] = w
    wm3[..., 1, 0] = np.conj(w)
    a3 = (1j * lam * pref)[..., None, None] * wm3
    diag = np.zeros(w.shape + (2, 2), dtype=complex)
    diag[..., 0, 0] = -w
    diag[..., 1, 1] = w
    coef = rr * rr - t * rc1  # t + r^2 - r t coth r
    a12 = (lam / (2 * D))[..., None, None] * (_invsinh_minus_cosh_over_r(r)[..., None, None] * diag
                                              + (np.where(r == 0, 0.0, coef / rr))[..., None, None] * 2j * E21)
    a1 = 0.5 * (a12 - np.conj(np.swapaxes(a12, -1, -2)))
    a2 = (a12 + np.conj(np.swapaxes(a12, -1, -2))) / 2j
    a_m = np.stack([a1, a2, a3], axis=-3)
    return _finish(pose, phi_m, a_m)


def monopole_phi_norm(pose: MonopolePose, x):
    _, _, _, _, r = _local(pose, x)
    return pose.M * _coth_minus_inv(r)


def monopole_curvature_closed_form(pose: MonopolePose, x):
    """(F_23, F_31, F_12) su(2) coordinates, shape (..., 3 slots, 3 algebra)."""
    loc, lam, w, t, r = _local(pose, x)
    ch, sh = np.cosh(r), np.sinh(r)
    D = r * ch - t * sh
    E = t * ch - r * sh
    W = _w_matrix(w)
    vp = (E[..., None, None] * SIGMA + W) / (2 * D)[..., None, None]
    cm = _coth_minus_inv(r)
    tail = cm / (r * sh)
    rad = 1.0 / r ** 3 - 1.0 / (r * sh ** 2)
    f12 = lam ** 2 * ((t * rad)[..., None, None] * vp
                      - tail[..., None, None] * (E[..., None, None] * W - (np.abs(w) ** 2)[..., None, None] * SIGMA)
                      / (2 * D)[..., None, None])
    z = lam ** 2 * ((w * rad)[..., None, None] * vp
                    - tail[..., None, None] * ((w[..., None, None] * (t[..., None, None] * SIGMA + ch[..., None, None] * W))
                                               / (2 * D)[..., None, None] + r[..., None, None] * E21))
    f23 = 0.5 * (z - np.conj(np.swapaxes(z, -1, -2)))
    f31 = (z + np.conj(np.swapaxes(z, -1, -2))) / 2j
    F = np.stack([f23, f31, f12], axis=-3)
    if pose.flip:
        F = FLIP @ F @ np.linalg.inv(FLIP)
    Fc = np.asarray(to_coords(F), float)
    # a 2-form rotates like a vector under proper rotations
    return np.einsum("ij,...ja->...ia", pose.rotation, Fc)


def hedgehog_equivalent(pose: MonopolePose, x):
    """Gauge-equivalent hedgehog form (a, phi) at the pose's scale."""
    x = np.asarray(x, float)
    lam = pose.scale
    y = lam * (x - pose.center)
    r = np.linalg.norm(y, axis=-1)
    rs = np.where(r == 0, 1.0, r)
    fphi = np.where(r < 1e-3, 1 / 3 - r ** 2 / 45, (1 / (rs * np.tanh(rs)) - 1 / rs ** 2))
    fa = np.where(r < 1e-3, -1 / 3 + 7 * r ** 2 / 360,
                  2 * np.exp(-rs) / (rs * -np.expm1(-2 * rs)) - 1 / rs ** 2)
    # -1/2 fixes the normalization [B_a, B_b] = 2 eps_abc B_c
    phi = -0.5 * lam * fphi[..., None] * y
    a = np.zeros(y.shape[:-1] + (3, 3))
    eps = np.zeros((3, 3, 3))
    for i, j, k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
        eps[i, j, k], eps[j, i, k] = 1, -1
    # A_i = f (y x sigma)_i -> coefficient of algebra basis b: eps_{i j b} y_j  (sign from the display)
    a = -0.5 * lam * fa[..., None, None] * np.einsum("ijb,...j->...ib", eps, y)
    return a, phi


def _rodrigues(n, beta):
    """Rotation matrices by angle beta about unit vectors n (algebra coordinates)."""
    c, s = np.cos(beta)[..., None, None], np.sin(beta)[..., None, None]
    nx = np.zeros(n.shape[:-1] + (3, 3))
    nx[..., 0, 1], nx[..., 0, 2] = -n[..., 2], n[..., 1]
    nx[..., 1, 0], nx[..., 1, 2] = n[..., 2], -n[..., 0]
    nx[..., 2, 0], nx[..., 2, 1] = -n[..., 1], n[..., 0]
    return np.eye(3) + s * nx + (1 - c) * (nx @ nx)


def eval_monopole_spread(pose: MonopolePose, x, cap_angle: float = 0.3, core_radius: float = 0.25):
    """Monopole in a smooth gauge whose string is spread over a cone.

    Starts from the hedgehog and rotates the Higgs direction so that it is
    exactly +sigma outside the cone of half-angle ``cap_angle`` around
    ``pose.axis`` (and outside the ball of radius ``core_radius``).  Unlike the
    closed form, the potential stays O(1/r) everywhere, so the field can be
    sampled on a grid.  Returns (a, phi) like :func:`eval_monopole`.
    """
    x = np.asarray(x, float)
    rot = pose.rotation
    loc = (x - pose.center) @ rot
    r = np.linalg.norm(loc, axis=-1)
    rho = np.hypot(loc[..., 0], loc[..., 1])
    # nudge points on the axis; every term has a finite limit there
    on_axis = rho < 1e-10 * np.maximum(r, 1e-300)
    loc = np.where(on_axis[..., None], loc + np.stack([1e-10 * r + 1e-300, 0 * r, 0 * r], -1), loc)
    rho = np.hypot(loc[..., 0], loc[..., 1])
    a, phi = hedgehog_equivalent(MonopolePose(np.zeros(3), pose.M), loc)

    th = np.arctan2(rho, loc[..., 2])
    cph, sph = loc[..., 0] / rho, loc[..., 1] / rho
    rs = np.maximum(r, 1e-300)
    grad_th = np.stack([loc[..., 2] * cph, loc[..., 2] * sph, -rho], -1) / rs[..., None] ** 2
    grad_r = loc / rs[..., None]
    grad_ph = np.stack([-sph, cph, 0 * r], -1) / rho[..., None]

    u = th / cap_angle
    cap = np.pi * smoothstep(u)
    dcap = np.pi * smoothstep_deriv(u) / cap_angle
    half = 0.5 * core_radius
    b = smoothstep((r - half) / half)
    db = smoothstep_deriv((r - half) / half) / half
    beta = b * (cap - th)
    dbeta = (b * (dcap - 1))[..., None] * grad_th + (db * (cap - th))[..., None] * grad_r

    n = np.stack([-sph, cph, 0 * r], -1)
    rhat = np.stack([cph, sph, 0 * r], -1)
    zhat = np.broadcast_to(np.array([0.0, 0.0, 1.0]), n.shape)
    R = _rodrigues(n, beta)
    phi = np.einsum("...ab,...b->...a", R, phi)
    a = np.einsum("...ab,...ib->...ia", R, a)
    # A -> g A g^-1 - dg g^-1 with dg g^-1 = dbeta n/2 + sin(beta) dn/2 - (1 - cos beta)(dn x n)/2
    dgg = (0.5 * dbeta[..., :, None] * n[..., None, :]
           - 0.5 * (np.sin(beta)[..., None, None] * grad_ph[..., :, None]) * rhat[..., None, :]
           + 0.5 * ((1 - np.cos(beta))[..., None, None] * grad_ph[..., :, None]) * zhat[..., None, :])
    a = a - dgg
    # constant gauge e3 -> sigma, then back to the global frame
    perm = [2, 0, 1]
    phi = phi[..., perm]
    a = a[..., perm]
    a = np.einsum("ij,...ja->...ia", rot, a)
    return a, phi


# -------------------------------------------------------- pointwise residual

def point_residual(evaluator, x, h: float, order: int = 2):
    """*F - d_A Phi at points x by centered differences of an (a, phi) evaluator."""
    x = np.asarray(x, float)
    a0, phi0 = evaluator(x)
    da = np.zeros(x.shape[:-1] + (3, 3, 3))  # d_k a_i
    dphi = np.zeros(x.shape[:-1] + (3, 3))
    for k in range(3):
        e = np.zeros(3)
        e[k] = h
        if order == 2:
            ap, pp = evaluator(x + e)
            am, pm = evaluator(x - e)
            da[..., k, :, :] = (ap - am) / (2 * h)
            dphi[..., k, :] = (pp - pm) / (2 * h)
        else:
            ap, pp = evaluator(x + e)
            am, pm = evaluator(x - e)
            ap2, pp2 = evaluator(x + 2 * e)
            am2, pm2 = evaluator(x - 2 * e)
            da[..., k, :, :] = (8 * (ap - am) - (ap2 - am2)) / (12 * h)
            dphi[..., k, :] = (8 * (pp - pm) - (pp2 - pm2)) / (12 * h)
    br = lambda p, q: 2.0 * np.cross(p, q)
    F = np.stack([da[..., i, j, :] - da[..., j, i, :] + br(a0[..., i, :], a0[..., j, :]) for i, j, _ in CYCLIC], axis=-2)
    dA = dphi + br(a0, phi0[..., None, :])
    return F - dA, F
