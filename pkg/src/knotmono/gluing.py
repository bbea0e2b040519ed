"""Approximate solutions glued from the model fiducial and 1-monopoles.

Layout: the knot sits inside B_R(O); monopole j sits at O + 4R a_j and its
string (Dirac ray) L_j points radially outward along a_j.  The cutoff chi_j
is a product of an angular profile (angle to a_j seen from O) and a radial
profile in log r, so |grad chi_j| <= 1/(d r) holds with r = |x - O|.  The
monopoles are evaluated in a gauge whose string is spread over the cone
around L_j, so that chi_j = 1 on that cone and Phi = +M sigma-ish elsewhere.

The Bogomolny residual of the glued field is computed in closed form from
the pieces; no finite differences of the backgrounds are involved.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .fields import CYCLIC, CartesianGrid, ConfigField
from .fiducial import FiducialParams, LinkingForm, MonopolePose, eval_monopole_spread, point_residual
from .knot import smoothstep, smoothstep_deriv

SLOPE = 1.875  # max of the quintic smoothstep derivative


class PlacementError(ValueError):
    """Geometric infeasibility; ``pair`` names the offending sets."""

    def __init__(self, msg, pair=None):
        super().__init__(msg)
        self.pair = pair


def _tilt():
    # fixed tilt so the rays are never aligned with grid axes
    c, s = np.cos(0.2), np.sin(0.2)
    rx = np.array([[1, 0, 0], [0, c, -s], [0, s, c]])
    c2, s2 = np.cos(0.13), np.sin(0.13)
    rz = np.array([[c2, -s2, 0], [s2, c2, 0], [0, 0, 1]])
    return rz @ rx


def ring_directions(n: int) -> np.ndarray:
    ang = 2 * np.pi * np.arange(n) / max(n, 1)
    planar = np.stack([np.cos(ang), np.sin(ang), np.zeros(n)], -1)
    return planar @ _tilt().T


@dataclass
class Placement:
    poses: list
    dirac_rays: list
    d: float
    R: float
    origin: np.ndarray
    ring_radius: float
    audit: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.poses)

    @property
    def M(self):
        return self.poses[0].M if self.poses else None


def _ray_distance(o1, u1, o2, u2, t_max):
    """min |o1 + s u1 - o2 - t u2| over s, t in [0, t_max], sampled then polished."""
    ts = np.concatenate([[0.0], np.geomspace(1e-3, t_max, 200)])
    p1 = o1 + ts[:, None] * u1
    p2 = o2 + ts[:, None] * u2
    dmat = np.linalg.norm(p1[:, None] - p2[None], axis=-1)
    i, j = np.unravel_index(np.argmin(dmat), dmat.shape)

    def f(st):
        s, t = np.clip(st, 0, t_max)
        return float(np.linalg.norm(o1 + s * u1 - o2 - t * u2))

    res = minimize(f, [ts[i], ts[j]], method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-12})
    return min(float(dmat[i, j]), float(res.fun))


def _point_ray_distance(p, o, u):
    t = max(0.0, float(np.dot(p - o, u)))
    return float(np.linalg.norm(o + t * u - p))


def plan_placement(n: int, d: float, R: float, M: float = 4.0, origin=None, curve=None,
                   ring_factor: float = 4.0) -> Placement:
    """Monopoles on a ring of radius 4R around O with outward strings.

    Audits V_i(R) and V_j(R) disjoint, V_j(R) disjoint from B_R(O), R >= 10 d,
    and (when a curve is given) that the knot lies inside B_R(O).
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    if d <= 0 or R < 10 * d:
        raise PlacementError(f"need R >= 10 d (R={R}, d={d})")
    if origin is None:
        origin = np.zeros(3) if curve is None else np.asarray(curve.position(np.linspace(0, curve.length, 256, endpoint=False))).mean(0)
    origin = np.asarray(origin, float)
    ring = ring_factor * R
    dirs = ring_directions(n)
    poses = [MonopolePose(origin + ring * a, M, axis=a) for a in dirs]
    rays = [(p.center, a) for p, a in zip(poses, dirs)]
    audit = {"min_ray_ball": np.inf, "min_ray_ray": np.inf}
    for j, (o, u) in enumerate(rays):
        dist = _point_ray_distance(origin, o, u)
        audit["min_ray_ball"] = min(audit["min_ray_ball"], dist)
        if dist < 2 * R:
            raise PlacementError(f"V_{j + 1}(R) meets B_R(O)", pair=(0, j + 1))
    for i in range(n):
        for j in range(i + 1, n):
            dist = _ray_distance(*rays[i], *rays[j], t_max=50 * ring)
            audit["min_ray_ray"] = min(audit["min_ray_ray"], dist)
            if dist < 2 * R:
                raise PlacementError(f"V_{i + 1}(R) meets V_{j + 1}(R) (distance {dist:.3g} < 2R)",
                                     pair=(i + 1, j + 1))
    if curve is not None:
        pts = curve.position(np.linspace(0, curve.length, 512, endpoint=False))
        ext = float(np.max(np.linalg.norm(pts - origin, axis=1)))
        audit["knot_extent"] = ext
        if ext >= R:
            raise PlacementError("knot does not fit inside B_R(O)", pair=(0, 0))
    return Placement(poses, rays, float(d), float(R), origin, ring, audit)


class PartitionOfUnity:
    """chi_j = (1 - S((alpha_j - a1)/w_ang)) * S(log(r/R)/w_rad), chi_0 = 1 - sum.

    alpha_j is the angle at O between x - O and the string direction.  The
    widths satisfy SLOPE^2 (1/w_ang^2 + 1/w_rad^2) <= 1/d^2, which bounds
    |grad chi_j| by 1/(d r).  Since chi_j must climb from 0 on B_R(O) to 1 at
    distance 4R - d from O, this only works for d below about log(4)/SLOPE.
    """

    def __init__(self, placement: Placement, cap_angle: float = 0.25):
        p = placement
        self.placement = p
        self.d = p.d
        self.r_in = p.R
        self.r_out = p.ring_radius - p.d
        self.w_rad = float(np.log(self.r_out / self.r_in))
        room = 1.0 / p.d ** 2 - (SLOPE / self.w_rad) ** 2
        if room <= 0:
            raise PlacementError(f"d = {p.d} too large for the 1/(d r) gradient bound with this ring")
        self.w_ang = SLOPE / np.sqrt(room) * (1 + 1e-9)
        # the inner cone must contain V_j(d) and the spread string
        self.a1 = max(float(cap_angle), float(np.arcsin(min(1.0, p.d / self.r_out))))
        self.cap_angle = self.a1
        self.a2 = self.a1 + self.w_ang
        dirs = np.array([a for _, a in p.dirac_rays]).reshape(-1, 3)
        self.dirs = dirs
        for i in range(len(dirs)):
            for j in range(i + 1, len(dirs)):
                sep = np.arccos(np.clip(dirs[i] @ dirs[j], -1, 1))
                if sep <= 2 * self.a2:
                    raise PlacementError(f"cutoff cones {i + 1} and {j + 1} overlap", pair=(i + 1, j + 1))

    @property
    def n(self):
        return len(self.dirs)

    def evaluate(self, x):
        """(chi, grad): chi (n+1, ...), grad (n+1, ..., 3)."""
        x = np.asarray(x, float)
        u = x - self.placement.origin
        r = np.linalg.norm(u, axis=-1)
        rs = np.maximum(r, 1e-300)
        chi = np.zeros((self.n + 1,) + r.shape)
        grad = np.zeros((self.n + 1,) + x.shape)
        t_rad = np.log(np.maximum(r, 1e-300) / self.r_in) / self.w_rad
        T = smoothstep(t_rad)
        gT = (smoothstep_deriv(t_rad) / (self.w_rad * rs))[..., None] * (u / rs[..., None])
        for j, a in enumerate(self.dirs):
            cosa = np.clip(u @ a / rs, -1, 1)
            alpha = np.arccos(cosa)
            sina = np.sqrt(np.maximum(1 - cosa ** 2, 0))
            t_ang = (alpha - self.a1) / self.w_ang
            A = 1 - smoothstep(t_ang)
            dA = -smoothstep_deriv(t_ang) / self.w_ang
            # grad alpha = (cos(alpha) u/r - a) / (r sin alpha); dA = 0 where that is singular
            safe = np.where(sina > 1e-12, sina, 1.0)
            galpha = (cosa[..., None] * u / rs[..., None] - a) / (rs * safe)[..., None]
            gA = np.where((dA != 0)[..., None], dA[..., None] * galpha, 0.0)
            chi[j + 1] = A * T
            grad[j + 1] = gA * T[..., None] + A[..., None] * gT
        chi[0] = 1 - chi[1:].sum(0)
        grad[0] = -grad[1:].sum(0)
        return chi, grad

    def gradient_ratio(self, x):
        """max_j |grad chi_j| d r at x."""
        _, g = self.evaluate(x)
        r = np.linalg.norm(np.asarray(x) - self.placement.origin, axis=-1)
        return np.linalg.norm(g, axis=-1).max(0) * self.d * r

    def sample_transition(self, rng, n_pts: int, r_max_factor: float = 8.0):
        """Random points in the transition regions (where some 0 < chi_j < 1)."""
        pts = []
        per = max(1, n_pts // max(self.n, 1))
        for a in self.dirs:
            e1 = np.cross(a, [0.0, 0.0, 1.0] if abs(a[2]) < 0.9 else [1.0, 0.0, 0.0])
            e1 /= np.linalg.norm(e1)
            e2 = np.cross(a, e1)
            r = np.exp(rng.uniform(np.log(self.r_in), np.log(r_max_factor * self.placement.ring_radius), per))
            alpha = np.arccos(rng.uniform(np.cos(self.a2), 1.0, per))
            ph = rng.uniform(0, 2 * np.pi, per)
            dirn = (np.cos(alpha)[:, None] * a + np.sin(alpha)[:, None]
                    * (np.cos(ph)[:, None] * e1 + np.sin(ph)[:, None] * e2))
            pts.append(self.placement.origin + r[:, None] * dirn)
        return np.concatenate(pts) if pts else np.zeros((0, 3))


def build_partition(p: Placement, cap_angle: float = 0.25) -> PartitionOfUnity:
    return PartitionOfUnity(p, cap_angle)


def _br(x, y):
    return 2.0 * np.cross(x, y)


class GluedField:
    """Psi = sum_j chi_j Psi_j with Psi_0 the model fiducial (gamma sigma omega, M sigma)."""

    def __init__(self, placement: Placement, partition: PartitionOfUnity, fparams: FiducialParams,
                 linking: LinkingForm | None = None):
        if placement.n and abs(placement.M - fparams.M) > 1e-12 * fparams.M:
            raise ValueError("monopole masses must match the fiducial M")
        self.placement = placement
        self.partition = partition
        self.fparams = fparams
        self.linking = linking
        self.core = placement.d

    # -- pieces
    def fiducial(self, x):
        x = np.asarray(x, float)
        a = np.zeros(x.shape[:-1] + (3, 3))
        phi = np.zeros(x.shape[:-1] + (3,))
        phi[..., 0] = self.fparams.M
        if self.linking is not None:
            a[..., 0] = self.fparams.gamma * self.linking(x)
        return a, phi

    def monopole(self, j, x):
        return eval_monopole_spread(self.placement.poses[j], x, self.partition.cap_angle, self.core)

    def pieces(self, x):
        """chi, grad chi and the (a_j, phi_j) lists; monopoles only where chi_j > 0."""
        x = np.asarray(x, float)
        chi, grad = self.partition.evaluate(x)
        A = [np.zeros(x.shape[:-1] + (3, 3)) for _ in range(self.placement.n + 1)]
        P = [np.zeros(x.shape[:-1] + (3,)) for _ in range(self.placement.n + 1)]
        sel = chi[0] > 0
        if np.any(sel):
            A[0][sel], P[0][sel] = self.fiducial(x[sel])
        for j in range(self.placement.n):
            sel = chi[j + 1] > 0
            if np.any(sel):
                A[j + 1][sel], P[j + 1][sel] = self.monopole(j, x[sel])
        return chi, grad, A, P

    def __call__(self, x):
        chi, _, A, P = self.pieces(x)
        a = sum(c[..., None, None] * aj for c, aj in zip(chi, A))
        phi = sum(c[..., None] * pj for c, pj in zip(chi, P))
        return a, phi

    def residual(self, x):
        """Closed-form *F - d_A Phi of the glued field, shape (..., 3 slots, 3).

        Uses that every piece solves the equation exactly:
        V = sum_j (*(dchi_j ^ a_j) - dchi_j phi_j) + (1/2)*([a^a] - sum chi_j [a_j^a_j])
            - ([a, phi] - sum chi_j [a_j, phi_j]).
        """
        chi, grad, A, P = self.pieces(x)
        a = sum(c[..., None, None] * aj for c, aj in zip(chi, A))
        phi = sum(c[..., None] * pj for c, pj in zip(chi, P))
        out = np.zeros(np.shape(x)[:-1] + (3, 3))
        for k, (i, j, _) in enumerate(CYCLIC):
            lin = sum(g[..., i, None] * aj[..., j, :] - g[..., j, None] * aj[..., i, :] - g[..., k, None] * pj
                      for g, aj, pj in zip(grad, A, P))
            quad = _br(a[..., i, :], a[..., j, :]) - sum(
                c[..., None] * _br(aj[..., i, :], aj[..., j, :]) for c, aj in zip(chi, A))
            mix = _br(a[..., k, :], phi) - sum(c[..., None] * _br(aj[..., k, :], pj) for c, aj, pj in zip(chi, A, P))
            out[..., k, :] = lin + quad - mix
        return out

    def to_config(self, grid) -> ConfigField:
        a, phi = self(grid.points())
        vals = np.zeros((4, 3) + grid.shape)
        vals[:3] = np.moveaxis(a, (-2, -1), (0, 1))
        vals[3] = np.moveaxis(phi, -1, 0)
        return ConfigField(grid, vals)


def glue(p: Placement, partition: PartitionOfUnity, fparams: FiducialParams, linking=None, grid=None):
    """Glued field; returns the evaluator, and a ConfigField when a grid is given."""
    g = GluedField(p, partition, fparams, linking)
    if grid is None:
        return g
    return g, g.to_config(grid)


def default_grid(p: Placement, h: float = 1.0) -> CartesianGrid:
    """Box containing B_R(O) and all monopole centers with a margin, node-offset by h/2."""
    pts = [p.origin] + [q.center for q in p.poses]
    lo = np.min(pts, axis=0) - p.R
    hi = np.max(pts, axis=0) + p.R
    n = np.maximum(4, np.ceil((hi - lo) / h).astype(int))
    n += n % 2
    return CartesianGrid(lo + 0.5 * h, h, tuple(int(v) for v in n))


# ----------------------------------------------------------- admissibility

def sup_residual(g: GluedField, rng, n_samples: int = 20000, n_polish: int = 6):
    """Sampled sup |V| over the transition regions, polished by local search."""
    pts = g.partition.sample_transition(rng, n_samples)
    if len(pts) == 0:
        return 0.0, None
    v = np.linalg.norm(g.residual(pts).reshape(len(pts), -1), axis=1)
    order = np.argsort(v)[::-1][:n_polish]
    best, arg = float(v[order[0]]), pts[order[0]]

    def f(x):
        return -float(np.linalg.norm(g.residual(x[None])[0]))

    for i in order:
        res = minimize(f, pts[i], method="Nelder-Mead", options={"xatol": 1e-6, "fatol": 1e-10, "maxiter": 400})
        if -res.fun > best:
            best, arg = -float(res.fun), res.x
    return best, arg


def _sphere(n):
    i = np.arange(n) + 0.5
    z = 1 - 2 * i / n
    ph = np.pi * (1 + 5 ** 0.5) * i
    s = np.sqrt(1 - z * z)
    return np.stack([s * np.cos(ph), s * np.sin(ph), z], -1)


@dataclass
class AdmissibilityReport:
    c_estimate: float
    shell_phi: list
    shell_radii: list
    shell_decay: list
    decay_ratio: float
    fiducial_exact: bool
    fiducial_max_diff: float
    sup_residual: float
    sup_point: object
    mu: float
    passed: dict

    @property
    def ok(self) -> bool:
        return all(self.passed.values())

    def as_dict(self):
        return {
            "c_estimate": self.c_estimate, "shell_radii": self.shell_radii, "shell_phi": self.shell_phi,
            "shell_decay": self.shell_decay, "decay_ratio": self.decay_ratio,
            "fiducial_exact": self.fiducial_exact, "fiducial_max_diff": self.fiducial_max_diff,
            "sup_residual": self.sup_residual, "mu": self.mu, "passed": self.passed, "ok": self.ok,
        }


def admissibility_report(g: GluedField, mu_target: float, seed: int = 0, n_samples: int = 20000,
                         shell_points: int = 600, tube=None, near_factor: float = 100.0) -> AdmissibilityReport:
    """Check the four admissibility conditions on a glued field.

    1. shell averages of |Phi| converge (Richardson estimate of the limit c);
    2. r^2 (|d_A Phi| + |F|) on three far shells stays within a factor 2;
    3. Psi equals the fiducial exactly on N_{near_factor delta};
    4. sampled sup |V| <= mu_target.
    """
    rng = np.random.default_rng(seed)
    p = g.placement
    M = g.fparams.M
    base = max(p.ring_radius, p.R) * 2
    radii = [base, 2 * base, 4 * base]
    dirs = _sphere(shell_points)
    shell_phi, decay = [], []
    for r in radii:
        x = p.origin + r * dirs
        _, phi = g(x)
        shell_phi.append(float(np.linalg.norm(phi, axis=-1).mean()))
        res, F = point_residual(g, x, h=1e-4 * r)
        dphi = F - res
        decay.append(float(r ** 2 * np.max(np.linalg.norm(dphi.reshape(len(x), -1), axis=1)
                                           + np.linalg.norm(F.reshape(len(x), -1), axis=1))))
    c_est = 2 * shell_phi[2] - shell_phi[1]
    if max(decay) == 0:
        ratio = 1.0
    else:
        ratio = max(decay) / max(min(decay), 1e-300)

    # exactness near the knot
    max_diff = 0.0
    if tube is not None:
        curve = tube.curve
        s = rng.uniform(0, curve.length, 2000)
        base_pts = curve.position(s)
        off = rng.normal(size=(2000, 3))
        off *= (rng.uniform(0, 1, 2000) ** (1 / 3) * near_factor * g.fparams.delta
                / np.linalg.norm(off, axis=1))[:, None]
        x = base_pts + off
        keep = tube.distance(x) > 1e-6
        x = x[keep]
        a, phi = g(x)
        a0, phi0 = g.fiducial(x)
        max_diff = float(max(np.abs(a - a0).max(), np.abs(phi - phi0).max()))
    sup_v, arg = sup_residual(g, rng, n_samples)
    passed = {
        "limit": abs(c_est - M) <= 1e-2 * M,
        "decay": ratio <= 2.0,
        "fiducial": max_diff == 0.0,
        "residual": sup_v <= mu_target,
    }
    return AdmissibilityReport(c_est, shell_phi, radii, decay, ratio, max_diff == 0.0, max_diff,
                               sup_v, arg, mu_target, passed)
