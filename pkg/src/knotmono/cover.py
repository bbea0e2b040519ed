"""Dyadic chart cover of N_eps minus K, chart gauges and monodromy extraction.

Charts are boxes in the tube coordinates (rho, theta, s):

* level n_rho: rho in (eps 2^-(3 n_rho + 1), eps 2^-(3 n_rho - 4));
* theta cell Dt = 2 pi / t, chart n_theta covers Dt (n_theta -+ 2/3);
* s cell Ds = l / 2^(t + n_rho), chart n_s covers Ds (n_s -+ 2/3).

Consecutive charts overlap on a third of a cell; the anchor P_alpha sits at
rho = eps 2^(-3 n_rho) and at the centre of the overlap with the next chart
in theta and s.  Chart gauges are radial: u_alpha is the path-ordered
transport of the connection along straight chords from P_alpha in the flat
model (z1, z2, s) = (rho cos theta, rho sin theta, s), so that u_alpha(A)
has no radial component.  Gauge action: u(A) = u^-1 A u + u^-1 du.

Connections are callables ``conn(q) -> (..., 3, 3)`` taking tube coordinates
q = (rho, theta, s) and returning coordinate components (A_rho, A_theta, A_s)
in su(2) coordinates.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._accel import path_product
from .knot import smoothstep
from .su2 import SIGMA, exp_su2, from_coords, log_su2, to_coords

TWO_PI = 2 * np.pi


def _wrap(x, period):
    return (x + 0.5 * period) % period - 0.5 * period


def _inv(u):
    return np.conj(np.swapaxes(u, -1, -2))


@dataclass(frozen=True)
class CoverIndex:
    n_rho: int
    n_theta: int
    n_s: int


class Cover:
    """Charts for levels n_rho_min..n_rho_max with t theta cells."""

    def __init__(self, eps: float, t: int, length: float, n_rho_max: int, n_rho_min: int = 2,
                 eta: float | None = None):
        if t < 4:
            raise ValueError("t must be at least 4")
        if n_rho_max < max(3, n_rho_min) or n_rho_min < 1:
            raise ValueError("need n_rho_max >= 3 and n_rho_min >= 1")
        self.eps = float(eps)
        self.t = int(t)
        self.length = float(length)
        self.n_rho_min = int(n_rho_min)
        self.n_rho_max = int(n_rho_max)
        self.dtheta = TWO_PI / self.t
        self.levels = list(range(self.n_rho_min, self.n_rho_max + 1))
        need = max(2.0 ** n * self._corner_distance(n) for n in self.levels)
        self.eta = float(eta) if eta is not None else need * (1 + 1e-9)

    # -- geometry
    def n_s(self, n_rho: int) -> int:
        return 2 ** (self.t + n_rho)

    def ds(self, n_rho: int) -> float:
        return self.length / self.n_s(n_rho)

    def rho_range(self, n_rho: int):
        return self.eps * 2.0 ** -(3 * n_rho + 1), self.eps * 2.0 ** -(3 * n_rho - 4)

    def anchor(self, n_rho, n_theta, n_s):
        """Anchor coordinates (rho, theta, s); arrays broadcast."""
        n_rho = np.asarray(n_rho)
        rho = self.eps * 2.0 ** (-3.0 * n_rho)
        th = self.dtheta * (np.asarray(n_theta) + 0.5)
        s = self.length / 2.0 ** (self.t + n_rho) * (np.asarray(n_s) + 0.5)
        return np.stack(np.broadcast_arrays(rho, th, s), -1).astype(float)

    def ball_radius(self, n_rho: int) -> float:
        return 2.0 ** -n_rho * self.eta

    def _corner_distance(self, n_rho):
        lo, hi = self.rho_range(n_rho)
        p = self.anchor(n_rho, 0, 0)
        z0 = np.array([p[0] * np.cos(p[1]), p[0] * np.sin(p[1]), p[2]])
        best = 0.0
        for r in (lo, hi):
            for th in np.linspace(-2 / 3, 2 / 3, 33) * self.dtheta:
                for s in (-2 / 3 * self.ds(n_rho), 2 / 3 * self.ds(n_rho)):
                    z = np.array([r * np.cos(th), r * np.sin(th), s])
                    best = max(best, float(np.linalg.norm(z - z0)))
        return best

    def chart_count(self) -> int:
        return sum(self.t * self.n_s(n) for n in self.levels)

    def charts(self):
        for n in self.levels:
            for i in range(self.t):
                for j in range(self.n_s(n)):
                    yield CoverIndex(n, i, j)

    def contains(self, alpha: CoverIndex, q) -> np.ndarray:
        q = np.asarray(q, float)
        lo, hi = self.rho_range(alpha.n_rho)
        ok = (q[..., 0] > lo) & (q[..., 0] < hi)
        ok &= np.abs(_wrap(q[..., 1] - self.dtheta * alpha.n_theta, TWO_PI)) < 2 / 3 * self.dtheta
        ds = self.ds(alpha.n_rho)
        ok &= np.abs(_wrap(q[..., 2] - ds * alpha.n_s, self.length)) < 2 / 3 * ds
        return ok

    def neighbors(self, alpha: CoverIndex):
        """Charts differing in exactly one subscript by one (theta, s cyclic)."""
        out = []
        n, i, j = alpha.n_rho, alpha.n_theta, alpha.n_s
        for dn in (-1, 1):
            m = n + dn
            if self.n_rho_min <= m <= self.n_rho_max and j < self.n_s(m):
                out.append(CoverIndex(m, i, j))
        for di in (-1, 1):
            out.append(CoverIndex(n, (i + di) % self.t, j))
        for dj in (-1, 1):
            out.append(CoverIndex(n, i, (j + dj) % self.n_s(n)))
        return list(dict.fromkeys(out))

    def covered_rho(self):
        return self.rho_range(self.n_rho_max)[0], self.rho_range(self.n_rho_min)[1]

    def locate(self, q):
        """Home chart (core cell) of each point: arrays (n_rho, n_theta, n_s)."""
        q = np.asarray(q, float)
        lvl = np.floor(-np.log2(q[..., 0] / self.eps) / 3).astype(int) + 1
        lvl = np.clip(lvl, self.n_rho_min, self.n_rho_max)
        i = np.floor(np.mod(q[..., 1], TWO_PI) / self.dtheta + 0.5).astype(int) % self.t
        ds = self.length / 2.0 ** (self.t + lvl)
        j = np.floor(np.mod(q[..., 2], self.length) / ds + 0.5).astype(int) % (2 ** (self.t + lvl))
        return lvl, i, j

    def audit(self, rng=None, n_samples: int = 10000):
        """Invariant report: nonempty charts inside their balls, ball annuli, coverage."""
        rng = np.random.default_rng(0) if rng is None else rng
        rep = {"chart_count": self.chart_count(), "eta": self.eta, "levels": {}}
        for n in self.levels:
            rB = self.ball_radius(n)
            rho_p = self.eps * 2.0 ** (-3 * n)
            rep["levels"][n] = {
                "chart_in_ball": self._corner_distance(n) <= rB * (1 + 1e-9),
                "ball_in_annulus": bool(rho_p - rB > self.eps * 2.0 ** -(n + 10)
                                        and rho_p + rB < self.eps * 2.0 ** -(n - 10)),
                "ball_radius": rB,
            }
        lo, hi = self.covered_rho()
        q = np.stack([np.exp(rng.uniform(np.log(lo), np.log(hi), n_samples)) * (1 - 1e-12),
                      rng.uniform(0, TWO_PI, n_samples), rng.uniform(0, self.length, n_samples)], -1)
        q[:, 0] = np.clip(q[:, 0], lo * (1 + 1e-12), hi * (1 - 1e-12))
        lvl, i, j = self.locate(q)
        hit = np.zeros(n_samples, bool)
        for n in self.levels:
            sel = lvl == n
            if not np.any(sel):
                continue
            a_lo, a_hi = self.rho_range(n)
            ok = (q[sel, 0] > a_lo) & (q[sel, 0] < a_hi)
            hit[sel] = ok
        rep["coverage"] = float(hit.mean())
        return rep


def build_cover(eps: float, t: int, n_rho_max: int, length: float = TWO_PI, n_rho_min: int = 2) -> Cover:
    return Cover(eps, t, length, n_rho_max, n_rho_min)


# ------------------------------------------------------------- transport

def _to_model(q):
    return np.stack([q[..., 0] * np.cos(q[..., 1]), q[..., 0] * np.sin(q[..., 1]), q[..., 2]], -1)


def chord_transport(conn, start, end, n_steps: int = 64, chunk: int = 4096):
    """u solving du/dtau = -A(x') u along the model chord start -> end, u(0) = 1.

    ``start``/``end`` are tube coordinates with end[..., 2] already unwrapped
    relative to start.  Fourth-order Magnus with two Gauss points per step;
    the ordered product of step exponentials runs in ``path_product``.
    """
    start = np.asarray(start, float)
    shape = start.shape[:-1]
    z0 = _to_model(start).reshape(-1, 3)
    dz = _to_model(np.asarray(end, float)).reshape(-1, 3) - z0
    h = 1.0 / n_steps
    g = 0.5 / np.sqrt(3.0)
    taus = np.stack([(np.arange(n_steps) + 0.5 - g) * h, (np.arange(n_steps) + 0.5 + g) * h], -1).reshape(-1)
    out = np.empty((len(z0), 2, 2), complex)
    for lo in range(0, len(z0), chunk):
        a0, d = z0[lo:lo + chunk], dz[lo:lo + chunk]
        z = a0[:, None, :] + taus[None, :, None] * d[:, None, :]
        rho2 = z[..., 0] ** 2 + z[..., 1] ** 2
        if np.any(rho2 <= 0):
            raise ValueError("chord passes through the knot")
        rho = np.sqrt(rho2)
        q = np.stack([rho, np.arctan2(z[..., 1], z[..., 0]), z[..., 2]], -1)
        rdot = (z[..., 0] * d[:, None, 0] + z[..., 1] * d[:, None, 1]) / rho
        tdot = (z[..., 0] * d[:, None, 1] - z[..., 1] * d[:, None, 0]) / rho2
        a = conn(q)
        m = -(a[..., 0, :] * rdot[..., None] + a[..., 1, :] * tdot[..., None] + a[..., 2, :] * d[:, None, 2, None])
        m = m.reshape(len(a0), n_steps, 2, 3)
        m1, m2 = m[:, :, 0], m[:, :, 1]
        omega = 0.5 * h * (m1 + m2) + (np.sqrt(3.0) / 6) * h * h * np.cross(m2, m1)
        out[lo:lo + chunk] = path_product(omega[:, ::-1])
    if not np.all(np.isfinite(out)):
        raise ValueError("path-ordered integration diverged")
    return out.reshape(shape + (2, 2))


# ------------------------------------------------------------- chart gauges

@dataclass
class ChartGauges:
    """Radial chart gauges u_alpha c_alpha with the anchor-matching constants c."""

    cover: Cover
    conn: object
    consts: dict  # level -> array (t, n_s, 2, 2)
    n_steps: int = 64
    seams: dict = field(default_factory=dict)  # filled by extract_monodromies

    def raw(self, lvl, i, j, q):
        """u_alpha(q) without constants; index arrays broadcast with q[..., 0]."""
        c = self.cover
        p = c.anchor(lvl, i, j)
        q = np.array(q, float, copy=True)
        q[..., 2] = p[..., 2] + _wrap(q[..., 2] - p[..., 2], c.length)
        return chord_transport(self.conn, p, q, self.n_steps)

    def __call__(self, lvl, i, j, q):
        lvl, i, j = (np.broadcast_to(np.asarray(v), np.shape(q)[:-1]) for v in (lvl, i, j))
        u = self.raw(lvl, i, j, q)
        c = np.empty(u.shape, complex)
        for n in np.unique(lvl):
            sel = lvl == n
            c[sel] = self.consts[int(n)][i[sel], j[sel]]
        return u @ c


def local_gauges_synthetic(conn, cover: Cover, n_steps: int = 64) -> ChartGauges:
    """Radial chart gauges with the anchor-matching chain enforced.

    Per level: theta column 1 is chained along s (charts (1, 1), (1, 2), ...,
    (1, 0)), every s column is chained along theta starting at theta index 1,
    and chart (1, 1) of each level is matched to the previous level at that
    level's anchor (0, 0).  The seams theta 0|1 and s 0|1 stay free and carry
    the monodromies.
    """
    t = cover.t
    consts = {}
    prev = None
    for n in cover.levels:
        ns = cover.n_s(n)
        c = np.empty((t, ns, 2, 2), complex)
        g = ChartGauges(cover, conn, {n: c}, n_steps)
        if prev is None:
            c[1, 1] = np.eye(2)
        else:
            q = cover.anchor(n - 1, 0, 0)
            u_prev = prev(n - 1, 1, 1, q[None])[0]
            u_here = g.raw(np.array([n]), np.array([1]), np.array([1]), q[None])[0]
            c[1, 1] = _inv(u_here) @ u_prev
        # s chain in theta column 1, matched at P_{n, 0, j}
        js = np.arange(1, ns)
        q = cover.anchor(n, 0, js)
        u_from = g.raw(np.full(ns - 1, n), np.ones(ns - 1, int), js, q)
        u_to = g.raw(np.full(ns - 1, n), np.ones(ns - 1, int), (js + 1) % ns, q)
        for k, j in enumerate(js):
            c[1, (j + 1) % ns] = _inv(u_to[k]) @ (u_from[k] @ c[1, j])
        # theta chains in every s column, matched at P_{n, i, j}
        jj = np.arange(ns)
        for i in range(1, t):
            q = cover.anchor(n, i, jj)
            u_from = g.raw(np.full(ns, n), np.full(ns, i), jj, q)
            u_to = g.raw(np.full(ns, n), np.full(ns, (i + 1) % t), jj, q)
            c[(i + 1) % t] = _inv(u_to) @ (u_from @ c[i])
        consts[n] = c
        prev = ChartGauges(cover, conn, dict(consts), n_steps)
    return ChartGauges(cover, conn, consts, n_steps)


# ------------------------------------------------------------- monodromy

@dataclass
class MonodromyReport:
    gamma_theta_levels: dict  # level -> array (n_s, 2, 2)
    gamma_s_levels: dict  # level -> (2, 2)
    gamma_theta: np.ndarray
    gamma_s: np.ndarray
    cauchy_theta: list
    cauchy_s: list
    ns_spread: dict
    commutator: float
    gamma: float
    gamma_tilde: float
    conjugator: np.ndarray
    det_error: float

    def as_dict(self):
        return {"gamma": self.gamma, "gamma_tilde": self.gamma_tilde, "commutator": self.commutator,
                "cauchy_theta": self.cauchy_theta, "cauchy_s": self.cauchy_s,
                "ns_spread": {int(k): float(v) for k, v in self.ns_spread.items()},
                "det_error": self.det_error,
                "gamma_theta": np.round(self.gamma_theta, 15).tolist().__repr__(),
                "gamma_s": np.round(self.gamma_s, 15).tolist().__repr__()}


def _conjugator_to_sigma(x):
    """SU(2) c with c^-1 X c parallel to +sigma (X in coordinates)."""
    n = np.linalg.norm(x)
    if n < 1e-14:
        return np.eye(2, dtype=complex)
    v = x / n
    e0 = np.array([1.0, 0.0, 0.0])
    axis = np.cross(v, e0)
    s = np.linalg.norm(axis)
    ang = np.arctan2(s, v @ e0)
    if s < 1e-14:
        axis = np.array([0.0, 1.0, 0.0])
        if v[0] > 0:
            return np.eye(2, dtype=complex)
    else:
        axis = axis / s
    # Ad(exp(b/2 * axis)) rotates by b about axis; we need c^-1 = rotation v -> e0
    c_inv = exp_su2(from_coords(0.5 * ang * axis))
    return _inv(c_inv)


def extract_monodromies(gauges: ChartGauges, cover: Cover | None = None, strict: bool = True) -> MonodromyReport:
    """Level monodromies, their limits and the (gamma, gamma~) read-out.

    Gamma^theta_{n, j} = (u_{n,0,j}^-1 u_{n,1,j}) at P_{n,0,j} and
    Gamma^s_n = (u_{n,1,0}^-1 u_{n,1,1}) at P_{n,1,0}: both points lie in the
    two charts involved.  Limits are the deepest level; the Cauchy differences
    of consecutive levels are reported and must not grow when ``strict``.
    """
    cover = cover or gauges.cover
    th, sl, spread = {}, {}, {}
    for n in cover.levels:
        ns = cover.n_s(n)
        jj = np.arange(ns)
        q = cover.anchor(n, 0, jj)
        u0 = gauges(np.full(ns, n), np.zeros(ns, int), jj, q)
        u1 = gauges(np.full(ns, n), np.ones(ns, int), jj, q)
        th[n] = _inv(u0) @ u1
        spread[n] = float(np.max(np.linalg.norm(th[n] - np.roll(th[n], -1, axis=0), axis=(-2, -1))))
        q = cover.anchor(n, 1, 0)[None]
        a = gauges(np.array([n]), np.array([1]), np.array([0]), q)[0]
        b = gauges(np.array([n]), np.array([1]), np.array([1]), q)[0]
        sl[n] = _inv(a) @ b
    lv = cover.levels
    cth = [float(np.max(np.linalg.norm(th[lv[k]][: cover.n_s(lv[k])] - th[lv[k + 1]][: cover.n_s(lv[k])],
                                       axis=(-2, -1)))) for k in range(len(lv) - 1)]
    cs = [float(np.linalg.norm(sl[lv[k]] - sl[lv[k + 1]])) for k in range(len(lv) - 1)]
    if strict and len(cth) >= 2 and cth[-1] > cth[0] * (1 + 1e-6) + 1e-12:
        raise ValueError(f"theta monodromies do not converge: differences {cth}")
    g_th = th[lv[-1]][0]
    g_s = sl[lv[-1]]
    dets = [np.abs(np.linalg.det(m) - 1).max() for m in list(th.values()) + list(sl.values())]
    x_th = to_coords(log_su2(g_th))
    x_s = to_coords(log_su2(g_s))
    c = _conjugator_to_sigma(x_th if np.linalg.norm(x_th) > 1e-12 else x_s)
    gt = _inv(c) @ g_th @ c
    gs = _inv(c) @ g_s @ c
    gamma = float(to_coords(log_su2(gt))[0] / TWO_PI)
    gamma_tilde = float(np.mod(to_coords(log_su2(gs))[0] / TWO_PI, 1.0))
    if gamma_tilde > 1 - 1e-12:
        gamma_tilde = 0.0
    comm = float(np.linalg.norm(g_th @ g_s - g_s @ g_th))
    rep = MonodromyReport(th, sl, g_th, g_s, cth, cs, spread, comm, gamma, gamma_tilde, c, float(max(dets)))
    gauges.seams = {"theta": g_th, "s": g_s}
    return rep


# ------------------------------------------------------------- gluing

class GluedGauges:
    """Chart gauges interpolated across overlaps in the order theta, s, rho.

    On an overlap (lo, hi) between a chart and its successor the blend uses
    chi = 1 - S((x - lo)/(hi - lo)); the theta 0|1 and s 0|1 seams use the
    monodromies, so after gluing u~_0 Gamma^theta = u~_1 there.
    """

    def __init__(self, gauges: ChartGauges, report: MonodromyReport):
        self.g = gauges
        self.c = gauges.cover
        self.G_th = report.gamma_theta
        self.G_s = report.gamma_s

    # overlap helpers: local coordinate relative to chart centre in cell units
    def _cell_theta(self, i, q):
        return _wrap(q[..., 1] - self.c.dtheta * i, TWO_PI) / self.c.dtheta

    def _cell_s(self, lvl, j, q):
        ds = self.c.length / 2.0 ** (self.c.t + lvl)
        return _wrap(q[..., 2] - ds * j, self.c.length) / ds

    @staticmethod
    def _blend(u, v_from, v_to, x_lo, G, lower):
        """Apply the overlap correction; x_lo in [0, 1] across the overlap."""
        chi = 1 - smoothstep(x_lo)
        if lower:
            # e^v = (u_prev G)^-1 u, result u e^{-chi v}
            w = _inv(v_from @ G) @ u
            return u @ exp_su2(-chi[..., None, None] * log_su2(w))
        w = _inv(u @ G) @ v_to
        return u @ G @ exp_su2((1 - chi)[..., None, None] * log_su2(w)) @ _inv(G)

    def step_theta(self, lvl, i, j, q):
        u = self.g(lvl, i, j, q)
        x = self._cell_theta(i, q)
        t = self.c.t
        low = x < -1 / 3
        if np.any(low):
            ii = (i - 1) % t
            v = self.g(lvl[low], ii[low], j[low], q[low])
            G = np.where((i[low] == 1)[:, None, None], self.G_th, np.eye(2))
            u[low] = self._blend(u[low], v, None, (x[low] + 2 / 3) * 3, G, True)
        up = x > 1 / 3
        if np.any(up):
            ii = (i + 1) % t
            v = self.g(lvl[up], ii[up], j[up], q[up])
            G = np.where((i[up] == 0)[:, None, None], self.G_th, np.eye(2))
            u[up] = self._blend(u[up], None, v, (x[up] - 1 / 3) * 3, G, False)
        return u

    def step_s(self, lvl, i, j, q):
        u = self.step_theta(lvl, i, j, q)
        x = self._cell_s(lvl, j, q)
        ns = 2 ** (self.c.t + lvl)
        low = x < -1 / 3
        if np.any(low):
            jj = (j[low] - 1) % ns[low]
            v = self.step_theta(lvl[low], i[low], jj, q[low])
            G = np.where((j[low] == 1)[:, None, None], self.G_s, np.eye(2))
            u[low] = self._blend(u[low], v, None, (x[low] + 2 / 3) * 3, G, True)
        up = x > 1 / 3
        if np.any(up):
            jj = (j[up] + 1) % ns[up]
            v = self.step_theta(lvl[up], i[up], jj, q[up])
            G = np.where((j[up] == 0)[:, None, None], self.G_s, np.eye(2))
            u[up] = self._blend(u[up], None, v, (x[up] - 1 / 3) * 3, G, False)
        return u

    def _rho_neighbor(self, lvl, q):
        ds = self.c.length / 2.0 ** (self.c.t + lvl)
        return np.floor(np.mod(q[..., 2], self.c.length) / ds + 0.5).astype(int) % (2 ** (self.c.t + lvl))

    def _s_lift(self, lvl, j, q):
        # the s chain runs 1, 2, ..., 0, so chart 0 sits one period up
        ds = self.c.length / 2.0 ** (self.c.t + lvl)
        return ds * j + _wrap(q[..., 2] - ds * j, self.c.length) + np.where(j == 0, self.c.length, 0.0)

    def _seam_power(self, k):
        out = np.broadcast_to(np.eye(2, dtype=complex), k.shape + (2, 2)).copy()
        out[k == 1] = self.G_s
        out[k == -1] = _inv(self.G_s)
        return out

    def __call__(self, lvl, i, j, q):
        """Glued gauge u~_alpha at points q of chart alpha (index arrays)."""
        q = np.asarray(q, float)
        lvl, i, j = (np.array(np.broadcast_to(np.asarray(v), q.shape[:-1])) for v in (lvl, i, j))
        u = self.step_s(lvl, i, j, q)
        e = -np.log2(q[..., 0] / self.c.eps)  # rho = eps 2^-e
        # level n spans e in (3n - 4, 3n + 1): overlap with n+1 is (3n - 1, 3n + 1), with n-1 is (3n - 4, 3n - 2)
        for sel, dn, lower in (((e > 3 * lvl - 1) & (lvl < self.c.n_rho_max), 1, False),
                               ((e < 3 * lvl - 2) & (lvl > self.c.n_rho_min), -1, True)):
            if not np.any(sel):
                continue
            n2 = lvl[sel] + dn
            j2 = self._rho_neighbor(n2, q[sel])
            v = self.step_s(n2, i[sel], j2, q[sel])
            k = np.rint((self._s_lift(n2, j2, q[sel]) - self._s_lift(lvl[sel], j[sel], q[sel]))
                        / self.c.length).astype(int)
            if lower:
                x = (e[sel] - (3 * lvl[sel] - 4)) / 2
                u[sel] = self._blend(u[sel], v, None, x, self._seam_power(k), True)
            else:
                x = (e[sel] - (3 * lvl[sel] - 1)) / 2
                u[sel] = self._blend(u[sel], None, v, x, self._seam_power(-k), False)
        return u


@dataclass
class GlueReport:
    plain_mismatch: float
    theta_seam_mismatch: float
    s_seam_mismatch: float
    seam_factor_error: float


def glue_gauges(gauges: ChartGauges, report: MonodromyReport, n_samples: int = 64, seed: int = 0):
    """Glued gauges plus a consistency report on sampled overlap points."""
    glued = GluedGauges(gauges, report)
    c = gauges.cover
    rng = np.random.default_rng(seed)
    plain, seam_t, seam_s = 0.0, 0.0, 0.0
    for n in c.levels:
        ns = c.n_s(n)
        ds = c.ds(n)
        # theta overlaps between i and i+1 (cell coordinate in (1/3, 2/3) from i)
        i = rng.integers(0, c.t, n_samples)
        j = rng.integers(0, ns, n_samples)
        # a quarter of the samples sit on the theta seam, another quarter on the s seam
        i[: n_samples // 4] = 0
        j[n_samples // 4: n_samples // 2] = 0
        lo, hi = c.rho_range(n)
        e_lo, e_hi = 3 * n - 1 + 0.05, 3 * n - 2 - 0.05  # pure-level band
        rho = c.eps * 2.0 ** -rng.uniform(e_hi, e_lo, n_samples)
        th = c.dtheta * (i + rng.uniform(1 / 3, 2 / 3, n_samples))
        s = ds * (j + rng.uniform(-1 / 3, 1 / 3, n_samples))
        q = np.stack([rho, th, s], -1)
        lvl = np.full(n_samples, n)
        ua = glued(lvl, i, j, q)
        ub = glued(lvl, (i + 1) % c.t, j, q)
        seam = i == 0
        d_plain = np.linalg.norm(ua - ub, axis=(-2, -1))
        d_seam = np.linalg.norm(ua @ report.gamma_theta - ub, axis=(-2, -1))
        plain = max(plain, float(np.max(d_plain[~seam], initial=0.0)))
        seam_t = max(seam_t, float(np.max(d_seam[seam], initial=0.0)))
        # s overlaps between j and j+1
        th = c.dtheta * (i + rng.uniform(-1 / 3, 1 / 3, n_samples))
        s = ds * (j + rng.uniform(1 / 3, 2 / 3, n_samples))
        q = np.stack([rho, th, s], -1)
        ua = glued(lvl, i, j, q)
        ub = glued(lvl, i, (j + 1) % ns, q)
        seam = j == 0
        plain = max(plain, float(np.max(np.linalg.norm(ua - ub, axis=(-2, -1))[~seam], initial=0.0)))
        seam_s = max(seam_s, float(np.max(np.linalg.norm(ua @ report.gamma_s - ub, axis=(-2, -1))[seam],
                                          initial=0.0)))
    ideal = exp_su2(TWO_PI * report.gamma * SIGMA)
    factor_err = float(np.linalg.norm(_inv(report.conjugator) @ report.gamma_theta @ report.conjugator - ideal))
    return glued, GlueReport(plain, seam_t, seam_s, factor_err)


# ------------------------------------------------------------- comparison

def _curvature_density(conn, q, h_rel=1e-5):
    """rho |F|^2 (orthonormal frame) by centred differences in (rho, theta, s)."""
    a = conn(q)
    steps = np.stack([q[..., 0] * h_rel, np.full(q.shape[:-1], h_rel), np.full(q.shape[:-1], h_rel)], -1)
    da = []
    for k in range(3):
        e = np.zeros(q.shape)
        e[..., k] = steps[..., k]
        da.append((conn(q + e) - conn(q - e)) / (2 * steps[..., k, None, None]))
    rho = q[..., 0]
    scale = [np.ones_like(rho), rho, np.ones_like(rho)]
    tot = 0
    for i, j in ((0, 1), (1, 2), (2, 0)):
        f = da[i][..., j, :] - da[j][..., i, :] + 2 * np.cross(a[..., i, :], a[..., j, :])
        tot = tot + np.sum(f ** 2, -1) / (scale[i] * scale[j]) ** 2
    return rho * tot


@dataclass
class ComparisonResult:
    lhs: float
    curvature: float
    ratio: float
    per_level: dict = field(default_factory=dict)


def fiducial_comparison(conn, glued: GluedGauges, gamma: float, gamma_tilde: float, eps: float | None = None,
                        n_points: int = 8192, seed: int = 0, h_rel: float = 1e-4):
    """Weighted distance of the glued-gauge connection to A^f = gamma sigma dtheta + (2 pi gamma~/l) sigma ds.

    Integrates rho (|nabla^{A^f} D|^2 + |[sigma, D]|^2) with D = G(A) - A^f over
    the covered shell, where G = u~_alpha c w and w = exp(gamma sigma theta +
    2 pi gamma~ sigma s / l) turns the trivialised flat part into A^f.  D and
    its derivatives come from a 19-point stencil of G at each node.  The
    overlap blends make the integrand only piecewise smooth on the chart
    scale, so the integral is a scrambled Sobol estimate, uniform in
    (log rho, theta, s).  Returns the value, int rho |F|^2 on
    the same nodes and their ratio.
    """
    from scipy.stats import qmc

    c = glued.c
    l = c.length
    cmat = _conjugator_from(glued)
    lo, hi = c.covered_rho()
    u = qmc.Sobol(3, scramble=True, seed=seed).random(n_points)
    # log rho uniform: the level transitions carry most of the integral at every depth
    rho = lo * (hi / lo) ** u[:, 0]
    pdf_rho = 1.0 / (rho * np.log(hi / lo))
    q = np.stack([rho, TWO_PI * u[:, 1], l * u[:, 2]], -1)
    wq = rho / pdf_rho * TWO_PI * l / n_points  # volume element rho drho dtheta ds
    r = rho
    D, dD = _stencil_difference(conn, glued, q, gamma, gamma_tilde, cmat, h_rel)
    af = np.array([0.0, gamma, TWO_PI * gamma_tilde / l])
    # orthonormal frame (rho^, theta^, s^)
    Dh = D.copy()
    Dh[:, 1] /= r[:, None]
    dh = dD.copy()  # dh[:, j, k] = e_j (Dh_k)
    dh[:, :, 1] /= r[:, None, None]
    dh[:, 0, 1] -= D[:, 1] / r[:, None] ** 2
    dh[:, 1] /= r[:, None, None]
    cov = dh.copy()
    cov[:, 1, 0] -= Dh[:, 1] / r[:, None]
    cov[:, 1, 1] += Dh[:, 0] / r[:, None]
    af_h = np.zeros((len(r), 3, 3))
    af_h[:, 1, 0] = af[1] / r
    af_h[:, 2, 0] = af[2]
    cov += 2 * np.cross(af_h[:, :, None, :], Dh[:, None, :, :])
    brk = 2 * np.cross(np.array([1.0, 0.0, 0.0]), Dh)
    dens = r * (np.sum(cov ** 2, (1, 2, 3)) + np.sum(brk ** 2, (1, 2)))
    fdens = _curvature_density(conn, q)
    lvl = c.locate(q)[0]
    per_level = {int(n): (float(np.sum((wq * dens)[lvl == n])), float(np.sum((wq * fdens)[lvl == n])))
                 for n in c.levels}
    tot_lhs = float(np.sum(wq * dens))
    tot_f = float(np.sum(wq * fdens))
    ratio = tot_lhs / tot_f if tot_f > 0 else (0.0 if tot_lhs == 0 else np.inf)
    return ComparisonResult(tot_lhs, tot_f, ratio, per_level)


def _conjugator_from(glued):
    x = to_coords(log_su2(glued.G_th))
    if np.linalg.norm(x) < 1e-12:
        x = to_coords(log_su2(glued.G_s))
    return _conjugator_to_sigma(x)


def _stencil_difference(conn, glued, q, gamma, gamma_tilde, cmat, h_rel):
    """D = G(A) - A^f and its coordinate derivatives dD[:, j, k] = d_j D_k."""
    c = glued.c
    N = len(q)
    lvl, i, j = c.locate(q)
    th_l = c.dtheta * i + _wrap(q[:, 1] - c.dtheta * i, TWO_PI)
    ds = c.length / 2.0 ** (c.t + lvl)
    s_l = ds * j + _wrap(q[:, 2] - ds * j, c.length)
    h = np.stack([q[:, 0] * h_rel, np.full(N, h_rel), np.full(N, h_rel)], -1)
    offs = [(0, 0, 0)]
    for k in range(3):
        for sg in (1, -1):
            o = [0, 0, 0]
            o[k] = sg
            offs.append(tuple(o))
    for a in range(3):
        for b in range(a + 1, 3):
            for sa in (1, -1):
                for sb in (1, -1):
                    o = [0, 0, 0]
                    o[a], o[b] = sa, sb
                    offs.append(tuple(o))
    offs = np.array(offs, float)  # (19, 3)
    dq = offs[:, None, :] * h[None]  # (19, N, 3)
    qs = (q[None] + dq).reshape(-1, 3)
    rep = lambda x: np.broadcast_to(x, (len(offs), N)).reshape(-1)
    u = glued(rep(lvl), rep(i), rep(j), qs)
    th = (th_l[None] + dq[..., 1]).reshape(-1)
    s = (s_l[None] + dq[..., 2]).reshape(-1)
    w = exp_su2(from_coords(np.stack([gamma * th + TWO_PI * gamma_tilde * s / c.length, 0 * th, 0 * th], -1)))
    G = (u @ cmat @ w).reshape(len(offs), N, 2, 2)
    key = {tuple(o): k for k, o in enumerate(offs.astype(int).tolist())}

    def at(o):
        return G[key[tuple(o)]]

    g0 = G[0]
    gi = _inv(g0)
    d1, d2 = [], [[None] * 3 for _ in range(3)]
    for k in range(3):
        e = [0, 0, 0]
        e[k] = 1
        m = [0, 0, 0]
        m[k] = -1
        d1.append((at(e) - at(m)) / (2 * h[:, k, None, None]))
        d2[k][k] = (at(e) - 2 * g0 + at(m)) / h[:, k, None, None] ** 2
    for a in range(3):
        for b in range(a + 1, 3):
            def o(sa, sb):
                v = [0, 0, 0]
                v[a], v[b] = sa, sb
                return at(v)
            d2[a][b] = d2[b][a] = (o(1, 1) - o(1, -1) - o(-1, 1) + o(-1, -1)) / (4 * h[:, a, None, None]
                                                                                  * h[:, b, None, None])
    A = from_coords(conn(q))  # (N, 3, 2, 2)
    dA = []
    for k in range(3):
        e = np.zeros_like(q)
        e[:, k] = h[:, k]
        dA.append(from_coords((conn(q + e) - conn(q - e)) / (2 * h[:, k, None, None])))
    af = np.zeros((N, 3, 3))
    af[:, 1, 0] = gamma
    af[:, 2, 0] = TWO_PI * gamma_tilde / c.length
    D = np.empty((N, 3, 3))
    dD = np.empty((N, 3, 3, 3))
    for k in range(3):
        inner = A[:, k] @ g0 + d1[k]
        D[:, k] = np.real(to_coords(gi @ inner))
        for jj in range(3):
            val = -gi @ d1[jj] @ gi @ inner + gi @ (dA[jj][:, k] @ g0 + A[:, k] @ d1[jj] + d2[jj][k])
            dD[:, jj, k] = np.real(to_coords(val))
    return D - af, dD


# ------------------------------------------------------------- synthetic input

def flat_connection(gamma: float, gamma_tilde: float, length: float, perturbation=None):
    """conn(q) for gamma sigma dtheta + (2 pi gamma~/l) sigma ds (+ perturbation(q))."""

    def conn(q):
        q = np.asarray(q, float)
        out = np.zeros(q.shape[:-1] + (3, 3))
        out[..., 1, 0] = gamma
        out[..., 2, 0] = TWO_PI * gamma_tilde / length
        if perturbation is not None:
            out = out + perturbation(q)
        return out

    return conn


def decaying_perturbation(amp: float, eps: float, length: float, power: float = 1.0):
    """Non-abelian perturbation ~ amp (rho/eps)^power in the orthonormal frame."""

    def pert(q):
        rho, th, s = q[..., 0], q[..., 1], q[..., 2]
        f = amp * (rho / eps) ** power
        out = np.zeros(q.shape[:-1] + (3, 3))
        out[..., 0, 1] = f * np.cos(th)
        out[..., 1, 2] = rho * f * np.sin(TWO_PI * s / length)
        out[..., 2, 1] = f * np.cos(th + TWO_PI * s / length)
        out[..., 0, 2] = 0.5 * f * np.sin(2 * th)
        return out

    return pert


def perturbation_norm(pert, eps: float, length: float, n: int = 24):
    """H_{N,eps}-type norm int rho(|nabla a|^2) + |a_perp|^2 / rho of a perturbation (quadrature, FD)."""
    x, w = np.polynomial.legendre.leggauss(n)
    t_lo, t_hi = np.log(eps * 1e-6), np.log(eps)
    t = 0.5 * (t_hi - t_lo) * x + 0.5 * (t_hi + t_lo)
    rho = np.exp(t)
    w_rho = 0.5 * (t_hi - t_lo) * w * rho
    th = TWO_PI * np.arange(16) / 16
    s = length * np.arange(16) / 16
    R, T, S = np.meshgrid(rho, th, s, indexing="ij")
    q = np.stack([R, T, S], -1)
    a = pert(q)
    h = 1e-6
    tot = 0
    for k in range(3):
        e = np.zeros(q.shape)
        e[..., k] = h * (R if k == 0 else 1.0)
        d = (pert(q + e) - pert(q - e)) / (2 * e[..., k, None, None])
        sc = np.stack([np.ones_like(R), R, np.ones_like(R)], -1)[..., None]
        d = d / sc  # orthonormal components
        tot = tot + np.sum(d ** 2, (-2, -1)) / (1.0 if k != 1 else R ** 2)
    an = a / np.stack([np.ones_like(R), R, np.ones_like(R)], -1)[..., None]
    perp = np.sum(an[..., 1:] ** 2, (-2, -1))
    dens = R * tot + perp / R
    wq = w_rho[:, None, None] * R * (TWO_PI / 16) * (length / 16)
    return float(np.sqrt(np.sum(wq * dens)))
