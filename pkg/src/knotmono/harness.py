"""Randomized numerical audit of the analytic inequalities near and away from the knot.

Tube-side inequalities are evaluated in the product model metric
ds^2 + d rho^2 + rho^2 d theta^2 (which is g_delta on N_delta) on analytic
fields built from Fourier modes with power-law radial profiles.  In that
metric the frame dz1, dz2, ds is parallel, so derivatives act on frame
components directly and every integrand is known in closed form; the
integrals use composite Gauss rules (dyadic panels in log rho) and uniform
rules in theta and s.  Ball and spherical-exterior inequalities use sums
of Gaussian bumps in R^3.

Each check returns an :class:`InequalityReport` with margin = RHS - LHS.
A check passes when margin >= -1e-8 * (|LHS| + |RHS|).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fields import ConfigField, TubularGrid, coframe_components
from .knot import smoothstep, smoothstep_deriv
from .modes import random_profile
from .radial import PowerSum
from .su2 import cbracket, h_coords

TOL = 1e-8

EXPLICIT_IDS = ("ETA_PAIR", "BOUNDARY_DECAY", "RADIAL_HARDY_EXT", "WEIGHTED_SOBOLEV", "HARDY_BALL",
                "PERP_BOUND", "NORM_EQUIV", "TRACE_SCALED", "EPS1_BOUNDARY", "LOCAL_QUAD")
IMPLICIT_IDS = ("TRACE_EXT", "SOBOLEV_EXT")
ALL_IDS = EXPLICIT_IDS + IMPLICIT_IDS

# |Q(psi1, psi2)| <= Q_STRUCT |psi1| |psi2| for the symmetrized quadratic term
Q_STRUCT = (np.sqrt(2.0) + np.sqrt(6.0)) / 2


@dataclass
class InequalityReport:
    id: str
    lhs: float
    rhs: float
    margin: float
    scale: float
    ok: bool
    constant: float | None = None
    extra: dict = field(default_factory=dict)


def _report(id_, lhs, rhs, constant=None, **extra):
    lhs, rhs = float(lhs), float(rhs)
    scale = abs(lhs) + abs(rhs)
    margin = rhs - lhs
    return InequalityReport(id_, lhs, rhs, margin, scale, bool(margin >= -TOL * scale), constant, extra)


# ------------------------------------------------------------- constants

def sobolev_c0(length: float) -> float:
    """c0 = A^{4/3}, A = 2 (16 + 1/l^2)^{1/4} (16 + 1/(2 pi)^2)^{1/4}."""
    A = 2 * (16 + 1 / length ** 2) ** 0.25 * (16 + 1 / (2 * np.pi) ** 2) ** 0.25
    return A ** (4.0 / 3.0)


def hardy_ball_constant(eta: float) -> float:
    """C_eta from a linear radial cutoff between eta R and R."""
    return 2.0 / (1.0 - eta) ** 2


def theta_gap(gamma: float) -> float:
    """Smallest |n + 2 gamma j| over integers n and j = +-1."""
    return min(2 * gamma, 1 - 2 * gamma)


def eps1_constant(gamma: float) -> float:
    a, b = 2 * gamma, 1 - 2 * gamma
    return min(a - gamma ** 3, b - b ** 3)


def perp_factor(gamma: float, M: float, eps: float) -> float:
    return max(eps / (4 * gamma ** 2), 2 * eps / (1 - 2 * gamma) ** 2, 1 / (4 * M ** 2 * eps))


def norm_equiv_bounds(gamma: float, M: float, eps: float):
    return min(4 * gamma ** 2, (1 - 2 * gamma) ** 2 / 2), 1 + 4 * gamma ** 2 + 4 * (M * eps) ** 2


# ------------------------------------------------------------ quadrature

def radial_rule(lo: float, hi: float, n_panels: int, n_gl: int = 8, log: bool = True):
    """Composite Gauss-Legendre nodes and d rho weights on [lo, hi]."""
    x, w = np.polynomial.legendre.leggauss(n_gl)
    if log:
        edges = np.linspace(np.log(lo), np.log(hi), n_panels + 1)
    else:
        edges = np.linspace(lo, hi, n_panels + 1)
    a, b = edges[:-1, None], edges[1:, None]
    t = (0.5 * (b - a) * x[None] + 0.5 * (a + b)).ravel()
    wt = (0.5 * (b - a) * w[None]).ravel()
    if log:
        rho = np.exp(t)
        return rho, wt * rho
    return t, wt


@dataclass(frozen=True)
class TubeRule:
    """Tensor rule in (rho, theta, s) for the measure d rho d theta ds."""

    rho: np.ndarray
    w_rho: np.ndarray
    n_theta: int
    n_s: int
    length: float

    @property
    def theta(self):
        return 2 * np.pi * np.arange(self.n_theta) / self.n_theta

    @property
    def s(self):
        return self.length * np.arange(self.n_s) / self.n_s

    def integrate(self, f):
        """sum over nodes of f * d rho d theta ds (f shaped (n_rho, n_theta, n_s))."""
        ang = (2 * np.pi / self.n_theta) * (self.length / self.n_s)
        return float(np.real(np.einsum("i,ijk->", self.w_rho, f)) * ang)

    def surface(self, f2):
        """int f d theta ds for f shaped (n_theta, n_s)."""
        return float(np.real(np.sum(f2)) * (2 * np.pi / self.n_theta) * (self.length / self.n_s))


def tube_rule(lo, hi, length, n_theta, n_s, refine: int = 1, log: bool = True, panel_ratio: float = 2.0):
    if log:
        n_panels = max(1, int(np.ceil(np.log(hi / lo) / np.log(panel_ratio))))
    else:
        n_panels = 8
    rho, w = radial_rule(lo, hi, n_panels * refine, 8, log)
    return TubeRule(rho, w, n_theta * refine, n_s * refine, length)


# ------------------------------------------------------------ test fields

@dataclass(frozen=True)
class Mode:
    m: int
    n_s: int
    j: int
    u: PowerSum
    v: PowerSum


@dataclass(frozen=True)
class ModeSum:
    """psi given by alpha = a1 - i a2 and beta = a3 + i phi as sums of modes.

    An optional cutoff (r1, r2) multiplies every profile by
    1 - S((rho - r1)/(r2 - r1)), giving support in rho <= r2.
    """

    modes: tuple
    length: float
    cutoff: tuple | None = None

    def _chi(self, rho):
        if self.cutoff is None:
            return np.ones_like(rho), np.zeros_like(rho)
        r1, r2 = self.cutoff
        x = (rho - r1) / (r2 - r1)
        return 1 - smoothstep(x), -smoothstep_deriv(x) / (r2 - r1)

    @property
    def max_m(self):
        return max(abs(md.m) + 1 for md in self.modes)

    @property
    def max_n(self):
        return max(abs(md.n_s) for md in self.modes)

    def evaluate(self, rho, theta, s):
        """Dict of (3, nr, nt, ns) complex arrays: alpha, beta and their d_rho, d_theta, d_s."""
        T, S = theta[None, :, None], s[None, None, :]
        chi, dchi = self._chi(rho)
        shape = (3, rho.size, theta.size, s.size)
        out = {key: np.zeros(shape, complex) for key in
               ("alpha", "beta", "alpha_r", "beta_r", "alpha_t", "beta_t", "alpha_s", "beta_s")}
        for md in self.modes:
            h = h_coords(md.j)[:, None, None, None]
            k = 2 * np.pi * md.n_s / self.length
            pa = np.exp(-1j * (md.m + 1) * T - 1j * k * S)
            pb = np.exp(-1j * md.m * T - 1j * k * S)
            for name, prof, ph, mm in (("alpha", md.u, pa, md.m + 1), ("beta", md.v, pb, md.m)):
                val = prof(rho) * chi
                der = prof.deriv()(rho) * chi + prof(rho) * dchi
                base = h * ph[None]
                term = val[None, :, None, None] * base
                out[name] += term
                out[name + "_r"] += der[None, :, None, None] * base
                out[name + "_t"] += -1j * mm * term
                out[name + "_s"] += -1j * k * term
        return out

    def to_config(self, grid: TubularGrid) -> ConfigField:
        ev = self.evaluate(grid.rho_1d, grid.theta_1d, grid.s_1d)
        a, b = ev["alpha"], ev["beta"]
        comps = np.stack([a.real, -a.imag, b.real, b.imag])
        return ConfigField(grid, coframe_components(grid, comps), {"source": "mode_sum"})


@dataclass(frozen=True)
class TestFieldSpec:
    gamma: float
    eps: float = 0.1
    seed: int = 0
    n_modes: int = 2
    support: str = "tube"  # tube | exterior | both
    length: float = 2 * np.pi
    m_range: tuple = (-3, 3)
    n_range: tuple = (-2, 2)
    perp_only: bool = False
    degree: int = 2

    def __post_init__(self):
        if self.support not in ("tube", "exterior", "both"):
            raise ValueError("support must be tube, exterior or both")
        if not (0 < self.gamma < 0.5):
            raise ValueError("gamma must lie in (0, 1/2)")


def random_mode_sum(spec: TestFieldSpec) -> ModeSum:
    """Deterministic random field; distinct (m, n_s, j) cells."""
    rng = np.random.default_rng(spec.seed)
    seen, modes = set(), []
    js = (-1, 1) if spec.perp_only else (-1, 0, 1)
    while len(modes) < spec.n_modes:
        m = int(rng.integers(spec.m_range[0], spec.m_range[1] + 1))
        n = int(rng.integers(spec.n_range[0], spec.n_range[1] + 1))
        j = int(rng.choice(js))
        if (m, n, j) in seen:
            continue
        seen.add((m, n, j))
        modes.append(Mode(m, n, j, random_profile(rng, spec.gamma, spec.eps, spec.degree),
                          random_profile(rng, spec.gamma, spec.eps, spec.degree)))
    cutoff = None if spec.support == "tube" else (2 * spec.eps, 4 * spec.eps)
    return ModeSum(tuple(modes), spec.length, cutoff)


def random_test_field(spec: TestFieldSpec, grid: TubularGrid | None = None) -> ConfigField:
    """ConfigField on a tubular grid, with the analytic description in meta."""
    ms = random_mode_sum(spec)
    if grid is None:
        grid = TubularGrid(spec.eps, 16, 32, 32, spec.length)
    out = ms.to_config(grid)
    out.meta.update({"seed": spec.seed, "modes": [(md.m, md.n_s, md.j) for md in ms.modes],
                     "analytic": ms, "support": spec.support})
    return out


# ------------------------------------------------------------ densities

def _sq(x):
    return np.sum(np.abs(x) ** 2, axis=0)


def _ad_sigma(x):
    sig = np.zeros_like(x)
    sig[0] = 1.0
    return cbracket(sig, x, axis=0)


class _Sampled:
    """Pointwise densities of a ModeSum on a TubeRule."""

    def __init__(self, field_: ModeSum, rule: TubeRule, gamma: float = 0.0, M: float = 0.0):
        self.rule = rule
        self.ev = field_.evaluate(rule.rho, rule.theta, rule.s)
        self.rho = rule.rho[:, None, None]
        self.gamma, self.M = gamma, M

    def parts(self, key):
        return self.ev["alpha" + key], self.ev["beta" + key]

    def sq(self, which="all"):
        a, b = self.parts("")
        if which == "perp":
            return _sq(a[1:]) + _sq(b[1:])
        if which == "par":
            return np.abs(a[0]) ** 2 + np.abs(b[0]) ** 2
        return _sq(a) + _sq(b)

    def grad_sq(self, covariant: bool = False, higgs: bool = False):
        ar, br = self.parts("_r")
        at, bt = self.parts("_t")
        as_, bs = self.parts("_s")
        if covariant:
            a, b = self.parts("")
            at = at + self.gamma * _ad_sigma(a)
            bt = bt + self.gamma * _ad_sigma(b)
        out = _sq(ar) + _sq(br) + (_sq(at) + _sq(bt)) / self.rho ** 2 + _sq(as_) + _sq(bs)
        if higgs:
            a, b = self.parts("")
            out = out + self.M ** 2 * (_sq(_ad_sigma(a)) + _sq(_ad_sigma(b)))
        return out

    def theta_terms(self):
        """(|d_theta psi|^2 + |psi_perp|^2, |d_theta psi + gamma [sigma, psi]|^2)."""
        a, b = self.parts("")
        at, bt = self.parts("_t")
        flat = _sq(at) + _sq(bt) + self.sq("perp")
        cov = _sq(at + self.gamma * _ad_sigma(a)) + _sq(bt + self.gamma * _ad_sigma(b))
        return flat, cov

    def real_parts(self):
        """(a1, a2, a3, phi) real su(2) coordinate arrays."""
        a, b = self.parts("")
        return a.real, -a.imag, b.real, b.imag


def _boundary(field_: ModeSum, rho0: float, rule: TubeRule):
    """int |psi(rho0)|^2 d theta ds and its parallel part."""
    ev = field_.evaluate(np.array([rho0]), rule.theta, rule.s)
    tot = (_sq(ev["alpha"]) + _sq(ev["beta"]))[0]
    par = (np.abs(ev["alpha"][0]) ** 2 + np.abs(ev["beta"][0]) ** 2)[0]
    return rule.surface(tot), rule.surface(par)


def _angular_counts(field_: ModeSum, power: int = 2):
    # exact for trig polynomials of degree power * max frequency
    return 2 * power * field_.max_m + 4, 2 * power * max(field_.max_n, 1) + 4


def _inner_rule(field_, eps, refine=1, power=2, depth=40):
    nt, ns = _angular_counts(field_, power)
    return tube_rule(eps * 2.0 ** -depth, eps, field_.length, nt, ns, refine)


def _outer_rule(field_, lo, hi, refine=1, power=2):
    nt, ns = _angular_counts(field_, power)
    rho, w = radial_rule(lo, hi, 16 * refine, 8, log=False)
    return TubeRule(rho, w, nt * refine, ns * refine, field_.length)


# ------------------------------------------------------------ tube checks

def check_eta_pair(field_: ModeSum, eps: float, eta: float = 0.5, refine: int = 1):
    """Both eta-inequalities on N_eps (min of the two margins)."""
    if not (0 < eta < 1):
        raise ValueError("eta must lie in (0, 1)")
    rule = _inner_rule(field_, eps, refine)
    smp = _Sampled(field_, rule)
    I0 = rule.integrate(smp.sq())
    ar, br = smp.parts("_r")
    D = rule.integrate(smp.rho ** 2 * (_sq(ar) + _sq(br)))
    B = eps * _boundary(field_, eps, rule)[0]
    r1 = _report("ETA_PAIR", eta * (1 - eta) * I0, D + eta * B)
    r2 = _report("ETA_PAIR", eta * B, D + eta * (1 + eta) * I0)
    worst = r1 if r1.margin / max(r1.scale, 1e-300) < r2.margin / max(r2.scale, 1e-300) else r2
    worst.ok = r1.ok and r2.ok
    worst.extra = {"first": (r1.lhs, r1.rhs), "second": (r2.lhs, r2.rhs), "eta": eta}
    return worst


def check_boundary_decay(field_: ModeSum, eps: float, levels: int = 24, refine: int = 1):
    """b(rho) = rho int |psi(rho)|^2 along rho = eps 2^-i: the dyadic
    recursion b(rho) <= 3/4 b(2 rho) + 9 int_rho^{2rho} t^2 |d_t psi|^2, and decay."""
    nt, ns = _angular_counts(field_)
    ang = TubeRule(np.array([eps]), np.array([1.0]), nt * refine, ns * refine, field_.length)
    rhos = eps * 2.0 ** -np.arange(levels + 1)
    b = np.array([r * _boundary(field_, r, ang)[0] for r in rhos])
    worst = None
    for i in range(1, levels + 1):
        rule = tube_rule(rhos[i], rhos[i - 1], field_.length, nt, ns, refine)
        smp = _Sampled(field_, rule)
        ar, br = smp.parts("_r")
        grad = rule.integrate(smp.rho ** 2 * (_sq(ar) + _sq(br)))
        rep = _report("BOUNDARY_DECAY", b[i], 0.75 * b[i - 1] + 9 * grad)
        if worst is None or rep.margin / max(rep.scale, 1e-300) < worst.margin / max(worst.scale, 1e-300):
            worst = rep
    tail = b[-6:]
    slope = float(np.polyfit(np.log(rhos[-6:]), np.log(np.maximum(tail, 1e-300)), 1)[0])
    worst.ok = worst.ok and bool(b[-1] <= b[0] * 1e-3 or b[-1] < 1e-12)
    worst.extra = {"b": b.tolist(), "rho": rhos.tolist(), "exponent": slope}
    return worst


def tube_norms(field_: ModeSum, eps: float, gamma: float, M: float, refine: int = 1, power: int = 2):
    """Squared H_N, Htilde_N and the parallel boundary term on N_eps."""
    rule = _inner_rule(field_, eps, refine, power)
    smp = _Sampled(field_, rule, gamma, M)
    rho = smp.rho
    vol = rho  # d^3x = rho d rho d theta ds
    H = rule.integrate(vol * rho * smp.grad_sq(covariant=True, higgs=True))
    ar, br = smp.parts("_r")
    as_, bs = smp.parts("_s")
    flat_t, _ = smp.theta_terms()
    Ht = rule.integrate(rho ** 2 * (_sq(ar) + _sq(br) + _sq(as_) + _sq(bs)) + flat_t)
    _, par = _boundary(field_, eps, rule)
    return {"H": H, "Htilde": Ht, "par_boundary": eps * par, "rule": rule, "sampled": smp}


def check_norm_equiv(field_: ModeSum, eps: float, gamma: float, M: float, refine: int = 1):
    n = tube_norms(field_, eps, gamma, M, refine)
    lo, hi = norm_equiv_bounds(gamma, M, eps)
    r1 = _report("NORM_EQUIV", lo * n["Htilde"], n["H"])
    r2 = _report("NORM_EQUIV", n["H"], hi * n["Htilde"])
    worst = r1 if r1.margin / max(r1.scale, 1e-300) < r2.margin / max(r2.scale, 1e-300) else r2
    worst.ok = r1.ok and r2.ok
    worst.extra = {"lower": lo, "upper": hi, "H": n["H"], "Htilde": n["Htilde"]}
    return worst


def check_weighted_sobolev(field_: ModeSum, eps: float, refine: int = 1):
    """(int rho^3 |psi|^6)^{1/3} <= c0 int (rho |grad psi|^2 + |psi|^2 / rho)."""
    rule = _inner_rule(field_, eps, refine, power=6)
    smp = _Sampled(field_, rule)
    rho = smp.rho
    sq = smp.sq()
    lhs = rule.integrate(rho ** 4 * sq ** 3) ** (1 / 3)
    base = rule.integrate(rho ** 2 * smp.grad_sq() + sq)
    c0 = sobolev_c0(field_.length)
    return _report("WEIGHTED_SOBOLEV", lhs, c0 * base, constant=lhs / base if base > 0 else 0.0, c0=c0)


def quadratic_density(s1: _Sampled, s2: _Sampled):
    """|Q(psi1, psi2)|^2 pointwise in the parallel frame."""
    a1 = s1.real_parts()
    a2 = s2.real_parts()
    one1, one2 = a1[:3], a2[:3]
    phi1, phi2 = a1[3], a2[3]
    cyc = ((1, 2, 0), (2, 0, 1), (0, 1, 2))
    tot = 0
    for i, j, k in cyc:
        q = 0.5 * (cbracket(one1[i], one2[j]) - cbracket(one1[j], one2[i]))
        q = q - 0.5 * (cbracket(one1[k], phi2) + cbracket(one2[k], phi1))
        tot = tot + _sq(q)
    return tot


def check_local_quad(f1: ModeSum, f2: ModeSum, eps: float, refine: int = 1):
    """||Q(psi1, psi2)||^2_{L2_eps} <= C^2 c1 (Ht1 + eps|psi1_par(eps)|^2)(Ht2 + ...), c1 = 25 c0^{3/2}.

    Also records the pointwise structure bound |Q| <= C |psi1||psi2|."""
    nt1, ns1 = _angular_counts(f1, 4)
    nt2, ns2 = _angular_counts(f2, 4)
    nt, ns = max(nt1, nt2), max(ns1, ns2)
    rule = tube_rule(eps * 2.0 ** -40, eps, f1.length, nt, ns, refine)
    s1, s2 = _Sampled(f1, rule), _Sampled(f2, rule)
    q2 = quadratic_density(s1, s2)
    rho = s1.rho
    lhs = rule.integrate(rho * rho * q2)
    pointwise = float(np.max(np.sqrt(q2) - Q_STRUCT * np.sqrt(s1.sq() * s2.sq())))

    def bracket(f, s):
        ar, br = s.parts("_r")
        as_, bs = s.parts("_s")
        flat_t, _ = s.theta_terms()
        Ht = rule.integrate(rho ** 2 * (_sq(ar) + _sq(br) + _sq(as_) + _sq(bs)) + flat_t)
        return Ht + eps * _boundary(f, eps, rule)[1]

    prod = bracket(f1, s1) * bracket(f2, s2)
    c1 = 25 * sobolev_c0(f1.length) ** 1.5
    rep = _report("LOCAL_QUAD", lhs, Q_STRUCT ** 2 * c1 * prod,
                  constant=lhs / (Q_STRUCT ** 2 * prod) if prod > 0 else 0.0, c1=c1, pointwise_excess=pointwise)
    rep.ok = rep.ok and pointwise <= 1e-12
    return rep


# ---------------------------------------------------- global (model) checks

def _global_parts(field_: ModeSum, eps: float, gamma: float, M: float, refine: int = 1, power: int = 2):
    """Inner rule on (0, eps] and outer rule on [eps, r2] for a cut-off field."""
    if field_.cutoff is None:
        raise ValueError("global checks need a field with a cutoff")
    inner = _inner_rule(field_, eps, refine, power)
    outer = _outer_rule(field_, eps, field_.cutoff[1], refine, power)
    return (inner, _Sampled(field_, inner, gamma, M)), (outer, _Sampled(field_, outer, gamma, M))


def check_perp_bound(field_: ModeSum, eps: float, gamma: float, M: float, refine: int = 1):
    """int |psi_perp|^2 <= max{eps/4g^2, 2eps/(1-2g)^2, 1/(4M^2 eps)} ||psi||^2_{H_eps}."""
    (ri, si), (ro, so) = _global_parts(field_, eps, gamma, M, refine)
    lhs = ri.integrate(si.rho * si.sq("perp")) + ro.integrate(so.rho * so.sq("perp"))
    H = (ri.integrate(si.rho * si.rho * si.grad_sq(True, True))
         + eps * ro.integrate(so.rho * so.grad_sq(True, True)))
    fac = perp_factor(gamma, M, eps)
    return _report("PERP_BOUND", lhs, fac * H, constant=lhs / H if H > 0 else 0.0, factor=fac)


def exterior_integrals(field_: ModeSum, eps: float, gamma: float, refine: int = 1, r_ball: float | None = None):
    """Pieces used by the exterior inequalities (model geometry rho >= eps)."""
    ro = _outer_rule(field_, eps, field_.cutoff[1], refine, power=6)
    so = _Sampled(field_, ro, gamma)
    vol = so.rho
    grad = ro.integrate(vol * so.grad_sq(covariant=True))
    sq = so.sq()
    r_ball = r_ball if r_ball is not None else field_.cutoff[1]
    ball = ro.integrate(vol * sq * (so.rho <= r_ball))
    sixth = ro.integrate(vol * sq ** 3)
    bnd = eps * _boundary(field_, eps, ro)[0]
    return {"grad": grad, "ball": ball, "sixth": sixth, "boundary": bnd}


def check_trace_ext(field_: ModeSum, eps: float, gamma: float, refine: int = 1):
    """Empirical C in  boundary(eps) + int_{B_R minus N_eps} |psi|^2 <= C int_ext |grad^A psi|^2."""
    e = exterior_integrals(field_, eps, gamma, refine)
    lhs = e["boundary"] + e["ball"]
    return _report("TRACE_EXT", lhs, lhs, constant=lhs / e["grad"] if e["grad"] > 0 else np.inf)


def check_sobolev_ext(field_: ModeSum, eps: float, gamma: float, refine: int = 1):
    """Empirical C in  int |psi|^6 <= C (int |grad^A psi|^2)^3 on the exterior."""
    e = exterior_integrals(field_, eps, gamma, refine)
    c = e["sixth"] / e["grad"] ** 3 if e["grad"] > 0 else np.inf
    return _report("SOBOLEV_EXT", e["sixth"], e["sixth"], constant=c)


def check_trace_scaled(field_: ModeSum, eps: float, delta: float, gamma: float, eta: float = 0.5,
                       C: float | None = None, refine: int = 1):
    """eps^{eta-1} boundary(eps) <= (C delta^{eta-1} + delta^eta / eta) int_{rho > eps} |grad^A psi|^2.

    C defaults to the field's own trace ratio at delta, the strictest choice.
    """
    if not (eps <= delta < field_.cutoff[1]):
        raise ValueError("need eps <= delta < support radius")
    e_eps = exterior_integrals(field_, eps, gamma, refine)
    e_del = exterior_integrals(field_, delta, gamma, refine)
    if C is None:
        C = e_del["boundary"] / e_del["grad"]
    lhs = eps ** (eta - 1) * e_eps["boundary"]
    rhs = (C * delta ** (eta - 1) + delta ** eta / eta) * e_eps["grad"]
    return _report("TRACE_SCALED", lhs, rhs, constant=C)


def check_eps1_boundary(field_: ModeSum, eps: float, eps1: float, gamma: float, refine: int = 1):
    """Propagation step for psi = psi_perp from eps1 down to eps:
    c int |psi(eps)|^2 eps <= eps int_{eps<rho<eps1} |grad^A psi|^2 + c eps int |psi(eps1)|^2,
    with c = min{2g - g^3, (1-2g) - (1-2g)^3}."""
    if not eps < eps1:
        raise ValueError("need eps < eps1")
    nt, ns = _angular_counts(field_)
    rule = tube_rule(eps, eps1, field_.length, nt, ns, refine, panel_ratio=1.25)
    smp = _Sampled(field_, rule, gamma)
    if np.max(smp.sq("par")) > 1e-20:
        raise ValueError("field must be perpendicular to sigma")
    c = eps1_constant(gamma)
    grad = rule.integrate(smp.rho * smp.grad_sq(covariant=True))
    lhs = c * eps * _boundary(field_, eps, rule)[0]
    rhs = eps * grad + c * eps * _boundary(field_, eps1, rule)[0]
    return _report("EPS1_BOUNDARY", lhs, rhs, constant=c)


# ------------------------------------------------------- ball / exterior R^3

@dataclass(frozen=True)
class BumpField:
    """su(2)-valued (or scalar, ncomp=1) sum of Gaussians in R^3."""

    centers: np.ndarray
    widths: np.ndarray
    coeffs: np.ndarray  # (n_bumps, ncomp)

    def __call__(self, x):
        d = x[..., None, :] - self.centers
        g = np.exp(-0.5 * np.sum(d * d, -1) / self.widths ** 2)
        val = np.einsum("...b,bc->...c", g, self.coeffs)
        grad = np.einsum("...b,...bk,bc->...kc", -g / self.widths ** 2, d, self.coeffs)
        return val, grad


def random_bumps(rng, n=3, spread=1.0, width=(0.3, 1.0), ncomp=3, center=None):
    c = rng.normal(size=(n, 3)) * spread
    if center is not None:
        c[0] = center
    return BumpField(c, rng.uniform(*width, size=n), rng.normal(size=(n, ncomp)))


def sphere_rule(n_r, r_lo, r_hi, n_cos=24, n_phi=48, panels=8):
    r, wr = radial_rule(r_lo, r_hi, panels, n_r, log=False) if r_lo > 0 else radial_rule(1e-300, r_hi, panels, n_r, log=False)
    ct, wc = np.polynomial.legendre.leggauss(n_cos)
    ph = 2 * np.pi * np.arange(n_phi) / n_phi
    st = np.sqrt(1 - ct ** 2)
    dirs = np.stack([st[:, None] * np.cos(ph)[None], st[:, None] * np.sin(ph)[None],
                     np.broadcast_to(ct[:, None], (n_cos, n_phi))], -1)
    wang = wc[:, None] * np.full(n_phi, 2 * np.pi / n_phi)[None]
    return r, wr, dirs, wang


def check_hardy_ball(f: BumpField, center, R: float, eta: float = 0.5, refine: int = 1):
    """int_{B_eta R} |f|^2 / r <= C_eta (1/R int_{B_R} |f|^2 + R int_{B_R} |grad f|^2)."""
    center = np.asarray(center, float)
    r, wr, dirs, wang = sphere_rule(8, 0.0, R, 24 * refine, 48 * refine, 16 * refine)
    x = center + r[:, None, None, None] * dirs[None]
    val, grad = f(x)
    sq = np.sum(val ** 2, -1)
    g2 = np.sum(grad ** 2, axis=(-1, -2))
    meas = (wr * r ** 2)[:, None, None] * wang[None]
    inner = r[:, None, None] <= eta * R
    # the inner ball integral uses its own rule so the cut at eta R is exact
    ri, wri, _, _ = sphere_rule(8, 0.0, eta * R, 24 * refine, 48 * refine, 16 * refine)
    xi = center + ri[:, None, None, None] * dirs[None]
    vi, _ = f(xi)
    lhs = float(np.sum((wri * ri)[:, None, None] * wang[None] * np.sum(vi ** 2, -1)))
    del inner
    Ce = hardy_ball_constant(eta)
    rhs = Ce * (float(np.sum(meas * sq)) / R + R * float(np.sum(meas * g2)))
    return _report("HARDY_BALL", lhs, rhs, constant=Ce)


def check_radial_hardy_ext(f: BumpField, center, R: float, A=None, r_max: float | None = None, refine: int = 1):
    """2 int_{r>R} |grad^A psi|^2 >= (1/R) int_{|x|=R} |psi|^2 + 1/2 int_{r>R} |psi|^2 / r^2.

    A is a constant connection (3 spatial x 3 algebra coordinates) or None.
    """
    center = np.asarray(center, float)
    if r_max is None:
        far = np.max(np.linalg.norm(f.centers - center, axis=1) + 12 * f.widths)
        r_max = max(far, 2 * R)
    r, wr, dirs, wang = sphere_rule(8, R, r_max, 24 * refine, 48 * refine, 24 * refine)
    x = center + r[:, None, None, None] * dirs[None]
    val, grad = f(x)
    if A is not None:
        A = np.asarray(A, float)
        grad = grad + np.stack([cbracket(np.broadcast_to(A[k], val.shape), val, axis=-1) for k in range(3)], -2)
    meas = (wr * r ** 2)[:, None, None] * wang[None]
    g2 = float(np.sum(meas * np.sum(grad ** 2, axis=(-1, -2))))
    hardy = float(np.sum(meas * np.sum(val ** 2, -1) / r[:, None, None] ** 2))
    vb, _ = f(center + R * dirs)
    bnd = float(np.sum(wang * np.sum(vb ** 2, -1))) * R ** 2
    return _report("RADIAL_HARDY_EXT", bnd / R + 0.5 * hardy, 2 * g2)


# ------------------------------------------------------------ dispatch

def check_inequality(id_: str, **inputs) -> InequalityReport:
    table = {
        "ETA_PAIR": check_eta_pair, "BOUNDARY_DECAY": check_boundary_decay,
        "WEIGHTED_SOBOLEV": check_weighted_sobolev, "LOCAL_QUAD": check_local_quad,
        "NORM_EQUIV": check_norm_equiv, "PERP_BOUND": check_perp_bound,
        "TRACE_EXT": check_trace_ext, "SOBOLEV_EXT": check_sobolev_ext,
        "TRACE_SCALED": check_trace_scaled, "EPS1_BOUNDARY": check_eps1_boundary,
        "HARDY_BALL": check_hardy_ball, "RADIAL_HARDY_EXT": check_radial_hardy_ext,
    }
    if id_ not in table:
        raise ValueError(f"unsupported inequality id {id_}")
    return table[id_](**inputs)


def run_seed(id_: str, gamma: float, seed: int, eps: float = 0.1, M: float = 2.0, refine: int = 1,
             length: float = 2 * np.pi) -> InequalityReport:
    """One seeded instance of an id with the default audit inputs."""
    if id_ in ("HARDY_BALL", "RADIAL_HARDY_EXT"):
        rng = np.random.default_rng(seed)
        R = float(rng.uniform(0.5, 2.0))
        if id_ == "HARDY_BALL":
            f = random_bumps(rng, 3, R, (0.2 * R, R), ncomp=int(rng.choice([1, 3])), center=np.zeros(3))
            return check_hardy_ball(f, np.zeros(3), R, float(rng.uniform(0.1, 0.9)), refine)
        f = random_bumps(rng, 3, 2 * R, (0.3 * R, R))
        A = rng.normal(size=(3, 3)) * gamma
        return check_radial_hardy_ext(f, np.zeros(3), R, A, refine=refine)
    rng = np.random.default_rng(10_000 + seed)
    if id_ in ("ETA_PAIR", "BOUNDARY_DECAY", "WEIGHTED_SOBOLEV", "NORM_EQUIV"):
        ms = random_mode_sum(TestFieldSpec(gamma, eps, seed, length=length))
        if id_ == "ETA_PAIR":
            return check_eta_pair(ms, eps, float(rng.uniform(0.05, 0.95)), refine)
        if id_ == "BOUNDARY_DECAY":
            return check_boundary_decay(ms, eps, refine=refine)
        if id_ == "WEIGHTED_SOBOLEV":
            return check_weighted_sobolev(ms, eps, refine)
        return check_norm_equiv(ms, eps, gamma, M, refine)
    if id_ == "LOCAL_QUAD":
        f1 = random_mode_sum(TestFieldSpec(gamma, eps, seed, length=length))
        f2 = random_mode_sum(TestFieldSpec(gamma, eps, seed + 7919, length=length))
        return check_local_quad(f1, f2, eps, refine)
    if id_ == "EPS1_BOUNDARY":
        ms = random_mode_sum(TestFieldSpec(gamma, eps, seed, support="both", perp_only=True, length=length))
        return check_eps1_boundary(ms, eps / 8, eps, gamma, refine)
    ms = random_mode_sum(TestFieldSpec(gamma, eps, seed, support="both", length=length))
    if id_ == "PERP_BOUND":
        return check_perp_bound(ms, eps, gamma, M, refine)
    if id_ == "TRACE_EXT":
        return check_trace_ext(ms, eps, gamma, refine)
    if id_ == "SOBOLEV_EXT":
        return check_sobolev_ext(ms, eps, gamma, refine)
    if id_ == "TRACE_SCALED":
        return check_trace_scaled(ms, eps / 4, eps, gamma, float(rng.uniform(0.1, 0.9)), refine=refine)
    raise ValueError(f"unsupported inequality id {id_}")


def audit(id_: str, gamma: float, seeds, **kw):
    """Rows (id, seed, margin, scale, ok, constant) over seeds."""
    rows = []
    for sd in seeds:
        rep = run_seed(id_, gamma, int(sd), **kw)
        rows.append((id_, int(sd), rep.margin, rep.scale, rep.ok, rep.constant))
    return rows


def empirical_constant(id_: str, gamma: float, seeds, refine: int = 1, **kw) -> float:
    """Largest per-field ratio over the seeds (the best constant for that sample)."""
    return max(run_seed(id_, gamma, int(s), refine=refine, **kw).constant for s in seeds)
