"""Acceptance criteria 1-10 at the stated tolerances.

Each test prints one PASS/FAIL line (also collected into the pytest
terminal summary) and then asserts the same condition.
"""
from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest

from acceptance_log import record
from knotmono import cli
from knotmono.fiducial import FiducialParams, LinkingForm, fiducial_evaluator, model_fiducial, point_residual
from knotmono.fields import CartesianGrid, TubularGrid, bogomolny_residual
from knotmono.harness import IMPLICIT_IDS, audit, empirical_constant, run_seed
from knotmono.knot import KnotCurve, Tube
from knotmono.modes import (operator_consistency, prop_lower_bound_check, random_mode_pair,
                            theta_bound_check, theta_eigen_gap)

TOL = 1e-8


def test_c01_monopole_exactness():
    rep = cli.monopole_convergence(mass=4.0, samples=200, refine=3, h=0.02, seed=0)
    ok = all(1.8 <= o <= 2.2 for o in rep["orders"]) and rep["phi_norm_error"] <= 1e-10
    record(1, "1-monopole exactness", ok,
           f"orders {[round(o, 4) for o in rep['orders']]}, |Phi| error {rep['phi_norm_error']:.1e}")
    assert ok


def test_c02_fiducial_exactness():
    tube = Tube(KnotCurve.unknot(1.0))
    delta = 0.05
    fp = FiducialParams(0.1, 2.0, delta)
    link = LinkingForm(tube, delta)

    # on N_delta the fiducial is exactly gamma sigma d theta + M sigma
    tg = TubularGrid(delta, 16, 32, 32, tube.length)
    tube_sup = float(np.abs(bogomolny_residual(model_fiducial(fp, tg))).max())

    # baseline Cartesian grid with the discrete closed form; the knot itself
    # is a singular line, so nodes whose stencil straddles it are left out
    g = CartesianGrid.box(link.center, 3.0, 32, offset=0.37)
    rho = tube.distance(g.points().reshape(-1, 3)).reshape(g.shape)
    V = np.abs(bogomolny_residual(model_fiducial(fp, g, link))).max(axis=(0, 1))
    global_sup = float(V[rho > 2 * g.spacing[0]].max())

    # order of the pointwise residual at fixed points rho >= 0.3
    rng = np.random.default_rng(0)
    pts = []
    while len(pts) < 200:
        x = rng.uniform(-2.5, 2.5, 3)
        if tube.distance(x[None])[0] > 0.3:
            pts.append(x)
    ev = fiducial_evaluator(fp, link)
    sups = [float(np.abs(point_residual(ev, np.array(pts), h)[0]).max()) for h in (0.04, 0.02, 0.01)]
    orders = [float(np.log2(sups[k] / sups[k + 1])) for k in range(2)]

    ok = tube_sup <= 1e-12 and global_sup <= 1e-6 and all(1.8 <= o <= 2.2 for o in orders)
    record(2, "fiducial exactness", ok,
           f"N_delta sup {tube_sup:.1e}, grid 32^3 sup {global_sup:.1e}, "
           f"pointwise orders {[round(o, 3) for o in orders]}")
    assert ok


def test_c03_mode_consistency():
    eps = 0.1
    grid = TubularGrid(eps, 32, 16, 8, 2 * np.pi, rho_min=eps * 2.0 ** -6)
    rng = np.random.default_rng(2024)
    worst = eigen = 0.0
    for _ in range(100):
        p = random_mode_pair(rng, float(rng.uniform(0.01, 0.49)), eps)
        worst = max(worst, operator_consistency(p, grid), operator_consistency(p, grid, dagger=True))
        eigen = max(eigen, theta_eigen_gap(p, grid))
    ok = worst <= 1e-8 and eigen <= 1e-10
    record(3, "mode consistency", ok, f"100 cells, max rel gap {worst:.1e}, eigenvalue gap {eigen:.1e}")
    assert ok


def test_c04_theta_bound_sweep():
    gammas = [Fraction(1, 100) + Fraction(2, 100) * k for k in range(25)]
    bad = total = 0
    for g in gammas:
        for m in range(-50, 51):
            for j in (-1, 0, 1):
                total += 1
                bad += not theta_bound_check(g, m, j)[3]
    ok = bad == 0
    record(4, "theta bound sweep", ok, f"{total} cases, {bad} violations (exact rationals)")
    assert ok


@pytest.mark.parametrize("gammas", [(0.05, 0.1), (0.40, 0.45)], ids=["small", "near_half"])
def test_c05_prop_lower_bound(gammas):
    worst = np.inf
    n_ok = n = 0
    for g in gammas:
        rng = np.random.default_rng(int(round(g * 1000)))
        for _ in range(500):
            p = random_mode_pair(rng, g, 0.1)
            for dagger in (False, True):
                r = prop_lower_bound_check(p, 0.1, dagger, tol=TOL)
                worst = min(worst, r.margin / r.scale)
                n += 1
                n_ok += r.ok
    ok = n_ok == n
    record(5, f"lower bound gamma {gammas}", ok, f"{n_ok}/{n} pass, min margin/scale {worst:.3f}")
    assert ok


def test_c06_inequality_harness():
    gamma = 0.1
    failures = []
    details = []
    for id_ in cli.EXPLICIT_IDS:
        kw = {} if id_ in ("HARDY_BALL", "RADIAL_HARDY_EXT") else {"eps": 0.1}
        rows = audit(id_, gamma, range(200), **kw)
        bad = [r for r in rows if r[2] < -TOL * r[3]]
        if bad:
            failures.append(id_)
        details.append(f"{id_} {200 - len(bad)}/200")
    c0 = run_seed("WEIGHTED_SOBOLEV", gamma, 0).extra["c0"]
    drifts = {}
    for id_ in IMPLICIT_IDS:
        a = empirical_constant(id_, gamma, range(40), refine=1)
        b = empirical_constant(id_, gamma, range(40), refine=2)
        drifts[id_] = abs(b - a) / abs(b)
    ok = not failures and all(d <= 0.05 for d in drifts.values())
    record(6, "inequality harness", ok,
           f"{', '.join(details)}; c0 = {c0:.4f}; implicit drift "
           + ", ".join(f"{k} {v:.1e}" for k, v in drifts.items()))
    assert ok


def test_c07_gluing_admissibility():
    rep = cli.glue_scan()
    rows = rep["rows"]
    good = [r["d"] for r in rows if r["ok"]]
    ok = bool(good) and rep["non_increasing"] and len(rows) >= 4
    sups = ", ".join(f"{r['sup_residual']:.4f}" for r in rows)
    record(7, "gluing admissibility", ok,
           f"d {[r['d'] for r in rows]}, sup|V| [{sups}] <= {rep['mu']:.2f}, admissible at d {good}")
    assert ok


def test_c08_picard_convergence():
    rep, _ = cli.picard_box(h=2.0)
    ok = rep["max_ratio_after_2"] <= 0.55 and rep["reduction"] <= 1e-6 and rep["gauge_final"] <= 1e-6 * rep["V_initial"]
    record(8, "Picard convergence", ok,
           f"{rep['unknowns']} unknowns, reduction {rep['reduction']:.1e}, "
           f"max ratio after step 2 {rep['max_ratio_after_2']:.3f}, gauge {rep['gauge_final']:.1e}")
    assert ok


def test_c09_monodromy_recovery():
    rep = cli.monodromy_run()
    ok = (rep["ok"] and rep["perturbation_norm"] <= 0.01 and abs(rep["gamma"] - 0.2) <= 1e-3
          and abs(rep["gamma_tilde"] - 0.3) <= 1e-3 and rep["commutator"] <= 1e-6)
    record(9, "monodromy recovery", ok,
           f"gamma {rep['gamma']:.6f}, gamma~ {rep['gamma_tilde']:.6f}, commutator {rep['commutator']:.1e}, "
           f"|a| {rep['perturbation_norm']:.4f}, ratio {rep['ratio']:.4g} (drift {rep['ratio_drift']:.1%})")
    assert ok


def test_c10_metric_deviation():
    tube = Tube(KnotCurve.trefoil())
    delta = 0.05
    a, _ = tube.metric_deviation_stats(delta, 10_000, seed=0)
    b, _ = tube.metric_deviation_stats(delta, 20_000, seed=0)
    out, _ = tube.metric_deviation_stats(delta, 10_000, seed=0, region="outside")
    drift = abs(b - a) / b
    ok = np.isfinite(b) and drift <= 0.05 and out == 0.0
    record(10, "metric deviation", ok, f"sup dev/rho {a:.4f} -> {b:.4f} (drift {drift:.1%}), outside {out}")
    assert ok


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q"]))
