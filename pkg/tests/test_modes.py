from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from knotmono.fields import TubularGrid
from knotmono.modes import (ModePair, RangeError, mode_apply, mode_apply_exact, operator_consistency,
                            prop_constants, prop_lower_bound_check, random_mode_pair, sweep, theta_bound_check,
                            theta_eigen_gap)
from knotmono.radial import PowerSum, RadialGrid

gammas = st.fractions(min_value=Fraction(1, 1000), max_value=Fraction(499, 1000))


@given(gammas, st.integers(-200, 200), st.sampled_from([-1, 0, 1]))
def test_theta_sandwich_exact(g, m, j):
    lhs, mid, rhs, ok = theta_bound_check(g, m, j)
    assert isinstance(mid, Fraction)
    assert ok and lhs <= mid <= rhs


def test_theta_bound_rejects_bad_gamma():
    with pytest.raises(ValueError):
        theta_bound_check(Fraction(1, 2), 0, 1)


def test_prop_constants_ranges():
    assert prop_constants(0.1)[0] > 0
    assert prop_constants(0.45)[1] > 0
    with pytest.raises(RangeError):
        prop_constants(0.25)


def test_mode_pair_validation():
    u = PowerSum([(1.0, 0.0)])
    with pytest.raises(ValueError):
        ModePair(u, u, 0, 0, 2, 0.1, 1.0)


def test_powersum_calculus():
    p = PowerSum([(2.0, 3.0), (1.0, 0.5)])
    assert p.deriv().terms == [(0.5, -0.5), (6.0, 2.0)]
    assert abs(p.integral(0.0, 1.0) - (0.5 + 1 / 1.5)) < 1e-14
    assert abs(p(2.0) - (16 + np.sqrt(2))) < 1e-13


def test_spectral_rows_match_exact_rows(rng):
    grid = RadialGrid(0.1 * 2.0 ** -6, 0.1, 48)
    p = random_mode_pair(rng, 0.1, 0.1)
    r1, r2 = mode_apply(p, grid)
    e1, e2 = mode_apply_exact(p)
    scale = np.abs(e1(grid.rho)).max() + np.abs(e2(grid.rho)).max()
    assert np.abs(r1 - e1(grid.rho)).max() / scale < 1e-9
    assert np.abs(r2 - e2(grid.rho)).max() / scale < 1e-9


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.02, 0.48))
def test_three_dimensional_operator_reduces_to_radial_rows(seed, gamma):
    eps = 0.1
    grid = TubularGrid(eps, 32, 16, 8, 2 * np.pi, rho_min=eps * 2.0 ** -6)
    p = random_mode_pair(np.random.default_rng(seed), gamma, eps)
    assert operator_consistency(p, grid) < 1e-8
    assert theta_eigen_gap(p, grid) < 1e-10


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([0.03, 0.1, 0.4, 0.47]), st.booleans())
def test_lower_bound_and_ibp_identity(seed, gamma, dagger):
    p = random_mode_pair(np.random.default_rng(seed), gamma, 0.1)
    rep = prop_lower_bound_check(p, 0.1, dagger)
    assert rep.ok
    assert rep.ibp_residue < 1e-10


def test_sweep_rows_are_deterministic():
    a = sweep(0.1, (-2, 2), seed=3)
    b = sweep(0.1, (-2, 2), seed=3)
    assert a == b and all(r[-1] for r in a)
