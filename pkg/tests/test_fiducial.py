import numpy as np
import pytest

from knotmono.fiducial import (FiducialParams, LinkingForm, MonopolePose, eval_monopole, fiducial_evaluator,
                               hedgehog_equivalent, meridian_loop, monopole_phi_norm, point_residual)
from knotmono.knot import KnotCurve, Tube


@pytest.fixture(scope="module")
def unknot_link():
    tube = Tube(KnotCurve.unknot(1.0))
    return tube, LinkingForm(tube, 0.05)


@pytest.mark.parametrize("rho", [0.02, 0.12, 0.14])
def test_meridian_circulation_is_two_pi(unknot_link, rho):
    tube, link = unknot_link
    circ = link.circulation(meridian_loop(tube, 0.8, rho))
    assert abs(circ - 2 * np.pi) < 1e-3


def test_linking_form_equals_dtheta_near_knot(unknot_link):
    tube, link = unknot_link
    x = tube.to_cartesian(np.array([0.1, 2.0]), np.array([0.03, 0.08]), np.array([0.5, -2.0]))
    assert np.allclose(link(x), tube.dtheta(x), atol=1e-12)


def test_linking_form_vanishes_far_away(unknot_link):
    _, link = unknot_link
    x = link.center + np.array([[3 * link.r_far, 0, 0]])
    assert np.all(link(x) == 0.0)


def test_fiducial_params_validation():
    with pytest.raises(ValueError):
        FiducialParams(0.6, 1.0)
    with pytest.raises(ValueError):
        FiducialParams(0.1, 0.0)
    with pytest.raises(ValueError):
        FiducialParams(0.2, 1.0).require_admissible_range()


def test_monopole_phi_norm_closed_form(rng):
    M = 3.0
    pose = MonopolePose(np.zeros(3), M, axis=np.array([0.0, 0.0, 1.0]))
    x = rng.normal(size=(50, 3))
    x[:, 2] = -np.abs(x[:, 2]) - 0.1  # keep away from the string on +z
    _, phi = eval_monopole(pose, x)
    r = 2 * M * np.linalg.norm(x, axis=1)  # coth argument scale is 2M
    expect = M * (1 / np.tanh(r) - 1 / r)
    assert np.allclose(np.linalg.norm(phi, axis=-1), expect, rtol=1e-12)
    assert np.allclose(monopole_phi_norm(pose, x), expect, rtol=1e-12)


def test_monopole_is_gauge_equivalent_to_hedgehog(rng):
    pose = MonopolePose(np.array([0.2, -0.1, 0.3]), 2.0, axis=np.array([0.0, 0.0, 1.0]))
    x = pose.center + rng.normal(size=(20, 3))
    x[:, 2] = pose.center[2] - np.abs(x[:, 2] - pose.center[2]) - 0.1
    phi_g = eval_monopole(pose, x)[1]
    phi_h = hedgehog_equivalent(pose, x)[1]
    assert np.allclose(np.linalg.norm(phi_g, axis=-1), np.linalg.norm(phi_h, axis=-1), rtol=1e-12)


def test_fiducial_residual_converges_at_second_order(unknot_link):
    tube, link = unknot_link
    ev = fiducial_evaluator(FiducialParams(0.1, 2.0, 0.05), link)
    x = tube.to_cartesian(np.linspace(0, 6, 12), np.full(12, 0.4), np.linspace(0, 5, 12))
    r1 = np.abs(point_residual(ev, x, 0.02)[0]).max()
    r2 = np.abs(point_residual(ev, x, 0.01)[0]).max()
    assert 1.8 <= np.log2(r1 / r2) <= 2.2
