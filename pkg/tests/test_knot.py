import numpy as np
import pytest

from knotmono.knot import KnotCurve, OutsideTubeError, Tube, linking_number, smoothstep


@pytest.fixture(scope="module")
def unknot_tube():
    return Tube(KnotCurve.unknot(1.0))


@pytest.fixture(scope="module")
def trefoil_tube():
    return Tube(KnotCurve.trefoil())


def test_unknot_geometry(unknot_tube):
    c = unknot_tube.curve
    assert abs(c.length - 2 * np.pi) < 1e-10
    assert c.closure_error() < 1e-10
    assert c.speed_error() < 1e-8
    assert abs(c.max_curvature() - 1.0) < 1e-6


def test_frame_closes(trefoil_tube):
    assert trefoil_tube.frame.closure_error() < 1e-6


def test_pushoff_has_zero_linking(trefoil_tube):
    t = trefoil_tube
    s = np.linspace(0, t.length, 400, endpoint=False)
    k = t.curve.position(s)
    push = t.to_cartesian(s, np.full_like(s, 0.05), np.zeros_like(s))
    assert abs(linking_number(k, push)) < 1e-2


def test_tube_coordinates_roundtrip(trefoil_tube, rng):
    t = trefoil_tube
    n = 200
    s = rng.uniform(0, t.length, n)
    rho = rng.uniform(0.01, 0.5 * t.rho_max, n)
    th = rng.uniform(-np.pi, np.pi, n)
    c = t.from_cartesian(t.to_cartesian(s, rho, th))
    assert np.allclose(c.rho, rho, atol=1e-8)
    assert np.allclose(np.mod(c.s - s + t.length / 2, t.length) - t.length / 2, 0, atol=1e-7)
    assert np.allclose(np.angle(np.exp(1j * (c.theta - th))), 0, atol=1e-7)


def test_far_points_are_rejected(unknot_tube):
    with pytest.raises(OutsideTubeError):
        unknot_tube.from_cartesian(np.array([[5.0, 0.0, 0.0]]))


def test_metric_is_euclidean_outside_and_model_inside(unknot_tube):
    t = unknot_tube
    delta = 0.05
    far = t.to_cartesian(np.array([0.3]), np.array([2.5 * delta]), np.array([0.4]))
    assert np.array_equal(t.metric_at(far, delta)[0], np.eye(3))
    # at rho < delta the metric is the flat product ds^2 + drho^2 + rho^2 dtheta^2
    s, rho, th = np.array([1.0]), np.array([0.5 * delta]), np.array([0.7])
    x = t.to_cartesian(s, rho, th)
    J = t.tube_jacobian(s, rho, th)[0]  # columns d x / d(s, z1, z2)
    g = t.metric_at(x, delta)[0]
    assert np.allclose(J.T @ g @ J, np.eye(3), atol=1e-8)


def test_smoothstep_endpoints():
    assert smoothstep(np.array(-1.0)) == 0.0
    assert smoothstep(np.array(2.0)) == 1.0
    assert abs(smoothstep(np.array(0.5)) - 0.5) < 1e-12
