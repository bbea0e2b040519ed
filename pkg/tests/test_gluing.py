import numpy as np
import pytest

from knotmono.cli import unknot_setup
from knotmono.gluing import PlacementError, build_partition, glue, plan_placement, ring_directions


@pytest.fixture(scope="module")
def glued():
    tube, fp, lf = unknot_setup(0.1, 4.0, 0.02)
    p = plan_placement(1, 0.25, 5.0, M=4.0, curve=tube.curve)
    return tube, fp, glue(p, build_partition(p), fp, lf)


def test_ring_directions_are_unit():
    d = ring_directions(5)
    assert np.allclose(np.linalg.norm(d, axis=1), 1.0)


def test_placement_needs_room():
    with pytest.raises(PlacementError):
        plan_placement(1, 1.0, 5.0)


def test_partition_of_unity(glued, rng):
    _, _, g = glued
    x = g.placement.origin + rng.normal(size=(500, 3)) * 25
    chi, grad = g.partition.evaluate(x)
    assert np.allclose(chi.sum(0), 1.0)
    assert np.allclose(grad.sum(0), 0.0, atol=1e-12)
    assert chi.min() >= -1e-15 and chi.max() <= 1 + 1e-15


def test_partition_gradient_matches_finite_differences(glued, rng):
    _, _, g = glued
    p = g.placement.poses[0].center
    x = p + rng.normal(size=(50, 3)) * 0.5
    _, grad = g.partition.evaluate(x)
    h = 1e-6
    for k in range(3):
        e = np.zeros(3)
        e[k] = h
        fd = (g.partition.evaluate(x + e)[0] - g.partition.evaluate(x - e)[0]) / (2 * h)
        assert np.allclose(fd, grad[..., k], atol=1e-5)


def test_glued_field_is_fiducial_near_knot(glued):
    tube, fp, g = glued
    x = tube.to_cartesian(np.linspace(0, 6, 20), np.full(20, 0.01), np.linspace(0, 6, 20))
    a, phi = g(x)
    a0, phi0 = g.fiducial(x)
    assert np.array_equal(a, a0) and np.array_equal(phi, phi0)
    assert np.abs(g.residual(x)).max() < 1e-12


def test_closed_form_residual_matches_finite_differences(glued, rng):
    from knotmono.fiducial import point_residual

    _, _, g = glued
    x = g.partition.sample_transition(rng, 20)
    chi, _ = g.partition.evaluate(x)
    assert np.any((chi[1] > 0.01) & (chi[1] < 0.99))
    V = g.residual(x)
    V_fd, _ = point_residual(g, x, 1e-4, order=4)
    assert np.abs(V - V_fd).max() < 1e-6 * max(1.0, np.abs(V).max())


def test_mass_mismatch_rejected():
    tube, fp, lf = unknot_setup(0.1, 4.0, 0.02)
    p = plan_placement(1, 0.25, 5.0, M=2.0, curve=tube.curve)
    with pytest.raises(ValueError):
        glue(p, build_partition(p), fp, lf)
