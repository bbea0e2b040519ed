import numpy as np
import pytest

from knotmono.fields import (CartesianGrid, ConfigField, TubularGrid, apply_extended, apply_linearization,
                             bogomolny_residual, curvature, load_field, quadratic, save_field)


@pytest.fixture
def grid():
    return CartesianGrid.box(np.zeros(3), 1.0, 9)


def random_field(grid, rng, scale=0.3):
    return ConfigField(grid, scale * rng.normal(size=(4, 3) + grid.shape))


def test_shape_is_checked(grid):
    with pytest.raises(ValueError):
        ConfigField(grid, np.zeros((4, 3, 2, 2, 2)))


def test_constant_abelian_field_is_flat(grid):
    f = ConfigField.zeros(grid)
    f.values[0, 0] = 0.7
    f.values[2, 0] = -0.2
    f.values[3, 0] = 1.5
    assert np.abs(curvature(f)[0]).max() < 1e-14
    assert np.abs(bogomolny_residual(f)).max() < 1e-14


def test_linearization_is_linear(grid, rng):
    Psi, a, b = (random_field(grid, rng) for _ in range(3))
    s = ConfigField(grid, a.values + 2.0 * b.values)
    lhs = apply_linearization(Psi, s)
    rhs = apply_linearization(Psi, a) + 2.0 * apply_linearization(Psi, b)
    assert np.allclose(lhs, rhs, atol=1e-12)


def test_quadratic_is_symmetric(grid, rng):
    a, b = random_field(grid, rng), random_field(grid, rng)
    assert np.allclose(quadratic(a, b).values, quadratic(b, a).values)


def test_residual_expansion(grid, rng):
    """V(Psi + psi) = V(Psi) + L psi + Q(psi, psi) exactly (the equation is quadratic)."""
    Psi, psi = random_field(grid, rng), random_field(grid, rng, 0.1)
    full = bogomolny_residual(ConfigField(grid, Psi.values + psi.values))
    approx = bogomolny_residual(Psi) + apply_linearization(Psi, psi) + quadratic(psi, psi).values[:3]
    assert np.allclose(full, approx, atol=1e-12)


def test_extended_operator_kills_zero(rng):
    grid = TubularGrid(0.1, 12, 8, 8, 2 * np.pi, rho_min=0.1 / 8)
    Psi = ConfigField.zeros(grid)
    Psi.values[1, 0] = 0.1
    Psi.values[3, 0] = 2.0
    out = apply_extended(Psi, ConfigField.zeros(grid))
    assert np.abs(out.values).max() == 0.0


def test_save_load_roundtrip(tmp_path, grid, rng):
    f = random_field(grid, rng)
    f.meta.update({"gamma": 0.1, "M": 2.0})
    path = save_field(f, tmp_path / "psi")
    g = load_field(path)
    assert np.array_equal(g.values, f.values)
    assert g.meta["gamma"] == 0.1
    assert (tmp_path / "psi.bin").stat().st_size == 12 * 8 * int(np.prod(grid.shape))


def test_truncated_file_is_rejected(tmp_path, grid, rng):
    path = save_field(random_field(grid, rng), tmp_path / "psi")
    raw = (tmp_path / "psi.bin").read_bytes()
    (tmp_path / "psi.bin").write_bytes(raw[:-8])
    with pytest.raises(ValueError):
        load_field(path)


def test_clifford_action_squares_to_minus_norm(rng):
    from knotmono.fields import clifford_mul

    for _ in range(20):
        tau = rng.normal(size=3)
        a, phi = rng.normal(size=(3, 3)), rng.normal(size=3)
        # a non-Euclidean metric too
        m = rng.normal(size=(3, 3))
        g = np.eye(3) + 0.3 * m @ m.T  # positive definite
        a2, p2 = clifford_mul(tau, a, phi, g)
        a3, p3 = clifford_mul(tau, a2, p2, g)
        n2 = tau @ np.linalg.inv(g) @ tau
        assert np.allclose(a3, -n2 * a, atol=1e-12)
        assert np.allclose(p3, -n2 * phi, atol=1e-12)
