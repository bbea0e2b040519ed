import numpy as np
from hypothesis import given, settings, strategies as st

from knotmono.fields import CartesianGrid, ConfigField, apply_extended
from knotmono.picard import assemble_operator, interior_mask, solve_linear, toy_recursion, toy_root


@settings(max_examples=60, deadline=None)
@given(st.floats(0.5, 3.0), st.floats(-1.0, 1.0), st.floats(-1.0, 1.0))
def test_toy_recursion_halves_and_converges(ell, q, v):
    if 16 * abs(q * v) > ell ** 2:
        return
    xs, sums = toy_recursion(ell, q, v, n_max=60)
    assert abs(sums[-1] - toy_root(ell, q, v)) <= 1e-12 * max(1.0, abs(sums[-1]))
    mags = np.abs(xs)
    for a, b in zip(mags[1:-1], mags[2:]):
        if a > 1e-250:
            assert b <= 0.5 * a + 1e-300


def test_sparse_operator_matches_grid_operator(rng):
    grid = CartesianGrid.box(np.zeros(3), 1.0, 7)
    Psi = ConfigField(grid, 0.3 * rng.normal(size=(4, 3) + grid.shape))
    psi = ConfigField(grid, rng.normal(size=(4, 3) + grid.shape))
    op = assemble_operator(Psi)
    for dagger in (False, True):
        a = op.apply(psi, dagger).values
        b = apply_extended(Psi, psi, dagger).values
        assert np.abs(a - b).max() < 1e-12


def test_dirichlet_solve_recovers_interior_field(rng):
    grid = CartesianGrid.box(np.zeros(3), 1.0, 6)
    Psi = ConfigField(grid, 0.2 * rng.normal(size=(4, 3) + grid.shape))
    op = assemble_operator(Psi)
    x_true = rng.normal(size=op.interior.size)
    rhs = op.block @ x_true
    x = op.factorize().solve(rhs)
    assert np.allclose(x, x_true, atol=1e-8)
    assert interior_mask(grid).sum() * 12 == op.interior.size


def test_iterative_solve_reports_residual(rng):
    grid = CartesianGrid.box(np.zeros(3), 1.0, 6)
    Psi = ConfigField(grid, 0.2 * rng.normal(size=(4, 3) + grid.shape))
    op = assemble_operator(Psi)
    rhs = op.block @ rng.normal(size=op.interior.size)
    psi, info = solve_linear(op, rhs, tol=1e-10, method="direct")
    assert info.residual <= 1e-10 * info.rhs_norm
    assert np.allclose(op.block @ op.restrict(psi), rhs, atol=1e-8)
