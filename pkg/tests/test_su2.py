import numpy as np
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from knotmono import su2

vec = arrays(np.float64, 3, elements=st.floats(-2.5, 2.5))


def test_basis_orthonormal_and_quaternion_relations():
    B = su2.BASIS
    gram = np.array([[su2.inner(B[a], B[b]) for b in range(3)] for a in range(3)])
    assert np.allclose(gram, np.eye(3), atol=1e-15)
    assert np.allclose(su2.SIGMA @ su2.E2, su2.E3)
    assert np.allclose(su2.E2 @ su2.E3, su2.SIGMA)


@given(vec, vec)
def test_bracket_is_twice_cross_product(x, y):
    lhs = su2.to_coords(su2.bracket(su2.from_coords(x), su2.from_coords(y)))
    assert np.allclose(lhs, 2 * np.cross(x, y), atol=1e-12)
    assert np.allclose(su2.cbracket(x, y), 2 * np.cross(x, y))
    assert np.allclose(su2.ad_matrix(x) @ y, 2 * np.cross(x, y), atol=1e-12)


@given(vec)
def test_exp_log_roundtrip(x):
    n = np.linalg.norm(x)
    if n > 3.0:
        x = x * 3.0 / n
    X = su2.from_coords(x)
    U = su2.exp_su2(X)
    assert su2.is_su2(X)
    assert np.allclose(U @ U.conj().T, np.eye(2), atol=1e-13)
    assert abs(np.linalg.det(U) - 1) < 1e-13
    assert np.allclose(su2.to_coords(su2.log_su2(U)), x, atol=1e-9)


@settings(max_examples=50)
@given(vec, st.floats(-1.0, 1.0))
def test_adjoint_rotates_by_twice_the_angle(x, t):
    n = np.linalg.norm(x)
    if n < 1e-3:
        return
    axis = x / n
    U = su2.exp_su2(su2.from_coords(t * x))
    y = np.array([0.3, -1.1, 0.7])
    rotated = su2.to_coords(U @ su2.from_coords(y) @ np.linalg.inv(U))
    ang = 2 * t * n
    # Rodrigues, right-handed about the axis
    expect = (y * np.cos(ang) + np.cross(axis, y) * np.sin(ang) + axis * axis.dot(y) * (1 - np.cos(ang)))
    assert np.allclose(rotated, expect, atol=1e-10)


def test_h_basis_eigenvectors():
    for j in (-1, 0, 1):
        h = su2.h_basis(j)
        assert np.allclose(su2.bracket(1j * su2.SIGMA, h), 2 * j * h)


def test_log_branch_failure_near_minus_identity():
    import pytest

    with pytest.raises(ValueError):
        su2.log_su2(-np.eye(2, dtype=complex))
