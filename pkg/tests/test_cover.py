import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from knotmono.cover import (CoverIndex, build_cover, chord_transport, decaying_perturbation, extract_monodromies,
                            flat_connection, glue_gauges, local_gauges_synthetic, perturbation_norm)
from knotmono.su2 import SIGMA, exp_su2

L = 2 * np.pi


@pytest.fixture(scope="module")
def cover():
    return build_cover(0.1, 4, 4, L)


def test_chart_count(cover):
    assert cover.chart_count() == sum(4 * 2 ** (4 + n) for n in (2, 3, 4))


def test_anchor_lies_in_its_chart_and_theta_neighbour(cover):
    for alpha in (CoverIndex(2, 0, 0), CoverIndex(3, 3, 17), CoverIndex(4, 1, 255)):
        p = cover.anchor(alpha.n_rho, alpha.n_theta, alpha.n_s)
        assert cover.contains(alpha, p)
        nxt = CoverIndex(alpha.n_rho, (alpha.n_theta + 1) % cover.t, alpha.n_s)
        assert cover.contains(nxt, p)
        assert nxt in cover.neighbors(alpha)


@settings(max_examples=200)
@given(st.floats(0.0, 1.0), st.floats(0.0, 2 * np.pi, exclude_max=True), st.floats(0.0, L, exclude_max=True))
def test_home_chart_contains_point(cover, u, th, s):
    lo, hi = cover.covered_rho()
    rho = float(np.exp(np.log(lo) + u * (np.log(hi) - np.log(lo))))
    rho = min(max(rho, lo * (1 + 1e-9)), hi * (1 - 1e-9))
    q = np.array([rho, th, s])
    lvl, i, j = cover.locate(q)
    assert cover.contains(CoverIndex(int(lvl), int(i), int(j)), q)


def test_audit_coverage(cover):
    rep = cover.audit(n_samples=4000)
    assert rep["coverage"] == 1.0
    assert all(v["chart_in_ball"] for v in rep["levels"].values())


def test_abelian_chord_transport_oracle():
    conn = flat_connection(0.1, 0.05, L)
    u = chord_transport(conn, np.array([0.1, 0.2, 0.0]), np.array([0.05, 1.0, 0.0]))
    assert np.abs(u - exp_su2(-0.8 * 0.1 * SIGMA)).max() < 1e-9
    u = chord_transport(conn, np.array([0.1, 0.2, 0.0]), np.array([0.1, 0.2, 0.7]))
    assert np.abs(u - exp_su2(-0.7 * 0.05 * SIGMA)).max() < 1e-12


def test_nonabelian_transport_is_fourth_order():
    conn = flat_connection(0.2, 0.3, L, decaying_perturbation(0.05, 0.1, L))
    a, b = np.array([0.08, 0.1, 0.3]), np.array([0.02, 1.3, 0.5])
    ref = chord_transport(conn, a, b, n_steps=1024)
    assert np.abs(ref @ ref.conj().T - np.eye(2)).max() < 1e-13
    errs = [np.abs(chord_transport(conn, a, b, n_steps=n) - ref).max() for n in (16, 32, 64)]
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all((orders > 3.7) & (orders < 4.5))


def test_reverse_chord_gives_inverse():
    conn = flat_connection(0.2, 0.3, L, decaying_perturbation(0.05, 0.1, L))
    a, b = np.array([0.08, 0.1, 0.3]), np.array([0.02, 1.3, 0.5])
    u = chord_transport(conn, a, b) @ chord_transport(conn, b, a)
    assert np.abs(u - np.eye(2)).max() < 1e-10


@pytest.mark.parametrize("gamma,gamma_tilde", [(0.1, 0.05), (0.2, 0.3), (0.45, 0.8)])
def test_flat_monodromies_are_exact(gamma, gamma_tilde):
    cov = build_cover(0.1, 4, 3, L)
    rep = extract_monodromies(local_gauges_synthetic(flat_connection(gamma, gamma_tilde, L), cov), cov)
    assert abs(rep.gamma - gamma) < 1e-10
    assert abs(rep.gamma_tilde - gamma_tilde % 1.0) < 1e-10
    assert rep.commutator < 1e-10


def test_glued_gauges_match_across_seams():
    cov = build_cover(0.1, 4, 3, L)
    gauges = local_gauges_synthetic(flat_connection(0.2, 0.3, L, decaying_perturbation(0.003, 0.1, L)), cov)
    rep = extract_monodromies(gauges, cov, strict=False)
    _, grep = glue_gauges(gauges, rep, n_samples=64)
    assert grep.plain_mismatch < 1e-10
    assert grep.theta_seam_mismatch < 1e-10
    assert grep.s_seam_mismatch < 1e-10


def test_perturbation_norm_is_homogeneous():
    n1 = perturbation_norm(decaying_perturbation(0.001, 0.1, L), 0.1, L)
    n2 = perturbation_norm(decaying_perturbation(0.002, 0.1, L), 0.1, L)
    assert n2 == pytest.approx(2 * n1, rel=1e-12)


def test_small_cover_rejected():
    with pytest.raises(ValueError):
        build_cover(0.1, 3, 4)
