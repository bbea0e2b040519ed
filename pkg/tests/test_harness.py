import numpy as np
import pytest

from knotmono import harness


def test_sobolev_constant_value():
    A = 2 * (16 + 1 / (2 * np.pi) ** 2) ** 0.5
    assert abs(harness.sobolev_c0(2 * np.pi) - A ** (4 / 3)) < 1e-12


def test_theta_gap():
    assert harness.theta_gap(0.1) == pytest.approx(0.2)
    assert harness.theta_gap(0.45) == pytest.approx(0.1)


def test_unknown_id():
    with pytest.raises(ValueError):
        harness.check_inequality("NOPE")
    with pytest.raises(ValueError):
        harness.run_seed("NOPE", 0.1, 0)


@pytest.mark.parametrize("id_", harness.ALL_IDS)
def test_every_id_passes_and_is_reproducible(id_):
    a = harness.run_seed(id_, 0.1, 7)
    b = harness.run_seed(id_, 0.1, 7)
    assert a.ok
    assert a.margin == b.margin and a.lhs == b.lhs


def test_audit_rows_shape():
    rows = harness.audit("ETA_PAIR", 0.1, range(3))
    assert [r[1] for r in rows] == [0, 1, 2]
    assert all(r[0] == "ETA_PAIR" and r[4] for r in rows)


def test_eta_pair_margin_scale_convention():
    rep = harness.run_seed("ETA_PAIR", 0.1, 1)
    assert rep.margin == pytest.approx(rep.rhs - rep.lhs)
    assert rep.scale == pytest.approx(abs(rep.lhs) + abs(rep.rhs))
