import os
import subprocess
import sys

import numpy as np
import pytest

from knotmono import _accel


def test_biot_savart_backends_agree(rng):
    s = np.linspace(0, 2 * np.pi, 64, endpoint=False)
    curve = np.stack([np.cos(s), np.sin(s), 0 * s], 1)
    tangent = np.stack([-np.sin(s), np.cos(s), 0 * s], 1)
    w = np.full(64, 2 * np.pi / 64)
    x = rng.normal(size=(100, 3)) * 2
    a = _accel.biot_savart(x, curve, tangent, w, use_numba=True)
    b = _accel.biot_savart(x, curve, tangent, w, use_numba=False)
    assert np.allclose(a, b, rtol=1e-12, atol=1e-14)


def test_path_product_backends_agree(rng):
    steps = rng.normal(size=(20, 10, 3)) * 0.3
    a = _accel.path_product(steps, use_numba=True)
    b = _accel.path_product(steps, use_numba=False)
    assert np.allclose(a, b, atol=1e-13)


def test_path_product_order():
    from knotmono.su2 import E2, SIGMA, exp_su2

    steps = np.array([[[0.3, 0, 0], [0, 0.4, 0]]])
    expect = exp_su2(0.3 * SIGMA) @ exp_su2(0.4 * E2)
    assert np.allclose(_accel.path_product(steps)[0], expect)


def test_env_flag_selects_numpy():
    env = dict(os.environ, KNOTMONO_NO_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", "from knotmono import _accel; print(_accel.backend())"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"


@pytest.mark.skipif(not _accel.HAVE_NUMBA, reason="numba not available")
def test_default_backend_is_numba():
    assert _accel.backend() == "numba"
