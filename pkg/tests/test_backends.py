import os
import subprocess
import sys

import numpy as np
import pytest

from relevmon import _hot
from relevmon.kernels import quartic
from relevmon.quantiles import kstar_weights

needs_numba = pytest.mark.skipif(not _hot.HAS_NUMBA, reason="numba not installed")


@pytest.mark.parametrize("flag", [("RELEVMON_DISABLE_NUMBA", "1"), ("RELEVMON_BACKEND", "numpy")])
def test_env_flag_selects_numpy(flag):
    env = {**os.environ, flag[0]: flag[1]}
    out = subprocess.run([sys.executable, "-c", "import relevmon; print(relevmon.backend())"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"


@needs_numba
def test_loclin_backends_agree():
    rng = np.random.default_rng(0)
    x = np.arange(1, 201) / 40
    y = rng.standard_normal(200)
    t = np.linspace(1, 5, 37)
    a = _hot.loclin(x, y, t, 0.3, use_numba=True)
    b = _hot.loclin(x, y, t, 0.3, use_numba=False)
    for u, v in zip(a, b):
        assert np.allclose(u, v, atol=1e-12, equal_nan=True)


@needs_numba
def test_gaussian_sups_backends_agree():
    rng = np.random.default_rng(1)
    k = kstar_weights(20, 0.4, quartic())
    v = rng.standard_normal((30, 100))
    for signed in (True, False):
        a = _hot.gaussian_sups(v, k, 20, signed, use_numba=True)
        b = _hot.gaussian_sups(v, k, 20, signed, use_numba=False)
        assert np.allclose(a, b, atol=1e-12)


@needs_numba
def test_brownian_backends_agree():
    z = np.random.default_rng(2).standard_normal((16, 500))
    a = _hot.brownian_functionals(z, use_numba=True)
    b = _hot.brownian_functionals(z, use_numba=False)
    for u, v in zip(a, b):
        assert np.allclose(u, v, atol=1e-12)
