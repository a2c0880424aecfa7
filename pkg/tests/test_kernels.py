import os
import subprocess
import sys

import numpy as np
import pytest

from pbss import _kernels
from pbss.signal_model import default_scenario


def test_numpy_and_dispatch_agree_on_mixture():
    sc = default_scenario()
    amps, bauds, carriers, phases, bits, offsets, lengths = sc._packed
    t = np.arange(4096) / 7.68e6 + 1.3e-4
    coeffs = np.array([0.37, -0.81])
    key = _kernels.noise_key(9)
    ref = _kernels._mixed_samples_np(t, coeffs, amps, bauds, carriers, phases, bits, offsets,
                                     lengths, 0.03, key, 77)
    got = _kernels.mixed_samples(t, coeffs, amps, bauds, carriers, phases, bits, offsets,
                                 lengths, 0.03, key, 77)
    np.testing.assert_allclose(got, ref, rtol=0, atol=1e-12)


def test_noise_stream_is_index_addressed():
    key = _kernels.noise_key(3)
    whole = _kernels.gaussian_noise(key, 100, 64)
    np.testing.assert_array_equal(_kernels.gaussian_noise(key, 132, 32), whole[32:])
    np.testing.assert_allclose(_kernels._gaussian_noise_np(key, 100, 64), whole, rtol=0, atol=1e-12)


def test_noise_moments():
    x = _kernels.gaussian_noise(_kernels.noise_key(0), 0, 200_000)
    assert abs(x.mean()) < 0.01
    assert abs(x.std() - 1.0) < 0.01
    assert np.all(np.isfinite(x))


def test_power_sums_sequential_and_resumable(rng):
    x = rng.normal(size=1000)
    s2, s4 = 0.0, 0.0
    for v in x:
        s2 += v * v
        s4 += (v * v) * (v * v)
    assert _kernels.power_sums(x) == (s2, s4)
    assert _kernels._power_sums_np(x, 0.0, 0.0) == (s2, s4)
    a = _kernels.power_sums(x[:371])
    assert _kernels.power_sums(x[371:], *a) == (s2, s4)


def test_disable_flag_selects_numpy_path():
    env = dict(os.environ, PBSS_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", "from pbss import _kernels; print(_kernels.USING_NUMBA)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "False"


@pytest.mark.skipif(not _kernels.USING_NUMBA, reason="numba not active")
def test_numba_path_active_by_default():
    assert _kernels.nb is not None
