"""The numba kernels and their numpy fallbacks must agree."""

import os
import subprocess
import sys

import numpy as np
import pytest

from radioforge import kernels
from radioforge.source import LFSR_TAPS


@pytest.mark.parametrize("L", [3, 7, 11, 23])
def test_lfsr_paths_identical(L):
    taps = np.asarray(LFSR_TAPS[L], dtype=np.int64)
    a = kernels._lfsr_numba(taps, L, 5, 5000)
    b = kernels._lfsr_numpy(taps, L, 5, 5000)
    assert np.array_equal(a, b)


def test_sos_paths_close():
    rng = np.random.default_rng(0)
    f, ph, t = rng.uniform(-50, 50, 64), rng.uniform(-np.pi, np.pi, 64), np.arange(20000) / 1e4
    assert np.allclose(kernels._sos_numba(f, ph, t), kernels._sos_numpy(f, ph, t), atol=1e-10)


def test_tv_mac_paths_close():
    rng = np.random.default_rng(1)
    x = rng.normal(size=5000) + 1j * rng.normal(size=5000)
    h = rng.normal(size=41) + 1j * rng.normal(size=41)
    a, b = np.zeros(5000, complex), np.zeros(5000, complex)
    kernels._tv_mac_numba(a, x, h, 128.0)
    kernels._tv_mac_numpy(b, x, h, 128.0)
    assert np.allclose(a, b, atol=1e-12)


def test_blocked_paths_identical():
    rng = np.random.default_rng(2)
    walls = np.column_stack([rng.uniform(-50, 50, (30, 4)), rng.uniform(5, 30, 30)])
    p0, p1 = rng.uniform(-60, 60, (700, 3)), rng.uniform(-60, 60, (700, 3))
    p0[:, 2] = rng.uniform(0, 40, 700)
    p1[:, 2] = rng.uniform(0, 40, 700)
    skip = rng.integers(-1, 30, (700, 2))
    assert np.array_equal(kernels._blocked_numba(p0, p1, walls, skip, 1e-9),
                          kernels._blocked_numpy(p0, p1, walls, skip, 1e-9))


def test_env_switch_selects_numpy():
    code = "import radioforge._accel as a; print(a.USE_NUMBA)"
    env = dict(os.environ, RADIOFORGE_NUMBA="0")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "False"


def test_numpy_path_end_to_end_matches():
    """A whole frame rendered with the fallback kernels matches the JIT one."""
    code = ("import numpy as np, sys; from radioforge.config import config_from_dict;"
            "from radioforge.assemble import generate_frame;"
            "cfg = config_from_dict({'channel': {'weights': {'statistical': 1.0}},"
            "'distributions': {'symbols_per_segment': {'kind': 'fixed', 'value': 200}}});"
            "np.save(sys.argv[1], generate_frame(cfg, 3)[0].samples)")
    outs = []
    for flag in ("1", "0"):
        path = f"/tmp/rf_kernel_{flag}_{os.getpid()}.npy"
        subprocess.run([sys.executable, "-c", code, path], env=dict(os.environ, RADIOFORGE_NUMBA=flag), check=True)
        outs.append(np.load(path))
        os.unlink(path)
    scale = np.max(np.abs(outs[0]))
    assert outs[0].shape == outs[1].shape
    assert np.max(np.abs(outs[0] - outs[1])) <= 1e-4 * scale
