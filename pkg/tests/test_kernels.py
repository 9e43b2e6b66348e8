import os
import subprocess
import sys
from pathlib import Path

import numpy as np

from contest_opt import _pykernels, kernels

ROOT = Path(__file__).resolve().parents[1]


def _backend(env_value):
    env = {**os.environ, "CONTEST_OPT_PURE": env_value}
    out = subprocess.run([sys.executable, "-c", "from contest_opt import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    return out.stdout.strip()


def test_pure_flag_forces_fallback():
    assert _backend("1") == "python"
    assert _backend("") in ("python", "compiled")


def test_canonical_sweep_backends_agree():
    theta = np.linspace(0, 1, 501)
    Q = np.minimum(1.0, 2 * theta**2)
    np.testing.assert_allclose(kernels.canonical_sweep(theta, Q, 0.8, 0.0),
                               _pykernels.canonical_sweep(theta, Q, 0.8, 0.0), atol=1e-15)


def test_coarse_allocate_backends_agree():
    rng = np.random.default_rng(3)
    sig = np.round(rng.random((3000, 6)), 1)
    lo, hi = np.array([0.1, 0.5]), np.array([0.3, 0.9])
    np.testing.assert_allclose(kernels.coarse_allocate(sig, lo, hi, 2.0),
                               _pykernels.coarse_allocate(sig, lo, hi, 2.0), atol=1e-12)


def test_benchmark_script_runs():
    out = subprocess.run([sys.executable, str(ROOT / "benchmarks" / "bench_kernels.py"), "--repeat", "1"],
                         capture_output=True, text=True, check=True, timeout=120)
    assert "pair_rule_moments" in out.stdout
