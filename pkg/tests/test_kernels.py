"""Parity between the compiled and pure-Python accumulate kernels.

Both must produce identical acceptance counts and matching dual-frame
moment sums; the reference oracle here recomputes the moments with
plain numpy, independent of either implementation.
"""

import math
import os
import subprocess
import sys

import numpy as np
import pytest

import rfpe_lab
from rfpe_lab import _backend, _kernels_py

try:
    from rfpe_lab import _kernels
except ImportError:
    _kernels = None

TWO_PI = 2.0 * math.pi


def _reference(samples, uniforms, outcome, m, theta, kappa, mu):
    """Straight-line numpy restatement of the kernel contract."""
    x = np.mod(np.asarray(samples, dtype=float), TWO_PI)
    c = np.cos(0.5 * m * (x - theta))
    p0 = c * c
    lik = p0 if outcome == 0 else 1.0 - p0
    keep = lik >= kappa * np.asarray(uniforms, dtype=float)
    xk = x[keep]
    if xk.size == 0:
        return 0, 0.0, 0.0, 0.0, 0.0
    c0 = mu % TWO_PI
    cpi = (c0 + math.pi) % TWO_PI
    z = xk - c0
    zp = (xk + math.pi) % TWO_PI - cpi
    return (int(xk.size), float(z.sum()), float((z * z).sum()),
            float(zp.sum()), float((zp * zp).sum()))


def _random_case(rng):
    n = int(rng.integers(2, 4000))
    mu = float(rng.uniform(-2.0, 8.0))
    sigma = float(np.exp(rng.uniform(np.log(0.01), np.log(2.0))))
    samples = rng.normal(mu, sigma, size=n)
    uniforms = rng.random(n)
    outcome = int(rng.integers(0, 2))
    m = float(max(1, math.ceil(1.25 / sigma)))
    theta = float(rng.uniform(0.0, TWO_PI))
    kappa = float(rng.uniform(0.3, 1.0))
    return samples, uniforms, outcome, m, theta, kappa, mu


@pytest.mark.parametrize("impl_name", ["python", "cython"])
def test_kernel_matches_reference(impl_name):
    if impl_name == "cython":
        if _kernels is None:
            pytest.skip("compiled kernel not built")
        impl = _kernels.rejection_accumulate
    else:
        impl = _kernels_py.rejection_accumulate
    rng = np.random.default_rng(21)
    for _ in range(60):
        case = _random_case(rng)
        got = impl(*case)
        want = _reference(*case)
        assert got[0] == want[0]
        for g, w in zip(got[1:], want[1:]):
            assert g == pytest.approx(w, rel=1e-11, abs=1e-11)


def test_kernels_agree_with_each_other():
    if _kernels is None:
        pytest.skip("compiled kernel not built")
    rng = np.random.default_rng(22)
    for _ in range(60):
        case = _random_case(rng)
        a = _kernels_py.rejection_accumulate(*case)
        b = _kernels.rejection_accumulate(*case)
        assert a[0] == b[0]
        for x, y in zip(a[1:], b[1:]):
            assert x == pytest.approx(y, rel=1e-11, abs=1e-11)


def test_zero_acceptance_edge():
    # kappa 1 with a likelihood of exactly zero everywhere: reject all
    samples = np.full(50, math.pi)
    uniforms = np.full(50, 1.0)
    # outcome 1 at theta == pi, m 2: lik = 1 - cos^2(pi - pi) ... pick
    # outcome 1 with all samples on the fringe null instead
    out = _kernels_py.rejection_accumulate(samples, uniforms, 1, 2.0,
                                           math.pi, 1.0, math.pi)
    assert out == (0, 0.0, 0.0, 0.0, 0.0)
    if _kernels is not None:
        assert _kernels.rejection_accumulate(samples, uniforms, 1, 2.0,
                                             math.pi, 1.0, math.pi) == out


def test_backend_reexport_consistent():
    assert rfpe_lab.BACKEND == _backend.BACKEND
    assert _backend.BACKEND in ("cython", "python")
    assert callable(_backend.kernels.rejection_accumulate)


def test_pure_python_env_forces_fallback():
    env = dict(os.environ, RFPE_LAB_PURE_PYTHON="1")
    out = subprocess.run(
        [sys.executable, "-c",
         "from rfpe_lab import _backend; print(_backend.BACKEND)"],
        capture_output=True, text=True, env=env, check=True)
    assert out.stdout.strip() == "python"
