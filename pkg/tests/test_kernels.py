from __future__ import annotations

import importlib
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from subwave1d import kernels
from subwave1d._kernels_py import continue_branch as py_branch
from subwave1d._kernels_py import wilson_sum as py_wilson


def test_python_backend_always_available():
    assert "python" in kernels.backends()
    assert kernels.BACKEND in kernels.backends()


def test_env_var_forces_python():
    env = dict(os.environ, SUBWAVE1D_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import subwave1d; print(subwave1d.BACKEND)"],
                         capture_output=True, text=True, env=env, check=True)
    assert out.stdout.strip() == "python"


def test_branch_continuation_follows_sqrt():
    t = np.linspace(0, 2 * np.pi, 400, endpoint=False)
    f = np.exp(1j * t)  # winds once: sqrt must end on the other sheet
    out, jump = py_branch(np.sqrt(f), 1.0)
    assert out[0] == pytest.approx(1.0)
    assert out[-1] == pytest.approx(np.exp(1j * t[-1] / 2))
    assert jump < 0.02


def test_wilson_sum_closed_loop():
    K = 16
    phases = np.exp(1j * 0.1 * np.arange(K))[:, None]
    bra = np.ones((K, 1)) * 1.0
    ket = phases
    total, mn = py_wilson(bra, ket)
    expected = np.sum(np.angle(phases[np.r_[1:K, 0], 0]))
    assert total == pytest.approx(expected)
    assert mn == pytest.approx(1.0)


@pytest.mark.skipif("cython" not in kernels.backends(), reason="extension not built")
@settings(max_examples=50, deadline=None)
@given(st.integers(2, 300), st.integers(1, 5), st.integers(0, 2**31))
def test_backends_agree(K, N, seed):
    compiled = kernels.backends()["cython"]
    r = np.random.default_rng(seed)
    roots = r.normal(size=K) + 1j * r.normal(size=K)
    a = py_branch(roots, 1 + 0.5j)
    b = compiled.continue_branch(roots, 1 + 0.5j)
    np.testing.assert_array_equal(a[0], b[0])
    assert a[1] == pytest.approx(b[1], abs=1e-15)
    bra = r.normal(size=(K, N)) + 1j * r.normal(size=(K, N))
    ket = r.normal(size=(K, N)) + 1j * r.normal(size=(K, N))
    wa, wb = py_wilson(bra, ket), compiled.wilson_sum(bra, ket)
    assert wa[0] == pytest.approx(wb[0], abs=1e-10)
    assert wa[1] == pytest.approx(wb[1], rel=1e-12)


@pytest.mark.skipif("cython" not in kernels.backends(), reason="extension not built")
def test_compiled_shape_check():
    with pytest.raises(ValueError):
        kernels.backends()["cython"].wilson_sum(np.ones((3, 2)), np.ones((4, 2)))
