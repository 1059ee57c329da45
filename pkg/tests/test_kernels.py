import os
import subprocess
import sys

import numpy as np
import pytest

from raccess._kernels import BACKEND, backend_name, state_recursion
from raccess._kernels import _reference

try:
    from raccess._kernels import _speedups
except ImportError:
    _speedups = None

needs_compiled = pytest.mark.skipif(
    _speedups is None, reason="compiled kernel not built"
)


def stable_pair(rng, n):
    """Two random mode matrices scaled well inside the unit circle."""
    scale = rng.uniform(0.3, 0.45) / np.sqrt(n)
    a_c = rng.standard_normal((n, n)) * scale
    a_o = rng.standard_normal((n, n)) * scale
    return a_c, a_o


class TestBackendSelection:
    def test_backend_is_reported(self):
        assert BACKEND in ("compiled", "python")
        assert backend_name() == BACKEND

    def test_env_override_forces_the_python_path(self):
        code = "import raccess._kernels as k; print(k.BACKEND)"
        env = dict(os.environ, RACCESS_PURE_PYTHON="1")
        out = subprocess.run(
            [sys.executable, "-c", code], env=env, capture_output=True, text=True
        )
        assert out.returncode == 0, out.stderr
        assert out.stdout.strip() == "python"


@needs_compiled
class TestCrossBackendAgreement:
    @pytest.mark.parametrize("n", [1, 2, 4, 8])
    def test_backends_agree_on_stable_dynamics(self, n):
        rng = np.random.default_rng(100 + n)
        a_c, a_o = stable_pair(rng, n)
        slots = 300
        gamma = (rng.random(slots) < 0.45).astype(np.uint8)
        noise = rng.standard_normal((slots, n))
        x0 = rng.standard_normal(n)
        out_py = _reference.state_recursion(a_c, a_o, gamma, noise, x0)
        out_c = _speedups.state_recursion(a_c, a_o, gamma, noise, x0)
        assert out_py.shape == (slots, n)
        np.testing.assert_allclose(out_c, out_py, rtol=0.0, atol=1e-12)

    def test_scalar_recursion_is_bit_identical(self):
        rng = np.random.default_rng(1)
        a_c = np.array([[0.5]])
        a_o = np.array([[1.1]])
        gamma = (rng.random(2000) < 0.5).astype(np.uint8)
        noise = rng.standard_normal((2000, 1))
        x0 = np.array([0.0])
        out_py = _reference.state_recursion(a_c, a_o, gamma, noise, x0)
        out_c = _speedups.state_recursion(a_c, a_o, gamma, noise, x0)
        np.testing.assert_array_equal(out_c, out_py)


class TestRecursionContract:
    def test_matches_a_hand_rolled_loop(self):
        rng = np.random.default_rng(8)
        n, slots = 3, 50
        a_c, a_o = stable_pair(rng, n)
        gamma = (rng.random(slots) < 0.5).astype(np.uint8)
        noise = rng.standard_normal((slots, n))
        x0 = rng.standard_normal(n)
        out = state_recursion(a_c, a_o, gamma, noise, x0)
        x = x0.copy()
        for k in range(slots):
            a = a_c if gamma[k] else a_o
            x = a @ x + noise[k]
            np.testing.assert_allclose(out[k], x, rtol=0.0, atol=1e-12)

    def test_accepts_read_only_inputs(self):
        rng = np.random.default_rng(12)
        a_c, a_o = stable_pair(rng, 2)
        gamma = (rng.random(20) < 0.5).astype(np.uint8)
        noise = rng.standard_normal((20, 2))
        x0 = np.zeros(2)
        for arr in (a_c, a_o, gamma, noise, x0):
            arr.setflags(write=False)
        out = state_recursion(a_c, a_o, gamma, noise, x0)
        assert out.shape == (20, 2)
