import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from curvatura import kernels
from curvatura.dual import DirectionalDual


def _backend_in_subprocess(env_value):
    env = dict(os.environ)
    env.pop("CURVATURA_BACKEND", None)
    if env_value is not None:
        env["CURVATURA_BACKEND"] = env_value
    out = subprocess.run([sys.executable, "-c", "from curvatura import kernels; print(kernels.BACKEND)"],
                         capture_output=True, text=True, check=True, env=env)
    return out.stdout.strip()


def test_backend_env_override():
    assert _backend_in_subprocess("python") == "python"


def test_default_backend():
    expected = "compiled" if "compiled" in kernels.BACKENDS else "python"
    assert _backend_in_subprocess(None) == expected


def test_fallback_when_extension_missing(tmp_path):
    # block the compiled module at import time
    code = (
        "import sys, importlib.abc\n"
        "class Block(importlib.abc.MetaPathFinder):\n"
        "    def find_spec(self, name, path, target=None):\n"
        "        if name == 'curvatura._kernels':\n"
        "            raise ImportError('blocked')\n"
        "sys.meta_path.insert(0, Block())\n"
        "from curvatura import kernels\n"
        "print(kernels.BACKEND, sorted(kernels.BACKENDS))\n"
    )
    out = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python ['python']"


def _dual(rng, shape=(), n=3):
    return DirectionalDual(rng.uniform(0.5, 2.0, size=shape), rng.normal(size=shape + (n,)))


def test_dual_product_rule(rng):
    a, b = _dual(rng, (5,)), _dual(rng, (5,))
    p = a * b
    np.testing.assert_allclose(p.deriv, a.deriv * b.value[:, None] + a.value[:, None] * b.deriv)


def test_dual_quotient_and_powers(rng):
    a, b = _dual(rng, (7,)), _dual(rng, (7,))
    q = (a * b) / b
    np.testing.assert_allclose(q.value, a.value)
    np.testing.assert_allclose(q.deriv, a.deriv, rtol=1e-12, atol=1e-12)
    s = (a ** 4).sqrt()
    np.testing.assert_allclose(s.deriv, (a * a).deriv, rtol=1e-12)
    assert np.all((a ** 0).deriv == 0)
    d = 3.0 - a + 2.0 * a
    np.testing.assert_allclose(d.deriv, a.deriv)


def test_dual_matrix_ops(rng):
    n = 3
    A = DirectionalDual(rng.normal(size=(4, n, n)), rng.normal(size=(4, n, n, n)))
    B = DirectionalDual(rng.normal(size=(4, n, n)), rng.normal(size=(4, n, n, n)))
    C = A @ B
    ref = np.einsum("bilm,blj->bijm", A.deriv, B.value) + np.einsum("bil,bljm->bijm", A.value, B.deriv)
    np.testing.assert_allclose(C.deriv, ref)
    np.testing.assert_allclose(C.trace().deriv, np.einsum("biim->bm", C.deriv))


@settings(max_examples=50, deadline=None)
@given(st.floats(0.1, 3), st.floats(-2, 2), st.floats(0.1, 3), st.floats(-2, 2))
def test_dual_chain_rule_vs_fd(x0, dx, y0, dy):
    # phi(t) = sqrt(u^2 + v^3) / (u v) along u = x0 + t dx, v = y0 + t dy
    def phi(u, v):
        return (u ** 2 + v ** 3).sqrt() / (u * v) if isinstance(u, DirectionalDual) \
            else np.sqrt(u ** 2 + v ** 3) / (u * v)

    u = DirectionalDual(np.array(x0), np.array([dx]))
    v = DirectionalDual(np.array(y0), np.array([dy]))
    got = float(phi(u, v).deriv[0])
    h = 1e-6
    fd = (phi(x0 + h * dx, y0 + h * dy) - phi(x0 - h * dx, y0 - h * dy)) / (2 * h)
    assert got == pytest.approx(fd, rel=1e-6, abs=1e-6)
