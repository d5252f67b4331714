import os
import subprocess
import sys

import numpy as np
import pytest

from trajcnn import _kernels_py, kernels
from trajcnn import tensor as tn

compiled = pytest.mark.skipif("compiled" not in kernels.available_backends(),
                              reason="compiled extension not built")


@pytest.fixture
def restore_backend():
    prev = kernels.active_backend()
    yield
    kernels.use_backend(prev)


def test_python_backend_always_available():
    assert "python" in kernels.available_backends()
    assert kernels.active_backend() in kernels.available_backends()


def test_unknown_backend_rejected():
    with pytest.raises(ValueError, match="not available"):
        kernels.use_backend("cuda")


@compiled
@pytest.mark.parametrize("dtype,tol", [(np.float32, 1e-5), (np.float64, 1e-12)])
@pytest.mark.parametrize("B,T,C_in,C_out,K,pad", [(1, 8, 2, 32, 3, 1), (32, 8, 32, 32, 3, 1),
                                                  (3, 5, 4, 2, 5, 2), (2, 6, 3, 3, 3, 0),
                                                  (4, 1, 2, 2, 3, 1)])
def test_backends_agree(rng, dtype, tol, B, T, C_in, C_out, K, pad):
    from trajcnn import _kernels
    x = rng.normal(size=(B, T, C_in)).astype(dtype)
    w = rng.normal(size=(K, C_in, C_out)).astype(dtype)
    b = rng.normal(size=C_out).astype(dtype)
    out_c = _kernels.conv1d_forward(x, w, b, pad)
    out_p = _kernels_py.conv1d_forward(x, w, b, pad)
    assert out_c.dtype == dtype
    np.testing.assert_allclose(out_c, out_p, rtol=tol, atol=tol)
    g = rng.normal(size=out_p.shape).astype(dtype)
    for a, p in zip(_kernels.conv1d_backward(x, w, g, pad), _kernels_py.conv1d_backward(x, w, g, pad)):
        assert a.dtype == dtype
        np.testing.assert_allclose(a, p, rtol=tol * 10, atol=tol * 10)


@compiled
def test_use_backend_switches_tensor_op(rng, restore_backend):
    x = rng.normal(size=(2, 8, 3))
    k = rng.normal(size=(3, 3, 4))
    b = rng.normal(size=4)
    outs = {}
    for name in ("python", "compiled"):
        kernels.use_backend(name)
        assert kernels.active_backend() == name
        outs[name] = tn.conv1d(x, k, b, 1).data
    np.testing.assert_allclose(outs["python"], outs["compiled"], rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("value,expected", [("python", "python"), ("nonsense", None)])
def test_env_var_selects_backend(value, expected):
    env = dict(os.environ, TRAJCNN_BACKEND=value)
    code = "from trajcnn import kernels; print(kernels.active_backend())"
    res = subprocess.run([sys.executable, "-W", "default", "-c", code], env=env,
                         capture_output=True, text=True, check=True)
    got = res.stdout.strip()
    if expected is None:
        assert got in kernels.available_backends()
        assert "unavailable" in res.stderr
    else:
        assert got == expected
