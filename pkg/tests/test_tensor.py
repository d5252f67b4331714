import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trajcnn import tensor as tn
from trajcnn.tensor import DimensionError, Graph, Tensor

from conftest import max_rel_error, numerical_grad


def conv1d_oracle(x, k, b, pad):
    """Direct summation over the zero-padded window."""
    T, C_in = x.shape
    K, _, C_out = k.shape
    T_out = T + 2 * pad - K + 1
    out = np.zeros((T_out, C_out))
    for t in range(T_out):
        for o in range(C_out):
            s = b[o]
            for j in range(K):
                ti = t + j - pad
                if 0 <= ti < T:
                    for c in range(C_in):
                        s += x[ti, c] * k[j, c, o]
            out[t, o] = s
    return out


# -- linear ------------------------------------------------------------------

def test_linear_identity():
    x = np.array([[1.5, -2.0, 3.0]], dtype=np.float32)
    out = tn.linear(x, np.eye(3, dtype=np.float32), np.zeros(3, dtype=np.float32))
    np.testing.assert_array_equal(out.data, x)


def test_linear_zero_input_gives_bias():
    b = np.array([0.5, -1.0], dtype=np.float32)
    out = tn.linear(np.zeros((4, 3), np.float32), np.ones((3, 2), np.float32), b)
    np.testing.assert_array_equal(out.data, np.tile(b, (4, 1)))


def test_linear_dot_product():
    out = tn.linear([[1.0, 2.0]], [[3.0], [4.0]], [5.0])
    assert out.data.tolist() == [[16.0]]


def test_linear_shape_error_names_both_shapes():
    with pytest.raises(DimensionError, match=r"\(2, 3\).*\(4, 2\)"):
        tn.linear(np.zeros((2, 3)), np.zeros((4, 2)))


def test_linear_gradients_flow_to_all_arguments(rng):
    x = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
    w = Tensor(rng.normal(size=(4, 2)), requires_grad=True)
    b = Tensor(rng.normal(size=2), requires_grad=True)
    tn.backward(tn.mse_loss(tn.linear(x, w, b), np.zeros((3, 2))))
    for t in (x, w, b):
        f = lambda: float(tn.mse_loss(tn.linear(x.data, w.data, b.data), np.zeros((3, 2))).data)  # noqa: E731
        assert max_rel_error(t.grad, numerical_grad(f, t.data)) < 1e-6


# -- conv1d ------------------------------------------------------------------

def test_conv1d_center_tap_identity(rng):
    C = 4
    k = np.zeros((3, C, C), np.float32)
    k[1] = np.eye(C)
    x = rng.normal(size=(6, C)).astype(np.float32)
    out = tn.conv1d(x, k, np.zeros(C, np.float32), 1)
    np.testing.assert_array_equal(out.data, x)


def test_conv1d_zero_input_gives_bias():
    b = np.array([1.0, -2.0], np.float32)
    out = tn.conv1d(np.zeros((5, 3), np.float32), np.ones((3, 3, 2), np.float32), b, 1)
    np.testing.assert_array_equal(out.data, np.tile(b, (5, 1)))


def test_conv1d_small_example():
    out = tn.conv1d(np.array([[1.0], [2.0], [3.0]]), np.ones((3, 1, 1)), np.zeros(1), 1)
    assert out.data.ravel().tolist() == [3.0, 6.0, 5.0]


@pytest.mark.parametrize("T,C_in,C_out,K,pad", [(8, 3, 4, 3, 1), (5, 2, 2, 5, 2), (4, 1, 3, 3, 0),
                                                 (1, 2, 2, 3, 1), (7, 2, 3, 1, 0)])
def test_conv1d_matches_direct_summation(rng, T, C_in, C_out, K, pad):
    x = rng.normal(size=(T, C_in))
    k = rng.normal(size=(K, C_in, C_out))
    b = rng.normal(size=C_out)
    np.testing.assert_allclose(tn.conv1d(x, k, b, pad).data, conv1d_oracle(x, k, b, pad),
                               rtol=1e-12, atol=1e-12)


def test_conv1d_batched_equals_per_sample(rng):
    x = rng.normal(size=(5, 8, 3))
    k = rng.normal(size=(3, 3, 4))
    b = rng.normal(size=4)
    batched = tn.conv1d(x, k, b, 1).data
    for i in range(5):
        np.testing.assert_allclose(batched[i], conv1d_oracle(x[i], k, b, 1), rtol=1e-12, atol=1e-12)


def test_conv1d_empty_output_error():
    with pytest.raises(ValueError, match="empty output"):
        tn.conv1d(np.zeros((2, 1)), np.zeros((5, 1, 1)), np.zeros(1), 1)


def test_conv1d_channel_mismatch():
    with pytest.raises(DimensionError):
        tn.conv1d(np.zeros((4, 2)), np.zeros((3, 3, 1)), np.zeros(1), 1)


@settings(max_examples=50, deadline=None)
@given(T=st.integers(1, 12), K=st.sampled_from([1, 3, 5, 7]), C=st.integers(1, 4))
def test_conv1d_same_padding_preserves_length(T, K, C):
    x = np.ones((T, C))
    out = tn.conv1d(x, np.ones((K, C, C)), np.zeros(C), (K - 1) // 2)
    assert out.shape == (T, C)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31), a=st.floats(-3, 3), b=st.floats(-3, 3))
def test_conv1d_linearity(seed, a, b):
    r = np.random.default_rng(seed)
    x, y = r.normal(size=(8, 3)), r.normal(size=(8, 3))
    k = r.normal(size=(3, 3, 2))
    zero = np.zeros(2)
    lhs = tn.conv1d(a * x + b * y, k, zero, 1).data
    rhs = a * tn.conv1d(x, k, zero, 1).data + b * tn.conv1d(y, k, zero, 1).data
    scale = np.abs(a * tn.conv1d(x, k, zero, 1).data).max() + np.abs(b * tn.conv1d(y, k, zero, 1).data).max()
    assert np.max(np.abs(lhs - rhs)) <= 1e-5 * max(scale, 1e-12)


def test_conv1d_gradients_match_finite_differences(rng):
    x = Tensor(rng.normal(size=(2, 6, 3)), requires_grad=True)
    k = Tensor(rng.normal(size=(3, 3, 2)), requires_grad=True)
    b = Tensor(rng.normal(size=2), requires_grad=True)
    target = rng.normal(size=(2, 6, 2))
    tn.backward(tn.mse_loss(tn.conv1d(x, k, b, 1), target))

    def f():
        return float(tn.mse_loss(tn.conv1d(x.data, k.data, b.data, 1), target).data)

    for t in (x, k, b):
        assert max_rel_error(t.grad, numerical_grad(f, t.data)) < 1e-6


# -- activations -------------------------------------------------------------

def test_relu_values_and_gradient():
    x = Tensor(np.array([-1.0, 0.0, 2.0]), requires_grad=True)
    y = tn.relu(x)
    assert y.data.tolist() == [0.0, 0.0, 2.0]
    tn.backward(_sum(y))
    assert x.grad.tolist() == [0.0, 0.0, 1.0]


def _sum(t):
    """Scalar sum of ``t`` built from graph ops (dot with ones)."""
    return tn.reshape(tn.linear(tn.reshape(t, (1, t.size)), np.ones((t.size, 1), t.dtype)), ())


def test_relu_positive_is_identity(rng):
    x = rng.uniform(0.1, 5, size=10)
    np.testing.assert_array_equal(tn.relu(x).data, x)


def test_sigmoid_tanh_at_zero():
    assert tn.sigmoid(np.zeros(1, np.float32)).data[0] == 0.5
    assert tn.tanh(np.zeros(1, np.float32)).data[0] == 0.0


def test_sigmoid_saturates_without_overflow():
    with np.errstate(over="raise", invalid="raise"):
        hi = tn.sigmoid(np.array([38.0, 1000.0], np.float32)).data
        lo = tn.sigmoid(np.array([-1000.0], np.float32)).data
    assert hi.dtype == np.float32
    assert np.all(hi == 1.0)
    assert lo[0] == 0.0


def test_sigmoid_one_matches_high_precision():
    mpmath.mp.dps = 30
    expected = float(1 / (1 + mpmath.exp(-1)))
    assert abs(tn.sigmoid(np.array([1.0])).data[0] - expected) < 1e-15
    assert abs(tn.sigmoid(np.array([1.0], np.float32)).data[0] - 0.7310586) < 1e-7


@pytest.mark.parametrize("op", [tn.sigmoid, tn.tanh])
def test_activation_gradients(rng, op):
    x = Tensor(rng.normal(size=7), requires_grad=True)
    tn.backward(_sum(op(x)))
    f = lambda: float(op(x.data).data.sum())  # noqa: E731
    assert max_rel_error(x.grad, numerical_grad(f, x.data)) < 1e-7


# -- loss / reshape ----------------------------------------------------------

def test_mse_examples():
    assert tn.mse_loss(np.ones((2, 3)), np.ones((2, 3))).data == 0.0
    assert tn.mse_loss(np.ones((2, 3)) + 1, np.ones((2, 3))).data == 1.0
    assert tn.mse_loss(np.array([[0.0, 0.0]]), np.array([[3.0, 4.0]])).data == 12.5


def test_mse_gradient_closed_form(rng):
    p = Tensor(rng.normal(size=(4, 2)), requires_grad=True)
    t = rng.normal(size=(4, 2))
    tn.backward(tn.mse_loss(p, t))
    np.testing.assert_allclose(p.grad, 2 * (p.data - t) / 8)


def test_mse_shape_mismatch():
    with pytest.raises(DimensionError):
        tn.mse_loss(np.zeros((2, 2)), np.zeros((2, 3)))


def test_flatten():
    assert tn.concat_flatten(np.array([[1.0, 2.0, 3.0]])).data.tolist() == [1.0, 2.0, 3.0]
    assert tn.concat_flatten(np.array([[1.0, 2.0], [3.0, 4.0]])).data.tolist() == [1, 2, 3, 4]


def test_flatten_round_trip(rng):
    x = rng.normal(size=(3, 8, 4))
    flat = tn.concat_flatten(x)
    assert flat.shape == (3, 32)
    np.testing.assert_array_equal(tn.reshape(flat, (3, 8, 4)).data, x)


# -- backward ----------------------------------------------------------------

def test_backward_scalar_closed_form():
    w = Tensor(np.array([[0.7]]), requires_grad=True)
    x, y = 1.3, 2.0
    tn.backward(tn.mse_loss(tn.linear(np.array([[x]]), w), np.array([[y]])))
    assert math.isclose(w.grad[0, 0], 2 * x * (0.7 * x - y), rel_tol=1e-12)


def test_backward_unused_parameter_has_zero_grad(rng):
    used = Tensor(rng.normal(size=(2, 2)), requires_grad=True)
    unused = Tensor(rng.normal(size=(2, 2)), requires_grad=True)
    loss = tn.add(tn.mse_loss(tn.linear(np.ones((1, 2)), used), np.zeros((1, 2))),
                  tn.mul(tn.mse_loss(unused, np.zeros((2, 2))), 0.0))
    tn.backward(loss)
    np.testing.assert_array_equal(unused.grad, np.zeros((2, 2)))


def test_backward_accumulates_until_zeroed(rng):
    w = Tensor(rng.normal(size=(3, 1)), requires_grad=True)
    loss = tn.mse_loss(tn.linear(np.ones((2, 3)), w), np.zeros((2, 1)))
    tn.backward(loss)
    first = w.grad.copy()
    tn.backward(loss)
    np.testing.assert_allclose(w.grad, 2 * first)
    w.zero_grad()
    assert w.grad is None


def test_backward_rejects_non_scalar():
    w = Tensor(np.ones((2, 2)), requires_grad=True)
    with pytest.raises(ValueError, match="scalar"):
        tn.backward(tn.relu(w))


def test_graph_is_topologically_ordered(rng):
    w = Tensor(rng.normal(size=(2, 2)), requires_grad=True)
    h = tn.relu(tn.linear(np.ones((1, 2)), w))
    loss = tn.mse_loss(tn.mul(h, h), np.zeros((1, 2)))
    nodes = Graph.from_output(loss).nodes
    assert [n.op for n in nodes] == ["linear", "relu", "mul", "mse_loss"]
    position = {id(n.output): i for i, n in enumerate(nodes)}
    for i, n in enumerate(nodes):
        for inp in n.inputs:
            if id(inp) in position:
                assert position[id(inp)] < i


def test_no_grad_records_nothing(rng):
    w = Tensor(rng.normal(size=(2, 2)), requires_grad=True)
    with tn.no_grad():
        out = tn.linear(np.ones((1, 2)), w)
    assert out._node is None and not out.requires_grad


def test_take_and_stack_gradients(rng):
    x = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
    parts = [tn.take(x, (slice(None), slice(0, 2))), tn.take(x, (slice(None), slice(2, 4)))]
    y = tn.stack([tn.mul(parts[0], parts[1]), parts[0]], axis=1)
    tn.backward(tn.mse_loss(y, np.zeros((3, 2, 2))))

    def f():
        a, b = x.data[:, :2], x.data[:, 2:]
        return float(np.mean(np.stack([a * b, a], axis=1) ** 2))

    assert max_rel_error(x.grad, numerical_grad(f, x.data)) < 1e-6


def test_float32_default_and_float64_kept():
    assert Tensor([1, 2]).dtype == np.float32
    assert Tensor([1.0, 2.0]).dtype == np.float32
    assert Tensor(np.array([1.0])).dtype == np.float64
