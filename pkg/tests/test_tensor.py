import numpy as np
import pytest
from scipy.special import erf

from autocon import tensor as tn
from autocon.errors import ContractError, DimensionError
from autocon.tensor import Value, backward


def test_add_mul_backward_with_broadcast():
    a = tn.parameter(np.ones((3, 4)))
    b = tn.parameter(np.arange(4.0))
    backward(tn.sum(a * b + a))
    np.testing.assert_allclose(a.grad, np.tile(np.arange(4.0) + 1, (3, 1)))
    np.testing.assert_allclose(b.grad, np.full(4, 3.0))


def test_leaf_grads_accumulate_across_backward_calls():
    x = tn.parameter(np.array([2.0]))
    backward(tn.sum(x * x))
    backward(tn.sum(x * x))
    assert x.grad[0] == pytest.approx(8.0)
    x.zero_grad()
    assert x.grad is None or not np.any(x.grad)


def test_reused_node_gets_summed_gradient():
    x = tn.parameter(np.array([3.0]))
    y = x * 2.0
    backward(tn.sum(y * y + y))
    # d/dx (4x^2 + 2x) = 8x + 2
    assert x.grad[0] == pytest.approx(26.0)


def test_nonscalar_backward_rejected():
    x = tn.parameter(np.ones(3))
    with pytest.raises(ContractError):
        backward(x * 2.0)


def test_matmul_shape_error_names_shapes():
    with pytest.raises(DimensionError, match=r"\(2, 3\).*\(4, 5\)"):
        tn.matmul(tn.parameter(np.ones((2, 3))), tn.parameter(np.ones((4, 5))))


def test_gelu_uses_exact_erf():
    x = np.linspace(-4, 4, 17)
    expected = 0.5 * x * (1 + erf(x / np.sqrt(2)))
    np.testing.assert_allclose(tn.gelu(Value(x)).data, expected, rtol=0, atol=1e-15)


def test_conv_is_causal_and_dilated():
    # kernel picks only the tap two dilations back: y[t] = x[t - 2*d]
    x = np.arange(1.0, 9.0).reshape(8, 1)
    k = np.zeros((3, 1, 1))
    k[0, 0, 0] = 1.0
    y = tn.conv1d_causal(Value(x), Value(k), dilation=2).data[:, 0]
    np.testing.assert_allclose(y, [0, 0, 0, 0, 1, 2, 3, 4])


def test_replicate_pad_and_avgpool():
    x = Value(np.array([[1.0], [2.0], [3.0]]))
    p = tn.replicate_pad(x, 2, 1)
    np.testing.assert_allclose(p.data[:, 0], [1, 1, 1, 2, 3, 3])
    np.testing.assert_allclose(tn.avgpool1d(p, 4).data[:, 0], [1.25, 1.75, 2.25])


def test_replicate_pad_requires_time_axis():
    with pytest.raises(DimensionError):
        tn.replicate_pad(Value(np.ones(3)), 1, 1)


def test_max_pool_routes_gradient_to_argmax():
    v = tn.parameter(np.array([[[1.0, 5.0], [3.0, 2.0]]]))
    backward(tn.sum(tn.max_pool_time(v)))
    np.testing.assert_array_equal(v.grad, [[[0, 1], [1, 0]]])


def test_cosine_sim_zero_vector_is_finite():
    a = tn.parameter(np.zeros((1, 3)))
    b = tn.parameter(np.ones((1, 3)))
    s = tn.cosine_sim(a, b)
    assert s.data[0] == 0.0
    backward(tn.sum(s))
    assert np.all(np.isfinite(a.grad))


def test_pairwise_cosine_diagonal_is_one(rng):
    p = rng.normal(size=(2, 5, 4))
    S = tn.pairwise_cosine(p).data
    assert S.shape == (2, 5, 5)
    np.testing.assert_allclose(np.diagonal(S, axis1=-2, axis2=-1), 1.0, atol=1e-10)


def test_check_gradients_detects_wrong_backward():
    x = tn.parameter(np.array([1.0, 2.0]))

    def bad():
        out = x.data ** 2
        return tn.sum(tn._node(out, (x,), lambda g: (g * x.data,), "bad_square"))

    assert tn.check_gradients(bad, [x]) > 0.1


def test_relative_error_zero_when_both_zero():
    assert tn.relative_error(np.zeros(3), np.zeros(3)) == 0.0
