import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rkan import autodiff as ad
from rkan.autodiff import DivisionError, Jet, ShapeError, Tensor, backward, grad, input_derivative

from conftest import central_difference, leaf, rel_err


def test_add_elementwise():
    out = ad.add(Tensor([1.0, 2.0]), Tensor([3.0, 4.0]))
    np.testing.assert_array_equal(out.data, [4.0, 6.0])


def test_multiply_by_zero_tensor_is_zero():
    x = Tensor(np.random.default_rng(0).normal(size=(3, 4)))
    out = x * Tensor(np.zeros((3, 4)))
    assert out.shape == (3, 4)
    assert not out.data.any()


def test_matmul_matches_triple_loop(rng):
    a, b = rng.normal(size=(2, 3)), rng.normal(size=(3, 1))
    expected = np.zeros((2, 1))
    for i in range(2):
        for j in range(1):
            for k in range(3):
                expected[i, j] += a[i, k] * b[k, j]
    np.testing.assert_allclose((Tensor(a) @ Tensor(b)).data, expected, rtol=0, atol=1e-15)


def test_shape_error_names_op_and_shapes():
    with pytest.raises(ShapeError) as info:
        Tensor(np.ones(3)) + Tensor(np.ones(4))
    msg = str(info.value)
    assert "add" in msg and "(3,)" in msg and "(4,)" in msg
    with pytest.raises(ShapeError, match="matmul"):
        Tensor(np.ones((2, 3))) @ Tensor(np.ones((2, 3)))


def test_scalar_broadcast_only():
    out = Tensor(np.ones((2, 2))) * 3.0
    np.testing.assert_array_equal(out.data, 3.0)
    with pytest.raises(ShapeError):
        Tensor(np.ones((2, 3))) + Tensor(np.ones(3))


def test_division_by_tiny_denominator_raises():
    with pytest.raises(DivisionError):
        Tensor([1.0, 2.0]) / Tensor([1.0, 1e-31])
    # just above the threshold is fine
    assert np.isfinite((Tensor([1.0]) / Tensor([1e-29])).data).all()


def test_square_gradient():
    x = leaf(3.0)
    g = backward(x * x, [x])
    assert g[x] == pytest.approx(6.0)


def test_sum_tanh_gradient():
    x = leaf([0.0, 1.0])
    g = backward(ad.tanh(x).sum(), [x])[x]
    np.testing.assert_allclose(g, [1.0, 1.0 - np.tanh(1.0) ** 2], rtol=1e-14)
    np.testing.assert_allclose(g, [1.0, 0.41997434161402614], rtol=1e-12)


def test_backward_rejects_non_scalar_root():
    x = leaf([1.0, 2.0])
    with pytest.raises(ValueError, match="scalar"):
        backward(x * 2.0)


def test_unreachable_parameter_gets_zero_gradient():
    x, unused = leaf([1.0, 2.0]), leaf(np.ones((2, 2)))
    grads = backward((x * x).sum(), [x, unused])
    np.testing.assert_array_equal(grads[unused], np.zeros((2, 2)))


UNARY = {
    "exp": (ad.exp, np.exp, (-2, 2)),
    "log": (ad.log, np.log, (0.2, 3)),
    "tanh": (ad.tanh, np.tanh, (-2, 2)),
    "sigmoid": (ad.sigmoid, lambda v: 1 / (1 + np.exp(-v)), (-4, 4)),
    "sin": (ad.sin, np.sin, (-3, 3)),
    "cos": (ad.cos, np.cos, (-3, 3)),
    "softplus": (ad.softplus, lambda v: np.logaddexp(0, v), (-4, 4)),
    "elu": (ad.elu, lambda v: np.where(v > 0, v, np.expm1(v)), (-2, 2)),
    "neg": (ad.neg, np.negative, (-2, 2)),
    "power2.5": (lambda t: t ** 2.5, lambda v: v ** 2.5, (0.3, 2)),
    "power3": (lambda t: t ** 3, lambda v: v ** 3, (-2, 2)),
}


@pytest.mark.parametrize("name", sorted(UNARY))
def test_unary_op_gradients_match_finite_differences(name):
    op, ref, (lo, hi) = UNARY[name]
    rng = np.random.default_rng(abs(hash(name)) % 2**32)
    x0 = rng.uniform(lo, hi, 20)
    weights = rng.normal(size=20)
    np.testing.assert_allclose(op(Tensor(x0)).data, ref(x0), rtol=1e-13, atol=1e-14)
    x = leaf(x0)
    g = backward((op(x) * weights).sum(), [x])[x]
    fd = central_difference(lambda v: float(np.sum(ref(v) * weights)), x0)
    assert rel_err(g, fd) < 1e-5


BINARY = {
    "add": (ad.add, np.add),
    "sub": (ad.sub, np.subtract),
    "mul": (ad.mul, np.multiply),
    "div": (ad.div, np.divide),
}


@pytest.mark.parametrize("name", sorted(BINARY))
def test_binary_op_gradients_match_finite_differences(name, rng):
    op, ref = BINARY[name]
    a0, b0 = rng.uniform(0.5, 2, 20), rng.uniform(0.5, 2, 20)
    w = rng.normal(size=20)
    a, b = leaf(a0), leaf(b0)
    g = backward((op(a, b) * w).sum(), [a, b])
    fa = central_difference(lambda v: float(np.sum(ref(v, b0) * w)), a0)
    fb = central_difference(lambda v: float(np.sum(ref(a0, v) * w)), b0)
    assert rel_err(g[a], fa) < 1e-5
    assert rel_err(g[b], fb) < 1e-5


def test_structural_op_gradients(rng):
    a0, b0 = rng.normal(size=(4, 3)), rng.normal(size=(3, 2))
    mask = rng.random((4, 3)) > 0.5

    def loss_t(a, b):
        m = ad.matmul(a, b)
        s = ad.where(mask, a, ad.exp(a)).mean(axis=0)        # (3,)
        st = ad.stack([s, s * 2.0], axis=0)                   # (2,3)
        cat = ad.concat([m, ad.reshape(m, (2, 4)).T], axis=1)  # (4,4)
        return (cat * cat).sum() + (st * st).sum() + ad.broadcast_to(s.sum(axis=0, keepdims=True), (3,)).sum()

    def loss_np(a, b):
        m = a @ b
        s = np.where(mask, a, np.exp(a)).mean(axis=0)
        st = np.stack([s, 2 * s])
        cat = np.concatenate([m, m.reshape(2, 4).T], axis=1)
        return float((cat ** 2).sum() + (st ** 2).sum() + 3 * s.sum())

    a, b = leaf(a0), leaf(b0)
    assert float(loss_t(a, b).data) == pytest.approx(loss_np(a0, b0), rel=1e-13)
    g = backward(loss_t(a, b), [a, b])
    assert rel_err(g[a], central_difference(lambda v: loss_np(v, b0), a0)) < 1e-5
    assert rel_err(g[b], central_difference(lambda v: loss_np(a0, v), b0)) < 1e-5


def test_random_three_layer_composition(rng):
    shapes = [(2, 5), (5, 4), (4, 1)]
    ws = [rng.normal(size=s) * 0.7 for s in shapes]
    x = rng.normal(size=(6, 2))

    def forward_np(params):
        h = np.tanh(x @ params[0])
        h = 1 / (1 + np.exp(-(h @ params[1])))
        return float(np.sum((h @ params[2]) ** 2))

    leaves = [leaf(w) for w in ws]
    h = ad.tanh(Tensor(x) @ leaves[0])
    h = ad.sigmoid(h @ leaves[1])
    out = ((h @ leaves[2]) ** 2).sum()
    g = backward(out, leaves)
    for i, w in enumerate(ws):
        fd = central_difference(lambda v: forward_np(ws[:i] + [v] + ws[i + 1:]), w)
        assert rel_err(g[leaves[i]], fd) < 1e-5


@settings(max_examples=30, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 2**31 - 1))
def test_backward_is_linear(a, b, seed):
    x0 = np.random.default_rng(seed).normal(size=5)
    x = leaf(x0)
    f = lambda: ad.tanh(x).sum()
    g = lambda: (x * x * x).sum()
    combo = backward(f() * a + g() * b, [x])[x]
    gf, gg = backward(f(), [x])[x], backward(g(), [x])[x]
    np.testing.assert_allclose(combo, a * gf + b * gg, rtol=0, atol=1e-12 * (1 + np.abs(combo).max()))


def test_repeated_backward_is_bitwise_identical(rng):
    x = leaf(rng.normal(size=(3, 3)))
    out = (ad.exp(x) @ ad.tanh(x)).sum()
    first = backward(out, [x])[x].copy()
    x.grad = None
    second = backward(out, [x])[x]
    assert np.array_equal(first, second)


def test_create_graph_gives_second_derivative():
    x = leaf(0.7)
    (g,) = grad(x ** 4, [x], create_graph=True)
    (h,) = grad(g, [x])
    assert h.item() == pytest.approx(12 * 0.7 ** 2, rel=1e-14)


def test_no_grad_records_nothing():
    x = leaf(2.0)
    with ad.no_grad():
        y = x * x
    assert not y.requires_grad and not y.parents


@pytest.mark.parametrize("method", ["jet", "reverse"])
def test_input_derivative_cubic(method):
    F, d1, d2 = input_derivative(lambda X: X ** 3, np.array([[2.0]]), 2, method=method)
    assert F.item() == pytest.approx(8.0)
    assert d1.item() == pytest.approx(12.0)
    assert d2.item() == pytest.approx(12.0)


@pytest.mark.parametrize("method", ["jet", "reverse"])
def test_input_derivative_tanh_odd(method):
    _, _, d2 = input_derivative(ad.tanh, np.array([[0.0]]), 2, method=method)
    assert d2.item() == 0.0


def test_input_derivative_rejects_bad_order():
    with pytest.raises(ValueError, match="order"):
        input_derivative(ad.tanh, np.zeros((1, 1)), 3)


def _trained_net():
    from rkan.layers import build_network
    from rkan.optim import minimize_parameters
    net = build_network([1, 10, 1], "jacobi-rkan", 3, seed=3)
    x = np.linspace(-3, 3, 40).reshape(-1, 1)
    y = np.sin(x)
    minimize_parameters(net.parameters(), lambda: ((net(Tensor(x)) - Tensor(y)) ** 2).mean(), 30)
    return net


def test_input_derivative_matches_second_difference_on_trained_net():
    net = _trained_net()
    x = np.linspace(-2, 2, 9).reshape(-1, 1)
    h = 1e-4
    _, _, d2 = input_derivative(net, x, 2)
    f = lambda z: net(Tensor(z)).data.ravel()
    fd = (f(x + h) - 2 * f(x) + f(x - h)) / h ** 2
    assert np.max(np.abs(d2.data - fd) / np.maximum(np.abs(fd), 1e-3)) < 1e-4


def test_jet_and_reverse_agree_and_match_backward_gradient():
    net = _trained_net()
    x = np.linspace(-2, 2, 7).reshape(-1, 1)
    jet = input_derivative(net, x, 2, method="jet")
    rev = input_derivative(net, x, 2, method="reverse")
    for a, b in zip(jet, rev):
        np.testing.assert_allclose(a.data, b.data, rtol=1e-10, atol=1e-12)
    xt = Tensor(x, requires_grad=True)
    (g,) = grad(net(xt).sum(), [xt])
    np.testing.assert_allclose(jet[1].data, g.data[:, 0], rtol=0, atol=1e-10)


def test_input_derivative_two_inputs_each_axis():
    f = lambda X: (X[:, :1] ** 2) * ad.sin(X[:, 1:])
    x = np.array([[0.5, 0.3], [1.5, -0.7]])
    _, dx, dxx = input_derivative(f, x, 2, axis=0)
    _, dy, dyy = input_derivative(f, x, 2, axis=1)
    np.testing.assert_allclose(dx.data, 2 * x[:, 0] * np.sin(x[:, 1]), rtol=1e-14)
    np.testing.assert_allclose(dxx.data, 2 * np.sin(x[:, 1]), rtol=1e-14)
    np.testing.assert_allclose(dy.data, x[:, 0] ** 2 * np.cos(x[:, 1]), rtol=1e-14)
    np.testing.assert_allclose(dyy.data, -x[:, 0] ** 2 * np.sin(x[:, 1]), rtol=1e-14)


def test_jet_derivatives_are_differentiable_in_parameters():
    w = leaf(1.3)
    _, _, d2 = input_derivative(lambda X: ad.exp(X * w), np.array([[0.4]]), 2)
    (g,) = grad(d2.sum(), [w])
    # d/dw [w^2 e^{w x}] = (2w + w^2 x) e^{w x}
    x = 0.4
    assert g.item() == pytest.approx((2 * 1.3 + 1.3 ** 2 * x) * np.exp(1.3 * x), rel=1e-13)


def test_jet_repr_and_passthrough():
    j = Jet(Tensor([1.0]), Tensor([1.0]), Tensor([0.0]))
    assert ad.as_tensor(j) is j
