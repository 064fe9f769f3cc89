import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from advbench import autodiff as ad
from advbench.autodiff import Tensor

from conftest import central_difference, rel_error


def test_matmul_identity():
    a = Tensor([[1.0, 2.0], [3.0, 4.0]])
    np.testing.assert_array_equal((a @ np.eye(2)).data, [[1, 2], [3, 4]])


def test_relu_definition():
    np.testing.assert_array_equal(ad.relu(Tensor([-1.0, 0.0, 2.0])).data, [0, 0, 2])


def test_softmax_symmetric():
    np.testing.assert_allclose(ad.softmax(Tensor([[0.0, 0.0]])).data, [[0.5, 0.5]])


def test_sum_of_squares_gradient():
    x = Tensor([1.0, 2.0, 3.0], requires_grad=True)
    (x * x).sum().backward()
    np.testing.assert_array_equal(x.grad, [2, 4, 6])


def test_cross_entropy_gradient_is_softmax_minus_onehot():
    z = Tensor([[0.0, 0.0]], requires_grad=True)
    ad.cross_entropy(z, [0]).backward()
    np.testing.assert_allclose(z.grad, [[-0.5, 0.5]])


def test_shape_mismatch_names_both_shapes():
    with pytest.raises(ValueError, match=r"\(2, 3\).*\(2, 2\)"):
        Tensor(np.ones((2, 3))) @ Tensor(np.ones((2, 2)))
    with pytest.raises(ValueError, match=r"\(2,\) vs \(3,\)"):
        Tensor(np.ones(2)) + Tensor(np.ones(3))


def test_cross_entropy_label_out_of_range():
    with pytest.raises(ValueError, match="class range"):
        ad.cross_entropy(Tensor(np.zeros((1, 3))), [3])


def test_backward_requires_scalar_and_fresh_tape():
    x = Tensor([1.0, 2.0], requires_grad=True)
    with pytest.raises(ad.AutodiffError, match="scalar"):
        ad.backward(x * 2.0)
    loss = (x * x).sum()
    loss.backward()
    with pytest.raises(ad.AutodiffError, match="already replayed"):
        loss.backward()
    with pytest.raises(ad.AutodiffError, match="empty tape"):
        Tensor(3.0).backward()


def test_reuse_accumulates():
    x = Tensor([2.0], requires_grad=True)
    ((x * 3.0) + (x * x)).sum().backward()
    np.testing.assert_allclose(x.grad, [3.0 + 4.0])


def test_clamp_gradient_mask():
    x = Tensor([-2.0, -0.5, 0.5, 2.0], requires_grad=True)
    ad.clamp(x, -1.0, 1.0).sum().backward()
    np.testing.assert_array_equal(x.grad, [0, 1, 1, 0])


def test_no_grad_does_not_record():
    x = Tensor([1.0], requires_grad=True)
    with ad.no_grad():
        y = x * 2.0
    assert y._node is None and not y.requires_grad


def test_backward_probe_counts():
    x = Tensor([1.0], requires_grad=True)
    with ad.backward_probe() as probe:
        (x * x).sum().backward()
        (x * 2.0).sum().backward()
    assert probe.count == 2


def test_linearity_of_gradients(rng):
    x0 = rng.uniform(-2, 2, size=5)

    def g(fn):
        x = Tensor(x0, requires_grad=True)
        fn(x).backward()
        return x.grad

    f1 = lambda x: ad.tanh(x).sum()
    f2 = lambda x: (x * x * x).sum()
    np.testing.assert_allclose(g(lambda x: f1(x) + f2(x)), g(f1) + g(f2), rtol=1e-12)


# Each entry maps a random input to a scalar loss built from one primitive.
UNARY_CASES = {
    "relu": lambda t: (ad.relu(t) * ad.relu(t)).sum(),
    "sigmoid": lambda t: ad.sigmoid(t).sum(),
    "tanh": lambda t: (ad.tanh(t) * t).sum(),
    "exp": lambda t: ad.exp(t).mean(),
    "log": lambda t: ad.log(t * t + 1.0).sum(),
    "softmax": lambda t: (ad.softmax(t) * Tensor(np.arange(12.0).reshape(3, 4))).sum(),
    "log_softmax": lambda t: (ad.log_softmax(t) * Tensor(np.arange(12.0).reshape(3, 4))).sum(),
    "cross_entropy": lambda t: ad.cross_entropy(t, [0, 3, 1]),
    "kl_p": lambda t: ad.kl_divergence(t, Tensor(np.linspace(-1, 1, 12).reshape(3, 4))),
    "kl_q": lambda t: ad.kl_divergence(Tensor(np.linspace(-1, 1, 12).reshape(3, 4)), t),
    "sum_axis": lambda t: (ad.tsum(t, 1) * ad.tsum(t, 1)).sum(),
    "mean_axis": lambda t: (ad.mean(t, 0) ** 2.0).sum(),
    "clamp": lambda t: (ad.clamp(t, -0.7, 0.9) * t).sum(),
    "l2_norm": lambda t: ad.l2_norm(t),
    "transpose": lambda t: (t.T @ Tensor(np.ones((3, 2)))).sum(),
    "getitem": lambda t: (t[np.array([0, 2, 2]), np.array([1, 3, 3])] ** 2.0).sum(),
    "reshape": lambda t: (t.reshape(4, 3) @ Tensor(np.arange(6.0).reshape(3, 2))).sum(),
    "pow": lambda t: ((t * t + 1.0) ** -0.5).sum(),
    "div": lambda t: (Tensor(np.ones((3, 4))) / (t * t + 1.0)).sum(),
}


@pytest.mark.parametrize("name", sorted(UNARY_CASES))
def test_primitive_matches_finite_differences(name, rng):
    fn = UNARY_CASES[name]
    for _ in range(3):
        x0 = rng.uniform(-2, 2, size=(3, 4))
        x = Tensor(x0, requires_grad=True)
        fn(x).backward()
        fd = central_difference(lambda a: float(fn(Tensor(a)).data), x0)
        assert rel_error(x.grad, fd) <= 1e-5


@pytest.mark.parametrize("op", ["add", "sub", "mul", "matmul", "linear", "diag", "concat"])
def test_binary_primitives_match_finite_differences(op, rng):
    a0 = rng.uniform(-2, 2, size=(3, 3))
    b0 = rng.uniform(-2, 2, size=(3, 3))
    c0 = rng.uniform(-2, 2, size=3)
    w = Tensor(rng.normal(size=(3, 3)))

    def f(a, b, c):
        if op == "add":
            out = a + b
        elif op == "sub":
            out = a - b
        elif op == "mul":
            out = a * b
        elif op == "matmul":
            out = a @ b
        elif op == "linear":
            out = ad.linear(a, b, c)
        elif op == "diag":
            out = ad.diag(c) @ a + b
        else:
            out = ad.concat([a, b], axis=1) @ ad.concat([w, w], axis=0)
        return (out * w).sum()

    ts = [Tensor(v, requires_grad=True) for v in (a0, b0, c0)]
    f(*ts).backward()
    for k, v in enumerate((a0, b0, c0)):
        def fk(arr, k=k):
            args = [Tensor(a0), Tensor(b0), Tensor(c0)]
            args[k] = Tensor(arr)
            return float(f(*args).data)
        fd = central_difference(fk, v)
        got = ts[k].grad if ts[k].grad is not None else np.zeros_like(v)
        assert rel_error(got, fd) <= 1e-5 or np.allclose(fd, 0)


def test_conv2d_matches_finite_differences(rng):
    x0 = rng.uniform(-2, 2, size=(2, 2, 4, 4))
    w0 = rng.uniform(-1, 1, size=(3, 2, 3, 3))
    b0 = rng.uniform(-1, 1, size=3)
    proj = Tensor(rng.normal(size=(2, 3, 4, 4)))

    def f(x, w, b):
        return (ad.conv2d(x, w, b) * proj).sum()

    x, w, b = (Tensor(v, requires_grad=True) for v in (x0, w0, b0))
    f(x, w, b).backward()
    assert rel_error(x.grad, central_difference(lambda a: float(f(Tensor(a), Tensor(w0), Tensor(b0)).data), x0)) <= 1e-5
    assert rel_error(w.grad, central_difference(lambda a: float(f(Tensor(x0), Tensor(a), Tensor(b0)).data), w0)) <= 1e-5
    assert rel_error(b.grad, central_difference(lambda a: float(f(Tensor(x0), Tensor(w0), Tensor(a)).data), b0)) <= 1e-5


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-50, 50), min_size=2, max_size=6))
def test_softmax_is_finite_and_normalized(values):
    p = ad.softmax(Tensor([values])).data
    assert np.all(np.isfinite(p))
    np.testing.assert_allclose(p.sum(), 1.0, rtol=1e-12)


def test_log_and_pow_guards_stay_finite():
    x = Tensor([0.0, 1.0], requires_grad=True)
    y = ad.log(x).sum() + (x ** -0.5).sum()
    assert np.all(np.isfinite(y.data))
    y.backward()
    assert np.all(np.isfinite(x.grad))
