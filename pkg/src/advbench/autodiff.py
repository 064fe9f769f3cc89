"""Dense float64 tensors with reverse-mode automatic differentiation.

Every operation on a :class:`Tensor` that has a ``requires_grad`` operand
records a :class:`Node` holding its parents and a closure mapping the
output gradient to parent gradients. :func:`backward` linearizes the
recorded graph into a :class:`Tape` (reverse topological order) and replays
it once. Nodes are released after the replay, so a second backward over the
same graph raises.

Broadcasting is deliberately limited to scalar-vs-tensor; the few places
that need row-vector broadcasting (affine layers, bias in convolutions) have
their own fused primitives.
"""

from __future__ import annotations

import contextlib
import threading
from typing import Callable, Iterator, Sequence

import numpy as np

_TINY = 1e-300

_local = threading.local()


class AutodiffError(RuntimeError):
    pass


def _state():
    if not hasattr(_local, "grad_enabled"):
        _local.grad_enabled = True
        _local.probes = []
    return _local


def is_grad_enabled() -> bool:
    return _state().grad_enabled


@contextlib.contextmanager
def no_grad() -> Iterator[None]:
    """Disable recording for the enclosed block (this thread only)."""
    st = _state()
    prev = st.grad_enabled
    st.grad_enabled = False
    try:
        yield
    finally:
        st.grad_enabled = prev


class BackwardProbe:
    """Counts backward passes run on this thread while active."""

    def __init__(self):
        self.count = 0


@contextlib.contextmanager
def backward_probe() -> Iterator[BackwardProbe]:
    probe = BackwardProbe()
    st = _state()
    st.probes.append(probe)
    try:
        yield probe
    finally:
        st.probes.remove(probe)


class Node:
    __slots__ = ("parents", "backward_fn", "consumed", "name")

    def __init__(self, name: str, parents: Sequence["Tensor"], backward_fn: Callable):
        self.name = name
        self.parents = tuple(parents)
        self.backward_fn = backward_fn
        self.consumed = False


class Tape(list):
    """Tensors produced by recorded operations, in topological order."""

    @classmethod
    def from_output(cls, out: "Tensor") -> "Tape":
        order = cls()
        seen = set()
        stack = [(out, False)]
        while stack:
            t, expanded = stack.pop()
            if expanded:
                order.append(t)
                continue
            if id(t) in seen:
                continue
            seen.add(id(t))
            stack.append((t, True))
            if t._node is not None:
                if t._node.consumed:
                    raise AutodiffError(
                        "backward through a graph that was already replayed; "
                        "recompute the forward pass first"
                    )
                for p in t._node.parents:
                    if p.requires_grad and id(p) not in seen:
                        stack.append((p, False))
        return order


def _as_array(value) -> np.ndarray:
    return np.asarray(value, dtype=np.float64)


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_node", "__weakref__")

    __array_priority__ = 100

    def __init__(self, data, requires_grad: bool = False):
        self.data = _as_array(data)
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self._node: Node | None = None

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def is_leaf(self) -> bool:
        return self._node is None

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else _raise_item(self.shape)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"

    def __len__(self):
        return self.shape[0]

    def backward(self) -> None:
        backward(self)

    # arithmetic
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return mul(self, -1.0)

    def __pow__(self, p):
        return power(self, p)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __getitem__(self, index):
        return getitem(self, index)

    @property
    def T(self):
        return transpose(self)

    def sum(self, axis=None):
        return tsum(self, axis)

    def mean(self, axis=None):
        return mean(self, axis)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def relu(self):
        return relu(self)


def _raise_item(shape):
    raise ValueError(f"item() needs a single-element tensor, got shape {shape}")


def as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def record(name: str, data: np.ndarray, parents: Sequence[Tensor], backward_fn: Callable) -> Tensor:
    out = Tensor(data)
    if is_grad_enabled() and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._node = Node(name, parents, backward_fn)
    return out


def backward(loss: Tensor) -> None:
    """Populate ``grad`` on every leaf ancestor of a scalar ``loss``."""
    if loss.data.ndim != 0:
        raise AutodiffError(f"backward needs a scalar loss, got shape {loss.shape}")
    if loss._node is None:
        raise AutodiffError("backward on a tensor with an empty tape (no recorded operations)")
    tape = Tape.from_output(loss)
    for probe in _state().probes:
        probe.count += 1
    grads = {id(loss): np.ones_like(loss.data)}
    for t in reversed(tape):
        g = grads.pop(id(t), None)
        if g is None:
            continue
        node = t._node
        if node is None:
            t.grad = g.copy() if t.grad is None else t.grad + g
            continue
        parent_grads = node.backward_fn(g)
        for p, pg in zip(node.parents, parent_grads):
            if pg is None or not p.requires_grad:
                continue
            key = id(p)
            if key in grads:
                grads[key] = grads[key] + pg
            else:
                grads[key] = pg
        node.consumed = True
        node.backward_fn = None
        node.parents = ()


# ---------------------------------------------------------------------------
# elementwise


def _binary_operands(a, b, opname: str) -> tuple[Tensor, Tensor]:
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape and a.ndim != 0 and b.ndim != 0:
        raise ValueError(f"{opname}: shape mismatch {a.shape} vs {b.shape} (only scalar broadcasting)")
    return a, b


def _reduce_to(g: np.ndarray, shape: tuple) -> np.ndarray:
    if g.shape == shape:
        return g
    return np.asarray(g.sum()).reshape(shape)


def add(a, b) -> Tensor:
    a, b = _binary_operands(a, b, "add")
    return record(
        "add",
        a.data + b.data,
        (a, b),
        lambda g: (_reduce_to(g, a.shape), _reduce_to(g, b.shape)),
    )


def sub(a, b) -> Tensor:
    a, b = _binary_operands(a, b, "sub")
    return record(
        "sub",
        a.data - b.data,
        (a, b),
        lambda g: (_reduce_to(g, a.shape), _reduce_to(-g, b.shape)),
    )


def mul(a, b) -> Tensor:
    a, b = _binary_operands(a, b, "mul")
    ad, bd = a.data, b.data
    return record(
        "mul",
        ad * bd,
        (a, b),
        lambda g: (_reduce_to(g * bd, a.shape), _reduce_to(g * ad, b.shape)),
    )


def _safe_denominator(d: np.ndarray) -> np.ndarray:
    return np.where(np.abs(d) < _TINY, np.where(d < 0, -_TINY, _TINY), d)


def div(a, b) -> Tensor:
    a, b = _binary_operands(a, b, "div")
    ad, bd = a.data, _safe_denominator(b.data)
    out = ad / bd
    return record(
        "div",
        out,
        (a, b),
        lambda g: (_reduce_to(g / bd, a.shape), _reduce_to(-g * out / bd, b.shape)),
    )


def power(a, p: float) -> Tensor:
    """Elementwise ``a ** p`` for a constant exponent. Zero bases with
    negative exponents map to 0 (used for inverse square-root degrees)."""
    a = as_tensor(a)
    p = float(p)
    x = a.data
    if p < 0:
        zero = x == 0
        safe = np.where(zero, 1.0, x)
        out = np.where(zero, 0.0, safe**p)
        dout = np.where(zero, 0.0, p * safe ** (p - 1))
    else:
        out = x**p
        dout = p * x ** (p - 1) if p != 0 else np.zeros_like(x)
    return record("pow", out, (a,), lambda g: (g * dout,))


def exp(a) -> Tensor:
    a = as_tensor(a)
    out = np.exp(np.minimum(a.data, 700.0))
    return record("exp", out, (a,), lambda g: (g * out,))


def log(a) -> Tensor:
    a = as_tensor(a)
    x = np.maximum(a.data, _TINY)
    return record("log", np.log(x), (a,), lambda g: (g / x,))


def relu(a) -> Tensor:
    a = as_tensor(a)
    mask = a.data > 0
    return record("relu", np.where(mask, a.data, 0.0), (a,), lambda g: (g * mask,))


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    x = a.data
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return record("sigmoid", out, (a,), lambda g: (g * out * (1.0 - out),))


def tanh(a) -> Tensor:
    a = as_tensor(a)
    out = np.tanh(a.data)
    return record("tanh", out, (a,), lambda g: (g * (1.0 - out * out),))


def clamp(a, low: float | None = None, high: float | None = None) -> Tensor:
    """Clip to ``[low, high]``; the gradient is passed only where the input
    lies strictly inside the active interval."""
    a = as_tensor(a)
    x = a.data
    lo = -np.inf if low is None else low
    hi = np.inf if high is None else high
    inside = (x > lo) & (x < hi)
    return record("clamp", np.clip(x, lo, hi), (a,), lambda g: (g * inside,))


# ---------------------------------------------------------------------------
# linear algebra and shape


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    ad, bd = a.data, b.data
    return record("matmul", ad @ bd, (a, b), lambda g: (g @ bd.T, ad.T @ g))


def linear(x, weight, bias=None) -> Tensor:
    """``x @ weight + bias`` with the bias broadcast across rows."""
    x, weight = as_tensor(x), as_tensor(weight)
    if x.ndim != 2 or weight.ndim != 2 or x.shape[1] != weight.shape[0]:
        raise ValueError(f"linear: incompatible shapes {x.shape} and {weight.shape}")
    xd, wd = x.data, weight.data
    out = xd @ wd
    if bias is None:
        return record("linear", out, (x, weight), lambda g: (g @ wd.T, xd.T @ g))
    bias = as_tensor(bias)
    if bias.shape != (weight.shape[1],):
        raise ValueError(f"linear: bias shape {bias.shape} does not match weight {weight.shape}")
    return record(
        "linear",
        out + bias.data,
        (x, weight, bias),
        lambda g: (g @ wd.T, xd.T @ g, g.sum(axis=0)),
    )


def transpose(a) -> Tensor:
    a = as_tensor(a)
    if a.ndim != 2:
        raise ValueError(f"transpose expects a matrix, got shape {a.shape}")
    return record("transpose", a.data.T.copy(), (a,), lambda g: (g.T,))


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    src = a.shape
    return record("reshape", a.data.reshape(shape), (a,), lambda g: (g.reshape(src),))


def getitem(a, index) -> Tensor:
    a = as_tensor(a)
    src = a.shape

    def bwd(g):
        full = np.zeros(src)
        np.add.at(full, index, g)
        return (full,)

    return record("getitem", np.array(a.data[index], dtype=np.float64), (a,), bwd)


def diag(v) -> Tensor:
    """Vector to diagonal matrix."""
    v = as_tensor(v)
    if v.ndim != 1:
        raise ValueError(f"diag expects a vector, got shape {v.shape}")
    return record("diag", np.diag(v.data), (v,), lambda g: (np.diag(g).copy(),))


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in ts]
    splits = np.cumsum(sizes)[:-1]
    return record(
        "concat",
        np.concatenate([t.data for t in ts], axis=axis),
        ts,
        lambda g: tuple(np.split(g, splits, axis=axis)),
    )


# ---------------------------------------------------------------------------
# reductions


def tsum(a, axis=None) -> Tensor:
    a = as_tensor(a)
    src = a.shape

    def bwd(g):
        if axis is None:
            return (np.broadcast_to(g, src).copy(),)
        return (np.broadcast_to(np.expand_dims(g, axis), src).copy(),)

    return record("sum", np.asarray(a.data.sum(axis=axis)), (a,), bwd)


def mean(a, axis=None) -> Tensor:
    a = as_tensor(a)
    count = a.size if axis is None else a.shape[axis]
    return mul(tsum(a, axis), 1.0 / count)


def l2_norm(a) -> Tensor:
    """Euclidean norm of all entries; gradient 0 at the origin."""
    a = as_tensor(a)
    x = a.data
    n = float(np.sqrt(np.sum(x * x)))
    scale = 0.0 if n == 0.0 else 1.0 / n
    return record("l2_norm", np.asarray(n), (a,), lambda g: (g * x * scale,))


# ---------------------------------------------------------------------------
# classification losses (row-wise over the last axis of a 2-D tensor)


def _log_softmax_np(x: np.ndarray) -> np.ndarray:
    shifted = x - x.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def softmax_np(x: np.ndarray) -> np.ndarray:
    return np.exp(_log_softmax_np(np.asarray(x, dtype=np.float64)))


def softmax(a) -> Tensor:
    a = as_tensor(a)
    out = softmax_np(a.data)

    def bwd(g):
        return (out * (g - (g * out).sum(axis=-1, keepdims=True)),)

    return record("softmax", out, (a,), bwd)


def log_softmax(a) -> Tensor:
    a = as_tensor(a)
    out = _log_softmax_np(a.data)
    p = np.exp(out)

    def bwd(g):
        return (g - p * g.sum(axis=-1, keepdims=True),)

    return record("log_softmax", out, (a,), bwd)


def _check_labels(labels, n_rows: int, n_classes: int) -> np.ndarray:
    y = np.asarray(labels)
    if y.shape != (n_rows,):
        raise ValueError(f"labels shape {y.shape} does not match {n_rows} logit rows")
    if y.size and (y.min() < 0 or y.max() >= n_classes):
        raise ValueError(f"label outside class range [0, {n_classes}): {y.min()}..{y.max()}")
    return y.astype(np.int64)


def cross_entropy(logits, labels, reduction: str = "mean") -> Tensor:
    """Softmax cross-entropy of ``logits`` [n, c] against integer labels."""
    logits = as_tensor(logits)
    if logits.ndim != 2:
        raise ValueError(f"cross_entropy expects [n, c] logits, got {logits.shape}")
    n, c = logits.shape
    y = _check_labels(labels, n, c)
    logp = _log_softmax_np(logits.data)
    rows = np.arange(n)
    per = -logp[rows, y]
    scale = 1.0 / n if reduction == "mean" else 1.0
    if reduction not in ("mean", "sum"):
        raise ValueError(f"unknown reduction {reduction!r}")

    def bwd(g):
        grad = np.exp(logp)
        grad[rows, y] -= 1.0
        return (grad * (g * scale),)

    return record("cross_entropy", np.asarray(per.sum() * scale), (logits,), bwd)


def kl_divergence(p_logits, q_logits) -> Tensor:
    """Batch-mean KL(softmax(p) || softmax(q)), both arguments differentiable."""
    p_logits, q_logits = as_tensor(p_logits), as_tensor(q_logits)
    if p_logits.shape != q_logits.shape or p_logits.ndim != 2:
        raise ValueError(f"kl_divergence: shape mismatch {p_logits.shape} vs {q_logits.shape}")
    n = p_logits.shape[0]
    logp = _log_softmax_np(p_logits.data)
    logq = _log_softmax_np(q_logits.data)
    p, q = np.exp(logp), np.exp(logq)
    diff = logp - logq
    value = (p * diff).sum() / n

    def bwd(g):
        s = g / n
        kl_rows = (p * diff).sum(axis=-1, keepdims=True)
        gp = p * (diff - kl_rows) * s
        gq = (q - p) * s
        return (gp, gq)

    return record("kl_divergence", np.asarray(value), (p_logits, q_logits), bwd)


# ---------------------------------------------------------------------------
# convolution


def conv2d(x, weight, bias=None, padding: int = 1) -> Tensor:
    """3x3 (or any odd square kernel) stride-1 convolution over NCHW input.

    Loops over kernel offsets; each offset is a dense contraction.
    """
    x, weight = as_tensor(x), as_tensor(weight)
    if x.ndim != 4 or weight.ndim != 4 or x.shape[1] != weight.shape[1]:
        raise ValueError(f"conv2d: incompatible shapes {x.shape} and {weight.shape}")
    b, c, h, w = x.shape
    o, _, kh, kw = weight.shape
    oh, ow = h + 2 * padding - kh + 1, w + 2 * padding - kw + 1
    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    wd = weight.data
    out = np.zeros((b, o, oh, ow))
    for i in range(kh):
        for j in range(kw):
            out += np.einsum("bchw,oc->bohw", xp[:, :, i : i + oh, j : j + ow], wd[:, :, i, j])
    parents = [x, weight]
    if bias is not None:
        bias = as_tensor(bias)
        if bias.shape != (o,):
            raise ValueError(f"conv2d: bias shape {bias.shape} does not match {o} output channels")
        out += bias.data[None, :, None, None]
        parents.append(bias)

    def bwd(g):
        gxp = np.zeros_like(xp)
        gw = np.zeros_like(wd)
        for i in range(kh):
            for j in range(kw):
                sl = xp[:, :, i : i + oh, j : j + ow]
                gw[:, :, i, j] = np.einsum("bohw,bchw->oc", g, sl)
                gxp[:, :, i : i + oh, j : j + ow] += np.einsum("bohw,oc->bchw", g, wd[:, :, i, j])
        gx = gxp[:, :, padding : padding + h, padding : padding + w]
        grads = [gx, gw]
        if bias is not None:
            grads.append(g.sum(axis=(0, 2, 3)))
        return tuple(grads)

    return record("conv2d", out, parents, bwd)


def straight_through(x, fn: Callable[[np.ndarray], np.ndarray], name: str = "straight_through") -> Tensor:
    """Apply a non-differentiable ``fn`` whose backward is approximated by the
    identity. Extra trailing output axes are summed back onto the input."""
    x = as_tensor(x)
    out = np.asarray(fn(x.data), dtype=np.float64)
    extra = out.ndim - x.ndim
    if out.shape[: x.ndim] != x.shape:
        raise ValueError(f"{name}: output shape {out.shape} does not extend input {x.shape}")

    def bwd(g):
        if extra:
            g = g.sum(axis=tuple(range(x.ndim, out.ndim)))
        return (g,)

    return record(name, out, (x,), bwd)


def blocked(x, fn: Callable[[np.ndarray], np.ndarray], name: str = "blocked") -> Tensor:
    """Apply a piecewise-constant ``fn``; its true derivative (zero) is used."""
    x = as_tensor(x)
    out = np.asarray(fn(x.data), dtype=np.float64)
    return record(name, out, (x,), lambda g: (np.zeros(x.shape),))


def grad(loss_fn: Callable[[Tensor], Tensor], x: np.ndarray) -> tuple[float, np.ndarray]:
    """Value and gradient of a scalar function of one array."""
    t = Tensor(np.array(x, dtype=np.float64), requires_grad=True)
    loss = loss_fn(t)
    backward(loss)
    return float(loss.data), t.grad if t.grad is not None else np.zeros_like(t.data)
