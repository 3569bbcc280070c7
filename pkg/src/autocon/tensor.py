"""Minimal reverse-mode autodiff over float64 numpy arrays.

Every op builds a new :class:`Value` that remembers its parents and a closure
mapping the output gradient to one gradient per parent. :func:`backward`
orders the reachable graph topologically (a :class:`Tape`) and walks it in
reverse. Leading axes broadcast the way numpy does; gradients are summed back
down to each parent's shape.
"""

from __future__ import annotations

import itertools
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.special import erf

from .errors import ContractError, DimensionError, DomainError, ParameterError

_ids = itertools.count()

COSINE_EPS = 1e-12
_SQRT_HALF = np.sqrt(0.5)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


class Value:
    """A float64 array that participates in a recorded computation graph."""

    __slots__ = ("data", "grad", "requires_grad", "id", "op", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, *, _parents=(), _backward=None, op="leaf"):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in _parents)
        self.id = next(_ids)
        self.op = op
        self._parents: tuple[Value, ...] = tuple(_parents)
        self._backward: Callable[[np.ndarray], Sequence[np.ndarray | None]] | None = _backward

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float("nan")

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        return f"Value(shape={self.shape}, op={self.op!r})"

    # arithmetic sugar
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __pow__(self, exponent: float):
        return power(self, exponent)


def as_value(x) -> Value:
    return x if isinstance(x, Value) else Value(x)


def parameter(data) -> Value:
    return Value(np.array(data, dtype=np.float64), requires_grad=True)


def _node(data, parents, backward, op) -> Value:
    parents = tuple(parents)
    if not any(p.requires_grad for p in parents):
        return Value(data, op=op)
    return Value(data, _parents=parents, _backward=backward, op=op)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Tape:
    """Recorded operations in topological order (parents before children)."""

    def __init__(self, nodes: list[Value]):
        self.nodes = nodes

    @classmethod
    def trace(cls, root: Value) -> "Tape":
        order: list[Value] = []
        seen: set[int] = set()
        stack: list[tuple[Value, bool]] = [(root, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if node.id in seen:
                continue
            seen.add(node.id)
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and p.id not in seen:
                    stack.append((p, False))
        return cls(order)

    def __len__(self) -> int:
        return len(self.nodes)

    def __iter__(self):
        return iter(self.nodes)


def backward(loss: Value) -> Tape:
    """Populate ``grad`` on every leaf reachable from a scalar ``loss``.

    Leaf gradients accumulate across calls until :meth:`Value.zero_grad`;
    intermediate nodes receive a fresh gradient each call.
    """
    if loss.data.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        return Tape([])
    tape = Tape.trace(loss)
    grads: dict[int, np.ndarray] = {loss.id: np.ones_like(loss.data)}
    for node in reversed(tape.nodes):
        g = grads.pop(node.id, None)
        if g is None:
            g = np.zeros_like(node.data)
        if node._backward is None:
            node.grad = g.copy() if node.grad is None else node.grad + g
            continue
        node.grad = g
        for parent, pg in zip(node._parents, node._backward(g)):
            if pg is None or not parent.requires_grad:
                continue
            if parent.id in grads:
                grads[parent.id] = grads[parent.id] + pg
            else:
                grads[parent.id] = pg
    return tape


# ---------------------------------------------------------------- elementwise

def add(a, b) -> Value:
    a, b = as_value(a), as_value(b)
    return _node(a.data + b.data, (a, b),
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)), "add")


def sub(a, b) -> Value:
    a, b = as_value(a), as_value(b)
    return _node(a.data - b.data, (a, b),
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)), "sub")


def mul(a, b) -> Value:
    a, b = as_value(a), as_value(b)
    return _node(a.data * b.data, (a, b),
                 lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
                 "mul")


def div(a, b) -> Value:
    a, b = as_value(a), as_value(b)
    out = a.data / b.data

    def bw(g):
        ga = _unbroadcast(g / b.data, a.shape)
        gb = _unbroadcast(-g * out / b.data, b.shape)
        return ga, gb

    return _node(out, (a, b), bw, "div")


def neg(a) -> Value:
    a = as_value(a)
    return _node(-a.data, (a,), lambda g: (-g,), "neg")


def power(a, exponent: float) -> Value:
    a = as_value(a)
    return _node(a.data ** exponent, (a,),
                 lambda g: (g * exponent * a.data ** (exponent - 1),), "pow")


def exp(a) -> Value:
    a = as_value(a)
    out = np.exp(a.data)
    return _node(out, (a,), lambda g: (g * out,), "exp")


def log(a) -> Value:
    a = as_value(a)
    return _node(np.log(a.data), (a,), lambda g: (g / a.data,), "log")


def sqrt(a) -> Value:
    a = as_value(a)
    out = np.sqrt(a.data)
    return _node(out, (a,), lambda g: (g * 0.5 / out,), "sqrt")


def gelu(x) -> Value:
    """Exact GELU, ``x * Phi(x)`` with the erf form of the normal CDF."""
    x = as_value(x)
    cdf = 0.5 * (1.0 + erf(x.data * _SQRT_HALF))
    pdf = _INV_SQRT_2PI * np.exp(-0.5 * x.data * x.data)
    return _node(x.data * cdf, (x,), lambda g: (g * (cdf + x.data * pdf),), "gelu")


# ---------------------------------------------------------------- reductions / shape

def sum(x, axis=None, keepdims: bool = False) -> Value:  # noqa: A001 - mirrors numpy
    x = as_value(x)
    out = x.data.sum(axis=axis, keepdims=keepdims)

    def bw(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)

    return _node(out, (x,), bw, "sum")


def mean(x, axis=None, keepdims: bool = False) -> Value:
    x = as_value(x)
    count = x.data.size if axis is None else int(np.prod([x.shape[a] for a in np.atleast_1d(axis)]))
    return mul(sum(x, axis=axis, keepdims=keepdims), 1.0 / count)


def reshape(x, shape) -> Value:
    x = as_value(x)
    return _node(x.data.reshape(shape), (x,), lambda g: (g.reshape(x.shape),), "reshape")


def swapaxes(x, a1: int, a2: int) -> Value:
    x = as_value(x)
    return _node(np.swapaxes(x.data, a1, a2), (x,), lambda g: (np.swapaxes(g, a1, a2),), "swapaxes")


def concat(values: Iterable, axis: int = -1) -> Value:
    values = [as_value(v) for v in values]
    out = np.concatenate([v.data for v in values], axis=axis)
    bounds = np.cumsum([v.shape[axis] for v in values])[:-1]

    def bw(g):
        return tuple(np.split(g, bounds, axis=axis))

    return _node(out, values, bw, "concat")


# ---------------------------------------------------------------- linear algebra

def matmul(a, b) -> Value:
    """Matrix product over the last two axes, leading axes broadcast."""
    a, b = as_value(a), as_value(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul shapes {a.shape} and {b.shape} do not align")
    out = np.matmul(a.data, b.data)

    def bw(g):
        ga = np.matmul(g, np.swapaxes(b.data, -1, -2)) if a.requires_grad else None
        gb = np.matmul(np.swapaxes(a.data, -1, -2), g) if b.requires_grad else None
        return (None if ga is None else _unbroadcast(ga, a.shape),
                None if gb is None else _unbroadcast(gb, b.shape))

    return _node(out, (a, b), bw, "matmul")


# ---------------------------------------------------------------- sequence ops (time on axis -2)

def conv1d_causal(x, kernel, dilation: int = 1) -> Value:
    """Dilated causal convolution of ``x[..., L, cin]`` with ``kernel[k, cin, cout]``.

    The last tap multiplies the current step; tap ``j`` looks back
    ``(k - 1 - j) * dilation`` steps. Zero left padding keeps length ``L``.
    """
    x, kernel = as_value(x), as_value(kernel)
    if dilation < 1:
        raise ParameterError(f"dilation must be >= 1, got {dilation}")
    if kernel.ndim != 3 or x.shape[-1] != kernel.shape[1]:
        raise DimensionError(f"conv1d shapes {x.shape} and {kernel.shape} do not align")
    k = kernel.shape[0]
    L = x.shape[-2]
    pad = (k - 1) * dilation
    widths = [(0, 0)] * (x.ndim - 2) + [(pad, 0), (0, 0)]
    xp = np.pad(x.data, widths)
    taps = [xp[..., j * dilation: j * dilation + L, :] for j in range(k)]
    out = taps[0] @ kernel.data[0]
    for j in range(1, k):
        out = out + taps[j] @ kernel.data[j]

    def bw(g):
        gx = gk = None
        if x.requires_grad:
            gxp = np.zeros_like(xp)
            for j in range(k):
                gxp[..., j * dilation: j * dilation + L, :] += g @ kernel.data[j].T
            gx = gxp[..., pad:, :]
        if kernel.requires_grad:
            g2 = g.reshape(-1, g.shape[-1])
            gk = np.stack([taps[j].reshape(-1, taps[j].shape[-1]).T @ g2 for j in range(k)])
        return gx, gk

    return _node(out, (x, kernel), bw, "conv1d_causal")


def replicate_pad(x, left: int, right: int) -> Value:
    """Repeat the first row ``left`` times and the last row ``right`` times."""
    x = as_value(x)
    if left < 0 or right < 0:
        raise ParameterError(f"padding must be non-negative, got ({left}, {right})")
    if x.ndim < 2:
        raise DimensionError(f"replicate_pad expects [..., L, c], got {x.shape}")
    if x.shape[-2] == 0:
        raise DomainError("cannot replicate-pad an empty sequence")
    L = x.shape[-2]
    widths = [(0, 0)] * (x.ndim - 2) + [(left, right), (0, 0)]
    out = np.pad(x.data, widths, mode="edge")

    def bw(g):
        gx = g[..., left: left + L, :].copy()
        if left:
            gx[..., :1, :] += g[..., :left, :].sum(axis=-2, keepdims=True)
        if right:
            gx[..., -1:, :] += g[..., left + L:, :].sum(axis=-2, keepdims=True)
        return (gx,)

    return _node(out, (x,), bw, "replicate_pad")


def avgpool1d(x, k: int) -> Value:
    """Stride-1 sliding mean of width ``k`` along time; length ``L - k + 1``."""
    x = as_value(x)
    L = x.shape[-2]
    if k < 1 or k > L:
        raise ParameterError(f"pool width {k} invalid for length {L}")
    zero = np.zeros(x.shape[:-2] + (1, x.shape[-1]))
    cs = np.concatenate([zero, np.cumsum(x.data, axis=-2)], axis=-2)
    out = (cs[..., k:, :] - cs[..., :-k, :]) / k

    def bw(g):
        # input s receives g[t] for t in [s-k+1, s]
        gz = np.concatenate([zero, np.cumsum(g, axis=-2)], axis=-2)
        n_out = L - k + 1
        s = np.arange(L)
        hi = np.minimum(s, n_out - 1) + 1
        lo = np.maximum(s - k + 1, 0)
        return ((gz[..., hi, :] - gz[..., lo, :]) / k,)

    return _node(out, (x,), bw, "avgpool1d")


def max_pool_time(v) -> Value:
    """Max over the time axis ``-2``; the gradient goes to the first argmax."""
    v = as_value(v)
    if v.shape[-2] < 1:
        raise DomainError("max_pool_time needs at least one time step")
    idx = np.argmax(v.data, axis=-2)[..., None, :]
    out = np.take_along_axis(v.data, idx, axis=-2)[..., 0, :]

    def bw(g):
        gv = np.zeros_like(v.data)
        np.put_along_axis(gv, idx, g[..., None, :], axis=-2)
        return (gv,)

    return _node(out, (v,), bw, "max_pool_time")


def cosine_sim(a, b, eps: float = COSINE_EPS) -> Value:
    """Cosine similarity along the last axis; ``eps`` is added to each norm."""
    a, b = as_value(a), as_value(b)
    if a.shape[-1] != b.shape[-1]:
        raise DimensionError(f"cosine_sim shapes {a.shape} and {b.shape} do not align")
    na = np.sqrt((a.data * a.data).sum(-1, keepdims=True))
    nb = np.sqrt((b.data * b.data).sum(-1, keepdims=True))
    da, db = na + eps, nb + eps
    dot = (a.data * b.data).sum(-1, keepdims=True)
    out = dot / (da * db)

    def bw(g):
        g = g[..., None]
        ua = np.divide(a.data, na, out=np.zeros(np.broadcast_shapes(a.shape, na.shape)), where=na > 0)
        ub = np.divide(b.data, nb, out=np.zeros(np.broadcast_shapes(b.shape, nb.shape)), where=nb > 0)
        ga = g * (b.data / (da * db) - out / da * ua)
        gb = g * (a.data / (da * db) - out / db * ub)
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return _node(out[..., 0], (a, b), bw, "cosine_sim")


def pairwise_cosine(pooled) -> Value:
    """``[..., N, d] -> [..., N, N]`` matrix of cosine similarities."""
    pooled = as_value(pooled)
    n, d = pooled.shape[-2:]
    lead = pooled.shape[:-2]
    left = reshape(pooled, lead + (n, 1, d))
    right = reshape(pooled, lead + (1, n, d))
    return cosine_sim(left, right)


# ---------------------------------------------------------------- gradient checking

def numerical_grad(f: Callable[[], Value], x: Value, step: float = 1e-5) -> np.ndarray:
    """Central differences of scalar ``f()`` with respect to ``x.data``, in place."""
    grad = np.zeros_like(x.data)
    flat = x.data.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        up = f().item()
        flat[i] = orig - step
        down = f().item()
        flat[i] = orig
        gflat[i] = (up - down) / (2.0 * step)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """``||a - n|| / max(||a||, ||n||)``, zero when both vanish."""
    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric))
    if scale == 0.0:
        return 0.0
    return float(np.linalg.norm(analytic - numeric) / scale)


def check_gradients(f: Callable[[], Value], inputs: Sequence[Value], step: float = 1e-5) -> float:
    """Max relative error between backprop and central differences over ``inputs``."""
    for v in inputs:
        v.zero_grad()
    backward(f())
    worst = 0.0
    for v in inputs:
        analytic = np.zeros_like(v.data) if v.grad is None else v.grad.copy()
        worst = max(worst, relative_error(analytic, numerical_grad(f, v, step)))
    return worst
