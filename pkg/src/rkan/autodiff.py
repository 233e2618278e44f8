"""Tape-free reverse-mode automatic differentiation over dense float64 arrays.

Every :class:`Tensor` produced by an operation remembers its parents and a
backward rule.  Backward rules are themselves written with :class:`Tensor`
operations, so gradients can be recorded (``create_graph=True``) and
differentiated again.  That is how second derivatives of a network output
with respect to its inputs are formed inside physics-informed losses.

Broadcasting is restricted to scalar-vs-tensor.  Anything else has to go
through :func:`broadcast_to` explicitly.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Iterable, Sequence

import numpy as np

DIV_EPS = 1e-30

_grad_enabled = True


class ShapeError(ValueError):
    """Operand shapes do not conform for ``op``."""

    def __init__(self, op, *shapes):
        self.op = op
        self.shapes = tuple(tuple(s) for s in shapes)
        desc = " vs ".join(str(s) for s in self.shapes)
        super().__init__(f"{op}: incompatible shapes {desc}")


class DivisionError(ArithmeticError):
    """A denominator came too close to zero."""


@contextlib.contextmanager
def no_grad():
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


@contextlib.contextmanager
def enable_grad():
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = True
    try:
        yield
    finally:
        _grad_enabled = prev


def is_grad_enabled() -> bool:
    return _grad_enabled


class Tensor:
    """A node of the computation graph holding an immutable float64 array.

    Attributes
    ----------
    data : np.ndarray
        The value.  Never mutated by operations; only leaf parameters are
        reassigned by optimizers between forward passes.
    op : str
        Tag of the operation that produced the node (``"leaf"`` for inputs).
    parents : tuple of Tensor
        Inputs of the producing operation, in order.
    requires_grad : bool
    grad : np.ndarray or None
        Filled by :func:`backward` on nodes with ``requires_grad``.
    """

    __slots__ = ("data", "op", "parents", "requires_grad", "grad", "_backward", "name")
    __array_priority__ = 1000

    def __init__(self, data, requires_grad=False, name=None):
        arr = np.array(data, dtype=np.float64)
        self.data = arr
        self.op = "leaf"
        self.parents = ()
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._backward = None
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def numpy(self):
        return self.data.copy()

    def item(self):
        if self.data.size != 1:
            raise ValueError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def detach(self):
        return Tensor(self.data)

    def __repr__(self):
        tag = f", op={self.op}" if self.op != "leaf" else ""
        rg = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor({np.array2string(self.data, precision=6)}{tag}{rg})"

    def __len__(self):
        return len(self.data)

    # operators
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

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, exponent):
        return power(self, exponent)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        return getitem(self, index)

    def sum(self, axis=None, keepdims=False):
        return sum_(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis, keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, axes=None):
        return transpose(self, axes)

    @property
    def T(self):
        return transpose(self)

    def exp(self):
        return exp(self)

    def log(self):
        return log(self)

    def tanh(self):
        return tanh(self)

    def sigmoid(self):
        return sigmoid(self)


def as_tensor(x) -> Tensor:
    if type(x) is Tensor or type(x) is Jet:
        return x
    return x if isinstance(x, (Tensor, Jet)) else Tensor(x)


def _make(data, op, parents, backward):
    """Wrap ``data`` as the output of ``op``; record the graph only if needed."""
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out.name = None
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.op = op
        out.parents = tuple(parents)
        out.requires_grad = True
        out._backward = backward
    else:
        out.op = op
        out.parents = ()
        out.requires_grad = False
        out._backward = None
    return out


def _sum_to(g: Tensor, shape) -> Tensor:
    """Reduce a broadcast gradient back to ``shape`` (scalar or explicit)."""
    if g.shape == tuple(shape):
        return g
    if len(shape) == 0:
        return sum_(g)
    # explicit broadcast_to: leading new axes, then size-1 axes
    lead = g.ndim - len(shape)
    axes = tuple(range(lead)) + tuple(
        lead + i for i, s in enumerate(shape) if s == 1 and g.shape[lead + i] != 1
    )
    return reshape(sum_(g, axes), shape)


def _binary_shapes(op, a: Tensor, b: Tensor):
    if a.shape == b.shape or a.ndim == 0 or b.ndim == 0:
        return
    raise ShapeError(op, a.shape, b.shape)


# ---------------------------------------------------------------- elementwise


def add(a, b) -> Tensor:
    if _any_jet(a, b):
        return _jet_add(a, b, 1.0)
    a, b = as_tensor(a), as_tensor(b)
    _binary_shapes("add", a, b)

    def backward(g):
        return _sum_to(g, a.shape), _sum_to(g, b.shape)

    return _make(a.data + b.data, "add", (a, b), backward)


def sub(a, b) -> Tensor:
    if _any_jet(a, b):
        return _jet_add(a, b, -1.0)
    a, b = as_tensor(a), as_tensor(b)
    _binary_shapes("subtract", a, b)

    def backward(g):
        return _sum_to(g, a.shape), _sum_to(neg(g), b.shape)

    return _make(a.data - b.data, "subtract", (a, b), backward)


def mul(a, b) -> Tensor:
    if _any_jet(a, b):
        return _jet_mul(a, b)
    a, b = as_tensor(a), as_tensor(b)
    _binary_shapes("multiply", a, b)

    def backward(g):
        return _sum_to(mul(g, b), a.shape), _sum_to(mul(g, a), b.shape)

    return _make(a.data * b.data, "multiply", (a, b), backward)


def div(a, b) -> Tensor:
    if _any_jet(a, b):
        return _jet_div(a, b)
    a, b = as_tensor(a), as_tensor(b)
    _binary_shapes("divide", a, b)
    small = np.abs(b.data) < DIV_EPS
    if np.any(small):
        idx = np.argwhere(np.atleast_1d(small))[0]
        raise DivisionError(f"divide: |denominator| < {DIV_EPS:g} at index {tuple(idx)}")

    def backward(g):
        ga = div(g, b)
        gb = neg(div(mul(g, out), b))
        return _sum_to(ga, a.shape), _sum_to(gb, b.shape)

    out = _make(a.data / b.data, "divide", (a, b), backward)
    return out


def neg(a) -> Tensor:
    if _any_jet(a):
        return _jet_linear(a, neg)
    a = as_tensor(a)
    return _make(-a.data, "negate", (a,), lambda g: (neg(g),))


def power(a, exponent: float) -> Tensor:
    """``a ** exponent`` for a constant real exponent."""
    a = as_tensor(a)
    if isinstance(exponent, Tensor):
        raise TypeError("power takes a constant exponent; use exp(e * log(a)) for tensors")
    p = float(exponent)
    if _any_jet(a):
        return _jet_unary(
            a, lambda t: power(t, p),
            lambda x, y: mul(power(x, p - 1.0), p),
            lambda x, y: mul(power(x, p - 2.0), p * (p - 1.0)) if p not in (0.0, 1.0) else Tensor(0.0))
    if p == 2.0:
        data = a.data * a.data
    else:
        data = np.power(a.data, p)

    def backward(g):
        if p == 1.0:
            return (g,)
        if p == 2.0:
            return (mul(g, mul(a, 2.0)),)
        return (mul(g, mul(power(a, p - 1.0), p)),)

    return _make(data, "power", (a,), backward)


def exp(a) -> Tensor:
    if _any_jet(a):
        return _jet_unary(a, exp, lambda x, y: y, lambda x, y: y)
    a = as_tensor(a)
    out = _make(np.exp(a.data), "exp", (a,), lambda g: (mul(g, out),))
    return out


def log(a) -> Tensor:
    if _any_jet(a):
        return _jet_unary(a, log, lambda x, y: div(1.0, x), lambda x, y: neg(div(1.0, mul(x, x))))
    a = as_tensor(a)
    if np.any(a.data <= 0):
        raise DivisionError("log: non-positive argument")
    return _make(np.log(a.data), "log", (a,), lambda g: (div(g, a),))


def tanh(a) -> Tensor:
    if _any_jet(a):
        return _jet_unary(a, tanh, _tanh_d1, lambda x, y: mul(mul(y, _tanh_d1(x, y)), -2.0))
    a = as_tensor(a)

    def backward(g):
        return (mul(g, sub(1.0, mul(out, out))),)

    out = _make(np.tanh(a.data), "tanh", (a,), backward)
    return out


def sin(a) -> Tensor:
    if _any_jet(a):
        return _jet_unary(a, sin, lambda x, y: cos(x), lambda x, y: neg(y))
    a = as_tensor(a)
    return _make(np.sin(a.data), "sin", (a,), lambda g: (mul(g, cos(a)),))


def cos(a) -> Tensor:
    if _any_jet(a):
        return _jet_unary(a, cos, lambda x, y: neg(sin(x)), lambda x, y: neg(y))
    a = as_tensor(a)
    return _make(np.cos(a.data), "cos", (a,), lambda g: (neg(mul(g, sin(a))),))


def _sigmoid_np(x):
    # stable for large |x|
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def sigmoid(a) -> Tensor:
    if _any_jet(a):
        return _jet_unary(a, sigmoid, _sigmoid_d1, lambda x, y: mul(_sigmoid_d1(x, y), sub(1.0, mul(y, 2.0))))
    a = as_tensor(a)

    def backward(g):
        return (mul(g, mul(out, sub(1.0, out))),)

    out = _make(_sigmoid_np(a.data), "sigmoid", (a,), backward)
    return out


def softplus(a) -> Tensor:
    if _any_jet(a):
        return _jet_unary(a, softplus, lambda x, y: sigmoid(x), lambda x, y: _sigmoid_d1(x, sigmoid(x)))
    """``log(1 + e^a)`` in the overflow-safe form ``max(a, 0) + log1p(e^-|a|)``."""
    a = as_tensor(a)
    data = np.maximum(a.data, 0.0) + np.log1p(np.exp(-np.abs(a.data)))
    return _make(data, "softplus", (a,), lambda g: (mul(g, sigmoid(a)),))


def where(cond, a, b) -> Tensor:
    if _any_jet(a, b):
        return _jet_where(cond, a, b)
    """Elementwise select; ``cond`` is a constant boolean mask."""
    a, b = as_tensor(a), as_tensor(b)
    cond = np.asarray(cond, dtype=bool)
    target = np.broadcast_shapes(cond.shape, a.shape, b.shape)
    for t in (a, b):
        if t.ndim and t.shape != target:
            raise ShapeError("select", a.shape, b.shape, cond.shape)
    if cond.shape != target:
        raise ShapeError("select", a.shape, b.shape, cond.shape)

    def backward(g):
        zero = Tensor(0.0)
        return _sum_to(where(cond, g, zero), a.shape), _sum_to(where(cond, zero, g), b.shape)

    return _make(np.where(cond, a.data, b.data), "select", (a, b), backward)


# ---------------------------------------------------------------- structure


def matmul(a, b) -> Tensor:
    if _any_jet(a, b):
        return _jet_matmul(a, b)
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError("matmul", a.shape, b.shape)

    def backward(g):
        return matmul(g, transpose(b)), matmul(transpose(a), g)

    return _make(a.data @ b.data, "matmul", (a, b), backward)


def _norm_axes(axis, ndim):
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(sorted(ax % ndim for ax in axis))


def sum_(a, axis=None, keepdims=False) -> Tensor:
    if _any_jet(a):
        return _jet_linear(a, lambda t: sum_(t, axis, keepdims))
    a = as_tensor(a)
    axes = _norm_axes(axis, a.ndim)
    kept = tuple(1 if i in axes else s for i, s in enumerate(a.shape))

    def backward(g):
        return (broadcast_to(reshape(g, kept), a.shape),)

    return _make(np.sum(a.data, axis=axes, keepdims=keepdims), "sum", (a,), backward)


def mean(a, axis=None, keepdims=False) -> Tensor:
    if _any_jet(a):
        return _jet_linear(a, lambda t: mean(t, axis, keepdims))
    a = as_tensor(a)
    axes = _norm_axes(axis, a.ndim)
    n = int(np.prod([a.shape[i] for i in axes])) if axes else 1
    return mul(sum_(a, axes, keepdims), 1.0 / n)


def reshape(a, shape) -> Tensor:
    if _any_jet(a):
        return _jet_linear(a, lambda t: reshape(t, shape))
    a = as_tensor(a)
    try:
        data = a.data.reshape(shape)
    except ValueError:
        raise ShapeError("reshape", a.shape, shape) from None
    return _make(data, "reshape", (a,), lambda g: (reshape(g, a.shape),))


def transpose(a, axes=None) -> Tensor:
    if _any_jet(a):
        return _jet_linear(a, lambda t: transpose(t, axes))
    a = as_tensor(a)
    if axes is None:
        axes = tuple(reversed(range(a.ndim)))
    inv = tuple(np.argsort(axes))
    return _make(np.transpose(a.data, axes), "transpose", (a,), lambda g: (transpose(g, inv),))


def broadcast_to(a, shape) -> Tensor:
    if _any_jet(a):
        return _jet_linear(a, lambda t: broadcast_to(t, shape))
    a = as_tensor(a)
    shape = tuple(shape)
    if a.shape == shape:
        return a
    try:
        data = np.broadcast_to(a.data, shape).copy()
    except ValueError:
        raise ShapeError("broadcast_to", a.shape, shape) from None
    return _make(data, "broadcast_to", (a,), lambda g: (_sum_to(g, a.shape),))


def getitem(a, index) -> Tensor:
    if _any_jet(a):
        return _jet_linear(a, lambda t: getitem(t, index))
    a = as_tensor(a)

    def backward(g):
        return (_scatter(g, index, a.shape),)

    return _make(a.data[index], "getitem", (a,), backward)


def _is_basic(index):
    items = index if isinstance(index, tuple) else (index,)
    return all(isinstance(i, (int, np.integer, slice)) or i is Ellipsis or i is None for i in items)


def _scatter(g, index, shape) -> Tensor:
    """Adjoint of ``getitem``: place ``g`` at ``index`` in a zero array."""
    g = as_tensor(g)
    out = np.zeros(shape)
    if _is_basic(index):
        out[index] = g.data
    else:
        np.add.at(out, index, g.data)
    return _make(out, "scatter", (g,), lambda h: (getitem(h, index),))


def concat(tensors: Sequence, axis=0) -> Tensor:
    if _any_jet(*tensors):
        return _jet_concat(tensors, axis)
    ts = [as_tensor(t) for t in tensors]
    if not ts:
        raise ValueError("concat needs at least one tensor")
    ref = ts[0].shape
    ax = axis % max(len(ref), 1)
    for t in ts[1:]:
        if t.ndim != len(ref) or any(s != r for i, (s, r) in enumerate(zip(t.shape, ref)) if i != ax):
            raise ShapeError("concatenate", ref, t.shape)
    bounds = np.cumsum([0] + [t.shape[ax] for t in ts])

    def backward(g):
        grads = []
        for lo, hi in zip(bounds[:-1], bounds[1:]):
            sl = [slice(None)] * g.ndim
            sl[ax] = slice(int(lo), int(hi))
            grads.append(getitem(g, tuple(sl)))
        return tuple(grads)

    return _make(np.concatenate([t.data for t in ts], axis=ax), "concatenate", ts, backward)


def stack(tensors: Sequence, axis=-1) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    nd = ts[0].ndim + 1
    ax = axis % nd
    expanded = [reshape(t, t.shape[:ax] + (1,) + t.shape[ax:]) for t in ts]
    return concat(expanded, axis=ax)


def elu(a, kappa=1.0) -> Tensor:
    """``a`` where positive, ``kappa * (e^a - 1)`` elsewhere."""
    a = as_tensor(a)
    pos = a.data > 0
    # exp only sees the non-positive branch, so no overflow leaks into gradients
    neg_part = where(pos, Tensor(0.0), a)
    branch = mul(sub(exp(neg_part), 1.0), kappa)
    return where(pos, a, branch)


def relu(a) -> Tensor:
    a = as_tensor(a)
    return where(a.data > 0, a, Tensor(0.0))


# ---------------------------------------------------------------- second-order jets


class Jet:
    """Value with its first and second derivative along one input direction.

    Every component is a :class:`Tensor`, so the whole jet stays
    differentiable with respect to network parameters.  ``d``/``dd`` of
    ``None`` mean identically zero.  Operations that receive a jet dispatch
    here automatically; tensors mixed in are treated as constants.
    """

    __slots__ = ("v", "d", "dd")
    __array_priority__ = 1001

    def __init__(self, v, d=None, dd=None):
        self.v = as_tensor(v)
        self.d = None if d is None else as_tensor(d)
        self.dd = None if dd is None else as_tensor(dd)

    data = property(lambda self: self.v.data)
    shape = property(lambda self: self.v.shape)
    ndim = property(lambda self: self.v.ndim)
    size = property(lambda self: self.v.size)
    requires_grad = property(lambda self: self.v.requires_grad)

    def __repr__(self):
        return f"Jet(v={self.v!r}, d={self.d!r}, dd={self.dd!r})"

    __add__ = Tensor.__add__
    __radd__ = Tensor.__radd__
    __sub__ = Tensor.__sub__
    __rsub__ = Tensor.__rsub__
    __mul__ = Tensor.__mul__
    __rmul__ = Tensor.__rmul__
    __truediv__ = Tensor.__truediv__
    __rtruediv__ = Tensor.__rtruediv__
    __neg__ = Tensor.__neg__
    __pow__ = Tensor.__pow__
    __matmul__ = Tensor.__matmul__
    __getitem__ = Tensor.__getitem__
    sum = Tensor.sum
    mean = Tensor.mean
    reshape = Tensor.reshape
    transpose = Tensor.transpose
    T = Tensor.T


def _any_jet(a, b=None, *rest):
    if type(a) is Jet or type(b) is Jet:
        return True
    return any(type(x) is Jet for x in rest)


def _as_jet(x):
    return x if type(x) is Jet else Jet(x)


def _opt(f, *xs):
    """``f(*xs)`` unless every argument is a zero (``None``) derivative."""
    return None if all(x is None for x in xs) else f(*xs)


def _plus(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return add(a, b)


def _zeros_like(t):
    return Tensor(np.zeros(t.shape))


def _tanh_d1(x, y):
    return sub(1.0, mul(y, y))


def _sigmoid_d1(x, y):
    return mul(y, sub(1.0, y))


def _jet_add(a, b, sign):
    a, b = _as_jet(a), _as_jet(b)
    op = add if sign > 0 else sub
    v = op(a.v, b.v)

    def comb(x, y):
        if y is None:
            return x if x is None or a.v.shape == v.shape else broadcast_to(x, v.shape)
        y = y if sign > 0 else neg(y)
        if x is None:
            return y if b.v.shape == v.shape else broadcast_to(y, v.shape)
        return add(x, y)

    return Jet(v, comb(a.d, b.d), comb(a.dd, b.dd))


def _jet_mul(a, b):
    a, b = _as_jet(a), _as_jet(b)
    v = mul(a.v, b.v)
    d = _plus(_opt(lambda x: mul(x, b.v), a.d), _opt(lambda y: mul(a.v, y), b.d))
    dd = _plus(_opt(lambda x: mul(x, b.v), a.dd), _opt(lambda y: mul(a.v, y), b.dd))
    if a.d is not None and b.d is not None:
        dd = _plus(dd, mul(mul(a.d, b.d), 2.0))
    return Jet(v, d, dd)


def _jet_div(a, b):
    if type(b) is not Jet:
        a = _as_jet(a)
        return Jet(div(a.v, b), _opt(lambda x: div(x, b), a.d), _opt(lambda x: div(x, b), a.dd))
    r = div(1.0, b.v)
    r2 = mul(r, r)
    inv = _jet_unary(b, lambda t: r, lambda x, y: neg(r2), lambda x, y: mul(mul(r2, r), 2.0))
    return _jet_mul(a, inv)


def _jet_unary(a, f, f1, f2):
    """Chain rule: ``(f(u), f'(u) u', f''(u) u'^2 + f'(u) u'')``."""
    y = f(a.v)
    if a.d is None and a.dd is None:
        return Jet(y)
    g1 = f1(a.v, y)
    d = _opt(lambda x: mul(g1, x), a.d)
    dd = _opt(lambda x: mul(g1, x), a.dd)
    if a.d is not None:
        g2 = f2(a.v, y)
        dd = _plus(dd, mul(g2, mul(a.d, a.d)))
    return Jet(y, d, dd)


def _jet_linear(a, f):
    return Jet(f(a.v), _opt(f, a.d), _opt(f, a.dd))


def _jet_where(cond, a, b):
    a, b = _as_jet(a), _as_jet(b)
    zero = Tensor(0.0)

    def pick(x, y):
        if x is None and y is None:
            return None
        return where(cond, zero if x is None else x, zero if y is None else y)

    return Jet(where(cond, a.v, b.v), pick(a.d, b.d), pick(a.dd, b.dd))


def _jet_matmul(a, b):
    a, b = _as_jet(a), _as_jet(b)
    v = matmul(a.v, b.v)
    d = _plus(_opt(lambda x: matmul(x, b.v), a.d), _opt(lambda y: matmul(a.v, y), b.d))
    dd = _plus(_opt(lambda x: matmul(x, b.v), a.dd), _opt(lambda y: matmul(a.v, y), b.dd))
    if a.d is not None and b.d is not None:
        dd = _plus(dd, mul(matmul(a.d, b.d), 2.0))
    return Jet(v, d, dd)


def _jet_concat(tensors, axis):
    js = [_as_jet(t) for t in tensors]

    def part(attr):
        comps = [getattr(j, attr) for j in js]
        if all(c is None for c in comps):
            return None
        return concat([_zeros_like(j.v) if c is None else c for j, c in zip(js, comps)], axis)

    return Jet(concat([j.v for j in js], axis), part("d"), part("dd"))


def seed_jet(x, axis=0):
    """Input jet for ``x`` of shape ``[n, d]`` with unit direction along ``axis``."""
    x = as_tensor(x)
    direction = np.zeros(x.shape)
    direction[:, axis] = 1.0
    return Jet(x, Tensor(direction), None)


# ---------------------------------------------------------------- backward


def _toposort(root: Tensor, targets=None):
    """Nodes in reverse topological order (root first).

    With ``targets`` (a set of ids) only nodes from which some target is
    reachable are kept, so unrelated branches are never differentiated.
    """
    order, seen = [], set()
    stack_ = [(root, False)]
    while stack_:
        node, done = stack_.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack_.append((node, True))
        for p in node.parents:
            if p.requires_grad and id(p) not in seen:
                stack_.append((p, False))
    if targets is not None:
        live = set(targets)
        kept = []
        for node in order:  # parents precede children here
            if id(node) in live or any(id(p) in live for p in node.parents):
                live.add(id(node))
                kept.append(node)
        order = kept
    return order[::-1]


def grad(output: Tensor, inputs: Sequence[Tensor], grad_output=None, create_graph=False):
    """Gradients of ``output`` with respect to each of ``inputs``.

    ``grad_output`` defaults to ones (so a non-scalar output is summed).
    With ``create_graph`` the returned tensors are themselves differentiable.
    Inputs that ``output`` does not depend on get zeros.
    """
    inputs = list(inputs)
    if grad_output is None:
        grad_output = Tensor(np.ones(output.shape))
    else:
        grad_output = as_tensor(grad_output)
    if not output.requires_grad:
        return [Tensor(np.zeros(t.shape)) for t in inputs]

    ctx = enable_grad() if create_graph else no_grad()
    with ctx:
        grads = {id(output): grad_output}
        order = _toposort(output, {id(t) for t in inputs})
        live = {id(n) for n in order}
        for node in order:
            g = grads.get(id(node))
            if g is None or node._backward is None:
                continue
            for parent, pg in zip(node.parents, node._backward(g)):
                if pg is None or id(parent) not in live:
                    continue
                key = id(parent)
                grads[key] = pg if key not in grads else add(grads[key], pg)
        out = []
        for t in inputs:
            g = grads.get(id(t))
            out.append(g if g is not None else Tensor(np.zeros(t.shape)))
    if not create_graph:
        out = [Tensor(g.data) for g in out]
    return out


def backward(root: Tensor, params: Iterable[Tensor] | None = None) -> dict:
    """Reverse accumulation from a single-element ``root``.

    Sets ``.grad`` on every reachable leaf with ``requires_grad`` (and on all
    ``params``, zero if unreachable) and returns ``{param: ndarray}``.
    """
    if root.size != 1:
        raise ValueError(f"backward needs a scalar root, got shape {root.shape}")
    if params is None:
        params = [n for n in _toposort(root) if n.requires_grad and n._backward is None] if root.requires_grad else []
    params = list(params)
    gs = grad(root, params)
    result = {}
    for p, g in zip(params, gs):
        p.grad = g.data
        result[p] = g.data
    return result


# ---------------------------------------------------------------- input derivatives


def input_derivative(net: Callable[[Tensor], Tensor], x, order: int = 1, axis: int = 0,
                     method: str = "jet"):
    """Derivative of order 1 or 2 of ``net`` with respect to input column ``axis``.

    ``net`` maps an ``[n, d]`` batch to ``[n, 1]`` (or ``[n]``) with samples
    processed independently.  Returns ``(F, dF)`` for order 1 and
    ``(F, dF, d2F)`` for order 2, each shaped ``[n]`` and differentiable with
    respect to the network parameters.

    ``method="jet"`` pushes value/first/second derivative through every op in
    one forward pass.  ``method="reverse"`` differentiates the batch sum twice
    with recorded reverse passes; it is slower and kept as a cross-check.
    """
    if order not in (1, 2):
        raise ValueError(f"order must be 1 or 2, got {order}")
    if method not in ("jet", "reverse"):
        raise ValueError(f"unknown method {method!r}")
    xv = x.data if isinstance(x, Tensor) else np.asarray(x, dtype=np.float64)
    if xv.ndim != 2:
        raise ShapeError("input_derivative", xv.shape, ("n", "d"))
    n = xv.shape[0]
    if method == "jet":
        out = net(seed_jet(Tensor(xv), axis))
        out = _as_jet(out)
        F = reshape(out.v, (n,))
        d1 = reshape(out.d, (n,)) if out.d is not None else Tensor(np.zeros(n))
        if order == 1:
            return F, d1
        d2 = reshape(out.dd, (n,)) if out.dd is not None else Tensor(np.zeros(n))
        return F, d1, d2
    xt = Tensor(xv, requires_grad=True)
    F = reshape(net(xt), (n,))
    (g,) = grad(F, [xt], create_graph=True)
    d1 = g[:, axis]
    if order == 1:
        return F, d1
    (h,) = grad(d1, [xt], create_graph=True)
    return F, d1, h[:, axis]
