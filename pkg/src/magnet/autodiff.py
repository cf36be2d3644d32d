"""Small reverse-mode autodiff over dense float64 numpy arrays.

Values are computed eagerly; every non-leaf ``Tensor`` remembers its parents
and a closure that pushes its adjoint back to them. ``backward`` walks the
graph in reverse topological order. Broadcasting follows numpy and adjoints
are summed back down to the operand shape.
"""

from __future__ import annotations

import numpy as np

from .errors import DomainError, NonScalarRoot, ShapeMismatch


class Tensor:
    __slots__ = ("value", "grad", "requires_grad", "op", "_parents", "_backward")

    def __init__(self, value, requires_grad=False, _parents=(), op="leaf"):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in _parents)
        self.op = op
        self._parents = _parents
        self._backward = None

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        return f"Tensor(op={self.op}, shape={self.shape})"

    __add__ = lambda self, o: add(self, o)
    __radd__ = lambda self, o: add(o, self)
    __sub__ = lambda self, o: sub(self, o)
    __rsub__ = lambda self, o: sub(o, self)
    __mul__ = lambda self, o: mul(self, o)
    __rmul__ = lambda self, o: mul(o, self)
    __truediv__ = lambda self, o: div(self, o)
    __rtruediv__ = lambda self, o: div(o, self)
    __matmul__ = lambda self, o: matmul(self, o)
    __rmatmul__ = lambda self, o: matmul(o, self)
    __neg__ = lambda self: neg(self)
    __pow__ = lambda self, e: power(self, e)

    def __getitem__(self, index):
        return getitem(self, index)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis, keepdims)

    def reshape(self, *shape):
        return reshape(self, shape[0] if len(shape) == 1 else shape)

    @property
    def T(self):
        return transpose(self)

    def backward(self):
        backward(self)
        return self


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _node(value, parents, op, backward_fn):
    out = Tensor(value, _parents=parents, op=op)
    if out.requires_grad:
        out._backward = backward_fn
    else:
        out._parents = ()
    return out


def _unbroadcast(g, shape):
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _broadcast_shape(a, b):
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError as exc:
        raise ShapeMismatch(f"cannot broadcast {a.shape} with {b.shape}") from exc


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b)

    def bw(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _node(a.value + b.value, (a, b), "add", bw)


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b)

    def bw(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return _node(a.value - b.value, (a, b), "sub", bw)


def neg(a):
    a = as_tensor(a)
    return _node(-a.value, (a,), "neg", lambda g: (-g,))


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b)

    def bw(g):
        return _unbroadcast(g * b.value, a.shape), _unbroadcast(g * a.value, b.shape)

    return _node(a.value * b.value, (a, b), "mul", bw)


def div(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b)

    def bw(g):
        return (
            _unbroadcast(g / b.value, a.shape),
            _unbroadcast(-g * a.value / b.value**2, b.shape),
        )

    return _node(a.value / b.value, (a, b), "div", bw)


def matmul(a, b):
    """2-D (or batched 3-D) matrix product."""
    a, b = as_tensor(a), as_tensor(b)
    if a.value.ndim < 2 or b.value.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeMismatch(f"matmul of {a.shape} and {b.shape}")

    def bw(g):
        ga = g @ np.swapaxes(b.value, -1, -2)
        gb = np.swapaxes(a.value, -1, -2) @ g
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return _node(a.value @ b.value, (a, b), "matmul", bw)


def sigmoid(a):
    a = as_tensor(a)
    # split by sign so exp never overflows
    x = a.value
    e = np.exp(-np.abs(x))
    s = np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return _node(s, (a,), "sigmoid", lambda g: (g * s * (1.0 - s),))


def exp(a):
    a = as_tensor(a)
    v = np.exp(a.value)
    return _node(v, (a,), "exp", lambda g: (g * v,))


def log(a):
    a = as_tensor(a)
    if np.any(a.value <= 0):
        raise DomainError("log of non-positive value")
    return _node(np.log(a.value), (a,), "log", lambda g: (g / a.value,))


def relu(a):
    a = as_tensor(a)
    mask = a.value > 0
    return _node(np.where(mask, a.value, 0.0), (a,), "relu", lambda g: (g * mask,))


def sin(a):
    a = as_tensor(a)
    return _node(np.sin(a.value), (a,), "sin", lambda g: (g * np.cos(a.value),))


def cos(a):
    a = as_tensor(a)
    return _node(np.cos(a.value), (a,), "cos", lambda g: (-g * np.sin(a.value),))


def power(a, exponent):
    """Elementwise ``a ** exponent`` for a constant real exponent."""
    a = as_tensor(a)
    e = float(exponent)
    if not e.is_integer() and np.any(a.value < 0):
        raise DomainError("fractional power of a negative value")
    if e < 0 and np.any(a.value == 0):
        raise DomainError("negative power of zero")
    v = a.value**e
    return _node(v, (a,), "power", lambda g: (g * e * a.value ** (e - 1.0),))


def tsum(a, axis=None, keepdims=False):
    a = as_tensor(a)

    def bw(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return _node(a.value.sum(axis=axis, keepdims=keepdims), (a,), "sum", bw)


def mean(a, axis=None, keepdims=False):
    a = as_tensor(a)
    count = a.value.size if axis is None else np.prod([a.shape[ax] for ax in np.atleast_1d(axis)])
    return tsum(a, axis, keepdims) * (1.0 / count)


def reshape(a, shape):
    a = as_tensor(a)
    try:
        v = a.value.reshape(shape)
    except ValueError as exc:
        raise ShapeMismatch(str(exc)) from exc
    return _node(v, (a,), "reshape", lambda g: (g.reshape(a.shape),))


def getitem(a, index):
    a = as_tensor(a)

    def bw(g):
        out = np.zeros_like(a.value)
        np.add.at(out, index, g)
        return (out,)

    return _node(a.value[index], (a,), "getitem", bw)


def transpose(a):
    a = as_tensor(a)
    return _node(np.swapaxes(a.value, -1, -2), (a,), "transpose", lambda g: (np.swapaxes(g, -1, -2),))


def concat(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    sizes = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def bw(g):
        return tuple(np.split(g, sizes, axis=axis))

    return _node(np.concatenate([t.value for t in tensors], axis=axis), tuple(tensors), "concat", bw)


def softmax(a, axis=-1):
    a = as_tensor(a)
    z = a.value - a.value.max(axis=axis, keepdims=True)
    e = np.exp(z)
    s = e / e.sum(axis=axis, keepdims=True)

    def bw(g):
        return (s * (g - (g * s).sum(axis=axis, keepdims=True)),)

    return _node(s, (a,), "softmax", bw)


def log_softmax(a, axis=-1):
    a = as_tensor(a)
    z = a.value - a.value.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=axis, keepdims=True))
    v = z - lse
    s = np.exp(v)

    def bw(g):
        return (g - s * g.sum(axis=axis, keepdims=True),)

    return _node(v, (a,), "log_softmax", bw)


def stop_gradient(a):
    """Same value, no adjoint flows back through it."""
    a = as_tensor(a)
    return Tensor(a.value.copy(), op="stop_gradient")


def _topological(root):
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def backward(root: Tensor):
    """Fill ``.grad`` on every node reachable from the scalar ``root``."""
    if root.value.size != 1:
        raise NonScalarRoot(f"backward needs a scalar root, got shape {root.shape}")
    order = _topological(root)
    for node in order:
        node.grad = np.zeros_like(node.value)
    root.grad = np.ones_like(root.value)
    for node in reversed(order):
        if node._backward is None:
            continue
        for parent, g in zip(node._parents, node._backward(node.grad)):
            if parent.requires_grad:
                parent.grad = parent.grad + g


def grad(fn, params):
    """Value and gradients of scalar ``fn(*tensors)`` at the arrays ``params``."""
    leaves = [Tensor(np.array(p, dtype=float), requires_grad=True) for p in params]
    out = fn(*leaves)
    backward(out)
    return float(out.value), [
        leaf.grad if leaf.grad is not None else np.zeros_like(leaf.value) for leaf in leaves
    ]


def grad_check(fn, params, h=1e-5):
    """Max relative error between reverse-mode and central-difference gradients.

    The relative error of each coordinate is
    ``|a - n| / max(1e-8, |a| + |n|)``.
    """
    params = [np.array(p, dtype=float) for p in params]
    _, analytic = grad(fn, params)
    worst = 0.0
    for idx, p in enumerate(params):
        for pos in np.ndindex(p.shape):
            plus = [q.copy() for q in params]
            minus = [q.copy() for q in params]
            plus[idx][pos] += h
            minus[idx][pos] -= h
            f_plus = float(fn(*[Tensor(q) for q in plus]).value)
            f_minus = float(fn(*[Tensor(q) for q in minus]).value)
            numeric = (f_plus - f_minus) / (2 * h)
            a = analytic[idx][pos]
            err = abs(a - numeric) / max(1e-8, abs(a) + abs(numeric))
            worst = max(worst, err)
    return worst
