"""Dense float64 tensors with a reverse-mode tape, plus the ADAM update.

Every operation builds a node that remembers its parents and a closure
mapping the output gradient to parent gradients.  ``Tensor.backward`` walks
the graph in reverse topological order and accumulates into the ``grad`` of
leaves that require it (normally :class:`Parameter` objects).
"""

from __future__ import annotations

import contextlib
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

DTYPE = np.float64
DEFAULT_SLOPE = 0.01

# Names of backward passes deliberately broken for negative-control checks.
_FAULTS: set[str] = set()
_GRAD_ENABLED = True


class NumericError(ArithmeticError):
    """A tensor acquired a NaN or infinite value."""


class ShapeError(ValueError):
    """Operands have incompatible shapes."""


class ContractViolation(ValueError):
    """An operation was called outside its precondition."""


@contextlib.contextmanager
def inject_fault(name: str):
    """Corrupt the backward pass of op ``name`` while the context is active."""
    _FAULTS.add(name)
    try:
        yield
    finally:
        _FAULTS.discard(name)


@contextlib.contextmanager
def no_grad():
    """Build no graph inside the block; results are plain constants."""
    global _GRAD_ENABLED
    prev, _GRAD_ENABLED = _GRAD_ENABLED, False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


def _check_finite(data: np.ndarray, op: str) -> None:
    if not np.all(np.isfinite(data)):
        raise NumericError(f"non-finite value produced by {op}")


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "op")

    def __init__(self, data, requires_grad: bool = False, _parents=(), _backward=None, op="leaf"):
        arr = np.array(data, dtype=DTYPE) if not isinstance(data, np.ndarray) else data.astype(DTYPE, copy=False)
        _check_finite(arr, op)
        self.data = arr
        self.requires_grad = requires_grad
        self.grad = None
        self._parents = _parents
        self._backward = _backward
        self.op = op

    def __repr__(self):
        return f"Tensor(shape={self.shape}, op={self.op})"

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def backward(self) -> None:
        if self.data.size != 1:
            raise ShapeError("backward() needs a scalar output")
        order: list[Tensor] = []
        seen: set[int] = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if parent.requires_grad and id(parent) not in seen:
                    stack.append((parent, False))

        grads = {id(self): np.ones_like(self.data)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if not node._parents:
                if node.grad is None:
                    node.grad = np.zeros_like(node.data)
                node.grad += g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg

    # operator sugar
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

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return getitem(self, idx)

    @property
    def T(self):
        return transpose(self)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis, keepdims)

    def mean(self, axis=None):
        return mean(self, axis)


class Parameter(Tensor):
    """A trainable leaf with gradient buffer and ADAM moments."""

    __slots__ = ("m", "v", "step_count", "name")

    def __init__(self, data, name: str = ""):
        super().__init__(np.array(data, dtype=DTYPE), requires_grad=True)
        self.grad = np.zeros_like(self.data)
        self.m = np.zeros_like(self.data)
        self.v = np.zeros_like(self.data)
        self.step_count = 0
        self.name = name

    @property
    def value(self) -> np.ndarray:
        return self.data

    def zero_grad(self) -> None:
        self.grad.fill(0.0)

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.shape})"


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _node(data, parents, backward, op) -> Tensor:
    requires = _GRAD_ENABLED and any(p.requires_grad for p in parents)
    return Tensor(data, requires, parents if requires else (), backward if requires else None, op)


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _broadcast_shape(a: Tensor, b: Tensor, op: str) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} do not broadcast") from None


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "add")
    return _node(a.data + b.data, (a, b),
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)), "add")


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "sub")
    return _node(a.data - b.data, (a, b),
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)), "sub")


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "mul")
    return _node(a.data * b.data, (a, b),
                 lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)), "mul")


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim not in (1, 2) or b.ndim not in (1, 2):
        raise ShapeError("matmul supports 1-D and 2-D operands only")
    if a.shape[-1] != b.shape[0]:
        raise ShapeError(f"matmul: inner dimensions differ, {a.shape} @ {b.shape}")
    a2 = a.data.reshape(1, -1) if a.ndim == 1 else a.data
    b2 = b.data.reshape(-1, 1) if b.ndim == 1 else b.data

    def backward(g):
        g2 = np.asarray(g).reshape(a2.shape[0], b2.shape[1])
        return (g2 @ b2.T).reshape(a.shape), (a2.T @ g2).reshape(b.shape)

    return _node(a.data @ b.data, (a, b), backward, "matmul")


def transpose(a) -> Tensor:
    a = as_tensor(a)
    return _node(a.data.T, (a,), lambda g: (g.T,), "transpose")


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    try:
        out = a.data.reshape(shape)
    except ValueError as exc:
        raise ShapeError(str(exc)) from None
    return _node(out, (a,), lambda g: (g.reshape(a.shape),), "reshape")


def tsum(a, axis=None, keepdims=False) -> Tensor:
    a = as_tensor(a)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return _node(a.data.sum(axis=axis, keepdims=keepdims), (a,), backward, "sum")


def mean(a, axis=None) -> Tensor:
    a = as_tensor(a)
    n = a.data.size if axis is None else a.shape[axis]
    if n == 0:
        raise ContractViolation("mean over an empty axis")
    return mul(tsum(a, axis), 1.0 / n)


def getitem(a, idx) -> Tensor:
    a = as_tensor(a)

    parts = idx if isinstance(idx, tuple) else (idx,)
    fancy = any(isinstance(p, (list, np.ndarray)) for p in parts)

    def backward(g):
        out = np.zeros_like(a.data)
        if fancy:
            np.add.at(out, idx, g)
        else:
            out[idx] = g
        return (out,)

    return _node(a.data[idx], (a,), backward, "getitem")


def take_rows(table, ids) -> Tensor:
    """Gather rows ``table[ids]``; repeated ids accumulate gradient."""
    table = as_tensor(table)
    ids = np.asarray(ids, dtype=np.intp)
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise ContractViolation("row id out of range")

    def backward(g):
        out = np.zeros_like(table.data)
        np.add.at(out, ids, g)
        return (out,)

    return _node(table.data[ids], (table,), backward, "take_rows")


def concat(tensors: Sequence, axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as exc:
        raise ShapeError(str(exc)) from None
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def backward(g):
        return tuple(np.split(g, bounds, axis=axis))

    return _node(out, tuple(tensors), backward, "concat")


def stack(tensors: Sequence, axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    try:
        out = np.stack([t.data for t in tensors], axis=axis)
    except ValueError as exc:
        raise ShapeError(str(exc)) from None

    def backward(g):
        return tuple(np.take(g, i, axis=axis) for i in range(len(tensors)))

    return _node(out, tuple(tensors), backward, "stack")


def leaky_relu(x, slope: float = DEFAULT_SLOPE) -> Tensor:
    if not 0.0 < slope < 1.0:
        raise ContractViolation("leaky_relu slope must lie in (0, 1)")
    x = as_tensor(x)
    d = np.where(x.data >= 0.0, 1.0, slope)

    def backward(g):
        if "leaky_relu" in _FAULTS:
            return (g * d * 1.5,)
        return (g * d,)

    return _node(np.maximum(x.data, slope * x.data), (x,), backward, "leaky_relu")


def _sigmoid_np(z: np.ndarray) -> np.ndarray:
    # tanh form never overflows
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def sigmoid(x) -> Tensor:
    x = as_tensor(x)
    s = _sigmoid_np(x.data)
    return _node(s, (x,), lambda g: (g * s * (1.0 - s),), "sigmoid")


def tanh(x) -> Tensor:
    x = as_tensor(x)
    t = np.tanh(x.data)
    return _node(t, (x,), lambda g: (g * (1.0 - t * t),), "tanh")


def log(x) -> Tensor:
    x = as_tensor(x)
    if np.any(x.data <= 0):
        raise NumericError("log of a non-positive value")
    return _node(np.log(x.data), (x,), lambda g: (g / x.data,), "log")


def softmax_np(x: np.ndarray, axis: int = -1, mask: np.ndarray | None = None) -> np.ndarray:
    """Max-shifted softmax on a plain array; masked-out entries get 0.

    A slice whose entries are all masked comes back as zeros.
    """
    x = np.asarray(x, dtype=DTYPE)
    if mask is None:
        shifted = x - x.max(axis=axis, keepdims=True)
        e = np.exp(shifted)
        return e / e.sum(axis=axis, keepdims=True)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != x.shape:
        raise ShapeError("softmax mask must match input shape")
    top = np.where(mask, x, -np.inf).max(axis=axis, keepdims=True)
    top = np.where(np.isfinite(top), top, 0.0)
    e = np.where(mask, np.exp(np.where(mask, x - top, 0.0)), 0.0)
    s = e.sum(axis=axis, keepdims=True)
    return e / np.where(s > 0, s, 1.0)


def softmax(x, axis: int = -1, mask=None) -> Tensor:
    x = as_tensor(x)
    if x.data.size == 0:
        raise ContractViolation("softmax of an empty input")
    y = softmax_np(x.data, axis, mask)

    def backward(g):
        return (y * (g - (g * y).sum(axis=axis, keepdims=True)),)

    return _node(y, (x,), backward, "softmax")


def softmax_stable(x) -> Tensor:
    """Softmax of a nonempty vector, shifted by its max to avoid overflow."""
    x = as_tensor(x)
    if x.ndim != 1:
        raise ShapeError("softmax_stable expects a vector")
    if x.shape[0] == 0:
        raise ContractViolation("softmax of an empty vector")
    return softmax(x)


def softmax_cross_entropy(logits, targets, clamp: float = 1e-12) -> Tensor:
    """Summed ``-log p[target]`` over rows, with p clipped to [clamp, 1-clamp].

    Rows whose target probability hits a clip bound contribute no gradient.
    """
    logits = as_tensor(logits)
    targets = np.asarray(targets, dtype=np.intp)
    if logits.ndim != 2 or targets.shape != (logits.shape[0],):
        raise ShapeError("softmax_cross_entropy expects (B, C) logits and B targets")
    p = softmax_np(logits.data, axis=1)
    rows = np.arange(len(targets))
    py = p[rows, targets]
    clipped = np.clip(py, clamp, 1.0 - clamp)
    live = (py == clipped).astype(DTYPE)

    def backward(g):
        d = p.copy()
        d[rows, targets] -= 1.0
        return (g * d * live[:, None],)

    return _node(-np.log(clipped).sum(), (logits,), backward, "softmax_cross_entropy")


def adam_step(p: Parameter, lr: float, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8) -> Parameter:
    """Apply one bias-corrected ADAM update in place; ``p.grad`` is left as is."""
    p.step_count += 1
    t = p.step_count
    g = p.grad
    p.m *= beta1
    p.m += (1.0 - beta1) * g
    p.v *= beta2
    p.v += (1.0 - beta2) * g * g
    m_hat = p.m / (1.0 - beta1 ** t)
    v_hat = p.v / (1.0 - beta2 ** t)
    p.data -= lr * m_hat / (np.sqrt(v_hat) + eps)
    _check_finite(p.data, "adam_step")
    return p


def _named(params) -> list[tuple[str, Parameter]]:
    if isinstance(params, Mapping):
        return list(params.items())
    return [(getattr(p, "name", "") or f"param{i}", p) for i, p in enumerate(params)]


def gradient_check(loss_fn: Callable[[], Tensor], params, epsilon: float = 1e-5,
                   max_per_param: int | None = None, seed: int = 0) -> dict[str, float]:
    """Worst relative error per parameter between backprop and central differences.

    ``loss_fn`` must rebuild the graph on each call and be deterministic.  With
    ``max_per_param`` set, that many coordinates are sampled per parameter;
    otherwise every coordinate is checked.
    """
    named = _named(params)
    for _, p in named:
        p.zero_grad()
    loss_fn().backward()
    analytic = {name: p.grad.copy() for name, p in named}
    rng = np.random.default_rng(seed)
    report = {}
    for name, p in named:
        flat = p.data.reshape(-1)
        coords = np.arange(flat.size)
        if max_per_param is not None and flat.size > max_per_param:
            coords = np.sort(rng.choice(flat.size, size=max_per_param, replace=False))
        worst = 0.0
        ga = analytic[name].reshape(-1)
        for i in coords:
            orig = flat[i]
            flat[i] = orig + epsilon
            up = loss_fn().item()
            flat[i] = orig - epsilon
            down = loss_fn().item()
            flat[i] = orig
            numeric = (up - down) / (2.0 * epsilon)
            err = abs(ga[i] - numeric) / max(1e-8, abs(numeric))
            worst = max(worst, err)
        report[name] = worst
    for _, p in named:
        p.zero_grad()
    return report


def finite_difference_check(loss_fn: Callable[[], Tensor], params, epsilon: float = 1e-5,
                            max_per_param: int | None = None, seed: int = 0) -> float:
    """Maximum relative gradient error over the checked coordinates."""
    report = gradient_check(loss_fn, params, epsilon, max_per_param, seed)
    return max(report.values(), default=0.0)


def global_norm(params: Iterable[Parameter]) -> float:
    return float(np.sqrt(sum(float(np.sum(p.data * p.data)) for p in params)))
