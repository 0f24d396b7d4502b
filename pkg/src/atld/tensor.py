"""Dense float64 tensors with reverse-mode automatic differentiation.

Every operation records itself on the implicit tape (the graph of `Tensor`
nodes), so a single :func:`backward` call yields exact gradients with respect
to both model parameters and network inputs. Design constraints:

* float64 everywhere; results must be finite after every public op.
* Broadcasting is limited to scalar-with-tensor and equal shapes. Batch
  dimensions are always explicit (``bias_add`` exists for the one row-wise
  case a layer needs).
* ``relu`` uses subgradient 0 at 0; ``clip`` passes gradient only where the
  input was inside the clamp interval.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "Tensor",
    "Tape",
    "Gradients",
    "NumericError",
    "DomainError",
    "add",
    "sub",
    "mul",
    "neg",
    "relu",
    "tanh",
    "sigmoid",
    "log",
    "exp",
    "clip",
    "matmul",
    "bias_add",
    "reduce",
    "reduce_sum",
    "reduce_mean",
    "elementwise",
    "log_softmax",
    "slice_cols",
    "select_cols",
    "rowmax",
    "reshape",
    "detach",
    "backward",
    "input_gradient",
]


class NumericError(ArithmeticError):
    """A value that must be finite came out NaN or infinite."""


class DomainError(ValueError):
    """An input lies outside the mathematical domain of the operation."""


def _as_array(data) -> np.ndarray:
    arr = np.asarray(data, dtype=np.float64)
    return arr


def _check_finite(arr: np.ndarray, op: str) -> np.ndarray:
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"non-finite result in '{op}'")
    return arr


class Tensor:
    """A node of the computation graph: an ndarray plus backward plumbing.

    Leaves are created directly (``Tensor(data, requires_grad=True)``);
    interior nodes are created by the op functions below. ``grad`` is set on
    requires-grad leaves by :func:`backward` (overwritten on each call, never
    accumulated across calls).
    """

    __slots__ = ("data", "requires_grad", "grad", "name", "_parents", "_vjp", "_op")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = _check_finite(_as_array(data), "tensor")
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self.name = name
        self._parents: tuple[Tensor, ...] = ()
        self._vjp = None  # callable: upstream ndarray -> tuple of parent grads
        self._op = "leaf"

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def is_leaf(self) -> bool:
        return not self._parents

    def item(self) -> float:
        if self.data.size != 1:
            raise ValueError(f"item() on tensor of shape {self.shape}")
        return float(self.data.reshape(()))

    def __repr__(self) -> str:
        tag = self.name or self._op
        return f"Tensor({tag}, shape={self.shape})"

    # operator sugar; constants are wrapped as non-grad leaves
    def __add__(self, other):
        return add(self, _wrap(other))

    def __radd__(self, other):
        return add(_wrap(other), self)

    def __sub__(self, other):
        return sub(self, _wrap(other))

    def __rsub__(self, other):
        return sub(_wrap(other), self)

    def __mul__(self, other):
        return mul(self, _wrap(other))

    def __rmul__(self, other):
        return mul(_wrap(other), self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, _wrap(other))

    def sum(self, axis: int | None = None) -> "Tensor":
        return reduce_sum(self, axis)

    def mean(self, axis: int | None = None) -> "Tensor":
        return reduce_mean(self, axis)


def _wrap(value) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


def _node(data: np.ndarray, parents: tuple[Tensor, ...], vjp, op: str) -> Tensor:
    out = Tensor.__new__(Tensor)
    out.data = _check_finite(_as_array(data), op)
    out.requires_grad = any(p.requires_grad for p in parents)
    out.grad = None
    out.name = None
    out._parents = parents if out.requires_grad else ()
    out._vjp = vjp if out.requires_grad else None
    out._op = op
    return out


def _binop_check(a: Tensor, b: Tensor, op: str) -> None:
    if a.shape == b.shape or a.data.ndim == 0 or b.data.ndim == 0:
        return
    raise ValueError(f"'{op}' needs equal shapes or a scalar, got {a.shape} vs {b.shape}")


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    # only the scalar case can occur under the restricted broadcasting rule
    if shape == grad.shape:
        return grad
    return np.asarray(grad.sum(), dtype=np.float64).reshape(shape)


# ---------------------------------------------------------------------------
# primitive operations
# ---------------------------------------------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    _binop_check(a, b, "add")

    def vjp(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _node(a.data + b.data, (a, b), vjp, "add")


def sub(a: Tensor, b: Tensor) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    _binop_check(a, b, "sub")

    def vjp(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return _node(a.data - b.data, (a, b), vjp, "sub")


def mul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    _binop_check(a, b, "mul")

    def vjp(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return _node(a.data * b.data, (a, b), vjp, "mul")


def neg(a: Tensor) -> Tensor:
    a = _wrap(a)
    return _node(-a.data, (a,), lambda g: (-g,), "neg")


def relu(a: Tensor) -> Tensor:
    a = _wrap(a)
    mask = a.data > 0.0

    def vjp(g):
        return (g * mask,)

    return _node(np.where(mask, a.data, 0.0), (a,), vjp, "relu")


def tanh(a: Tensor) -> Tensor:
    a = _wrap(a)
    out = np.tanh(a.data)

    def vjp(g):
        return (g * (1.0 - out * out),)

    return _node(out, (a,), vjp, "tanh")


def sigmoid(a: Tensor) -> Tensor:
    a = _wrap(a)
    v = a.data
    # piecewise form avoids overflow in exp for large |v|
    out = np.where(v >= 0.0, 1.0 / (1.0 + np.exp(-np.abs(v))), np.exp(-np.abs(v)) / (1.0 + np.exp(-np.abs(v))))

    def vjp(g):
        return (g * out * (1.0 - out),)

    return _node(out, (a,), vjp, "sigmoid")


def log(a: Tensor) -> Tensor:
    a = _wrap(a)
    if np.any(a.data <= 0.0):
        raise DomainError("log of non-positive input")

    def vjp(g):
        return (g / a.data,)

    return _node(np.log(a.data), (a,), vjp, "log")


def exp(a: Tensor) -> Tensor:
    a = _wrap(a)
    with np.errstate(over="ignore"):
        out = np.exp(a.data)  # overflow surfaces as NumericError below

    def vjp(g):
        return (g * out,)

    return _node(out, (a,), vjp, "exp")


def clip(a: Tensor, lo: float, hi: float) -> Tensor:
    """Clamp to [lo, hi]; gradient passes only where the input was inside."""
    a = _wrap(a)
    if not lo < hi:
        raise ValueError(f"clip needs lo < hi, got [{lo}, {hi}]")
    mask = (a.data >= lo) & (a.data <= hi)

    def vjp(g):
        return (g * mask,)

    return _node(np.clip(a.data, lo, hi), (a,), vjp, "clip")


def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ValueError("matmul expects 2-D tensors")
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul inner dimensions disagree: {a.shape} x {b.shape}")

    def vjp(g):
        return g @ b.data.T, a.data.T @ g

    return _node(a.data @ b.data, (a, b), vjp, "matmul")


def bias_add(x: Tensor, b: Tensor) -> Tensor:
    """Row-wise bias: (m, n) + (n,). The one broadcast a dense layer needs."""
    x, b = _wrap(x), _wrap(b)
    if x.data.ndim != 2 or b.data.ndim != 1 or x.shape[1] != b.shape[0]:
        raise ValueError(f"bias_add expects (m,n)+(n,), got {x.shape} and {b.shape}")

    def vjp(g):
        return g, g.sum(axis=0)

    return _node(x.data + b.data[None, :], (x, b), vjp, "bias_add")


def reduce_sum(a: Tensor, axis: int | None = None) -> Tensor:
    a = _wrap(a)
    if a.data.size == 0:
        raise ValueError("sum of empty tensor")
    if axis is None:
        def vjp(g):
            return (np.full_like(a.data, float(g)),)

        return _node(a.data.sum(), (a,), vjp, "sum")
    if not -a.data.ndim <= axis < a.data.ndim:
        raise ValueError(f"axis {axis} out of bounds for shape {a.shape}")

    def vjp_axis(g):
        return (np.broadcast_to(np.expand_dims(g, axis), a.shape).copy(),)

    return _node(a.data.sum(axis=axis), (a,), vjp_axis, "sum")


def reduce_mean(a: Tensor, axis: int | None = None) -> Tensor:
    a = _wrap(a)
    if a.data.size == 0:
        raise ValueError("mean of empty tensor")
    if axis is None:
        n = a.data.size

        def vjp(g):
            return (np.full_like(a.data, float(g) / n),)

        return _node(a.data.mean(), (a,), vjp, "mean")
    if not -a.data.ndim <= axis < a.data.ndim:
        raise ValueError(f"axis {axis} out of bounds for shape {a.shape}")
    n_axis = a.shape[axis]

    def vjp_axis(g):
        return (np.broadcast_to(np.expand_dims(g, axis), a.shape).copy() / n_axis,)

    return _node(a.data.mean(axis=axis), (a,), vjp_axis, "mean")


_ELEMENTWISE = {
    "add": add,
    "mul": mul,
    "relu": relu,
    "tanh": tanh,
    "sigmoid": sigmoid,
    "log": log,
    "exp": exp,
    "neg": neg,
}

_REDUCE = {"sum": reduce_sum, "mean": reduce_mean}


def elementwise(op: str, *args: Tensor) -> Tensor:
    """Dispatch an element-wise primitive by name."""
    if op not in _ELEMENTWISE:
        raise ValueError(f"unknown elementwise op '{op}'")
    return _ELEMENTWISE[op](*args)


def reduce(op: str, a: Tensor, axis: int | None = None) -> Tensor:
    """Dispatch a reduction ('sum' or 'mean') by name."""
    if op not in _REDUCE:
        raise ValueError(f"unknown reduce op '{op}'")
    return _REDUCE[op](a, axis)


def log_softmax(a: Tensor) -> Tensor:
    """Row-wise log-softmax of a 2-D tensor."""
    a = _wrap(a)
    if a.data.ndim != 2:
        raise ValueError("log_softmax expects a 2-D tensor")
    shifted = a.data - a.data.max(axis=1, keepdims=True)
    out = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    soft = np.exp(out)

    def vjp(g):
        return (g - soft * g.sum(axis=1, keepdims=True),)

    return _node(out, (a,), vjp, "log_softmax")


def slice_cols(a: Tensor, start: int, stop: int) -> Tensor:
    """Columns [start, stop) of a 2-D tensor."""
    a = _wrap(a)
    if a.data.ndim != 2:
        raise ValueError("slice_cols expects a 2-D tensor")
    if not 0 <= start < stop <= a.shape[1]:
        raise ValueError(f"column slice [{start}:{stop}) out of bounds for {a.shape}")

    def vjp(g):
        full = np.zeros_like(a.data)
        full[:, start:stop] = g
        return (full,)

    return _node(a.data[:, start:stop].copy(), (a,), vjp, "slice_cols")


def select_cols(a: Tensor, idx) -> Tensor:
    """Per-row gather: out[i] = a[i, idx[i]]. Returns a 1-D tensor."""
    a = _wrap(a)
    idx = np.asarray(idx, dtype=np.int64)
    if a.data.ndim != 2 or idx.ndim != 1 or idx.shape[0] != a.shape[0]:
        raise ValueError(f"select_cols expects (m,n) and m indices, got {a.shape} and {idx.shape}")
    if np.any(idx < 0) or np.any(idx >= a.shape[1]):
        raise ValueError("select_cols index out of range")
    rows = np.arange(a.shape[0])

    def vjp(g):
        full = np.zeros_like(a.data)
        np.add.at(full, (rows, idx), g)
        return (full,)

    return _node(a.data[rows, idx].copy(), (a,), vjp, "select_cols")


def rowmax(a: Tensor) -> Tensor:
    """Row-wise maximum of a 2-D tensor; gradient routes to the first argmax."""
    a = _wrap(a)
    if a.data.ndim != 2:
        raise ValueError("rowmax expects a 2-D tensor")
    arg = a.data.argmax(axis=1)
    rows = np.arange(a.shape[0])

    def vjp(g):
        full = np.zeros_like(a.data)
        full[rows, arg] = g
        return (full,)

    return _node(a.data[rows, arg].copy(), (a,), vjp, "rowmax")


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    a = _wrap(a)

    def vjp(g):
        return (g.reshape(a.shape),)

    return _node(a.data.reshape(shape), (a,), vjp, "reshape")


def detach(a: Tensor) -> Tensor:
    """A constant view of the same values; gradients stop here."""
    out = Tensor(a.data.copy())
    out._op = "detach"
    return out


# ---------------------------------------------------------------------------
# backward pass
# ---------------------------------------------------------------------------


class Tape:
    """Topologically ordered record of all nodes reachable from a root.

    Every node's parents appear before the node itself; ``values`` are the
    cached forward results.
    """

    def __init__(self, nodes: list[Tensor]):
        self.nodes = nodes

    @classmethod
    def from_root(cls, root: Tensor) -> "Tape":
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(root, False)]
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
                if id(parent) not in seen:
                    stack.append((parent, False))
        return cls(order)

    def values(self) -> list[np.ndarray]:
        return [n.data for n in self.nodes]

    def leaves(self) -> list[Tensor]:
        return [n for n in self.nodes if n.is_leaf and n.requires_grad]


class Gradients(dict):
    """Map from requires-grad leaf to its gradient array (same shape)."""


def backward(root: Tensor) -> Gradients:
    """Reverse-mode gradients of a scalar root for every requires-grad leaf.

    Also stores each leaf's gradient on ``leaf.grad`` (overwriting any
    previous value, so repeated passes are independent and bit-identical).
    """
    if root.data.size != 1:
        raise ValueError(f"backward root must be scalar, got shape {root.shape}")
    tape = Tape.from_root(root)
    grads: dict[int, np.ndarray] = {id(root): np.ones_like(root.data)}
    for node in reversed(tape.nodes):
        if node._vjp is None:
            continue
        g = grads.pop(id(node), None)
        if g is None:
            continue
        parent_grads = node._vjp(g)
        for parent, pg in zip(node._parents, parent_grads):
            if not parent.requires_grad:
                continue
            acc = grads.get(id(parent))
            grads[id(parent)] = pg if acc is None else acc + pg
    out = Gradients()
    for leaf in tape.leaves():
        g = grads.get(id(leaf))
        if g is None:
            g = np.zeros_like(leaf.data)
        g = np.asarray(g, dtype=np.float64)
        if g.shape != leaf.data.shape:  # scalar leaf fed through broadcasting
            g = g.reshape(leaf.data.shape)
        _check_finite(g, "backward")
        leaf.grad = g
        out[leaf] = g
    return out


def input_gradient(net_loss: Tensor, x: Tensor) -> np.ndarray:
    """Gradient of a scalar loss with respect to one input leaf."""
    if not (x.is_leaf and x.requires_grad):
        raise ValueError("input_gradient target must be a requires-grad leaf")
    grads = backward(net_loss)
    if x not in grads:
        raise ValueError("input leaf is not on the tape of this loss")
    return grads[x]
