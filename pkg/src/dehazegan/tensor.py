"""Minimal N-D tensor with reverse-mode automatic differentiation.

Every operation records its parents and a closure mapping the output
gradient to one gradient per parent. ``backward`` walks the recorded graph
in reverse topological order. All data is float64.
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np


class ShapeError(ValueError):
    """Raised when operand shapes violate an operation's contract."""


class NonFiniteError(ArithmeticError):
    """Raised when an operation produces NaN or Inf."""


BackwardFn = Callable[[np.ndarray], Sequence["np.ndarray | None"]]

_grad_enabled = True


class no_grad:
    """Context manager that disables graph recording."""

    def __enter__(self):
        global _grad_enabled
        self._prev = _grad_enabled
        _grad_enabled = False

    def __exit__(self, *exc):
        global _grad_enabled
        _grad_enabled = self._prev
        return False


def _check_finite(arr: np.ndarray, what: str) -> None:
    if not np.isfinite(arr).all():
        raise NonFiniteError(f"non-finite values produced by {what}")


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "name", "_parents", "_backward", "_op")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(())
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self.name = name
        self._parents: tuple[Tensor, ...] = ()
        self._backward: BackwardFn | None = None
        self._op = "leaf"

    # -- basic properties -------------------------------------------------
    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def detach(self) -> Tensor:
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, op={self._op}{flag})"

    # -- graph ------------------------------------------------------------
    def backward(self) -> None:
        """Accumulate d(self)/d(leaf) into ``leaf.grad`` for every reachable leaf."""
        if self.data.size != 1:
            raise ShapeError(f"backward() needs a scalar loss, got shape {self.shape}")
        for leaf, g in _propagate(self).items():
            leaf.grad = g if leaf.grad is None else leaf.grad + g

    # -- operator sugar ---------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(_lift(other, self), self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return mul(self, -1.0)

    def sum(self, axis=None):
        return sum_(self, axis)

    def mean(self, axis=None):
        return mean(self, axis)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes)


def _lift(value, like: Tensor) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(np.full(like.shape, float(value)))


def needs_grad(*tensors: Tensor) -> bool:
    return _grad_enabled and any(t.requires_grad for t in tensors)


def make_op(data: np.ndarray, parents: Sequence[Tensor], backward: BackwardFn, op: str) -> Tensor:
    """Wrap ``data`` as the output of ``op``; record the graph edge when needed."""
    _check_finite(data, op)
    out = Tensor(data)
    out._op = op
    if needs_grad(*parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _topo_order(root: Tensor) -> list[Tensor]:
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
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def _propagate(root: Tensor) -> dict[Tensor, np.ndarray]:
    if not root.requires_grad:
        return {}
    grads: dict[int, np.ndarray] = {id(root): np.ones_like(root.data)}
    leaves: dict[Tensor, np.ndarray] = {}
    for node in reversed(_topo_order(root)):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node._backward is None:
            leaves[node] = g
            continue
        parent_grads = node._backward(g)
        for p, pg in zip(node._parents, parent_grads):
            if pg is None or not p.requires_grad:
                continue
            if pg.shape != p.shape:
                raise ShapeError(f"{node._op}: gradient shape {pg.shape} != input shape {p.shape}")
            _check_finite(pg, f"backward of {node._op}")
            key = id(p)
            grads[key] = pg if key not in grads else grads[key] + pg
    return leaves


def gradients(loss: Tensor, wrt: Iterable[Tensor]) -> list[np.ndarray]:
    """Return d(loss)/d(t) for each ``t`` without touching ``.grad``.

    Tensors the loss does not depend on get an all-zero gradient.
    """
    if loss.data.size != 1:
        raise ShapeError(f"gradients() needs a scalar loss, got shape {loss.shape}")
    leaves = _propagate(loss)
    return [leaves.get(t, np.zeros_like(t.data)) for t in wrt]


# ---------------------------------------------------------------------------
# elementwise arithmetic
# ---------------------------------------------------------------------------

def _binary_operands(a, b, op: str) -> tuple[Tensor, Tensor | None, float | None]:
    if not isinstance(a, Tensor):
        raise TypeError(f"{op}: left operand must be a Tensor")
    if isinstance(b, Tensor):
        if a.shape != b.shape:
            raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} differ; use broadcast_to explicitly")
        return a, b, None
    return a, None, float(b)


def add(a, b) -> Tensor:
    a, bt, s = _binary_operands(a, b, "add")
    if bt is None:
        return make_op(a.data + s, (a,), lambda g: (g,), "add")
    return make_op(a.data + bt.data, (a, bt), lambda g: (g, g), "add")


def sub(a, b) -> Tensor:
    a, bt, s = _binary_operands(a, b, "sub")
    if bt is None:
        return make_op(a.data - s, (a,), lambda g: (g,), "sub")
    return make_op(a.data - bt.data, (a, bt), lambda g: (g, -g), "sub")


def mul(a, b) -> Tensor:
    a, bt, s = _binary_operands(a, b, "mul")
    if bt is None:
        return make_op(a.data * s, (a,), lambda g: (g * s,), "mul")
    ad, bd = a.data, bt.data
    return make_op(ad * bd, (a, bt), lambda g: (g * bd, g * ad), "mul")


def div(a, b) -> Tensor:
    a, bt, s = _binary_operands(a, b, "div")
    if bt is None:
        if s == 0.0:
            raise ZeroDivisionError("div: division by scalar zero")
        return make_op(a.data / s, (a,), lambda g: (g / s,), "div")
    ad, bd = a.data, bt.data
    if np.any(bd == 0.0):
        raise ZeroDivisionError("div: zero in denominator")
    out = ad / bd
    return make_op(out, (a, bt), lambda g: (g / bd, -g * out / bd), "div")


def abs_(x: Tensor) -> Tensor:
    sign = np.sign(x.data)
    return make_op(np.abs(x.data), (x,), lambda g: (g * sign,), "abs")


def log(x: Tensor) -> Tensor:
    xd = x.data
    if np.any(xd <= 0):
        raise NonFiniteError("log: non-positive argument")
    return make_op(np.log(xd), (x,), lambda g: (g / xd,), "log")


def exp(x: Tensor) -> Tensor:
    with np.errstate(over="ignore"):  # overflow is reported by the finite check
        out = np.exp(x.data)
    return make_op(out, (x,), lambda g: (g * out,), "exp")


def square(x: Tensor) -> Tensor:
    xd = x.data
    return make_op(xd * xd, (x,), lambda g: (2.0 * g * xd,), "square")


def clip(x: Tensor, lo: float | None = None, hi: float | None = None) -> Tensor:
    """Clamp values; the gradient is zero wherever clamping was active."""
    out = np.clip(x.data, lo, hi)
    passed = out == x.data
    return make_op(out, (x,), lambda g: (g * passed,), "clip")


def broadcast_to(x: Tensor, shape: Sequence[int]) -> Tensor:
    shape = tuple(shape)
    if x.ndim != len(shape) or any(s != 1 and s != t for s, t in zip(x.shape, shape)):
        raise ShapeError(f"broadcast_to: cannot expand {x.shape} to {shape}")
    axes = tuple(i for i, (s, t) in enumerate(zip(x.shape, shape)) if s == 1 and t != 1)
    return make_op(
        np.broadcast_to(x.data, shape).copy(),
        (x,),
        lambda g: (g.sum(axis=axes, keepdims=True),),
        "broadcast_to",
    )


# ---------------------------------------------------------------------------
# reductions and shape manipulation
# ---------------------------------------------------------------------------

def _norm_axes(axis, ndim: int) -> tuple[int, ...]:
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(a % ndim for a in axis)


def sum_(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    axes = _norm_axes(axis, x.ndim)
    out = x.data.sum(axis=axes, keepdims=keepdims)
    shape = x.shape

    def backward(g):
        if not keepdims:
            g = np.expand_dims(g, axes) if axes else g
        return (np.broadcast_to(g, shape).copy(),)

    return make_op(np.asarray(out), (x,), backward, "sum")


def mean(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    axes = _norm_axes(axis, x.ndim)
    count = int(np.prod([x.shape[a] for a in axes])) if axes else 1
    return mul(sum_(x, axes, keepdims), 1.0 / count)


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    shape = tuple(shape)
    src = x.shape
    try:
        out = x.data.reshape(shape)
    except ValueError as err:
        raise ShapeError(f"reshape: {src} -> {shape}: {err}") from None
    return make_op(out, (x,), lambda g: (g.reshape(src),), "reshape")


def transpose(x: Tensor, axes: Sequence[int]) -> Tensor:
    axes = tuple(axes)
    if sorted(axes) != list(range(x.ndim)):
        raise ShapeError(f"transpose: invalid permutation {axes} for ndim {x.ndim}")
    inv = tuple(np.argsort(axes))
    return make_op(
        np.ascontiguousarray(x.data.transpose(axes)),
        (x,),
        lambda g: (np.ascontiguousarray(g.transpose(inv)),),
        "transpose",
    )


def concat(tensors: Sequence[Tensor], axis: int = 1) -> Tensor:
    if not tensors:
        raise ShapeError("concat: empty input")
    ref = tensors[0].shape
    axis = axis % len(ref)
    for t in tensors[1:]:
        if t.ndim != len(ref) or any(s != r for i, (s, r) in enumerate(zip(t.shape, ref)) if i != axis):
            raise ShapeError(f"concat: incompatible shapes {ref} and {t.shape} on axis {axis}")
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]
    out = np.concatenate([t.data for t in tensors], axis=axis)
    return make_op(out, tuple(tensors), lambda g: tuple(np.split(g, bounds, axis=axis)), "concat")


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Batched matrix product over the last two axes; batch shapes must match."""
    if a.ndim < 2 or a.ndim != b.ndim or a.shape[:-2] != b.shape[:-2] or a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    ad, bd = a.data, b.data
    return make_op(
        ad @ bd,
        (a, b),
        lambda g: (g @ np.swapaxes(bd, -1, -2), np.swapaxes(ad, -1, -2) @ g),
        "matmul",
    )


def _reduce_arg(x: Tensor, axis, pick) -> tuple[np.ndarray, np.ndarray, tuple[int, ...]]:
    axes = _norm_axes(axis, x.ndim)
    keep = [a for a in range(x.ndim) if a not in axes]
    moved = x.data.transpose(keep + list(axes))
    kept_shape = moved.shape[: len(keep)]
    flat = moved.reshape(kept_shape + (-1,))
    idx = pick(flat, axis=-1)
    vals = np.take_along_axis(flat, idx[..., None], axis=-1)[..., 0]
    out_shape = tuple(1 if a in axes else s for a, s in enumerate(x.shape))
    return vals.reshape(out_shape), idx, tuple(keep + list(axes))


def _arg_reduce_op(x: Tensor, axis, pick, op: str) -> Tensor:
    vals, idx, perm = _reduce_arg(x, axis, pick)
    shape = x.shape
    inv = np.argsort(perm)

    def backward(g):
        moved_shape = tuple(shape[p] for p in perm)
        n_keep = idx.ndim
        flat = np.zeros(moved_shape[:n_keep] + (int(np.prod(moved_shape[n_keep:])),))
        np.put_along_axis(flat, idx[..., None], g.reshape(idx.shape)[..., None], axis=-1)
        return (flat.reshape(moved_shape).transpose(inv),)

    return make_op(vals, (x,), backward, op)


def amax(x: Tensor, axis=None) -> Tensor:
    """Max over ``axis`` (kept as size-1 dims); the gradient goes to the first argmax."""
    return _arg_reduce_op(x, axis, np.argmax, "amax")


def amin(x: Tensor, axis=None) -> Tensor:
    return _arg_reduce_op(x, axis, np.argmin, "amin")


def stack_scalars(values: Sequence[Tensor]) -> Tensor:
    return concat([reshape(v, (1,)) for v in values], axis=0)
