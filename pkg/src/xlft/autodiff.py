"""Dense float64 tensors with reverse-mode automatic differentiation.

Small by design: just the ops the classifier and its losses need, each with
a hand-written backward closure.  Heavy row-wise math (softmax, layernorm,
Adam, embedding scatter) is delegated to the kernels package, which carries
numba-jitted and pure-numpy implementations behind one interface.

Everything is 64-bit; gradient checks against central finite differences
need the headroom.
"""

from __future__ import annotations

from typing import Callable, Iterable

import numpy as np

from . import kernels
from .errors import ConfigError, GradCheckError, ShapeError
from .rng import stream_rng


class Tensor:
    """A node in the computation graph."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, _parents: tuple = (), _backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._backward = _backward

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def item(self) -> float:
        return float(self.data.reshape(()))


def constant(data) -> Tensor:
    return Tensor(data, requires_grad=False)


def _accumulate(t: Tensor, g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    if t.grad is None:
        # copy: g may be a view or shared with a sibling node
        t.grad = np.array(g, dtype=np.float64)
    else:
        t.grad += g


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a broadcast gradient back down to the original operand shape."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _node(data, parents: tuple, backward) -> Tensor:
    req = any(p.requires_grad for p in parents)
    return Tensor(data, requires_grad=req, _parents=parents, _backward=backward if req else None)


# ---------------------------------------------------------------------------
# ops


def add(a: Tensor, b: Tensor) -> Tensor:
    try:
        out = a.data + b.data
    except ValueError:
        raise ShapeError(f"add: shapes {a.data.shape} and {b.data.shape} not broadcastable")

    def backward(g):
        _accumulate(a, _unbroadcast(g, a.data.shape))
        _accumulate(b, _unbroadcast(g, b.data.shape))

    return _node(out, (a, b), backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    try:
        out = a.data * b.data
    except ValueError:
        raise ShapeError(f"mul: shapes {a.data.shape} and {b.data.shape} not broadcastable")

    def backward(g):
        _accumulate(a, _unbroadcast(g * b.data, a.data.shape))
        _accumulate(b, _unbroadcast(g * a.data, b.data.shape))

    return _node(out, (a, b), backward)


def scale(a: Tensor, s: float) -> Tensor:
    s = float(s)

    def backward(g):
        _accumulate(a, g * s)

    return _node(a.data * s, (a,), backward)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim < 2 or b.data.ndim < 2:
        raise ShapeError(f"matmul: operands must be at least 2-D, got {a.data.shape} and {b.data.shape}")
    if a.data.shape[-1] != b.data.shape[-2]:
        raise ShapeError(f"matmul: inner dims disagree for shapes {a.data.shape} and {b.data.shape}")
    out = np.matmul(a.data, b.data)

    def backward(g):
        _accumulate(a, _unbroadcast(np.matmul(g, b.data.swapaxes(-1, -2)), a.data.shape))
        _accumulate(b, _unbroadcast(np.matmul(a.data.swapaxes(-1, -2), g), b.data.shape))

    return _node(out, (a, b), backward)


def relu(a: Tensor) -> Tensor:
    out = np.maximum(a.data, 0.0)

    def backward(g):
        _accumulate(a, g * (a.data > 0.0))

    return _node(out, (a,), backward)


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.data)

    def backward(g):
        _accumulate(a, g * (1.0 - out * out))

    return _node(out, (a,), backward)


def softmax(a: Tensor) -> Tensor:
    """Softmax over the last axis, computed with max subtraction."""
    flat = np.ascontiguousarray(a.data.reshape(-1, a.data.shape[-1]))
    y = kernels.softmax_rows(flat)

    def backward(g):
        gflat = np.ascontiguousarray(g.reshape(y.shape))
        _accumulate(a, kernels.softmax_rows_backward(y, gflat).reshape(a.data.shape))

    return _node(y.reshape(a.data.shape), (a,), backward)


def log_softmax(a: Tensor) -> Tensor:
    flat = np.ascontiguousarray(a.data.reshape(-1, a.data.shape[-1]))
    out = kernels.log_softmax_rows(flat)
    probs = kernels.softmax_rows(flat)

    def backward(g):
        gflat = np.ascontiguousarray(g.reshape(out.shape))
        _accumulate(a, kernels.log_softmax_rows_backward(probs, gflat).reshape(a.data.shape))

    return _node(out.reshape(a.data.shape), (a,), backward)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    h = x.data.shape[-1]
    if gain.data.shape != (h,) or bias.data.shape != (h,):
        raise ShapeError(
            f"layer-norm: gain/bias must be ({h},), got {gain.data.shape} and {bias.data.shape}"
        )
    flat = np.ascontiguousarray(x.data.reshape(-1, h))
    y, xhat, rstd = kernels.layernorm_rows(flat, gain.data, bias.data, eps)

    def backward(g):
        gflat = np.ascontiguousarray(g.reshape(-1, h))
        dx, dgain, dbias = kernels.layernorm_rows_backward(gflat, xhat, rstd, gain.data)
        _accumulate(x, dx.reshape(x.data.shape))
        _accumulate(gain, dgain)
        _accumulate(bias, dbias)

    return _node(y.reshape(x.data.shape), (x, gain, bias), backward)


def embedding(table: Tensor, ids) -> Tensor:
    ids = np.asarray(ids, dtype=np.int64)
    if table.data.ndim != 2:
        raise ShapeError(f"embedding-lookup: table must be 2-D, got {table.data.shape}")
    if ids.size and (ids.min() < 0 or ids.max() >= table.data.shape[0]):
        raise ShapeError(
            f"embedding-lookup: ids out of range [0, {table.data.shape[0]}) for table {table.data.shape}"
        )
    out = table.data[ids]

    def backward(g):
        if not table.requires_grad:
            return
        if table.grad is None:
            table.grad = np.zeros_like(table.data)
        gflat = np.ascontiguousarray(g.reshape(-1, table.data.shape[1]))
        kernels.embedding_grad(ids.reshape(-1), gflat, table.grad)

    return _node(out, (table,), backward)


def mean_pool(a: Tensor, axis: int = 1) -> Tensor:
    """Mean over one axis (canonically the sequence axis of [B, T, H])."""
    n = a.data.shape[axis]
    out = a.data.mean(axis=axis)

    def backward(g):
        _accumulate(a, np.repeat(np.expand_dims(g / n, axis), n, axis=axis))

    return _node(out, (a,), backward)


def mean_all(a: Tensor) -> Tensor:
    n = a.data.size

    def backward(g):
        _accumulate(a, np.full(a.data.shape, float(g) / n))

    return _node(a.data.mean(), (a,), backward)


def sum_axis(a: Tensor, axis: int) -> Tensor:
    out = a.data.sum(axis=axis)

    def backward(g):
        _accumulate(a, np.repeat(np.expand_dims(g, axis), a.data.shape[axis], axis=axis))

    return _node(out, (a,), backward)


def sum_all(a: Tensor) -> Tensor:
    def backward(g):
        _accumulate(a, np.full(a.data.shape, float(g)))

    return _node(a.data.sum(), (a,), backward)


def reshape(a: Tensor, shape: tuple) -> Tensor:
    def backward(g):
        _accumulate(a, g.reshape(a.data.shape))

    return _node(a.data.reshape(shape), (a,), backward)


def transpose(a: Tensor, axes: tuple) -> Tensor:
    inverse = tuple(np.argsort(axes))

    def backward(g):
        _accumulate(a, g.transpose(inverse))

    return _node(a.data.transpose(axes), (a,), backward)


def concat(tensors: list[Tensor], axis: int) -> Tensor:
    sizes = [t.data.shape[axis] for t in tensors]
    out = np.concatenate([t.data for t in tensors], axis=axis)
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        for t, start, stop in zip(tensors, offsets[:-1], offsets[1:]):
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(start, stop)
            _accumulate(t, g[tuple(sl)])

    return _node(out, tuple(tensors), backward)


def select(a: Tensor, axis: int, index: int) -> Tensor:
    """Pick one index along an axis, dropping that axis (e.g. the CLS slot)."""
    out = np.take(a.data, index, axis=axis)

    def backward(g):
        full = np.zeros_like(a.data)
        sl = [slice(None)] * a.data.ndim
        sl[axis] = index
        full[tuple(sl)] = g
        _accumulate(a, full)

    return _node(out, (a,), backward)


def take_rows(a: Tensor, idx) -> Tensor:
    """out[b, j] = a[b, idx[b, j]] for a 2-D tensor and integer index matrix."""
    idx = np.asarray(idx, dtype=np.int64)
    if a.data.ndim != 2 or idx.ndim != 2 or idx.shape[0] != a.data.shape[0]:
        raise ShapeError(f"take-rows: tensor {a.data.shape} with index {idx.shape}")
    if idx.size and (idx.min() < 0 or idx.max() >= a.data.shape[1]):
        raise ShapeError(f"take-rows: index out of range for {a.data.shape}")
    rows = np.arange(a.data.shape[0])[:, None]
    out = a.data[rows, idx]

    def backward(g):
        if not a.requires_grad:
            return
        if a.grad is None:
            a.grad = np.zeros_like(a.data)
        np.add.at(a.grad, (rows, idx), g)

    return _node(out, (a,), backward)


_FORWARD_OPS: dict[str, Callable] = {
    "matmul": matmul,
    "add": add,
    "scale": scale,
    "relu": relu,
    "tanh": tanh,
    "softmax": softmax,
    "mean-pool": mean_pool,
    "embedding-lookup": embedding,
    "layer-normalization": layer_norm,
}


def forward_op(kind: str, *inputs) -> Tensor:
    """Dispatch a graph op by name; raises ShapeError naming the op on misuse."""
    if kind not in _FORWARD_OPS:
        raise ConfigError(f"unknown op-kind {kind!r}; supported: {sorted(_FORWARD_OPS)}")
    return _FORWARD_OPS[kind](*inputs)


# ---------------------------------------------------------------------------
# reverse pass


def backward(root: Tensor) -> None:
    """Propagate d(root)/d(node) into .grad of every reachable graph node."""
    if root.data.size != 1:
        raise ShapeError(f"backward: root must be scalar, got shape {root.data.shape}")
    if not root.requires_grad:
        return

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
            if parent.requires_grad and id(parent) not in seen:
                stack.append((parent, False))

    root.grad = np.ones_like(root.data)
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


# ---------------------------------------------------------------------------
# parameters and optimizer


class ParamSet:
    """Ordered, named trainable parameters with gradient and Adam state slots."""

    def __init__(self):
        self._entries: dict[str, Tensor] = {}
        self._trainable: dict[str, bool] = {}
        self._adam_m: dict[str, np.ndarray] = {}
        self._adam_v: dict[str, np.ndarray] = {}

    def add(self, name: str, value, trainable: bool = True) -> Tensor:
        if name in self._entries:
            raise ConfigError(f"duplicate parameter name {name!r}")
        t = Tensor(np.array(value, dtype=np.float64), requires_grad=trainable)
        self._entries[name] = t
        self._trainable[name] = trainable
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._entries[name]

    def __contains__(self, name: str) -> bool:
        return name in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def names(self) -> list[str]:
        return list(self._entries)

    def items(self) -> Iterable[tuple[str, Tensor]]:
        return self._entries.items()

    def is_trainable(self, name: str) -> bool:
        return self._trainable[name]

    def zero_grads(self) -> None:
        for t in self._entries.values():
            t.grad = None

    def copy(self) -> "ParamSet":
        """Deep copy of values and flags; gradient and optimizer state not carried."""
        out = ParamSet()
        for name, t in self._entries.items():
            out.add(name, t.data.copy(), trainable=self._trainable[name])
        return out

    def num_params(self) -> int:
        return sum(t.data.size for t in self._entries.values())

    def adam_state(self, name: str) -> tuple[np.ndarray, np.ndarray]:
        if name not in self._adam_m:
            size = self._entries[name].data.size
            self._adam_m[name] = np.zeros(size)
            self._adam_v[name] = np.zeros(size)
        return self._adam_m[name], self._adam_v[name]

    def reset_adam(self) -> None:
        self._adam_m.clear()
        self._adam_v.clear()


def adam_step(
    params: ParamSet,
    grads: dict[str, np.ndarray] | None = None,
    lr: float = 1e-3,
    betas: tuple[float, float] = (0.9, 0.999),
    eps: float = 1e-8,
    step_count: int = 1,
) -> ParamSet:
    """Apply one bias-corrected Adam update to every trainable parameter.

    Gradients default to the .grad slots filled by backward(); a dict of
    arrays can be passed instead.  Non-trainable entries are never touched.
    """
    if lr <= 0:
        raise ConfigError(f"adam_step: lr must be positive, got {lr}")
    if step_count < 1:
        raise ConfigError(f"adam_step: step_count must be >= 1, got {step_count}")
    beta1, beta2 = betas
    for name, t in params.items():
        if not params.is_trainable(name):
            continue
        g = grads.get(name) if grads is not None else t.grad
        if g is None:
            raise GradCheckError(f"adam_step: trainable parameter {name!r} has no gradient")
        if g.shape != t.data.shape:
            raise ShapeError(f"adam_step: grad shape {g.shape} != param shape {t.data.shape} for {name!r}")
        m, v = params.adam_state(name)
        kernels.adam_update(
            t.data.reshape(-1), np.ascontiguousarray(g.reshape(-1)), m, v,
            float(lr), float(beta1), float(beta2), float(eps), int(step_count),
        )
    return params


# ---------------------------------------------------------------------------
# gradient verification oracle


def finite_diff_check(
    loss_fn: Callable[[ParamSet], Tensor],
    params: ParamSet,
    step: float,
    max_coords_per_param: int = 5,
    seed: int = 0,
) -> float:
    """Max relative error between analytic grads and central differences.

    Samples up to ``max_coords_per_param`` coordinates of every trainable
    parameter, perturbs each by +/-step, and compares (f(x+h)-f(x-h))/2h
    against the gradient produced by backward().  The relative error is
    |analytic - fd| / max(|analytic|, 1e-8).
    """
    if step <= 0:
        raise ConfigError(f"finite_diff_check: step must be positive, got {step}")
    params.zero_grads()
    loss = loss_fn(params)
    base = loss.item()
    if not np.isfinite(base):
        raise GradCheckError(f"finite_diff_check: loss is not finite ({base})")
    backward(loss)

    rng = stream_rng(seed, "finite-diff")
    worst = 0.0
    for name, t in params.items():
        if not params.is_trainable(name):
            continue
        flat = t.data.reshape(-1)
        grad = np.zeros_like(flat) if t.grad is None else t.grad.reshape(-1)
        n = flat.size
        coords = rng.choice(n, size=min(max_coords_per_param, n), replace=False)
        for i in coords:
            original = flat[i]
            flat[i] = original + step
            plus = loss_fn(params).item()
            flat[i] = original - step
            minus = loss_fn(params).item()
            flat[i] = original
            if not (np.isfinite(plus) and np.isfinite(minus)):
                raise GradCheckError("finite_diff_check: perturbed loss is not finite")
            fd = (plus - minus) / (2.0 * step)
            err = abs(grad[i] - fd) / max(abs(grad[i]), 1e-8)
            worst = max(worst, err)
    return worst
