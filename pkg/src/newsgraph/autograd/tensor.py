"""Reverse-mode automatic differentiation over float64 numpy arrays.

Every op builds its output from fresh arrays; inputs are never written to.
An output only records parents (a tape entry) when at least one input
requires a gradient, so constant sub-expressions cost nothing at backward.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

from .. import kernels
from ..errors import DomainError, ShapeError


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "op")

    def __init__(self, data, requires_grad: bool = False, _parents=(), _op: str = ""):
        arr = np.array(data, dtype=np.float64)
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self._parents: tuple[Tensor, ...] = _parents
        self._backward: Callable[[np.ndarray], None] | None = None
        self.op = _op

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
        return self.data.copy()

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self) -> str:
        rg = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{rg})"

    def backward(self) -> None:
        backward(self)

    # operator sugar
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

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return slice_(self, key)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data: np.ndarray, parents: Sequence[Tensor], op: str, backward_fn) -> Tensor:
    needs = any(p.requires_grad for p in parents)
    if not needs:
        return Tensor(data, _op=op)
    out = Tensor(data, requires_grad=True, _parents=tuple(parents), _op=op)
    out._backward = backward_fn
    return out


def _accumulate(t: Tensor, g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.array(g, dtype=np.float64, copy=True)
    else:
        t.grad = t.grad + g


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def _broadcast_shape(a: Tensor, b: Tensor, op: str) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: incompatible shapes {a.shape} and {b.shape}") from None


# ---------------------------------------------------------------- elementwise

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "add")

    def bw(g):
        _accumulate(a, _unbroadcast(g, a.shape))
        _accumulate(b, _unbroadcast(g, b.shape))

    return _make(a.data + b.data, (a, b), "add", bw)


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "sub")

    def bw(g):
        _accumulate(a, _unbroadcast(g, a.shape))
        _accumulate(b, _unbroadcast(-g, b.shape))

    return _make(a.data - b.data, (a, b), "sub", bw)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "mul")

    def bw(g):
        _accumulate(a, _unbroadcast(g * b.data, a.shape))
        _accumulate(b, _unbroadcast(g * a.data, b.shape))

    return _make(a.data * b.data, (a, b), "mul", bw)


def sigmoid(a: Tensor) -> Tensor:
    y = 0.5 * (1.0 + np.tanh(0.5 * a.data))

    def bw(g):
        _accumulate(a, g * y * (1.0 - y))

    return _make(y, (a,), "sigmoid", bw)


def tanh(a: Tensor) -> Tensor:
    y = np.tanh(a.data)

    def bw(g):
        _accumulate(a, g * (1.0 - y * y))

    return _make(y, (a,), "tanh", bw)


def relu(a: Tensor) -> Tensor:
    # subgradient at exactly 0 is 0
    pos = a.data > 0

    def bw(g):
        _accumulate(a, g * pos)

    return _make(np.where(pos, a.data, 0.0), (a,), "relu", bw)


def log(a: Tensor) -> Tensor:
    if np.any(a.data <= 0):
        raise DomainError("log of non-positive value")

    def bw(g):
        _accumulate(a, g / a.data)

    return _make(np.log(a.data), (a,), "log", bw)


def exp(a: Tensor) -> Tensor:
    y = np.exp(a.data)

    def bw(g):
        _accumulate(a, g * y)

    return _make(y, (a,), "exp", bw)


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    z = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=axis, keepdims=True)

    def bw(g):
        _accumulate(a, y * (g - (g * y).sum(axis=axis, keepdims=True)))

    return _make(y, (a,), "softmax", bw)


# ---------------------------------------------------------------- linear algebra

def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")

    def bw(g):
        if a.requires_grad:
            _accumulate(a, g @ b.data.T)
        if b.requires_grad:
            _accumulate(b, a.data.T @ g)

    return _make(a.data @ b.data, (a, b), "matmul", bw)


def sparse_matmul(m: sp.spmatrix, x: Tensor) -> Tensor:
    """Constant sparse matrix times a dense 2-D tensor."""
    m = sp.csr_matrix(m)
    if x.ndim != 2 or m.shape[1] != x.shape[0]:
        raise ShapeError(f"sparse_matmul: incompatible shapes {m.shape} and {x.shape}")
    mt = m.T.tocsr()

    def bw(g):
        _accumulate(x, np.asarray(mt @ g))

    return _make(np.asarray(m @ x.data), (x,), "sparse_matmul", bw)


# ---------------------------------------------------------------- structure

def concat(tensors: Sequence, axis: int = -1) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    if not ts:
        raise ShapeError("concat: empty input")
    nd = ts[0].ndim
    ax = axis % nd
    for t in ts:
        if t.ndim != nd or any(t.shape[k] != ts[0].shape[k] for k in range(nd) if k != ax):
            raise ShapeError(
                f"concat: incompatible shapes {[tt.shape for tt in ts]} along axis {axis}"
            )
    sizes = [t.shape[ax] for t in ts]
    bounds = np.cumsum([0] + sizes)

    def bw(g):
        for t, lo, hi in zip(ts, bounds[:-1], bounds[1:]):
            if t.requires_grad:
                idx = [slice(None)] * nd
                idx[ax] = slice(lo, hi)
                _accumulate(t, g[tuple(idx)])

    return _make(np.concatenate([t.data for t in ts], axis=ax), ts, "concat", bw)


def slice_(a: Tensor, key) -> Tensor:
    """Basic (view-style) indexing: ints, slices, Ellipsis."""
    try:
        y = a.data[key].copy()
    except IndexError as exc:
        raise ShapeError(f"slice: {exc} for shape {a.shape}") from None

    def bw(g):
        full = np.zeros_like(a.data)
        full[key] += g
        _accumulate(a, full)

    return _make(y, (a,), "slice", bw)


def take(a: Tensor, idx) -> Tensor:
    """Gather rows of a 2-D tensor; ``idx`` may have any integer shape."""
    idx = np.asarray(idx, dtype=np.int64)
    if a.ndim != 2:
        raise ShapeError(f"take: expected 2-D tensor, got shape {a.shape}")
    if idx.size and (idx.min() < 0 or idx.max() >= a.shape[0]):
        raise ShapeError(f"take: index out of range for shape {a.shape}")
    y = a.data[idx]

    def bw(g):
        full = np.zeros_like(a.data)
        kernels.scatter_add_rows(full, idx.reshape(-1), g.reshape(-1, a.shape[1]))
        _accumulate(a, full)

    return _make(y, (a,), "take", bw)


def reshape(a: Tensor, shape) -> Tensor:
    try:
        y = a.data.reshape(shape)
    except ValueError:
        raise ShapeError(f"reshape: cannot reshape {a.shape} to {shape}") from None

    def bw(g):
        _accumulate(a, g.reshape(a.shape))

    return _make(y.copy(), (a,), "reshape", bw)


def mean_rows(a: Tensor) -> Tensor:
    """Mean over the leading axis: [n, d] -> [d]."""
    if a.ndim < 1 or a.shape[0] == 0:
        raise ShapeError(f"mean_rows: need at least one row, got shape {a.shape}")
    n = a.shape[0]

    def bw(g):
        _accumulate(a, np.broadcast_to(g / n, a.shape))

    return _make(a.data.mean(axis=0), (a,), "mean_rows", bw)


def sum_(a: Tensor) -> Tensor:
    def bw(g):
        _accumulate(a, np.broadcast_to(g, a.shape))

    return _make(np.array(a.data.sum()), (a,), "sum", bw)


def mean(a: Tensor) -> Tensor:
    n = a.data.size

    def bw(g):
        _accumulate(a, np.broadcast_to(g / n, a.shape))

    return _make(np.array(a.data.mean()), (a,), "mean", bw)


# ---------------------------------------------------------------- fused ops

def lstm(x: Tensor, wx: Tensor, wh: Tensor, b: Tensor) -> Tensor:
    """Final hidden state of an LSTM run over ``x`` [T, B, D] from zero state.

    Gate blocks in ``wx`` [D, 4H], ``wh`` [H, 4H] and ``b`` [4H] are ordered
    (input, forget, cell, output).
    """
    if x.ndim != 3:
        raise ShapeError(f"lstm: expected input [T, B, D], got {x.shape}")
    D = x.shape[2]
    H = wh.shape[0]
    if wx.shape != (D, 4 * H) or wh.shape != (H, 4 * H) or b.shape != (4 * H,):
        raise ShapeError(
            f"lstm: weight shapes {wx.shape}, {wh.shape}, {b.shape} do not fit input {x.shape}"
        )
    h, c, tc, gates = kernels.lstm_forward(x.data, wx.data, wh.data, b.data)

    def bw(g):
        dx, dwx, dwh, db = kernels.lstm_backward(g, x.data, wx.data, wh.data, h, c, tc, gates)
        _accumulate(x, dx)
        _accumulate(wx, dwx)
        _accumulate(wh, dwh)
        _accumulate(b, db)

    return _make(h[-1].copy(), (x, wx, wh, b), "lstm", bw)


def cross_entropy(logits: Tensor, targets) -> Tensor:
    """Mean negative log-likelihood of integer ``targets`` under softmax(logits)."""
    targets = np.asarray(targets, dtype=np.int64)
    if logits.ndim != 2:
        raise ShapeError(f"cross_entropy: logits must be [batch, classes], got {logits.shape}")
    n, k = logits.shape
    if targets.shape != (n,):
        raise ShapeError(f"cross_entropy: {n} logit rows but targets shape {targets.shape}")
    if n == 0:
        raise ShapeError("cross_entropy: empty batch")
    if np.any((targets < 0) | (targets >= k)):
        raise DomainError(f"cross_entropy: targets must lie in [0, {k})")
    z = logits.data - logits.data.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1))
    rows = np.arange(n)
    loss = np.mean(lse - z[rows, targets])

    def bw(g):
        p = np.exp(z - lse[:, None])
        p[rows, targets] -= 1.0
        _accumulate(logits, g * p / n)

    return _make(np.array(loss), (logits,), "cross_entropy", bw)


# ---------------------------------------------------------------- backward

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
        for p in reversed(node._parents):
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def backward(loss: Tensor) -> None:
    """Populate ``.grad`` on every requires_grad tensor reachable from ``loss``.

    Gradients accumulate into existing ``.grad`` arrays of leaves, so call
    ``zero_grad`` between steps.
    """
    if loss.data.size != 1:
        raise DomainError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        return
    order = _topo_order(loss)
    # interior grads are transient; leaves keep theirs
    interior = [t for t in order if t._parents]
    for t in interior:
        t.grad = None
    loss.grad = np.ones_like(loss.data)
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)
