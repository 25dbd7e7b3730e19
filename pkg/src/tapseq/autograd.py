"""Define-by-run reverse-mode autodiff over dense float64 arrays.

Each op returns a new :class:`Tensor` that remembers its parents and a
closure propagating the upstream gradient to them. Calling ``backward`` on a
scalar walks that implicit graph once in reverse topological order, so a
tensor consumed by several ops accumulates one gradient contribution per
consumer. Graphs are rebuilt every forward pass; a graph and its tensors
belong to a single thread from forward through backward.

All arithmetic is float64. Rank 0..2 covers everything the model needs; there
is no broadcasting beyond the documented column cases.
"""

import contextlib
import threading

import numpy as np

from . import kernels
from .errors import ContractError, DimensionError


class _GradMode(threading.local):
    # thread-local so fanned-out evaluation workers can disable recording
    # without racing each other or the training thread
    enabled = True


_grad_mode = _GradMode()


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block (forward values only)."""
    saved = _grad_mode.enabled
    _grad_mode.enabled = False
    try:
        yield
    finally:
        _grad_mode.enabled = saved


class Tensor:
    """A float64 array plus an optional gradient of the same shape."""

    __slots__ = ("data", "grad", "requires_grad", "name", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, name=""):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self.name = name
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    def item(self):
        return float(self.data)

    def zero_grad(self):
        self.grad = None

    def detach(self):
        return Tensor(self.data.copy())

    def backward(self):
        backward(self)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad}, name={self.name!r})"

    # operator sugar; Tensor op Tensor is elementwise, Tensor op float scales/shifts
    def __add__(self, other):
        if isinstance(other, Tensor):
            return add(self, other)
        return shift(self, float(other))

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Tensor):
            return add(self, scale(other, -1.0))
        return shift(self, -float(other))

    def __mul__(self, other):
        if isinstance(other, Tensor):
            return mul(self, other)
        return scale(self, float(other))

    __rmul__ = __mul__

    def __neg__(self):
        return scale(self, -1.0)


def _make(data, parents, backward_fn, name=""):
    """Wire a result tensor into the graph if any parent participates."""
    out = Tensor(data, name=name)
    if _grad_mode.enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward_fn
    return out


def _accum(t, g):
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def backward(loss):
    """Populate dloss/dtensor on every requires_grad tensor reachable from
    ``loss``. The loss must be a scalar node."""
    if loss.data.size != 1:
        raise ContractError(
            f"backward: loss must be scalar, got shape {loss.data.shape}")
    # iterative post-order topological sort over the parent links
    order = []
    visited = set()
    stack = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in visited:
                stack.append((p, False))
    loss.grad = np.ones_like(loss.data)
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


def _require_same_shape(op, a, b):
    if a.data.shape != b.data.shape:
        raise DimensionError(f"{op}: shapes {a.data.shape} and {b.data.shape} differ")


# ---------------------------------------------------------------------------
# elementwise and reduction ops
# ---------------------------------------------------------------------------

def add(a, b):
    _require_same_shape("add", a, b)

    def back(g):
        _accum(a, g)
        _accum(b, g)

    return _make(a.data + b.data, (a, b), back)


def mul(a, b):
    _require_same_shape("mul", a, b)

    def back(g):
        _accum(a, g * b.data)
        _accum(b, g * a.data)

    return _make(a.data * b.data, (a, b), back)


def scale(a, k):
    def back(g):
        _accum(a, g * k)

    return _make(a.data * k, (a,), back)


def shift(a, k):
    def back(g):
        _accum(a, g)

    return _make(a.data + k, (a,), back)


def tsum(a):
    """Sum of all elements, as a 0-d scalar tensor."""

    def back(g):
        _accum(a, np.broadcast_to(g, a.data.shape))

    return _make(np.sum(a.data), (a,), back)


def mean_cols(a):
    """Column mean of a (d, T) matrix -> (d,) vector."""
    if a.data.ndim != 2:
        raise DimensionError(f"mean_cols: expected rank 2, got shape {a.data.shape}")
    n = a.data.shape[1]

    def back(g):
        _accum(a, np.repeat(g[:, None] / n, n, axis=1))

    return _make(a.data.mean(axis=1), (a,), back)


_SIG_LO = np.nextafter(0.0, 1.0)
_SIG_HI = np.nextafter(1.0, 0.0)


def sigmoid(a):
    """Elementwise logistic; outputs strictly inside (0, 1).

    Saturated values are nudged to the nearest representable neighbour of
    0 and 1 so the open-interval contract survives rounding.
    """
    x = a.data
    e = np.exp(-np.abs(x))
    y = np.clip(np.where(x >= 0.0, 1.0 / (1.0 + e), e / (1.0 + e)), _SIG_LO, _SIG_HI)

    def back(g):
        _accum(a, g * y * (1.0 - y))

    return _make(y, (a,), back)


def tanh(a):
    y = np.tanh(a.data)

    def back(g):
        _accum(a, g * (1.0 - y * y))

    return _make(y, (a,), back)


_NORM_EPS = 1e-12


def l2_normalize(a):
    """x / max(||x||, 1e-12) along axis 0 for a vector or each column of a
    matrix. The guard makes the op total; a zero vector maps to itself."""
    x = a.data
    if x.ndim == 1:
        r = np.linalg.norm(x)
        r_eff = max(r, _NORM_EPS)
        y = x / r_eff

        def back(g):
            if r > _NORM_EPS:
                _accum(a, (g - y * np.dot(y, g)) / r_eff)
            else:
                _accum(a, g / r_eff)

        return _make(y, (a,), back)
    if x.ndim == 2:
        r = np.sqrt((x * x).sum(axis=0))
        r_eff = np.maximum(r, _NORM_EPS)
        y = x / r_eff

        def back(g):
            proj = (y * g).sum(axis=0)
            full = (g - y * proj) / r_eff
            flat = g / r_eff
            _accum(a, np.where(r > _NORM_EPS, full, flat))

        return _make(y, (a,), back)
    raise DimensionError(f"l2_normalize: expected rank 1 or 2, got shape {x.shape}")


# ---------------------------------------------------------------------------
# shape ops
# ---------------------------------------------------------------------------

def concat(a, b):
    """Concatenate two rank-1 tensors."""
    if a.data.ndim != 1 or b.data.ndim != 1:
        raise DimensionError(
            f"concat: expected two rank-1 tensors, got shapes {a.data.shape} and {b.data.shape}")
    na = a.data.shape[0]

    def back(g):
        _accum(a, g[:na])
        _accum(b, g[na:])

    return _make(np.concatenate([a.data, b.data]), (a, b), back)


def concat_rows(a, b):
    """Stack two matrices with equal column counts along axis 0."""
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[1]:
        raise DimensionError(
            f"concat_rows: shapes {a.data.shape} and {b.data.shape} do not stack")
    na = a.data.shape[0]

    def back(g):
        _accum(a, g[:na])
        _accum(b, g[na:])

    return _make(np.concatenate([a.data, b.data], axis=0), (a, b), back)


def repeat_cols(a, k):
    """Repeat each column k times: columns (c0 c0 .. c1 c1 ..)."""
    n = a.data.shape[1]

    def back(g):
        _accum(a, g.reshape(a.data.shape[0], n, k).sum(axis=2))

    return _make(np.repeat(a.data, k, axis=1), (a,), back)


def tile_cols(a, k):
    """Tile the whole column block k times: columns (c0 c1 .. c0 c1 ..)."""
    n = a.data.shape[1]

    def back(g):
        _accum(a, g.reshape(a.data.shape[0], k, n).sum(axis=1))

    return _make(np.tile(a.data, (1, k)), (a,), back)


def reshape(a, shape):
    old = a.data.shape

    def back(g):
        _accum(a, g.reshape(old))

    return _make(a.data.reshape(shape), (a,), back)


def transpose(a):
    def back(g):
        _accum(a, np.ascontiguousarray(g.T))

    return _make(np.ascontiguousarray(a.data.T), (a,), back)


def flip_cols(a):
    def back(g):
        _accum(a, g[:, ::-1])

    return _make(np.ascontiguousarray(a.data[:, ::-1]), (a,), back)


def stack(scalars):
    """Stack 0-d scalar tensors into a vector."""
    parts = tuple(scalars)

    def back(g):
        for i, s in enumerate(parts):
            _accum(s, np.asarray(g[i]))

    return _make(np.array([float(s.data) for s in parts]), parts, back)


def pick(v, i):
    """Select element i of a vector as a scalar."""
    if v.data.ndim != 1:
        raise DimensionError(f"pick: expected rank 1, got shape {v.data.shape}")

    def back(g):
        contrib = np.zeros_like(v.data)
        contrib[i] = g
        _accum(v, contrib)

    return _make(np.asarray(v.data[i]), (v,), back)


# ---------------------------------------------------------------------------
# linear algebra
# ---------------------------------------------------------------------------

def matmul(a, b):
    """2-d matrix product. The forward reduction order is column-stable
    (see kernels.matmul), so slicing a batch reproduces per-column results
    bit for bit."""
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise DimensionError(
            f"matmul: shapes {a.data.shape} and {b.data.shape} do not conform")
    y = kernels.matmul(a.data, b.data)

    def back(g):
        _accum(a, g @ b.data.T)
        _accum(b, a.data.T @ g)

    return _make(y, (a, b), back)


def linear(x, w, b):
    """Affine map w @ x + b for a single vector or a (in, n) column batch."""
    if w.data.ndim != 2:
        raise DimensionError(f"linear: weight must be rank 2, got {w.data.shape}")
    out_dim, in_dim = w.data.shape
    if b.data.shape != (out_dim,):
        raise DimensionError(
            f"linear: bias shape {b.data.shape} does not match weight rows {out_dim}")
    vector_input = x.data.ndim == 1
    if vector_input:
        if x.data.shape[0] != in_dim:
            raise DimensionError(
                f"linear: input extent {x.data.shape[0]} != weight cols {in_dim}")
        x2 = x.data[:, None]
    else:
        if x.data.ndim != 2 or x.data.shape[0] != in_dim:
            raise DimensionError(
                f"linear: input shape {x.data.shape} != weight cols {in_dim}")
        x2 = x.data
    y2 = kernels.matmul(w.data, x2) + b.data[:, None]
    y = y2[:, 0] if vector_input else y2

    def back(g):
        g2 = g[:, None] if vector_input else g
        _accum(w, g2 @ x2.T)
        _accum(b, g2.sum(axis=1))
        gx = w.data.T @ g2
        _accum(x, gx[:, 0] if vector_input else gx)

    return _make(y, (x, w, b), back)


def log_softmax(v):
    """Log of softmax over a rank-1 tensor, stable under large scores."""
    if v.data.ndim != 1:
        raise DimensionError(f"log_softmax: expected rank 1, got {v.data.shape}")
    m = v.data.max()
    z = v.data - m
    lse = m + np.log(np.exp(z).sum())
    y = v.data - lse

    def back(g):
        _accum(v, g - np.exp(y) * g.sum())

    return _make(y, (v,), back)


def dot(a, b):
    """Inner product of two vectors, as a scalar tensor."""
    if a.data.ndim != 1 or b.data.ndim != 1:
        raise DimensionError(
            f"dot: expected rank-1 tensors, got {a.data.shape} and {b.data.shape}")
    _require_same_shape("dot", a, b)

    def back(g):
        _accum(a, g * b.data)
        _accum(b, g * a.data)

    return _make(np.dot(a.data, b.data), (a, b), back)


def lstm_sequence(x, wx, wh, b):
    """Run an LSTM over the columns of a (d_in, T) tensor; returns (H, T).

    Initial hidden and cell states are zero; the heavy lifting lives in the
    kernels module so both backends share one recurrence.
    """
    if x.data.ndim != 2:
        raise DimensionError(f"lstm_sequence: input must be rank 2, got {x.data.shape}")
    d_in = x.data.shape[0]
    four_h, d_w = wx.data.shape
    hidden = wh.data.shape[1]
    if d_w != d_in or four_h != 4 * hidden or wh.data.shape[0] != four_h \
            or b.data.shape != (four_h,):
        raise DimensionError(
            f"lstm_sequence: weights {wx.data.shape}/{wh.data.shape}/{b.data.shape} "
            f"do not fit input extent {d_in}")
    xt = np.ascontiguousarray(x.data.T)
    hs, cs, gates = kernels.lstm_forward(xt, wx.data, wh.data, b.data)

    def back(g):
        dh_out = np.ascontiguousarray(g.T)
        dx, dwx, dwh, db = kernels.lstm_backward(
            dh_out, xt, wx.data, wh.data, hs, cs, gates)
        _accum(x, dx.T)
        _accum(wx, dwx)
        _accum(wh, dwh)
        _accum(b, db)

    return _make(np.ascontiguousarray(hs.T), (x, wx, wh, b), back)
