"""Hot numeric kernels with two interchangeable backends.

Every kernel here is written as plain nopython-compatible NumPy so the same
source compiles under numba's ``@njit`` and also runs as-is on the pure-NumPy
fallback. The active backend is picked once at import time from the
``TAP_BACKEND`` environment variable (``numba`` or ``numpy``); when unset,
numba is used if it imports, NumPy otherwise.

``matmul`` is the one kernel with a semantic guarantee beyond speed: for a
fixed output element it always reduces over the shared axis in ascending
order, so column j of a batched product is bit-identical to the product
against column j alone (and the two backends agree bit for bit). BLAS does
not promise that, which is why callers needing batched-vs-looped bit
equality must come through here.
"""

import os

import numpy as np


# ---------------------------------------------------------------------------
# kernel bodies (backend-agnostic source)
# ---------------------------------------------------------------------------

def _matmul(a, b):
    # (n,k) @ (k,m); reduction over k runs in ascending order per element
    n, k = a.shape
    m = b.shape[1]
    out = np.zeros((n, m))
    for i in range(n):
        for p in range(k):
            aip = a[i, p]
            for j in range(m):
                out[i, j] += aip * b[p, j]
    return out


def _matmul_numpy(a, b):
    # rank-1 update ladder, not BLAS/einsum: those reorder the k-reduction
    # depending on operand shape, breaking bitwise column stability
    out = np.zeros((a.shape[0], b.shape[1]))
    for p in range(a.shape[1]):
        out += a[:, p, None] * b[p, None, :]
    return out


def _lstm_forward(x, wx, wh, b):
    """One-direction LSTM over a whole sequence.

    x: (T, d_in) time-major frames; wx: (4H, d_in); wh: (4H, H); b: (4H,).
    Gate block order along the 4H axis is input, forget, cell, output.
    Returns hs (T, H), cs (T, H) and the post-activation gates (T, 4H),
    which the backward kernel consumes. Initial hidden and cell states are
    zero.
    """
    steps = x.shape[0]
    hidden = wh.shape[1]
    hs = np.zeros((steps, hidden))
    cs = np.zeros((steps, hidden))
    gates = np.zeros((steps, 4 * hidden))
    h = np.zeros(hidden)
    c = np.zeros(hidden)
    for t in range(steps):
        z = np.dot(wx, x[t]) + np.dot(wh, h) + b
        # overflow-free logistic on the i,f gates: exp of non-positive args only
        zif = z[0:2 * hidden]
        e = np.exp(-np.abs(zif))
        sig = np.where(zif >= 0.0, 1.0 / (1.0 + e), e / (1.0 + e))
        gi = sig[0:hidden]
        gf = sig[hidden:2 * hidden]
        gc = np.tanh(z[2 * hidden:3 * hidden])
        zo = z[3 * hidden:4 * hidden]
        eo = np.exp(-np.abs(zo))
        go = np.where(zo >= 0.0, 1.0 / (1.0 + eo), eo / (1.0 + eo))
        c = gf * c + gi * gc
        h = go * np.tanh(c)
        gates[t, 0:hidden] = gi
        gates[t, hidden:2 * hidden] = gf
        gates[t, 2 * hidden:3 * hidden] = gc
        gates[t, 3 * hidden:4 * hidden] = go
        cs[t] = c
        hs[t] = h
    return hs, cs, gates


def _lstm_backward(dh_out, x, wx, wh, hs, cs, gates):
    """Backprop through _lstm_forward.

    dh_out: (T, H) upstream gradient on hs. Returns gradients for x, wx,
    wh and b. Recurrent carries (dh, dc) start at zero past the last step.
    """
    steps, hidden = dh_out.shape
    dx = np.zeros_like(x)
    dwx = np.zeros_like(wx)
    dwh = np.zeros_like(wh)
    db = np.zeros(4 * hidden)
    dh_next = np.zeros(hidden)
    dc_next = np.zeros(hidden)
    dz = np.zeros(4 * hidden)
    for t in range(steps - 1, -1, -1):
        gi = gates[t, 0:hidden]
        gf = gates[t, hidden:2 * hidden]
        gc = gates[t, 2 * hidden:3 * hidden]
        go = gates[t, 3 * hidden:4 * hidden]
        if t > 0:
            c_prev = cs[t - 1]
            h_prev = hs[t - 1]
        else:
            c_prev = np.zeros(hidden)
            h_prev = np.zeros(hidden)
        tc = np.tanh(cs[t])
        dh = dh_out[t] + dh_next
        do = dh * tc
        dc = dh * go * (1.0 - tc * tc) + dc_next
        di = dc * gc
        df = dc * c_prev
        dg = dc * gi
        dz[0:hidden] = di * gi * (1.0 - gi)
        dz[hidden:2 * hidden] = df * gf * (1.0 - gf)
        dz[2 * hidden:3 * hidden] = dg * (1.0 - gc * gc)
        dz[3 * hidden:4 * hidden] = do * go * (1.0 - go)
        dwx += np.outer(dz, x[t])
        dwh += np.outer(dz, h_prev)
        db += dz
        dx[t] = np.dot(wx.T, dz)
        dh_next = np.dot(wh.T, dz)
        dc_next = dc * gf
    return dx, dwx, dwh, db


def _dtw_table(cost):
    """Cumulative DP table: entry (i,j) is the best monotone path cost from
    (0,0) to (i,j), with first row/column accumulating."""
    n = cost.shape[0]
    m = cost.shape[1]
    table = np.zeros((n, m))
    table[0, 0] = cost[0, 0]
    for j in range(1, m):
        table[0, j] = cost[0, j] + table[0, j - 1]
    for i in range(1, n):
        table[i, 0] = cost[i, 0] + table[i - 1, 0]
        for j in range(1, m):
            best = table[i - 1, j - 1]
            if table[i - 1, j] < best:
                best = table[i - 1, j]
            if table[i, j - 1] < best:
                best = table[i, j - 1]
            table[i, j] = cost[i, j] + best
    return table


def _dtw_backtrack(table):
    """Recover the optimal path from a DP table as 0-based (i,j) rows.

    Ties prefer the diagonal step, then the vertical (previous row), then
    the horizontal, so aligning a sequence with itself yields the pure
    diagonal.
    """
    n = table.shape[0]
    m = table.shape[1]
    rev = np.zeros((n + m - 1, 2), dtype=np.int64)
    i = n - 1
    j = m - 1
    k = 0
    rev[k, 0] = i
    rev[k, 1] = j
    while i > 0 or j > 0:
        if i == 0:
            j -= 1
        elif j == 0:
            i -= 1
        else:
            d = table[i - 1, j - 1]
            v = table[i - 1, j]
            h = table[i, j - 1]
            if d <= v and d <= h:
                i -= 1
                j -= 1
            elif v <= h:
                i -= 1
            else:
                j -= 1
        k += 1
        rev[k, 0] = i
        rev[k, 1] = j
    path = np.zeros((k + 1, 2), dtype=np.int64)
    for t in range(k + 1):
        path[t, 0] = rev[k - t, 0]
        path[t, 1] = rev[k - t, 1]
    return path


_NUMPY_KERNELS = {
    "matmul": _matmul_numpy,
    "lstm_forward": _lstm_forward,
    "lstm_backward": _lstm_backward,
    "dtw_table": _dtw_table,
    "dtw_backtrack": _dtw_backtrack,
}


def _compile_numba():
    from numba import njit

    jit = njit(cache=True, fastmath=False)
    return {
        "matmul": jit(_matmul),
        "lstm_forward": jit(_lstm_forward),
        "lstm_backward": jit(_lstm_backward),
        "dtw_table": jit(_dtw_table),
        "dtw_backtrack": jit(_dtw_backtrack),
    }


def load_kernels(backend):
    """Return the kernel table for an explicit backend name."""
    if backend == "numpy":
        return dict(_NUMPY_KERNELS)
    if backend == "numba":
        return _compile_numba()
    raise ValueError(f"unknown kernel backend {backend!r}")


def _pick_backend():
    requested = os.environ.get("TAP_BACKEND", "").strip().lower()
    if requested == "numpy":
        return "numpy", dict(_NUMPY_KERNELS)
    if requested == "numba":
        return "numba", _compile_numba()
    if requested:
        raise ValueError(f"TAP_BACKEND must be 'numba' or 'numpy', got {requested!r}")
    try:
        return "numba", _compile_numba()
    except ImportError:
        return "numpy", dict(_NUMPY_KERNELS)


BACKEND, _ACTIVE = _pick_backend()

matmul = _ACTIVE["matmul"]
lstm_forward = _ACTIVE["lstm_forward"]
lstm_backward = _ACTIVE["lstm_backward"]
dtw_table = _ACTIVE["dtw_table"]
dtw_backtrack = _ACTIVE["dtw_backtrack"]


def active_backend():
    return BACKEND


def warm_up():
    """Trigger JIT compilation (a no-op on the NumPy backend)."""
    x = np.zeros((2, 3))
    wx = np.zeros((8, 3))
    wh = np.zeros((8, 2))
    b = np.zeros(8)
    hs, cs, gates = lstm_forward(x, wx, wh, b)
    lstm_backward(np.ones_like(hs), x, wx, wh, hs, cs, gates)
    t = dtw_table(np.ones((3, 3)))
    dtw_backtrack(t)
    matmul(np.ones((2, 2)), np.ones((2, 2)))
