"""Finite-difference verification of the analytic gradients.

``finite_diff_check`` is the generic oracle; ``run_check_suite`` bundles the
named per-op checks plus the end-to-end episode loss check that the CLI's
``gradcheck`` command reports on.
"""

import numpy as np

from . import autograd as ag
from .params import ParamStore


def finite_diff_check(f, params, n_coords, step, rng):
    """Max relative error between analytic and central-difference gradients.

    ``f`` maps the store to a float and must be deterministic. The analytic
    gradient is taken from one recorded forward/backward pass; then
    ``n_coords`` coordinates are drawn uniformly over all parameters and
    probed with (f(p+h e) - f(p-h e)) / 2h. The relative error denominator
    is max(|analytic|, |numeric|, 1e-12).
    """
    params.zero_grad()
    loss = f(params)
    ag.backward(loss)
    analytic = {n: (t.grad.copy() if t.grad is not None else np.zeros_like(t.data))
                for n, t in params.items()}
    params.zero_grad()

    names = params.names()
    sizes = np.array([params[n].data.size for n in names])
    total = int(sizes.sum())
    worst = 0.0
    for _ in range(n_coords):
        flat = int(rng.integers(total))
        k = int(np.searchsorted(np.cumsum(sizes), flat, side="right"))
        off = flat - int(np.concatenate([[0], np.cumsum(sizes)])[k])
        t = params[names[k]]
        original = t.data.flat[off]
        with ag.no_grad():
            t.data.flat[off] = original + step
            up = float(f(params).data)
            t.data.flat[off] = original - step
            down = float(f(params).data)
        t.data.flat[off] = original
        numeric = (up - down) / (2.0 * step)
        exact = analytic[names[k]].flat[off]
        denom = max(abs(exact), abs(numeric), 1e-12)
        worst = max(worst, abs(exact - numeric) / denom)
    return worst


def _store_from(arrays):
    store = ParamStore()
    for name, arr in arrays.items():
        store.register(name, arr)
    return store


def _op_checks(rng):
    """Named (name, f, store, tolerance) cases, one per differentiable op.

    Every scalar f contracts the op output against a fixed random weight so
    the whole Jacobian is exercised.
    """
    cases = []

    def contract(make_out, store):
        w = None

        def f(p):
            nonlocal w
            out = make_out(p)
            if w is None:
                w = rng.standard_normal(out.data.shape)
            return ag.tsum(ag.mul(out, ag.Tensor(w)))

        return f, store

    s = _store_from({"x": rng.standard_normal(7), "w": rng.standard_normal((4, 7)),
                     "b": rng.standard_normal(4)})
    cases.append(("linear_vector",
                  *contract(lambda p: ag.linear(p["x"], p["w"], p["b"]), s), 1e-6))

    s = _store_from({"x": rng.standard_normal((5, 6)), "w": rng.standard_normal((3, 5)),
                     "b": rng.standard_normal(3)})
    cases.append(("linear_batched",
                  *contract(lambda p: ag.linear(p["x"], p["w"], p["b"]), s), 1e-6))

    s = _store_from({"x": rng.standard_normal((4, 5))})
    cases.append(("sigmoid", *contract(lambda p: ag.sigmoid(p["x"]), s), 1e-6))
    s = _store_from({"x": rng.standard_normal((4, 5))})
    cases.append(("tanh", *contract(lambda p: ag.tanh(p["x"]), s), 1e-6))

    s = _store_from({"x": rng.standard_normal(6)})
    cases.append(("l2_normalize_vector",
                  *contract(lambda p: ag.l2_normalize(p["x"]), s), 1e-6))
    s = _store_from({"x": rng.standard_normal((5, 4))})
    cases.append(("l2_normalize_columns",
                  *contract(lambda p: ag.l2_normalize(p["x"]), s), 1e-6))

    s = _store_from({"a": rng.standard_normal(3), "b": rng.standard_normal(5)})
    cases.append(("concat", *contract(lambda p: ag.concat(p["a"], p["b"]), s), 1e-6))

    s = _store_from({"a": rng.standard_normal((4, 3)), "b": rng.standard_normal((3, 6))})
    cases.append(("matmul", *contract(lambda p: ag.matmul(p["a"], p["b"]), s), 1e-6))

    s = _store_from({"a": rng.standard_normal((3, 5))})
    cases.append(("reshape_transpose_flip",
                  *contract(lambda p: ag.flip_cols(ag.transpose(ag.reshape(p["a"], (5, 3)))), s),
                  1e-6))

    s = _store_from({"x": rng.standard_normal((3, 4))})
    cases.append(("repeat_tile_cols",
                  *contract(lambda p: ag.concat_rows(ag.repeat_cols(p["x"], 4),
                                                     ag.tile_cols(p["x"], 4)), s), 1e-6))

    s = _store_from({"v": rng.standard_normal(5)})
    cases.append(("log_softmax_pick",
                  lambda p: ag.pick(ag.log_softmax(p["v"]), 2), s, 1e-6))

    s = _store_from({"a": rng.standard_normal((4, 6))})
    cases.append(("mean_cols", *contract(lambda p: ag.mean_cols(p["a"]), s), 1e-6))

    s = _store_from({
        "x": rng.standard_normal((3, 5)),
        "wx": rng.standard_normal((16, 3)) * 0.5,
        "wh": rng.standard_normal((16, 4)) * 0.5,
        "b": rng.standard_normal(16) * 0.5,
    })
    cases.append(("lstm_sequence",
                  *contract(lambda p: ag.lstm_sequence(p["x"], p["wx"], p["wh"], p["b"]), s),
                  1e-5))
    return cases


def run_check_suite(rng, n_coords=24, step=1e-5, episode_config=None):
    """Run every named check; returns [(name, max_rel_err, tolerance)].

    Model-level and episode-level checks are appended by the caller (the CLI
    command) to avoid a circular import here.
    """
    results = []
    for name, f, store, tol in _op_checks(rng):
        err = finite_diff_check(f, store, n_coords=n_coords, step=step, rng=rng)
        results.append((name, err, tol))
    return results
