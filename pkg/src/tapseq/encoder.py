"""Per-frame feature extraction: a small MLP applied independently to every
column of a sampled sequence.

This is the trainable stand-in for a heavyweight image backbone; anything
mapping a raw frame to a D_f vector satisfies the same contract. Parameters
live in the ``theta`` namespace.
"""

import numpy as np

from . import autograd as ag
from .errors import DimensionError


def init_encoder(store, d_raw, hidden_widths, d_f, rng, frozen=False):
    """Register encoder weights under ``theta`` and return their names.

    Layer widths run d_raw -> hidden_widths... -> d_f with tanh between
    layers (none after the last). Weights are uniform in +-1/sqrt(fan_in),
    biases zero.
    """
    widths = [d_raw] + list(hidden_widths) + [d_f]
    names = []
    for k in range(len(widths) - 1):
        fan_in, fan_out = widths[k], widths[k + 1]
        bound = 1.0 / np.sqrt(fan_in)
        w = rng.uniform(-bound, bound, size=(fan_out, fan_in))
        b = np.zeros(fan_out)
        store.register(f"theta.fc{k}.w", w, frozen=frozen)
        store.register(f"theta.fc{k}.b", b, frozen=frozen)
        names.append(f"theta.fc{k}")
    return names


def encoder_layer_count(store):
    k = 0
    while f"theta.fc{k}.w" in store:
        k += 1
    return k


def encode(sampled, store):
    """Map a (d_raw, T) sampled sequence to (d_f, T) features.

    The same affine/tanh stack is applied to each column, so permuting input
    columns permutes output columns identically.
    """
    n_layers = encoder_layer_count(store)
    if n_layers == 0:
        raise DimensionError("encode: no encoder layers registered under theta")
    d_raw = store["theta.fc0.w"].data.shape[1]
    frames = sampled.frames if isinstance(sampled.frames, np.ndarray) else sampled.frames
    if frames.shape[0] != d_raw:
        raise DimensionError(
            f"encode: input dim {frames.shape[0]} != encoder input {d_raw}")
    h = ag.Tensor(frames)
    for k in range(n_layers):
        h = ag.linear(h, store[f"theta.fc{k}.w"], store[f"theta.fc{k}.b"])
        if k < n_layers - 1:
            h = ag.tanh(h)
    return h
