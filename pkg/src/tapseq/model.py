"""The learned sequence-similarity model.

Three trainable pieces: a per-frame encoder (``theta``, see encoder.py), a
bidirectional LSTM that gives every time step whole-sequence context
(``alpha``), and an alignment head (``beta``) scoring every pair of context
columns in (0,1). The similarity of two sequences is the sum over all T*T
position pairs of predicted alignment score times cosine similarity of the
context vectors. No ordering constraint is imposed on the alignment scores.

The average-pooling similarity at the bottom is the ablation baseline: it
collapses time before comparing, so it cannot see frame order.
"""

from dataclasses import dataclass

import numpy as np

from . import autograd as ag
from . import encoder as enc
from .errors import DimensionError
from .params import ParamStore


@dataclass
class ModelConfig:
    """Shape hyperparameters; defaults are the desk-scale configuration."""

    d_raw: int = 16
    enc_widths: tuple = (64,)
    d_f: int = 32
    lstm_hidden: int = 32
    head_widths: tuple = (64, 32, 8, 1)
    frames: int = 6
    similarity: str = "tap"  # "tap" or "avgpool"
    freeze_encoder: bool = False

    @property
    def d_g(self):
        return 2 * self.lstm_hidden


def _init_lstm(store, prefix, d_in, hidden, rng):
    bound_x = 1.0 / np.sqrt(d_in)
    bound_h = 1.0 / np.sqrt(hidden)
    wx = rng.uniform(-bound_x, bound_x, size=(4 * hidden, d_in))
    wh = rng.uniform(-bound_h, bound_h, size=(4 * hidden, hidden))
    b = np.zeros(4 * hidden)
    b[hidden:2 * hidden] = 1.0  # forget-gate bias helps gradient flow
    store.register(f"{prefix}.wx", wx)
    store.register(f"{prefix}.wh", wh)
    store.register(f"{prefix}.b", b)


def init_params(config, rng):
    """Build the ParamStore for a model configuration.

    Draw order is fixed (theta, then alpha, then beta) so a seed pins every
    weight. The avgpool variant registers only the encoder.
    """
    store = ParamStore()
    enc.init_encoder(store, config.d_raw, config.enc_widths, config.d_f, rng,
                     frozen=config.freeze_encoder)
    if config.similarity == "avgpool":
        return store
    _init_lstm(store, "alpha.fwd", config.d_f, config.lstm_hidden, rng)
    _init_lstm(store, "alpha.bwd", config.d_f, config.lstm_hidden, rng)
    widths = [2 * config.d_g] + list(config.head_widths)
    if widths[-1] != 1:
        raise DimensionError(f"head widths must end in 1, got {config.head_widths}")
    for k in range(len(widths) - 1):
        fan_in = widths[k]
        bound = 1.0 / np.sqrt(fan_in)
        w = rng.uniform(-bound, bound, size=(widths[k + 1], fan_in))
        store.register(f"beta.fc{k}.w", w)
        store.register(f"beta.fc{k}.b", np.zeros(widths[k + 1]))
    return store


def head_layer_count(store):
    k = 0
    while f"beta.fc{k}.w" in store:
        k += 1
    return k


def message_pass(a, store):
    """Bidirectional LSTM over the columns of a (d_f, T) tensor -> (2H, T).

    Row block 0..H-1 is the forward pass, H..2H-1 the reverse pass run on
    the column-reversed input and flipped back, so column t sees the whole
    sequence. Initial states are zero.
    """
    fwd = ag.lstm_sequence(a, store["alpha.fwd.wx"], store["alpha.fwd.wh"],
                           store["alpha.fwd.b"])
    bwd = ag.flip_cols(ag.lstm_sequence(ag.flip_cols(a), store["alpha.bwd.wx"],
                                        store["alpha.bwd.wh"], store["alpha.bwd.b"]))
    return ag.concat_rows(fwd, bwd)


def _head_apply(pairs, store):
    h = pairs
    n_layers = head_layer_count(store)
    for k in range(n_layers):
        h = ag.linear(h, store[f"beta.fc{k}.w"], store[f"beta.fc{k}.b"])
        if k < n_layers - 1:
            h = ag.tanh(h)
    return ag.sigmoid(h)


def predict_alignment(x, y, store):
    """Alignment scores for all T*T pairs of context columns, in (0,1).

    Entry (i, j) is the head applied to concat(x column i, y column j); the
    input order matters, so transposing the arguments does not transpose the
    result. All pairs are scored in one batched pass whose columns are
    bit-identical to one-at-a-time evaluation.
    """
    if x.data.shape[0] != y.data.shape[0]:
        raise DimensionError(
            f"predict_alignment: context dims {x.data.shape[0]} != {y.data.shape[0]}")
    t_x = x.data.shape[1]
    t_y = y.data.shape[1]
    pairs = ag.concat_rows(ag.repeat_cols(x, t_y), ag.tile_cols(y, t_x))
    scores = _head_apply(pairs, store)
    return ag.reshape(scores, (t_x, t_y))


def similarity_matrix(x, y):
    """Cosine similarities of all context-column pairs: entry (i, j) is the
    inner product of the normalized columns x_i and y_j."""
    if x.data.shape[0] != y.data.shape[0]:
        raise DimensionError(
            f"similarity_matrix: context dims {x.data.shape[0]} != {y.data.shape[0]}")
    return ag.matmul(ag.transpose(ag.l2_normalize(x)), ag.l2_normalize(y))


def similarity_from_context(x, y, store):
    """Sum of alignment-score-weighted cosine similarities, given contexts."""
    p = predict_alignment(x, y, store)
    s = similarity_matrix(x, y)
    return ag.tsum(ag.mul(p, s)), p, s


def tap_similarity(a, b, store):
    """Similarity of two (d_f, T) feature sequences.

    Returns (scalar tensor, alignment scores P, cosine matrix S). The value
    is differentiable end to end with respect to theta (through a and b),
    alpha and beta.
    """
    if a.data.shape != b.data.shape:
        raise DimensionError(
            f"tap_similarity: inputs {a.data.shape} and {b.data.shape} differ")
    x = message_pass(a, store)
    y = message_pass(b, store)
    return similarity_from_context(x, y, store)


def avgpool_similarity(a, b):
    """Cosine similarity of the temporal means of two feature sequences.

    Order-free by construction; this is the ablation baseline.
    """
    if a.data.shape[0] != b.data.shape[0]:
        raise DimensionError(
            f"avgpool_similarity: dims {a.data.shape[0]} != {b.data.shape[0]}")
    ma = ag.l2_normalize(ag.mean_cols(a))
    mb = ag.l2_normalize(ag.mean_cols(b))
    return ag.dot(ma, mb)


@dataclass
class TapModel:
    """Configuration plus parameters, with the per-sequence pipeline."""

    config: ModelConfig
    store: ParamStore

    @classmethod
    def create(cls, config, rng):
        return cls(config=config, store=init_params(config, rng))

    def encode(self, sampled):
        return enc.encode(sampled, self.store)

    def context(self, features):
        return message_pass(features, self.store)

    def pair_similarity(self, repr_a, repr_b):
        """Similarity from cached per-sequence representations: contexts for
        the tap variant, raw features for avgpool."""
        if self.config.similarity == "avgpool":
            return avgpool_similarity(repr_a, repr_b)
        return similarity_from_context(repr_a, repr_b, self.store)[0]

    def sequence_repr(self, sampled):
        feats = self.encode(sampled)
        if self.config.similarity == "avgpool":
            return feats
        return self.context(feats)
