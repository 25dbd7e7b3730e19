"""Sparse temporal sampling: fixed-length frame selection from raw sequences.

A length-L sequence is divided into T equal-duration segments on the real
line. Training draws one frame uniformly from each segment; testing takes the
segment midpoint, so it is deterministic. Sequences shorter than T yield
repeated indices (segment midpoints round down and clamp), which keeps the
T-column output contract.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ContractError, DimensionError


@dataclass
class RawSequence:
    """A variable-length multivariate sequence with its class label.

    frames is (dim, length) with one column per time step.
    """

    frames: np.ndarray
    class_id: int
    instance_id: str

    @property
    def dim(self):
        return self.frames.shape[0]

    @property
    def length(self):
        return self.frames.shape[1]


@dataclass
class SampledSequence:
    """Exactly T frames picked from a RawSequence, plus where they came from."""

    frames: np.ndarray
    source: str
    indices: np.ndarray

    @property
    def dim(self):
        return self.frames.shape[0]

    @property
    def num_frames(self):
        return self.frames.shape[1]


def segment_bounds(length, t, i):
    """Integer index window [lo, hi) of segment i (0-based) of t segments."""
    lo = (i * length) // t
    hi = ((i + 1) * length) // t
    return lo, hi


def sparse_sample(seq, t, mode, rng=None):
    """Pick one frame per segment; ``mode`` is 'train' or 'test'.

    Train mode needs an rng and draws uniformly over each non-empty
    segment's indices; an empty segment (only possible when L < T) falls
    back to its floored real-line position. Test mode takes the floored
    segment midpoint, computed in exact integer arithmetic.
    """
    if t < 1:
        raise ContractError(f"sparse_sample: frame count must be >= 1, got {t}")
    if mode not in ("train", "test"):
        raise ContractError(f"sparse_sample: unknown mode {mode!r}")
    if mode == "train" and rng is None:
        raise ContractError("sparse_sample: train mode needs an rng")
    length = seq.length
    if length < 1:
        raise DimensionError("sparse_sample: sequence has no frames")

    indices = np.empty(t, dtype=np.int64)
    for i in range(t):
        if mode == "test":
            # floor of the segment midpoint (2i+1)/2 * L/T
            idx = ((2 * i + 1) * length) // (2 * t)
        else:
            lo, hi = segment_bounds(length, t, i)
            if hi > lo:
                idx = int(rng.integers(lo, hi))
            else:
                idx = lo
        indices[i] = min(max(idx, 0), length - 1)
    return SampledSequence(frames=seq.frames[:, indices].copy(),
                           source=seq.instance_id,
                           indices=indices)
