"""Learned temporal-alignment similarity for few-shot sequence classification.

The similarity of two fixed-length sequences is the sum, over all pairs of
temporal positions, of a predicted alignment score times the cosine
similarity of learned per-position context vectors. Everything trains
episodically; a classical DTW implementation serves as baseline and test
oracle.
"""

from . import autograd, dtw, episodes, kernels, model
from .autograd import Tensor, backward, no_grad
from .datagen import GenConfig, generate_metaset, load_metaset, write_metaset
from .episodes import EvalReport, TrainConfig, evaluate, sample_episode, train
from .model import ModelConfig, TapModel, avgpool_similarity, tap_similarity
from .params import ParamStore, load_checkpoint, save_checkpoint
from .sampling import RawSequence, SampledSequence, sparse_sample

__version__ = "0.1.0"

__all__ = [
    "Tensor", "backward", "no_grad", "ParamStore",
    "ModelConfig", "TapModel", "tap_similarity", "avgpool_similarity",
    "TrainConfig", "EvalReport", "train", "evaluate", "sample_episode",
    "GenConfig", "generate_metaset", "write_metaset", "load_metaset",
    "RawSequence", "SampledSequence", "sparse_sample",
    "save_checkpoint", "load_checkpoint",
    "autograd", "dtw", "episodes", "kernels", "model",
]
