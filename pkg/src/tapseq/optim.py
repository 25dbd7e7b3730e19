"""SGD with momentum, coupled weight decay, stepped lr decay and norm clipping."""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError


@dataclass
class SgdState:
    """Optimizer state.

    The effective learning rate is ``learning_rate * decay_factor**(epoch //
    decay_every)``; the caller advances ``epoch``. Velocity buffers are
    allocated lazily per parameter and always match its shape.
    """

    learning_rate: float = 0.001
    momentum: float = 0.9
    weight_decay: float = 0.0001
    decay_every: int = 10
    decay_factor: float = 0.1
    epoch: int = 0
    step_count: int = 0
    velocity: dict = field(default_factory=dict)

    def effective_lr(self):
        return self.learning_rate * self.decay_factor ** (self.epoch // self.decay_every)


def clip_global_norm(params, max_norm, namespaces=("theta", "alpha")):
    """Rescale the gradients of the given namespaces so their joint L2 norm
    does not exceed ``max_norm``; returns the pre-clip norm.

    Idempotent: a second application sees a norm within round-off of the
    bound and leaves the gradients untouched (hence the tiny slack on the
    comparison).
    """
    tensors = [t for _, t in params.namespace_items(*namespaces) if t.grad is not None]
    sq = 0.0
    for t in tensors:
        sq += float((t.grad * t.grad).sum())
    norm = math.sqrt(sq)
    if norm > max_norm * (1.0 + 1e-12):
        s = max_norm / norm
        for t in tensors:
            t.grad *= s
    return norm


def sgd_step(params, state):
    """One update: v <- momentum*v + (grad + wd*param); param <- param - lr_eff*v.

    Frozen parameters are skipped; every trainable parameter must hold a
    gradient. Gradients are cleared afterwards.
    """
    lr = state.effective_lr()
    for name, t in params.trainable_items():
        if t.grad is None:
            raise ContractError(f"sgd_step: parameter {name!r} has no gradient")
        v = state.velocity.get(name)
        if v is None:
            v = np.zeros_like(t.data)
        g = t.grad + state.weight_decay * t.data
        v = state.momentum * v + g
        state.velocity[name] = v
        t.data = t.data - lr * v
    params.zero_grad()
    state.step_count += 1
