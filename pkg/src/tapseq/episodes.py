"""Episodic training and evaluation.

An episode is an N-way K-shot task: N classes drawn from a meta set, K
support examples per class plus queries with labels remapped to 1..N. A
query's class score is the mean learned similarity against that class's
support examples; the episode loss is the mean negative log softmax of the
true class score over the queries. Training runs SGD with momentum over
episodes, clipping the joint gradient norm of the encoder and context
parameters; validation every few hundred episodes retains the best
checkpoint.
"""

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import autograd as ag
from .errors import CapacityError, ContractError, NumericAbort
from .optim import SgdState, clip_global_norm, sgd_step
from .sampling import sparse_sample


@dataclass
class Episode:
    n_way: int
    k_shot: int
    support: list  # RawSequence, grouped class-major: K per class, N classes
    query: list    # (RawSequence, label in 1..N)


@dataclass
class EvalReport:
    episode_count: int
    accuracy: float
    ci_halfwidth: float
    mean_loss: float
    seconds: float


def sample_episode(metaset, n_way, k_shot, q_per_class, rng):
    """Draw an episode: N classes without replacement, then K+Q distinct
    instances per class; the first K go to support, the rest to queries.
    Labels are remapped to 1..N in class draw order."""
    class_ids = sorted(metaset)
    if len(class_ids) < n_way:
        raise CapacityError(
            f"need {n_way} classes, meta set has {len(class_ids)}")
    chosen = rng.choice(len(class_ids), size=n_way, replace=False)
    support = []
    query = []
    for label, ci in enumerate(chosen, start=1):
        pool = metaset[class_ids[int(ci)]]
        need = k_shot + q_per_class
        if len(pool) < need:
            raise CapacityError(
                f"class {class_ids[int(ci)]} has {len(pool)} instances, "
                f"episode needs {need}")
        picks = rng.choice(len(pool), size=need, replace=False)
        for idx in picks[:k_shot]:
            support.append(pool[int(idx)])
        for idx in picks[k_shot:]:
            query.append((pool[int(idx)], label))
    return Episode(n_way=n_way, k_shot=k_shot, support=support, query=query)


def _episode_reprs(episode, model, mode, rng):
    """Sample and encode every sequence in the episode exactly once."""
    reprs = {}
    for seq in episode.support:
        reprs[seq.instance_id] = model.sequence_repr(
            sparse_sample(seq, model.config.frames, mode, rng))
    for seq, _ in episode.query:
        reprs[seq.instance_id] = model.sequence_repr(
            sparse_sample(seq, model.config.frames, mode, rng))
    return reprs


def class_score(query_repr, support_reprs, model):
    """Mean similarity of a query against one class's support examples."""
    if not support_reprs:
        raise ContractError("class_score: empty support class")
    total = model.pair_similarity(query_repr, support_reprs[0])
    for rep in support_reprs[1:]:
        total = ag.add(total, model.pair_similarity(query_repr, rep))
    return ag.scale(total, 1.0 / len(support_reprs))


def _score_vector(q_repr, episode, reprs, model):
    k = episode.k_shot
    scores = []
    for ci in range(episode.n_way):
        group = [reprs[s.instance_id] for s in episode.support[ci * k:(ci + 1) * k]]
        scores.append(class_score(q_repr, group, model))
    return ag.stack(scores)


def episode_loss(episode, model, mode, rng=None):
    """Mean over queries of -log softmax(scores)[true label]."""
    reprs = _episode_reprs(episode, model, mode, rng)
    total = None
    for seq, label in episode.query:
        scores = _score_vector(reprs[seq.instance_id], episode, reprs, model)
        nll = ag.scale(ag.pick(ag.log_softmax(scores), label - 1), -1.0)
        total = nll if total is None else ag.add(total, nll)
    return ag.scale(total, 1.0 / len(episode.query))


def predict_label(query_repr, episode, reprs, model):
    """Label in 1..N maximizing the class score; ties take the smallest."""
    scores = _score_vector(query_repr, episode, reprs, model)
    return int(np.argmax(scores.data)) + 1


def run_episode_eval(episode, model):
    """Accuracy and loss value of one episode under test-mode sampling."""
    with ag.no_grad():
        reprs = _episode_reprs(episode, model, "test", None)
        hits = 0
        total_nll = 0.0
        for seq, label in episode.query:
            scores = _score_vector(reprs[seq.instance_id], episode, reprs, model)
            pred = int(np.argmax(scores.data)) + 1
            hits += int(pred == label)
            total_nll += -float(ag.log_softmax(scores).data[label - 1])
    n = len(episode.query)
    return hits / n, total_nll / n


def evaluate(metaset, model, n_episodes, n_way, k_shot, seed, q_per_class=1,
             threads=1):
    """Mean accuracy with a 95% normal CI over independently drawn episodes.

    Episode e uses its own generator seeded with seed XOR e, so results are
    independent of execution order; with threads > 1 episodes fan out across
    workers and merge by index, which keeps the report deterministic.
    """
    if n_episodes < 1:
        raise ContractError("evaluate: need at least one episode")
    start = time.monotonic()
    accs = np.empty(n_episodes)
    losses = np.empty(n_episodes)

    def one(e):
        ep_rng = np.random.default_rng(seed ^ e)
        episode = sample_episode(metaset, n_way, k_shot, q_per_class, ep_rng)
        return run_episode_eval(episode, model)

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            for e, (acc, nll) in enumerate(pool.map(one, range(n_episodes))):
                accs[e], losses[e] = acc, nll
    else:
        for e in range(n_episodes):
            accs[e], losses[e] = one(e)
    mean = float(accs.mean())
    half = 1.96 * float(accs.std()) / math.sqrt(n_episodes)
    return EvalReport(episode_count=n_episodes, accuracy=mean, ci_halfwidth=half,
                      mean_loss=float(losses.mean()), seconds=time.monotonic() - start)


@dataclass
class TrainConfig:
    episodes: int = 3000
    n_way: int = 5
    k_shot: int = 1
    q_per_class: int = 1
    learning_rate: float = 0.001
    momentum: float = 0.9
    weight_decay: float = 0.0001
    clip_norm: float = 40.0
    episodes_per_epoch: int = 200
    decay_every: int = 10     # epochs
    decay_factor: float = 0.1
    val_every: int = 200      # episodes; 0 disables validation
    val_episodes: int = 200
    seed: int = 0


@dataclass
class TrainHistory:
    episodes: list = field(default_factory=list)  # (index, loss, grad_norm, lr)
    validations: list = field(default_factory=list)  # (index, accuracy, ci)
    best_episode: int = -1
    best_accuracy: float = float("nan")


def train(metatrain, metaval, model, cfg, on_metrics=None):
    """Episodic SGD; returns (best parameter snapshot, history).

    The best snapshot is the one with the highest validation accuracy
    (earliest on ties); if validation never runs it is the final state.
    Raises NumericAbort with the last lr and gradient norm on a non-finite
    loss.
    """
    rng = np.random.default_rng(cfg.seed)
    state = SgdState(learning_rate=cfg.learning_rate, momentum=cfg.momentum,
                     weight_decay=cfg.weight_decay, decay_every=cfg.decay_every,
                     decay_factor=cfg.decay_factor)
    history = TrainHistory()
    best_snapshot = None
    best_acc = -1.0
    last_norm = 0.0
    for idx in range(cfg.episodes):
        state.epoch = idx // cfg.episodes_per_epoch
        episode = sample_episode(metatrain, cfg.n_way, cfg.k_shot,
                                 cfg.q_per_class, rng)
        loss = episode_loss(episode, model, "train", rng)
        value = loss.item()
        lr = state.effective_lr()
        if not math.isfinite(value):
            raise NumericAbort(
                f"non-finite loss at episode {idx}", last_lr=lr,
                last_grad_norm=last_norm)
        ag.backward(loss)
        last_norm = clip_global_norm(model.store, cfg.clip_norm)
        sgd_step(model.store, state)
        history.episodes.append((idx, value, last_norm, lr))
        if on_metrics is not None:
            on_metrics("episode", (idx, value, last_norm, lr))
        if cfg.val_every and (idx + 1) % cfg.val_every == 0 and metaval is not None:
            report = evaluate(metaval, model, cfg.val_episodes, cfg.n_way,
                              cfg.k_shot, seed=cfg.seed ^ (0x9E3779B9 + idx),
                              q_per_class=cfg.q_per_class)
            history.validations.append((idx, report.accuracy, report.ci_halfwidth))
            if on_metrics is not None:
                on_metrics("validation", (idx, report.accuracy, report.ci_halfwidth))
            if report.accuracy > best_acc:
                best_acc = report.accuracy
                best_snapshot = model.store.clone_data()
                history.best_episode = idx
                history.best_accuracy = report.accuracy
    if best_snapshot is None:
        best_snapshot = model.store.clone_data()
    return best_snapshot, history
