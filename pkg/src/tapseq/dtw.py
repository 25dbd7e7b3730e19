"""Classical dynamic time warping between equal-length sequences.

Evaluation-only (no gradients): the DP table, path backtracking, an
exhaustive brute-force oracle, the unit-norm inner-product form of the
distance and the binary indicator matrix of a path. Costs are squared
Euclidean distances between columns.

Both the DP solver and the brute-force oracle consume the same
``pairwise_sq_dists`` matrix and fold path costs front to back, so their
optimal distances agree exactly, not just to round-off.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ContractError, DimensionError, SizeError

BRUTE_FORCE_MAX = 8


@dataclass
class AlignPath:
    """Monotone index-pair list, 1-based, from (1,1) to (T,T); steps are
    (+1,0), (0,+1) or (+1,+1)."""

    pairs: list

    def __len__(self):
        return len(self.pairs)


@dataclass
class DtwResult:
    distance: float
    path: AlignPath
    table: np.ndarray


def pairwise_sq_dists(e, f):
    """Matrix of squared Euclidean distances between columns of e and f."""
    diff = e[:, :, None] - f[:, None, :]
    return (diff * diff).sum(axis=0)


def _check_pair(e, f, op):
    if e.ndim != 2 or f.ndim != 2:
        raise DimensionError(f"{op}: expected rank-2 inputs")
    if e.shape[0] != f.shape[0]:
        raise DimensionError(
            f"{op}: feature dims {e.shape[0]} and {f.shape[0]} differ")
    if e.shape[1] != f.shape[1]:
        raise DimensionError(
            f"{op}: lengths {e.shape[1]} and {f.shape[1]} differ")


def dtw(e, f):
    """Optimal monotone alignment cost and path via dynamic programming.

    Backtracking ties prefer diagonal over vertical over horizontal, so
    identical sequences return the pure diagonal.
    """
    _check_pair(e, f, "dtw")
    cost = pairwise_sq_dists(e, f)
    table = kernels.dtw_table(cost)
    steps = kernels.dtw_backtrack(table)
    pairs = [(int(i) + 1, int(j) + 1) for i, j in steps]
    return DtwResult(distance=float(table[-1, -1]), path=AlignPath(pairs), table=table)


def path_cost(cost, pairs):
    """Fold the per-pair costs along a 1-based path, front to back."""
    total = 0.0
    for i, j in pairs:
        total = total + cost[i - 1, j - 1]
    return total


def _all_paths(t):
    """Every monotone path from (1,1) to (t,t)."""
    out = []
    stack = [[(1, 1)]]
    while stack:
        path = stack.pop()
        i, j = path[-1]
        if i == t and j == t:
            out.append(path)
            continue
        if i < t and j < t:
            stack.append(path + [(i + 1, j + 1)])
        if j < t:
            stack.append(path + [(i, j + 1)])
        if i < t:
            stack.append(path + [(i + 1, j)])
    return out


def brute_force_dtw(e, f):
    """Exhaustive minimum over all monotone paths; the oracle for dtw().

    Only sane for T <= 8 (the path count grows like the Delannoy numbers).
    """
    _check_pair(e, f, "brute_force_dtw")
    t = e.shape[1]
    if t > BRUTE_FORCE_MAX:
        raise SizeError(
            f"brute_force_dtw: T={t} exceeds the exhaustive limit {BRUTE_FORCE_MAX}")
    cost = pairwise_sq_dists(e, f)
    best_pairs = None
    best = np.inf
    for pairs in _all_paths(t):
        c = path_cost(cost, pairs)
        if c < best:
            best = c
            best_pairs = pairs
    table = kernels.dtw_table(cost)
    return DtwResult(distance=float(best), path=AlignPath(best_pairs), table=table)


def dtw_similarity_unit(e, f):
    """Inner-product sum along the optimal path, for unit-norm columns.

    For unit columns the squared distance of a pair is 2 - 2<e_i, f_j>, so
    distance = 2*len(path) - 2*similarity.
    """
    _check_pair(e, f, "dtw_similarity_unit")
    for name, m in (("first", e), ("second", f)):
        norms = np.linalg.norm(m, axis=0)
        if np.max(np.abs(norms - 1.0)) > 1e-9:
            raise ContractError(
                f"dtw_similarity_unit: {name} input columns are not unit-norm")
    res = dtw(e, f)
    s = 0.0
    for i, j in res.path.pairs:
        s += float(np.dot(e[:, i - 1], f[:, j - 1]))
    return s, res.path


def indicator_matrix(path, t):
    """T x T binary matrix with a one at every pair the path visits."""
    omega = np.zeros((t, t))
    for i, j in path.pairs:
        omega[i - 1, j - 1] = 1.0
    return omega
