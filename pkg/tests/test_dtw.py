import numpy as np
import pytest

from tapseq.dtw import (brute_force_dtw, dtw, dtw_similarity_unit,
                        indicator_matrix, pairwise_sq_dists, path_cost)
from tapseq.errors import ContractError, DimensionError, SizeError


def _unit_cols(rng, d, t):
    m = rng.standard_normal((d, t))
    return m / np.linalg.norm(m, axis=0)


def test_identical_sequences_zero_distance_diagonal_path():
    rng = np.random.default_rng(0)
    e = rng.standard_normal((3, 5))
    res = dtw(e, e.copy())
    assert res.distance == 0.0
    assert res.path.pairs == [(i, i) for i in range(1, 6)]


def test_scalar_pair_constant_vs_constant():
    # brute force over the 3 monotone paths of T=2 gives 2
    e = np.array([[0.0, 0.0]])
    f = np.array([[1.0, 1.0]])
    assert brute_force_dtw(e, f).distance == 2.0
    assert dtw(e, f).distance == 2.0


def test_scalar_pair_crossed():
    e = np.array([[0.0, 1.0]])
    f = np.array([[1.0, 0.0]])
    assert brute_force_dtw(e, f).distance == 2.0
    assert dtw(e, f).distance == 2.0


def test_brute_force_t1_and_path_count():
    e = np.array([[2.0]])
    f = np.array([[5.0]])
    res = brute_force_dtw(e, f)
    assert res.path.pairs == [(1, 1)]
    assert res.distance == 9.0
    from tapseq.dtw import _all_paths
    assert len(_all_paths(2)) == 3


def test_brute_force_refuses_large_t():
    big = np.zeros((1, 9))
    with pytest.raises(SizeError):
        brute_force_dtw(big, big)


def test_dtw_equals_brute_force_200_random_pairs():
    rng = np.random.default_rng(42)
    for trial in range(200):
        t = int(rng.integers(2, 7))
        d = int(rng.integers(1, 5))
        e = rng.standard_normal((d, t))
        f = rng.standard_normal((d, t))
        fast = dtw(e, f)
        slow = brute_force_dtw(e, f)
        assert fast.distance == slow.distance
        # path costs folded over the shared cost matrix agree exactly
        cost = pairwise_sq_dists(e, f)
        assert path_cost(cost, fast.path.pairs) == path_cost(cost, slow.path.pairs)


def test_distance_symmetric():
    rng = np.random.default_rng(7)
    for _ in range(50):
        e = rng.standard_normal((3, 6))
        f = rng.standard_normal((3, 6))
        assert dtw(e, f).distance == dtw(f, e).distance


def test_path_structure():
    rng = np.random.default_rng(8)
    for _ in range(100):
        t = int(rng.integers(2, 8))
        res = dtw(rng.standard_normal((2, t)), rng.standard_normal((2, t)))
        pairs = res.path.pairs
        assert pairs[0] == (1, 1) and pairs[-1] == (t, t)
        for (i0, j0), (i1, j1) in zip(pairs, pairs[1:]):
            assert (i1 - i0, j1 - j0) in ((1, 0), (0, 1), (1, 1))


def test_distance_equals_path_cost():
    rng = np.random.default_rng(9)
    for _ in range(50):
        e = rng.standard_normal((4, 5))
        f = rng.standard_normal((4, 5))
        res = dtw(e, f)
        assert abs(res.distance - path_cost(pairwise_sq_dists(e, f), res.path.pairs)) < 1e-9


def test_dimension_errors():
    with pytest.raises(DimensionError, match="dims"):
        dtw(np.zeros((2, 3)), np.zeros((3, 3)))
    with pytest.raises(DimensionError, match="lengths"):
        dtw(np.zeros((2, 3)), np.zeros((2, 4)))


def test_similarity_unit_identity_orthonormal():
    e = np.eye(2)
    s, path = dtw_similarity_unit(e, e.copy())
    assert s == 2.0
    assert len(path) == 2
    # distance identity: d = 2|path| - 2s
    assert dtw(e, e.copy()).distance == 2 * len(path) - 2 * s


def test_similarity_unit_orthogonal_sets():
    e = np.array([[1.0, 1.0], [0.0, 0.0]])
    f = np.array([[0.0, 0.0], [1.0, 1.0]])
    s, _ = dtw_similarity_unit(e, f)
    assert s == 0.0


def test_similarity_unit_rejects_non_unit():
    with pytest.raises(ContractError, match="unit"):
        dtw_similarity_unit(np.full((2, 2), 2.0), np.eye(2))


def test_unit_identity_random_pairs():
    rng = np.random.default_rng(11)
    for _ in range(100):
        t = int(rng.integers(2, 7))
        e = _unit_cols(rng, 4, t)
        f = _unit_cols(rng, 4, t)
        s, path = dtw_similarity_unit(e, f)
        d = dtw(e, f).distance
        assert abs(d - (2 * len(path) - 2 * s)) < 1e-9


def test_indicator_diagonal_is_identity():
    res = dtw(np.eye(3), np.eye(3))
    np.testing.assert_array_equal(indicator_matrix(res.path, 3), np.eye(3))


def test_indicator_covers_every_index_and_counts_path():
    rng = np.random.default_rng(13)
    for _ in range(50):
        t = int(rng.integers(2, 7))
        res = dtw(rng.standard_normal((2, t)), rng.standard_normal((2, t)))
        omega = indicator_matrix(res.path, t)
        assert np.all(omega.sum(axis=0) >= 1)
        assert np.all(omega.sum(axis=1) >= 1)
        assert omega.sum() == len(res.path)


def test_indicator_weighted_sum_reproduces_similarity():
    rng = np.random.default_rng(14)
    for _ in range(50):
        t = int(rng.integers(2, 7))
        e = _unit_cols(rng, 3, t)
        f = _unit_cols(rng, 3, t)
        s, path = dtw_similarity_unit(e, f)
        omega = indicator_matrix(path, t)
        gram = e.T @ f
        assert abs((omega * gram).sum() - s) < 1e-9
