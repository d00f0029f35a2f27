import itertools

import numpy as np
import pytest

from agtrack.assoc import augment, hungarian_max, match
from agtrack.errors import TooManyRows


def _exhaustive_max(cost):
    """Best total over every injective row -> column map, rows in order"""
    best = {0: 0.}
    for row in cost:
        nxt = {}
        for used, total in best.items():
            for j, c in enumerate(row):
                if used >> j & 1:
                    continue
                key = used | 1 << j
                val = total + c
                if key not in nxt or val > nxt[key]:
                    nxt[key] = val
        best = nxt
    return max(best.values())


def _total(cost, pairs):
    return sum(cost[i, j] for i, j in pairs)


def test_identity():
    assert hungarian_max(np.eye(2)) == [(0, 0), (1, 1)]


def test_crossed_pairs():
    cost = np.array([[0.9, 0.8], [0.85, 0.1]])
    pairs = hungarian_max(cost)
    assert pairs == [(0, 1), (1, 0)]
    assert _total(cost, pairs) == pytest.approx(1.65)


def test_five_by_seven_against_permutations(rng):
    cost = rng.random((5, 7))
    best = max(sum(cost[i, p[i]] for i in range(5))
               for p in itertools.permutations(range(7), 5))
    assert _total(cost, hungarian_max(cost)) == pytest.approx(best,
                                                              abs=1e-12)


def test_random_instances_match_exhaustive_search():
    rng = np.random.default_rng(2024)
    for _ in range(500):
        m = int(rng.integers(1, 8))
        k = int(rng.integers(m, 10))
        # eighths keep every sum exact
        cost = rng.integers(0, 1000, size=(m, k)) / 8.
        pairs = hungarian_max(cost)
        assert sorted(i for i, _ in pairs) == list(range(m))
        assert len({j for _, j in pairs}) == m
        assert _total(cost, pairs) == _exhaustive_max(cost)


def test_ties_take_lowest_column():
    assert hungarian_max(np.ones((1, 3))) == [(0, 0)]


def test_errors_and_empty():
    with pytest.raises(TooManyRows):
        hungarian_max(np.zeros((3, 2)))
    with pytest.raises(ValueError):
        hungarian_max(np.array([[np.nan, 1.]]))
    assert hungarian_max(np.zeros((0, 4))) == []


def test_augment_layout():
    out = augment(np.array([[0.5, 0.6, 0.7], [0.1, 0.2, 0.3]]), 0.2)
    assert out.shape == (2, 5)
    np.testing.assert_array_equal(out[:, 3:], 0.2)


def test_low_similarity_is_new():
    res = match(np.array([[0.1]]), 0.2, 5, [4])
    assert res.det_track == (-1,)
    assert res.det_ids == (5,)
    assert res.unmatched_tracklets == [0]


def test_high_similarity_is_matched():
    res = match(np.array([[0.9]]), 0.2, 5, [4])
    assert res.det_track == (0,)
    assert res.det_ids == (4,)
    assert res.unmatched_tracklets == []


def test_two_new_detections_out_of_eight():
    rng = np.random.default_rng(8)
    S = rng.uniform(0., 0.1, (8, 10))
    cols = rng.permutation(10)
    for i in range(8):
        if i not in (2, 7):
            S[i, cols[i]] = 0.9
    ids = list(range(1, 11))
    res = match(S, 0.2, 11, ids)
    assert res.new_detections == [2, 7]
    assert res.det_ids[2] == 11 and res.det_ids[7] == 12
    for i in range(8):
        if i not in (2, 7):
            assert res.det_track[i] == cols[i]
            assert res.det_ids[i] == ids[cols[i]]


def test_first_frame_all_new():
    res = match(np.zeros((3, 0)), 0.2, 1, [])
    assert res.det_ids == (1, 2, 3)
    assert res.track_matched == ()


def test_rows_below_margin_always_new_and_ids_contiguous(rng):
    for _ in range(50):
        m, n = rng.integers(1, 7, size=2)
        S = rng.random((m, n))
        res = match(S, 0.3, 100, list(range(n)))
        used = [j for j in res.det_track if j >= 0]
        assert len(used) == len(set(used))
        for i in range(m):
            if S[i].max() < 0.3:
                assert res.is_new(i)
        new_ids = [res.det_ids[i] for i in res.new_detections]
        assert new_ids == list(range(100, 100 + len(new_ids)))


def test_padding_below_margin_changes_nothing(rng):
    S = rng.random((4, 3))
    base = match(S, 0.2, 10, [1, 2, 3])
    padded = match(np.hstack([S, np.full((4, 2), 0.05)]), 0.2, 10,
                   [1, 2, 3, 4, 5])
    assert padded.det_ids == base.det_ids


def test_margin_range():
    with pytest.raises(ValueError):
        match(np.zeros((1, 1)), 1.5, 1, [1])
