import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from voxmesh import EmptyInput, NeighborIndex, PointCloud, bounding_box, knn


def test_bounding_box_single_point():
    box = bounding_box(PointCloud([[0, 0, 0]]))
    assert np.array_equal(box.min, [0, 0, 0]) and np.array_equal(box.max, [0, 0, 0])


def test_bounding_box_two_corners():
    box = bounding_box(PointCloud([[0, 0, 0], [1, 2, 3]]))
    assert np.array_equal(box.max, [1, 2, 3])
    assert box.longest_border == 3


def test_bounding_box_unit_cube():
    corners = np.array([[i, j, k] for i in (0, 1) for j in (0, 1) for k in (0, 1)], float)
    assert bounding_box(PointCloud(corners)).longest_border == 1


def test_empty_cloud_rejected():
    with pytest.raises(EmptyInput):
        bounding_box(PointCloud(np.zeros((0, 3))))


def test_knn_symmetric_tie_ordered_by_index():
    idx = NeighborIndex(PointCloud([[0, 0, 0], [1, 0, 0], [2, 0, 0]]))
    assert knn(idx, 1, 2) == [(0, 1.0), (2, 1.0)]


def test_knn_clamps_k():
    idx = NeighborIndex(PointCloud([[0, 0, 0], [1, 0, 0], [2, 0, 0]]))
    assert len(knn(idx, 1, 5)) == 2


def brute_knn(P, q, k, skip=None):
    d = np.linalg.norm(P - q, axis=1)
    order = sorted((dd, i) for i, dd in enumerate(d) if i != skip)
    return order[:k]


@settings(max_examples=60, deadline=None)
@given(n=st.integers(2, 1000), k=st.integers(1, 12), seed=st.integers(0, 2**31 - 1))
def test_knn_matches_brute_force(n, k, seed):
    rng = np.random.default_rng(seed)
    P = rng.random((n, 3))
    idx = NeighborIndex(PointCloud(P))
    i = int(rng.integers(n))
    got = knn(idx, i, k)
    want = brute_knn(P, P[i], k, skip=i)
    assert [g[0] for g in got] == [w[1] for w in want]
    assert np.allclose([g[1] for g in got], [w[0] for w in want])


def test_knn_random_100_k3():
    rng = np.random.default_rng(7)
    P = rng.random((100, 3))
    idx = NeighborIndex(PointCloud(P))
    for i in range(100):
        assert [g[0] for g in knn(idx, i, 3)] == [w[1] for w in brute_knn(P, P[i], 3, skip=i)]


def test_knn_position_query_includes_coincident_point():
    idx = NeighborIndex(PointCloud([[0, 0, 0], [1, 0, 0], [3, 0, 0]]))
    got = knn(idx, np.array([0.9, 0, 0]), 2)
    assert [g[0] for g in got] == [1, 0]
