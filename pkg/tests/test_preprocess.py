import math

import numpy as np
import pytest

from voxmesh import (DegenerateInput, InsufficientPoints, InvalidParam, PointCloud,
                     SmoothingParams, build_halfedge, compute_h, edge_insert_count, mls_smooth,
                     octree_uniform, upsample_delaunay)
from voxmesh.preprocess import lattice_interior
from voxmesh.shapes import add_noise, plane, sphere

LINE = PointCloud([[0, 0, 0], [1, 0, 0], [2, 0, 0]])


def test_compute_h_examples():
    assert compute_h(LINE, 1) == 1
    assert compute_h(LINE, 2) == 2


def test_compute_h_brute_force():
    P = np.random.default_rng(1).random((200, 3))
    D = np.linalg.norm(P[:, None] - P[None], axis=-1)
    D.sort(axis=1)
    assert compute_h(PointCloud(P), 8) == pytest.approx(D[:, 8].max(), rel=1e-12)


def test_compute_h_too_few_points():
    with pytest.raises(InsufficientPoints):
        compute_h(LINE, 3)


def test_symmetric_neighbourhood_is_fixed():
    c = PointCloud([[-1, 0, 0], [0, 0, 0], [1, 0, 0]])
    out = mls_smooth(c, SmoothingParams(k=2))
    assert np.allclose(out.points[1], 0, atol=1e-15)


def test_coincident_points_unchanged():
    c = PointCloud(np.full((20, 3), 0.25))
    assert np.array_equal(mls_smooth(c).points, c.points)


def test_plane_stays_planar():
    out = mls_smooth(plane(2000, seed=2))
    assert np.abs(out.points[:, 2]).max() <= 1e-9


def test_denoise_sphere_halves_radial_error():
    clean = sphere(5000, seed=4)
    noisy = add_noise(clean, 0.01 * clean.source_diag, seed=5)
    rms = lambda P: math.sqrt(np.mean((np.linalg.norm(P, axis=1) - 1) ** 2))
    assert rms(mls_smooth(noisy).points) <= 0.5 * rms(noisy.points)


def test_octree_merges_close_points():
    c = PointCloud([[0.2, 0.2, 0.2], [0.3, 0.2, 0.2]])
    assert len(octree_uniform(c, 1.0)) == 1


def test_octree_keeps_sparse_grid():
    g = np.stack(np.meshgrid(*[np.arange(5.0)] * 3), -1).reshape(-1, 3) * 1.5
    assert len(octree_uniform(PointCloud(g), 1.0)) == len(g)


def test_octree_one_point_per_cube():
    rng = np.random.default_rng(6)
    P = np.vstack([rng.normal(0, 0.05, (1000, 3)), rng.normal(1, 0.05, (1000, 3))])
    c = PointCloud(P)
    scale = 0.02
    out = octree_uniform(c, scale)
    origin = P.min(0)
    cells = np.floor((out.points - origin) / scale).astype(int)
    _, counts = np.unique(cells, axis=0, return_counts=True)
    assert counts.max() == 1
    # and every occupied input cube is represented
    assert len(np.unique(np.floor((P - origin) / scale).astype(int), axis=0)) == len(out)


def test_octree_bad_scale():
    with pytest.raises(InvalidParam):
        octree_uniform(LINE, 0.0)


@pytest.mark.parametrize("s,expected", [(6, 3), (0, 0), (12, 4)])
def test_edge_insert_count(s, expected):
    assert edge_insert_count(s) == expected


def test_edge_insert_count_formula():
    for s in range(200):
        x = math.sqrt(2 * s + 0.5) - 1 / math.sqrt(2)
        assert edge_insert_count(s) == math.floor(x + 0.5)


def test_lattice_interior_count():
    # nodes (i, j, n-i-j)/n with all three indices positive
    for n in range(1, 9):
        oracle = sum(1 for i in range(n + 1) for j in range(n + 1 - i) if i and j and n - i - j)
        assert len(lattice_interior(n)) == oracle == max(n - 1, 0) * max(n - 2, 0) // 2


def test_upsample_single_triangle():
    V = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0]], float)
    tri = build_halfedge(V, [[0, 1, 2]])
    out = upsample_delaunay(PointCloud(V), 6, triangulation=tri).points
    assert len(out) == 3 + 3 * 3 + 3
    for a, b in ((0, 1), (1, 2), (0, 2)):
        for t in (0.25, 0.5, 0.75):
            p = (1 - t) * V[a] + t * V[b]
            assert np.min(np.linalg.norm(out - p, axis=1)) < 1e-12
    interior = out[12:]
    assert np.all(interior[:, :2] > 0) and np.all(interior.sum(1) < 1)


def test_upsample_zero_budget_is_identity():
    V = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0]], float)
    c = PointCloud(V)
    assert upsample_delaunay(c, 0) is c


def test_upsample_shared_edge_once():
    V = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0]], float)
    tri = build_halfedge(V, [[0, 1, 2], [1, 3, 2]])
    out = upsample_delaunay(PointCloud(V), 6, triangulation=tri).points
    assert len(np.unique(np.round(out, 12), axis=0)) == len(out)
    # 5 edges with 3 points each and 3 interior points per triangle
    assert len(out) == 4 + 5 * 3 + 2 * 3


def test_upsample_collinear():
    with pytest.raises(DegenerateInput):
        upsample_delaunay(LINE, 6)
