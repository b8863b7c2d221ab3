import numpy as np
import pytest

from voxmesh import PointCloud, build_grid, estimate_normals, reconstruct_initial
from voxmesh.mesher import adjacent_neighbors, repair_vertex_manifold
from voxmesh.shapes import plane, sphere, torus


@pytest.fixture(scope="module")
def sphere10k(sphere_run):
    cloud, res = sphere_run
    return res.resampled, res.mesh_grid


def test_square():
    c = PointCloud([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]])
    m = reconstruct_initial(c, build_grid(c, 2.0), k=3)
    assert m.n_faces == 2
    assert len(m.boundary_loops()) == 1


def test_sphere_closed(sphere10k):
    c, g = sphere10k
    m, info = reconstruct_initial(c, g, return_info=True)
    assert m.n_vertices == len(c) == 10000
    assert np.array_equal(m.vertices, c.points)
    assert m.euler_characteristic() == 2
    assert m.boundary_loops() == []
    assert m.n_isolated == 0
    assert info["coverage"] == 1.0


def test_faces_join_adjacent_boxes_only(sphere10k):
    c, g = sphere10k
    m = reconstruct_initial(c, g)
    F = m.faces
    for a, b in ((0, 1), (1, 2), (0, 2)):
        assert g.points_adjacent(F[:, a], F[:, b]).all()


def test_sphere_normals_outward(sphere10k):
    c, g = sphere10k
    n = estimate_normals(c, g)
    dots = np.einsum("ij,ij->i", n, c.points / np.linalg.norm(c.points, axis=1)[:, None])
    assert np.mean(dots > 0.95) >= 0.99


def test_plane_normals_consistent():
    c = plane(3000, seed=2)
    n = estimate_normals(c, build_grid(c))
    assert np.allclose(np.abs(n[:, 2]), 1, atol=1e-6)
    assert len(np.unique(np.sign(n[:, 2]))) == 1


def test_plane_single_boundary():
    c = plane(3000, seed=3)
    m = reconstruct_initial(c, build_grid(c))
    assert len(m.boundary_loops()) == 1
    assert m.euler_characteristic() == 1


def test_torus_genus_one():
    c = torus(6000, seed=1)
    m = reconstruct_initial(c, build_grid(c), hole_fill_max=None)
    assert m.boundary_loops() == []
    assert m.euler_characteristic() == 0


def test_neighbours_restricted_to_adjacent_boxes():
    c = sphere(3000, seed=5)
    g = build_grid(c)
    nb = adjacent_neighbors(c, g, 16)
    i = np.repeat(np.arange(len(c)), 16).reshape(nb.shape)
    ok = nb >= 0
    assert g.points_adjacent(i[ok], nb[ok]).all()


def test_parallel_sheets_are_flagged():
    rng = np.random.default_rng(0)
    xy = rng.random((4000, 2))
    P = np.r_[np.c_[xy[:2000], np.zeros(2000)], np.c_[xy[2000:], np.full(2000, 0.025)]]
    c = PointCloud(P)
    g = build_grid(c, 0.05)
    _, info = reconstruct_initial(c, g, min_coverage=0.0, return_info=True)
    assert info["normal_mixing"] > 0


def test_pinched_vertex_repaired():
    # two triangles meeting only at vertex 0
    F = [(0, 1, 2), (0, 3, 4)]
    kept, removed = repair_vertex_manifold(F, 5)
    assert removed == 1 and len(kept) == 1


def test_no_mixing_on_single_surfaces(sphere10k):
    c, g = sphere10k
    _, info = reconstruct_initial(c, g, return_info=True)
    assert info["normal_mixing"] == 0


def test_boundary_fraction_small():
    from voxmesh import plan_allocation, resample
    from voxmesh.shapes import ellipsoid
    c = ellipsoid(30000, seed=1)
    g = build_grid(c)
    s = resample(g, plan_allocation(g, None, 5000))
    m = reconstruct_initial(s, build_grid(s))
    assert m.boundary_mask().sum() / m.n_halfedges <= 0.01
