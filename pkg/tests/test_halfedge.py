import numpy as np
import pytest

from voxmesh import NonManifoldEdge, build_halfedge
from conftest import octahedron


def test_single_triangle():
    m = build_halfedge([[0, 0, 0], [1, 0, 0], [0, 1, 0]], [[0, 1, 2]])
    assert m.n_faces == 1
    assert m.boundary_mask().sum() == 3
    assert len(m.boundary_loops()) == 1


def test_octahedron_closed():
    m = octahedron()
    assert (m.n_vertices, m.n_edges, m.n_faces) == (6, 12, 8)
    assert m.euler_characteristic() == 2
    assert m.boundary_loops() == []
    assert m.component_stats()[0]["genus"] == 0


def test_opposite_winding_repaired():
    V = [[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0]]
    m = build_halfedge(V, [[0, 1, 2], [1, 2, 3]])
    n = m.face_normals()
    assert np.allclose(n[0], n[1])
    assert len(m.boundary_loops()) == 1


def test_three_faces_on_an_edge():
    V = [[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1]]
    with pytest.raises(NonManifoldEdge):
        build_halfedge(V, [[0, 1, 2], [1, 0, 3], [0, 1, 4]])


def test_twins_and_next_cycles():
    m = octahedron()
    h = np.arange(m.n_halfedges)
    assert np.array_equal(m.he_twin[m.he_twin], h)
    assert np.array_equal(m.he_next[m.he_next[m.he_next]], h)
    assert np.all(m.valence() == 4)
