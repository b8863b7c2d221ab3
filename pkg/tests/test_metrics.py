import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.spatial.transform import Rotation

from voxmesh import (EmptyMesh, build_grid, build_halfedge, mesh_report, min_angle, mls_error,
                     reconstruct_initial, triangle_quality)
from voxmesh.metrics import angle_colors, vertex_colors
from voxmesh.shapes import plane
from conftest import equilateral_grid

EQ = [[0, 0, 0], [1, 0, 0], [0.5, math.sqrt(3) / 2, 0]]
RIGHT = [[0, 0, 0], [1, 0, 0], [0, 1, 0]]
T345 = [[0, 0, 0], [4, 0, 0], [0, 3, 0]]
LINE = [[0, 0, 0], [1, 0, 0], [2, 0, 0]]


def oracle_quality(t):
    """Heron inradius over the longest edge, normalised to 1 for equilateral."""
    t = np.asarray(t, float)
    a, b, c = (np.linalg.norm(t[i] - t[j]) for i, j in ((1, 2), (2, 0), (0, 1)))
    s = (a + b + c) / 2
    area = math.sqrt(max(s * (s - a) * (s - b) * (s - c), 0.0))
    return 0.0 if area == 0 else (6 / math.sqrt(3)) * (area / s) / max(a, b, c)


def test_quality_examples():
    assert triangle_quality(EQ) == pytest.approx(1.0)
    assert triangle_quality(LINE) == 0.0
    r = (2 - math.sqrt(2)) / 2
    assert triangle_quality(RIGHT) == pytest.approx((6 / math.sqrt(3)) * r / math.sqrt(2))
    assert triangle_quality(RIGHT) == pytest.approx(0.7174, abs=5e-5)


def test_min_angle_examples():
    assert min_angle(EQ) == pytest.approx(60.0)
    assert min_angle(RIGHT) == pytest.approx(45.0)
    assert min_angle(T345) == pytest.approx(math.degrees(math.atan(3 / 4)))
    assert min_angle(T345) == pytest.approx(36.87, abs=5e-3)
    assert min_angle(LINE) == 0.0


def test_obtuse_apex():
    apex = [[0, 0, 0], [2, 0, 0], [1, 1 / math.sqrt(3), 0]]
    assert min_angle(apex) == pytest.approx(30.0)
    assert triangle_quality(apex) == pytest.approx(oracle_quality(apex))


def test_similarity_invariance():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        t = rng.normal(size=(3, 3))
        R = Rotation.random(random_state=rng).as_matrix()
        s = rng.uniform(0.01, 100)
        u = s * t @ R.T + rng.normal(size=3) * 10
        assert triangle_quality(u) == pytest.approx(triangle_quality(t), abs=1e-9)
        assert min_angle(u) == pytest.approx(min_angle(t), abs=1e-7)
        assert triangle_quality(t) == pytest.approx(oracle_quality(t), abs=1e-9)


@settings(max_examples=300, deadline=None)
@given(st.lists(st.floats(-10, 10, allow_nan=False), min_size=9, max_size=9))
def test_quality_range_and_equilateral_iff(vals):
    t = np.array(vals).reshape(3, 3)
    q, th = triangle_quality(t), min_angle(t)
    assert 0.0 <= q <= 1.0
    assert 0.0 <= th <= 60.0 + 1e-9
    assert (q > 1 - 1e-9) == (th > 60 - 1e-6)


def test_single_equilateral_report():
    rep = mesh_report(build_halfedge(EQ, [[0, 1, 2]]))
    assert rep.q_min == pytest.approx(1) and rep.q_avg == pytest.approx(1)
    assert rep.theta_min == pytest.approx(60) and rep.theta_avg == pytest.approx(60)


def test_sliver_marked_missing():
    V = [[0, 0, 0], [1, 0, 0], [0.5, math.sqrt(3) / 2, 0], [0.5, -math.tan(math.radians(4)) / 2, 0]]
    rep = mesh_report(build_halfedge(V, [[0, 1, 2], [1, 0, 3]]))
    assert rep.theta_min is None and rep.reasons["theta_min"] == "below_quality_floor"
    assert rep.theta_avg == pytest.approx((60 + 4) / 2, abs=1e-9)


def test_quality_floor():
    V = [[0, 0, 0], [1, 0, 0], [0.5, 0.02, 0]]
    rep = mesh_report(build_halfedge(V, [[0, 1, 2]]))
    assert rep.q_min is None and rep.q_avg > 0


def test_equilateral_grid_report():
    rep = mesh_report(equilateral_grid())
    assert rep.q_avg == pytest.approx(1.0)
    assert rep.histogram_counts[-1] == rep.triangle_count


def test_empty_mesh_raises():
    with pytest.raises(EmptyMesh):
        mesh_report(build_halfedge(np.zeros((3, 3)), np.zeros((0, 3), int)))


def test_isolated_vertex_angle_is_nan():
    m = build_halfedge(EQ + [[5, 5, 5]], [[0, 1, 2]])
    rep = mesh_report(m)
    assert np.isnan(rep.vertex_min_angles[3])
    assert rep.vertex_count == 3
    assert tuple(vertex_colors(m)[3]) == (128, 128, 128)


def test_color_ramp():
    c = angle_colors([0, 30, 60, 90, -5])
    assert c.tolist() == [[0, 0, 255], [0, 255, 0], [255, 0, 0], [255, 0, 0], [0, 0, 255]]


@pytest.fixture(scope="module")
def plane_mesh():
    c = plane(3000, seed=1)
    return c, reconstruct_initial(c, build_grid(c))


def test_mls_zero_on_cloud(plane_mesh):
    c, m = plane_mesh
    dmax, davg = mls_error(m, c)
    assert dmax < 1e-12 and davg < 1e-12


def test_mls_lifted_vertex(plane_mesh):
    c, m = plane_mesh
    diag = np.linalg.norm(c.points.max(0) - c.points.min(0))
    i = int(np.argmin(np.linalg.norm(m.vertices - [0.5, 0.5, 0], axis=1)))
    V = m.vertices.copy()
    V[i, 2] += 0.01 * diag
    dmax, _ = mls_error(m.with_vertices(V), c)
    assert dmax == pytest.approx(0.01, rel=1e-3)
