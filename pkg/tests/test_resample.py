import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from voxmesh import (InvalidParam, PointCloud, QuotaExceedsPopulation, TargetExceedsInput,
                     build_grid, classify_by_curvature, classify_edge_points, fps_box,
                     plan_allocation, resample)
from voxmesh.geometry import NeighborIndex
from voxmesh.resample import largest_remainder, resample_indices
from voxmesh.shapes import closed_cylinder, plane, sphere


def boxes_cloud(pops, seed=0, labels=None):
    """Points filling unit boxes (i, 0, 0) with the given populations."""
    rng = np.random.default_rng(seed)
    P = np.vstack([rng.uniform(0.05, 0.95, (n, 3)) + [i, 0, 0] for i, n in enumerate(pops)])
    c = PointCloud(P, labels)
    return c, build_grid(c, 1.0, origin=np.zeros(3))


def test_quota_corrected_ratio():
    c, g = boxes_cloud([50] * 20)
    plan = plan_allocation(g, None, 100)
    assert all(plan.box_quota(k) == 5 for k in g.box_keys)


def test_largest_remainder_fixture():
    c, g = boxes_cloud([3, 3, 4])
    plan = plan_allocation(g, None, 5)
    assert [plan.box_quota(k) for k in sorted(g.box_keys)] == [2, 1, 2]
    assert list(largest_remainder([1.5, 1.5, 2.0])) == [2, 1, 2]


@pytest.mark.parametrize("real,expected", [
    ([0.2, 0.3, 0.5], [0, 0, 1]),
    ([1.25, 1.25, 1.25, 1.25], [2, 1, 1, 1]),
    ([2.0, 3.0], [2, 3]),
])
def test_largest_remainder_cases(real, expected):
    assert list(largest_remainder(real)) == expected


def test_edge_rate_seven_to_three():
    labels = np.r_[np.ones(500, int), np.zeros(500, int)]
    rng = np.random.default_rng(1)
    labels = labels[rng.permutation(1000)]
    c, g = boxes_cloud([100] * 10, labels=labels)
    plan = plan_allocation(g, labels, 100, {1: 7, 0: 3})
    edge = sum(q for (_, cls), q in plan.quotas.items() if cls == 1)
    assert abs(edge - 70) <= 1
    assert sum(plan.quotas.values()) == 100


def test_plan_errors():
    c, g = boxes_cloud([10])
    with pytest.raises(TargetExceedsInput):
        plan_allocation(g, None, 11)
    with pytest.raises(InvalidParam):
        plan_allocation(g, None, 5, {0: 0})


def test_fps_collinear():
    P = np.c_[np.arange(10.0), np.zeros(10), np.zeros(10)]
    assert fps_box(P, [], 2) == [0, 9]
    assert fps_box(P, [[0, 0, 0]], 1) == [9]
    assert sorted(fps_box(P, [], 10)) == list(range(10))
    with pytest.raises(QuotaExceedsPopulation):
        fps_box(P, [], 11)


def test_single_box_is_plain_fps():
    c, g = boxes_cloud([40], seed=2)
    plan = plan_allocation(g, None, 7)
    got = resample_indices(g, plan)
    assert list(got) == sorted(fps_box(c.points, [], 7))


@settings(max_examples=50, deadline=None)
@given(n=st.integers(50, 3000), frac=st.floats(0.01, 1.0), seed=st.integers(0, 10**6),
       two_classes=st.booleans())
def test_exact_count(n, frac, seed, two_classes):
    rng = np.random.default_rng(seed)
    c = PointCloud(rng.random((n, 3)) * rng.uniform(0.2, 3, 3))
    labels = (rng.random(n) < 0.3).astype(int) if two_classes else None
    target = max(3, int(frac * n))
    g = build_grid(c)
    out = resample(g, plan_allocation(g, labels, target, {1: 7, 0: 3} if two_classes else None))
    assert len(out) == target
    assert len(np.unique(out.points, axis=0)) == target


def test_workers_do_not_change_result():
    c = sphere(20000, seed=3)
    g = build_grid(c)
    plan = plan_allocation(g, None, 2000)
    ref = resample_indices(g, plan, workers=1)
    for w in (2, 4, 8):
        assert np.array_equal(resample_indices(g, plan, workers=w), ref)


def test_more_uniform_than_random_subsample():
    c = sphere(20000, seed=4)
    g = build_grid(c)
    out = resample(g, plan_allocation(g, None, 2000))
    rnd = c.subset(np.sort(np.random.default_rng(5).choice(len(c), 2000, replace=False)))
    cv = lambda cl: (lambda d: d.std() / d.mean())(NeighborIndex(cl).neighbors(1)[1][:, 0])
    assert cv(out) <= cv(rnd)


def test_plane_has_no_edges():
    c = plane(2000, seed=1)
    assert not classify_edge_points(c).any()
    assert not classify_by_curvature(c).any()


def test_crease_points_labelled():
    s = 0.02
    u = np.arange(-0.5, 0.5 + 1e-9, s)
    a = np.stack(np.meshgrid(u[u < 0], u), -1).reshape(-1, 2)
    # z = 0 for x < 0 and x = 0 for z > 0, crease along y
    P = np.vstack([np.c_[a[:, 0], a[:, 1], 0 * a[:, 0]],
                   np.c_[0 * a[:, 0], a[:, 1], -a[:, 0]],
                   np.c_[np.zeros_like(u), u, np.zeros_like(u)]])
    # 24 neighbours reach two grid rows across the crease
    lab = classify_edge_points(PointCloud(P), 24, 0.03)
    dist = np.hypot(P[:, 0], P[:, 2])
    interior = np.abs(P[:, 1]) < 0.5 - 3 * s
    assert lab[(dist <= 2 * s + 1e-9) & interior].all()
    assert not lab[(dist > 2 * s + 1e-9) & interior].any()


def test_sphere_classes_equal_population():
    c = sphere(5000, seed=6)
    counts = np.bincount(classify_by_curvature(c, 16, 5), minlength=5)
    assert np.all(np.abs(counts - 1000) <= 1)


def test_cylinder_rim_in_top_class():
    c = closed_cylinder(20000, seed=7)
    cls = classify_by_curvature(c, 16, 5)
    P = c.points
    spacing = np.sqrt((2 * np.pi * 0.5 + 2 * np.pi * 0.25) / len(c))
    rim = (np.abs(np.abs(P[:, 2]) - 0.5) < 1e-12) & (np.hypot(P[:, 0], P[:, 1]) > 0.5 - spacing / 2)
    rim |= (np.abs(np.abs(P[:, 2]) - 0.5) < spacing / 2) & (np.hypot(P[:, 0], P[:, 1]) > 0.5 - 1e-12)
    assert rim.sum() > 50
    assert np.mean(cls[rim] == 4) >= 0.95
