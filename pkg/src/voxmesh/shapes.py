"""Synthetic point clouds sampled uniformly from analytic surfaces.

Used by the tests and the demo scripts. Every sampler takes a point count
and a seed and returns a :class:`PointCloud`.
"""

import numpy as np

from .geometry import PointCloud


def _rng(seed):
    return np.random.default_rng(seed)


def sphere(n, seed=0, radius=1.0, center=(0.0, 0.0, 0.0)):
    g = _rng(seed).normal(size=(n, 3))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return PointCloud(radius * g + np.asarray(center, float))


def capped_sphere(n, cap_height, seed=0, radius=1.0):
    """Sphere with the two polar caps ``|z| > radius - cap_height`` removed.

    The remaining band has the topology of an annulus: two boundary circles.
    """
    rng = _rng(seed)
    zmax = radius - cap_height
    # area is uniform in z on a sphere
    z = rng.uniform(-zmax, zmax, n)
    phi = rng.uniform(0, 2 * np.pi, n)
    r = np.sqrt(np.maximum(radius ** 2 - z ** 2, 0))
    return PointCloud(np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1))


def cap_height_for_hole(diameter, radius=1.0):
    """Cap height whose removal leaves a circular hole of the given diameter."""
    a = diameter / 2
    return radius - np.sqrt(radius ** 2 - a ** 2)


def cube(n, seed=0, side=1.0):
    """Surface of an axis-aligned cube centred at the origin."""
    rng = _rng(seed)
    face = rng.integers(0, 6, n)
    uv = rng.uniform(-side / 2, side / 2, (n, 2))
    pts = np.empty((n, 3))
    axis = face // 2
    sign = np.where(face % 2 == 0, -1.0, 1.0)
    for a in range(3):
        m = axis == a
        others = [b for b in range(3) if b != a]
        pts[m, a] = sign[m] * side / 2
        pts[m, others[0]] = uv[m, 0]
        pts[m, others[1]] = uv[m, 1]
    return PointCloud(pts)


def cube_edge_distance(points, side=1.0):
    """Distance from each point to the nearest of the 12 edges of the cube."""
    p = np.abs(np.asarray(points, float))
    h = side / 2
    best = np.full(len(p), np.inf)
    for a in range(3):
        b, c = [x for x in range(3) if x != a]
        along = np.maximum(p[:, a] - h, 0)
        d = np.sqrt((p[:, b] - h) ** 2 + (p[:, c] - h) ** 2 + along ** 2)
        best = np.minimum(best, d)
    return best


def torus(n, seed=0, major=1.0, minor=0.35):
    """Area-uniform samples by rejection on the tube angle."""
    rng = _rng(seed)
    out = []
    while sum(len(o) for o in out) < n:
        u = rng.uniform(0, 2 * np.pi, 2 * n)
        v = rng.uniform(0, 2 * np.pi, 2 * n)
        w = rng.uniform(0, 1, 2 * n)
        keep = w < (major + minor * np.cos(v)) / (major + minor)
        out.append(np.stack([u[keep], v[keep]], axis=1))
    uv = np.concatenate(out)[:n]
    u, v = uv[:, 0], uv[:, 1]
    r = major + minor * np.cos(v)
    return PointCloud(np.stack([r * np.cos(u), r * np.sin(u), minor * np.sin(v)], axis=1))


def ellipsoid(n, seed=0, axes=(1.0, 0.7, 0.5)):
    """Samples of an ellipsoid (radially mapped sphere, not area-uniform)."""
    g = sphere(n, seed).points
    return PointCloud(g * np.asarray(axes, float))


def plane(n, seed=0, size=1.0):
    """Uniform samples of the square ``[0, size]^2`` at ``z = 0``."""
    xy = _rng(seed).uniform(0, size, (n, 2))
    return PointCloud(np.column_stack([xy, np.zeros(n)]))


def closed_cylinder(n, seed=0, radius=0.5, height=1.0):
    """Cylinder side wall plus both end discs, area-uniform."""
    rng = _rng(seed)
    side = 2 * np.pi * radius * height
    disc = np.pi * radius ** 2
    part = rng.choice(3, size=n, p=np.array([side, disc, disc]) / (side + 2 * disc))
    pts = np.empty((n, 3))
    phi = rng.uniform(0, 2 * np.pi, n)
    m = part == 0
    pts[m] = np.stack([radius * np.cos(phi[m]), radius * np.sin(phi[m]),
                       rng.uniform(-height / 2, height / 2, m.sum())], axis=1)
    for sign, p in ((-1, 1), (1, 2)):
        m = part == p
        r = radius * np.sqrt(rng.uniform(0, 1, m.sum()))
        pts[m] = np.stack([r * np.cos(phi[m]), r * np.sin(phi[m]),
                           np.full(m.sum(), sign * height / 2)], axis=1)
    return PointCloud(pts)


def add_noise(cloud, sigma, seed=0):
    return PointCloud(cloud.points + _rng(seed).normal(scale=sigma, size=cloud.points.shape),
                      cloud.labels)
