"""Point cloud denoising, density uniformisation and up-sampling."""

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInput, EmptyInput, InsufficientPoints, InvalidParam
from .geometry import NeighborIndex, PointCloud, bounding_box


@dataclass(frozen=True)
class SmoothingParams:
    """Neighbourhood size ``k`` and Gaussian bandwidth ``h`` (model units).

    ``h=None`` means: derive it from the cloud with :func:`compute_h`.
    """

    k: int = 8
    h: float = None
    passes: int = 1

    def __post_init__(self):
        if self.k < 1:
            raise InvalidParam("k must be >= 1")
        if self.h is not None and not self.h > 0:
            raise InvalidParam("h must be positive")
        if self.passes < 0:
            raise InvalidParam("passes must be >= 0")


def compute_h(cloud, k):
    """Largest distance from any point to its k-th nearest neighbour."""
    if len(cloud) <= k:
        raise InsufficientPoints(f"need more than {k} points, got {len(cloud)}")
    _, d = NeighborIndex(cloud).neighbors(k)
    return float(d[:, k - 1].max())


def gaussian_weight(d, h):
    return np.exp(-(d * d) / (h * h))


def mls_smooth(cloud, params=None):
    """Replace each point by the Gaussian-weighted mean of its neighbourhood.

    The neighbourhood is the point itself (weight 1) plus its ``k`` nearest
    neighbours, weighted by ``exp(-d^2 / h^2)``. Runs ``params.passes``
    times; the bandwidth is recomputed per pass when not given.
    """
    params = params or SmoothingParams()
    if len(cloud) <= params.k:
        raise InsufficientPoints(f"need more than {params.k} points, got {len(cloud)}")
    pts = cloud.points
    for _ in range(params.passes):
        idx, d = NeighborIndex(pts).neighbors(params.k)
        h = params.h if params.h is not None else float(d[:, -1].max())
        if h == 0.0:
            break
        w = gaussian_weight(d, h)
        num = pts + np.einsum("nk,nkc->nc", w, pts[idx])
        pts = num / (1.0 + w.sum(axis=1))[:, None]
    return PointCloud(pts, cloud.labels)


def mean_spacing(cloud):
    """Mean nearest-neighbour distance."""
    if len(cloud) < 2:
        return 0.0
    _, d = NeighborIndex(cloud).neighbors(1)
    return float(d[:, 0].mean())


def octree_uniform(cloud, scale=None):
    """Keep one representative point per occupied cube of edge ``scale``.

    The representative is the member closest to the cube's centre (ties go
    to the lower index); survivors keep their original relative order.
    ``scale`` defaults to the mean nearest-neighbour distance.
    """
    if len(cloud) == 0:
        raise EmptyInput("empty cloud")
    if scale is None:
        scale = mean_spacing(cloud)
        if scale == 0.0:
            return cloud.subset([0])
    elif not scale > 0:
        raise InvalidParam("scale must be positive")
    pts = cloud.points
    origin = bounding_box(cloud).min
    cell = np.floor((pts - origin) / scale).astype(np.int64)
    centre = origin + (cell + 0.5) * scale
    dist = np.linalg.norm(pts - centre, axis=1)
    _, cid = np.unique(cell, axis=0, return_inverse=True)
    cid = cid.reshape(-1)
    order = np.lexsort((np.arange(len(pts)), dist, cid))
    first = np.ones(len(order), bool)
    first[1:] = cid[order][1:] != cid[order][:-1]
    keep = np.sort(order[first])
    return cloud.subset(keep)


def edge_insert_count(s):
    """Points inserted on a single edge for an interior budget of ``s``.

    ``round(sqrt(2 s + 1/2) - 1/sqrt(2))`` with halves rounded up; ``s = 6``
    gives 3.
    """
    if s < 0:
        raise InvalidParam("s must be >= 0")
    return int(math.floor(math.sqrt(2 * s + 0.5) - 1 / math.sqrt(2) + 0.5 + 1e-12))


def lattice_interior(n):
    """Barycentric coordinates (i, j, k)/n of the strictly interior nodes of
    the triangular lattice with ``n`` subdivisions per side."""
    return [(i / n, j / n, (n - i - j) / n)
            for i in range(1, n) for j in range(1, n - i)]


def upsample_delaunay(cloud, s=6, *, triangulation=None):
    """Insert points along the edges and inside the triangles of a
    provisional triangulation of ``cloud``.

    Each triangle gets a budget ``s_t = round(s * A_t / mean area)``; its
    edges receive ``edge_insert_count(s_t)`` evenly spaced points (shared
    edges use the larger count of their two triangles and are inserted once)
    and its interior receives the interior nodes of the matching lattice.

    Parameters
    ----------
    triangulation : HalfEdgeMesh, optional
        Mesh over the cloud's points; built with the initial mesher when
        omitted.
    """
    if s < 0:
        raise InvalidParam("s must be >= 0")
    pts = cloud.points
    if len(pts) < 3:
        raise DegenerateInput("need at least three points")
    centred = pts - pts.mean(0)
    sv = np.linalg.svd(centred, compute_uv=False)
    if sv[1] <= 1e-12 * max(sv[0], 1e-300):
        raise DegenerateInput("points are collinear")
    if s == 0:
        return cloud
    if triangulation is None:
        from .mesher import reconstruct_initial
        from .voxel import build_grid
        triangulation = reconstruct_initial(cloud, build_grid(cloud), min_coverage=0.0)
    F = triangulation.faces
    if len(F) == 0:
        return cloud
    areas = triangulation.face_areas()
    mean_area = areas.mean()
    s_t = np.floor(s * areas / mean_area + 0.5).astype(int)
    sl_t = np.array([edge_insert_count(v) for v in s_t], dtype=int)
    edge_count = {}
    for f, tri in enumerate(F):
        for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
            key = (min(a, b), max(a, b))
            edge_count[key] = max(edge_count.get(key, 0), sl_t[f])
    new = []
    for (a, b) in sorted(edge_count):
        c = edge_count[(a, b)]
        for j in range(1, c + 1):
            t = j / (c + 1)
            new.append((1 - t) * pts[a] + t * pts[b])
    for f, tri in enumerate(F):
        for u, v, w in lattice_interior(sl_t[f] + 1):
            new.append(u * pts[tri[0]] + v * pts[tri[1]] + w * pts[tri[2]])
    if not new:
        return cloud
    out = np.vstack([pts, np.asarray(new)])
    labels = None
    if cloud.labels is not None:
        labels = np.concatenate([cloud.labels, np.zeros(len(new), np.int64)])
    return PointCloud(out, labels)
