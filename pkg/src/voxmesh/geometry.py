"""Point clouds, bounding boxes and deterministic nearest-neighbour queries."""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.spatial import cKDTree

from .errors import EmptyInput, InvalidParam


def _frozen(a):
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class PointCloud:
    """Positions in model units plus optional integer class labels.

    Parameters
    ----------
    points : array_like, shape (n, 3)
    labels : array_like of int, shape (n,), optional
        Per-point class id (0 = ordinary, 1 = external edge, or a
        curvature class).
    """

    points: np.ndarray
    labels: np.ndarray = field(default=None)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.size == 0:
            pts = pts.reshape(0, 3)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise InvalidParam(f"points must have shape (n, 3), got {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise InvalidParam("point coordinates must be finite")
        object.__setattr__(self, "points", _frozen(pts))
        if self.labels is not None:
            lab = np.asarray(self.labels)
            if lab.shape != (len(pts),):
                raise InvalidParam("labels must have one entry per point")
            if lab.size and (lab.min() < 0 or not np.all(lab == np.round(lab))):
                raise InvalidParam("labels must be non-negative integers")
            object.__setattr__(self, "labels", _frozen(lab.astype(np.int64)))

    def __len__(self):
        return len(self.points)

    @cached_property
    def source_diag(self):
        """Length of the bounding-box diagonal."""
        if len(self.points) == 0:
            return 0.0
        return float(np.linalg.norm(self.points.max(0) - self.points.min(0)))

    def subset(self, index):
        """Cloud made of the points at ``index`` (labels follow)."""
        index = np.asarray(index)
        labels = None if self.labels is None else self.labels[index]
        return PointCloud(self.points[index], labels)

    def with_labels(self, labels):
        return PointCloud(self.points, labels)


@dataclass(frozen=True)
class AABB:
    min: np.ndarray
    max: np.ndarray

    @property
    def extent(self):
        return self.max - self.min

    @property
    def longest_border(self):
        return float(np.max(self.extent))

    @property
    def diagonal(self):
        return float(np.linalg.norm(self.extent))


def bounding_box(cloud):
    """Tight axis-aligned box of a cloud (or an ``(n, 3)`` array)."""
    pts = cloud.points if isinstance(cloud, PointCloud) else np.asarray(cloud, float)
    if len(pts) == 0:
        raise EmptyInput("cannot bound an empty point set")
    return AABB(_frozen(pts.min(axis=0)), _frozen(pts.max(axis=0)))


class NeighborIndex:
    """k-d tree over a snapshot of point positions.

    Query results are sorted by distance with ties broken by ascending point
    index, so neighbourhoods are a pure function of the input ordering.
    """

    def __init__(self, cloud):
        pts = cloud.points if isinstance(cloud, PointCloud) else np.asarray(cloud, float)
        self.points = _frozen(pts)
        self.n = len(pts)
        self._tree = cKDTree(self.points) if self.n else None

    def _search(self, X, k, exclude=None):
        """Sorted (index, distance) arrays of shape (m, k') with k' <= k."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        m = len(X)
        avail = self.n - (1 if exclude is not None else 0)
        k = max(0, min(k, avail))
        if m == 0 or k == 0:
            return np.zeros((m, 0), np.int64), np.zeros((m, 0))
        need = k + (1 if exclude is not None else 0)
        out_i = np.empty((m, k), np.int64)
        out_d = np.empty((m, k))
        rows = np.arange(m)
        kq = min(self.n, need + 4)
        while len(rows):
            d, i = self._tree.query(X[rows], k=kq)
            d = d.reshape(len(rows), kq)
            i = i.reshape(len(rows), kq).astype(np.int64)
            if exclude is not None:
                own = i == exclude[rows, None]
                d = np.where(own, np.inf, d)
                i = np.where(own, self.n, i)
            order = np.lexsort((i, d), axis=-1)
            d = np.take_along_axis(d, order, -1)
            i = np.take_along_axis(i, order, -1)
            if kq < self.n:
                # an unretrieved point may tie with the k-th neighbour
                last = np.max(np.where(np.isfinite(d), d, -np.inf), axis=1)
                unsure = d[:, k - 1] >= last
            else:
                unsure = np.zeros(len(rows), bool)
            done = ~unsure
            out_i[rows[done]] = i[done, :k]
            out_d[rows[done]] = d[done, :k]
            rows = rows[unsure]
            kq = min(self.n, 2 * kq)
        return out_i, out_d

    def neighbors(self, k, include_self=False):
        """k nearest neighbours of every indexed point.

        Returns
        -------
        index, distance : ndarray, shape (n, min(k, n-1)) (or ``k`` columns
            with ``include_self``, the point itself first unless duplicated
            by a lower index at distance zero).
        """
        if k < 1:
            raise InvalidParam("k must be >= 1")
        if include_self:
            return self._search(self.points, k)
        return self._search(self.points, k, exclude=np.arange(self.n))

    def query(self, positions, k):
        """k nearest indexed points to arbitrary positions (no exclusion)."""
        if k < 1:
            raise InvalidParam("k must be >= 1")
        return self._search(positions, k)

    def within(self, position, radius):
        return sorted(self._tree.query_ball_point(np.asarray(position, float), radius))


def knn(index, query, k, include_self=False):
    """k nearest neighbours as a list of ``(point index, distance)`` pairs.

    ``query`` is either a point index of the indexed cloud, in which case
    that point is excluded unless ``include_self`` is set, or a 3D position.
    Requests for more neighbours than available return all of them.
    """
    if k < 1:
        raise InvalidParam("k must be >= 1")
    if np.ndim(query) == 0:
        q = int(query)
        X = index.points[q][None]
        if include_self:
            i, d = index._search(X, k)
        else:
            i, d = index._search(X, k, exclude=np.array([q]))
    else:
        i, d = index._search(np.asarray(query, float)[None], k)
    return [(int(a), float(b)) for a, b in zip(i[0], d[0])]
