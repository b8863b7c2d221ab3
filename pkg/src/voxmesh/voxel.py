"""Cubic voxel partition of a point cloud.

Every point belongs to exactly one box. Boxes are adjacent when their
integer indices differ by at most one along every axis (26-neighbourhood,
including the box itself). Colouring boxes by index parity gives eight
rounds in which no two boxes of the same round are adjacent.
"""

import itertools
import logging

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra

from .errors import DegenerateInput, EmptyInput, InvalidParam
from .geometry import PointCloud, bounding_box

log = logging.getLogger(__name__)

NEIGHBOR_OFFSETS = np.array(list(itertools.product((-1, 0, 1), repeat=3)), dtype=np.int64)


def default_scale(cloud):
    """Box edge length ``2 l / cbrt(|P|)`` with ``l`` the longest AABB border.

    Kept in real arithmetic: rounding to an integer would collapse the scale
    to zero on normalised models.
    """
    n = len(cloud)
    if n == 0:
        raise EmptyInput("empty cloud")
    l = bounding_box(cloud).longest_border
    if l <= 0:
        raise DegenerateInput("bounding box has zero extent")
    return 2.0 * l / np.cbrt(n)


def adjacent(a, b):
    """True when boxes ``a`` and ``b`` are equal or 26-neighbours."""
    return max(abs(int(a[0]) - int(b[0])), abs(int(a[1]) - int(b[1])),
               abs(int(a[2]) - int(b[2]))) <= 1


def round_color(b):
    """Parity colour 0..7 of a box index."""
    return int(b[0]) % 2 + 2 * (int(b[1]) % 2) + 4 * (int(b[2]) % 2)


class VoxelGrid:
    """Occupied boxes of a cubic partition anchored at ``origin``.

    Attributes
    ----------
    cloud : PointCloud
    origin : ndarray, shape (3,)
    v_scale : float
        Box edge length.
    point_box : ndarray, shape (n, 3)
        Integer box index of every point.
    boxes : dict
        ``(i, j, k) -> ndarray`` of member point indices (ascending).
    """

    def __init__(self, cloud, v_scale, origin=None):
        if not v_scale > 0:
            raise InvalidParam("v_scale must be positive")
        if len(cloud) == 0:
            raise EmptyInput("empty cloud")
        self.cloud = cloud
        self.v_scale = float(v_scale)
        box = bounding_box(cloud)
        self.origin = np.asarray(box.min if origin is None else origin, dtype=np.float64)
        idx = np.floor((cloud.points - self.origin) / self.v_scale).astype(np.int64)
        # points on the max face of the box are clamped inward
        top = np.maximum(np.ceil((box.max - self.origin) / self.v_scale).astype(np.int64) - 1, 0)
        on_face = cloud.points >= box.max
        idx = np.where(on_face & (idx > top), top, idx)
        self.point_box = idx
        self.point_box.setflags(write=False)
        keys, inverse = np.unique(idx, axis=0, return_inverse=True)
        inverse = inverse.reshape(-1)
        order = np.argsort(inverse, kind="stable")
        bounds = np.searchsorted(inverse[order], np.arange(len(keys) + 1))
        self.boxes = {tuple(int(c) for c in keys[i]): order[bounds[i]:bounds[i + 1]]
                      for i in range(len(keys))}
        self.box_keys = [tuple(int(c) for c in k) for k in keys]
        self.point_box_id = inverse
        self._graph = None
        biggest = max(len(v) for v in self.boxes.values())
        if biggest > 8 * len(cloud) / len(self.boxes):
            log.warning("voxel box holds %d points (%.1fx the mean occupancy); "
                        "consider a smaller scale", biggest, biggest * len(self.boxes) / len(cloud))

    def __len__(self):
        return len(self.boxes)

    def __repr__(self):
        return f"VoxelGrid(v_scale={self.v_scale:.6g}, boxes={len(self.boxes)}, points={len(self.cloud)})"

    def box_of(self, point_index):
        return tuple(int(c) for c in self.point_box[point_index])

    def neighbors_of(self, key):
        """Occupied boxes adjacent to ``key`` (including itself), sorted."""
        k = np.asarray(key, dtype=np.int64)
        out = []
        for off in NEIGHBOR_OFFSETS:
            nk = (int(k[0] + off[0]), int(k[1] + off[1]), int(k[2] + off[2]))
            if nk in self.boxes:
                out.append(nk)
        return out

    def points_adjacent(self, i, j):
        """Vectorised box adjacency test for point index arrays."""
        d = np.abs(self.point_box[np.asarray(i)] - self.point_box[np.asarray(j)])
        return np.max(d, axis=-1) <= 1

    def rounds(self):
        """Occupied boxes grouped by colour: list of 8 sorted key lists."""
        out = [[] for _ in range(8)]
        for key in self.box_keys:
            out[round_color(key)].append(key)
        return out

    # -- intrinsic metric ------------------------------------------------
    def _adjacency_graph(self):
        if self._graph is None:
            pts = self.cloud.points
            rows, cols = [], []
            for key, members in self.boxes.items():
                others = np.concatenate([self.boxes[nk] for nk in self.neighbors_of(key)])
                r = np.repeat(members, len(others))
                c = np.tile(others, len(members))
                keep = r < c
                rows.append(r[keep])
                cols.append(c[keep])
            rows = np.concatenate(rows)
            cols = np.concatenate(cols)
            w = np.linalg.norm(pts[rows] - pts[cols], axis=1)
            # zero-length edges would vanish from the sparse matrix
            w = np.maximum(w, np.finfo(float).tiny)
            n = len(pts)
            self._graph = coo_matrix((w, (rows, cols)), shape=(n, n)).tocsr()
        return self._graph

    def intrinsic_distances(self, source):
        """Shortest box-adjacent path lengths from ``source`` to all points.

        Unreachable points get ``inf``.
        """
        d = dijkstra(self._adjacency_graph(), directed=False, indices=int(source))
        d[int(source)] = 0.0
        return d


def build_grid(cloud, v_scale=None, origin=None):
    """Partition ``cloud`` into boxes of edge ``v_scale``.

    ``v_scale`` defaults to :func:`default_scale`.
    """
    if v_scale is None:
        v_scale = default_scale(cloud)
    return VoxelGrid(cloud, v_scale, origin=origin)


def intrinsic_distance(grid, a, b):
    """Length of the shortest chain of Euclidean hops between points ``a``
    and ``b`` where every hop joins points of identical or adjacent boxes.

    Returns ``math.inf`` when no such chain exists.
    """
    if a == b:
        return 0.0
    return float(grid.intrinsic_distances(a)[b])
