"""Initial triangulation of a resampled cloud by local-projection Delaunay.

Every point triangulates its neighbourhood (restricted to adjacent voxel
boxes) in its own tangent plane. Triangles proposed by all three of their
corners are inserted first, best quality first, while keeping every edge
manifold; triangles with fewer votes only fill what is left. Small holes
are closed afterwards.
"""

import logging
from collections import defaultdict

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import breadth_first_order, connected_components, minimum_spanning_tree
from scipy.spatial import Delaunay, QhullError

from .errors import DegenerateInput, InsufficientPoints, InvalidParam, MeshingFailed
from .geometry import NeighborIndex
from .halfedge import build_halfedge
from .metrics import triangle_quality_array

log = logging.getLogger(__name__)


def adjacent_neighbors(cloud, grid, k):
    """k nearest neighbours of every point restricted to adjacent boxes.

    Returns an ``(n, k)`` index array padded with ``-1`` where fewer than
    ``k`` admissible neighbours exist.
    """
    n = len(cloud)
    kq = min(n - 1, 2 * k + 8)
    idx, _ = NeighborIndex(cloud).neighbors(kq)
    ok = grid.points_adjacent(np.repeat(np.arange(n), idx.shape[1]).reshape(idx.shape), idx)
    out = -np.ones((n, k), np.int64)
    # stable partition keeps the distance order of admissible neighbours
    order = np.argsort(~ok, axis=1, kind="stable")
    srt = np.take_along_axis(idx, order, 1)[:, :k]
    cnt = np.minimum(ok.sum(axis=1), k)
    cols = np.arange(srt.shape[1])
    out[:, :srt.shape[1]] = np.where(cols[None, :] < cnt[:, None], srt, -1)
    return out


def _pca_normals(pts, nbrs):
    n = len(pts)
    normals = np.zeros((n, 3))
    valid = nbrs >= 0
    safe = np.where(valid, nbrs, np.arange(n)[:, None])
    nb = np.concatenate([pts[:, None, :], pts[safe]], axis=1)
    w = np.concatenate([np.ones((n, 1)), valid], axis=1)
    mean = (nb * w[..., None]).sum(1) / w.sum(1)[:, None]
    c = (nb - mean[:, None, :]) * w[..., None]
    cov = np.einsum("nki,nkj->nij", c, c)
    _, vecs = np.linalg.eigh(cov)
    normals = vecs[:, :, 0]
    return normals


def orient_normals(points, normals, nbrs):
    """Flip normals for global consistency along a minimum spanning tree.

    Edge weights are ``1 - |n_i . n_j|`` so that propagation prefers nearly
    parallel neighbours. Each component starts at its point farthest from
    the component centroid, whose normal is turned outward.
    """
    n = len(points)
    rows = np.repeat(np.arange(n), nbrs.shape[1])
    cols = nbrs.reshape(-1)
    keep = cols >= 0
    rows, cols = rows[keep], cols[keep]
    w = 1.0 - np.abs(np.einsum("ij,ij->i", normals[rows], normals[cols])) + 1e-6
    g = coo_matrix((w, (rows, cols)), shape=(n, n)).tocsr()
    g = g.maximum(g.T)
    tree = minimum_spanning_tree(g)
    tree = tree + tree.T
    out = normals.copy()
    n_comp, comp = connected_components(tree, directed=False)
    for c in range(n_comp):
        members = np.flatnonzero(comp == c)
        centre = points[members].mean(axis=0)
        far = members[np.argmax(np.linalg.norm(points[members] - centre, axis=1))]
        if np.dot(out[far], points[far] - centre) < 0:
            out[far] = -out[far]
        order, pred = breadth_first_order(tree, far, directed=False)
        for v in order[1:]:
            if np.dot(out[v], out[pred[v]]) < 0:
                out[v] = -out[v]
    return out


def estimate_normals(cloud, grid, k=16):
    """Unit PCA normals of adjacent-box neighbourhoods, consistently signed."""
    if len(cloud) <= k:
        raise InsufficientPoints(f"need more than {k} points, got {len(cloud)}")
    nbrs = adjacent_neighbors(cloud, grid, k)
    normals = _pca_normals(cloud.points, nbrs)
    return orient_normals(cloud.points, normals, nbrs)


def _tangent_basis(n):
    a = np.array([1.0, 0.0, 0.0]) if abs(n[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    u = np.cross(n, a)
    u /= np.linalg.norm(u)
    return u, np.cross(n, u)


def _tangent_bases(normals):
    a = np.where((np.abs(normals[:, 0]) < 0.9)[:, None], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0])
    u = np.cross(normals, a)
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    return u, np.cross(normals, u)


def _local_candidates(pts, normals, nbrs):
    """Vote count of every triangle incident to a point in that point's
    planar Delaunay triangulation."""
    n = len(pts)
    local = np.concatenate([np.arange(n)[:, None], nbrs], axis=1)
    safe = np.where(local >= 0, local, np.arange(n)[:, None])
    d = pts[safe] - pts[:, None, :]
    u, v = _tangent_bases(normals)
    xy = np.stack([np.einsum("nkj,nj->nk", d, u), np.einsum("nkj,nj->nk", d, v)], axis=2)
    cnt = (local >= 0).sum(axis=1)
    found = []
    for i in range(n):
        if cnt[i] < 3:
            continue
        try:
            tri = Delaunay(xy[i, :cnt[i]]).simplices
        except (QhullError, ValueError):
            continue
        found.append(local[i][tri[(tri == 0).any(axis=1)]])
    if not found:
        return {}
    tris = np.sort(np.concatenate(found), axis=1)
    uniq, votes = np.unique(tris, axis=0, return_counts=True)
    return {tuple(int(x) for x in t): int(c) for t, c in zip(uniq, votes)}


def _corner_fans(F):
    """Fan label of every face corner: corners of one vertex share a label
    when their faces are connected through edges around that vertex."""
    m = len(F)
    corner = np.arange(3 * m).reshape(m, 3)
    d = np.stack([F, np.roll(F, -1, axis=1)], axis=2).reshape(-1, 2)
    ca = corner.reshape(-1)
    cb = np.roll(corner, -1, axis=1).reshape(-1)
    lo = np.minimum(d[:, 0], d[:, 1])
    hi = np.maximum(d[:, 0], d[:, 1])
    order = np.lexsort((hi, lo))
    same = (lo[order][1:] == lo[order][:-1]) & (hi[order][1:] == hi[order][:-1])
    h0, h1 = order[:-1][same], order[1:][same]
    rows, cols = [], []
    # link the corners of each shared endpoint across the two faces
    for h, other in ((h0, h1),):
        for c_h, end in ((ca, 0), (cb, 1)):
            vert = d[h, end]
            oc = np.where(d[other, 0] == vert, ca[other], cb[other])
            rows.append(c_h[h])
            cols.append(oc)
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    g = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(3 * m, 3 * m))
    _, lab = connected_components(g, directed=False)
    return lab


def repair_vertex_manifold(faces, n_vertices):
    """Drop faces until every vertex is surrounded by a single fan.

    For each pinched vertex the largest fan survives (ties: the fan holding
    the lowest face index). Returns the kept faces and the number removed.
    """
    F = np.asarray(faces, np.int64).reshape(-1, 3)
    removed = 0
    while len(F):
        lab = _corner_fans(F)
        vert = F.reshape(-1)
        # fans per vertex
        pairs = np.unique(np.stack([vert, lab], axis=1), axis=0)
        nfans = np.bincount(pairs[:, 0], minlength=n_vertices)
        bad = np.flatnonzero(nfans > 1)
        if not len(bad):
            break
        size = np.bincount(lab, minlength=3 * len(F))
        first_face = np.full(3 * len(F), len(F))
        np.minimum.at(first_face, lab, np.arange(3 * len(F)) // 3)
        drop = np.zeros(len(F), bool)
        for v in bad:
            fans = pairs[pairs[:, 0] == v, 1]
            best = max(fans.tolist(), key=lambda c: (size[c], -first_face[c]))
            for c in fans:
                if c != best:
                    drop[np.flatnonzero(lab == c) // 3] = True
        removed += int(drop.sum())
        F = F[~drop]
    return [tuple(int(x) for x in f) for f in F], removed


class _FaceSet:
    """Oriented faces with manifold edge bookkeeping."""

    def __init__(self):
        self.faces = []
        self.directed = set()
        self.count = defaultdict(int)

    def can_add(self, f):
        a, b, c = f
        for x, y in ((a, b), (b, c), (c, a)):
            if (x, y) in self.directed or self.count[(min(x, y), max(x, y))] >= 2:
                return False
        return True

    def add(self, f):
        a, b, c = f
        for x, y in ((a, b), (b, c), (c, a)):
            self.directed.add((x, y))
            self.count[(min(x, y), max(x, y))] += 1
        self.faces.append(tuple(int(x) for x in f))

    def has_edge(self, x, y):
        return self.count.get((min(x, y), max(x, y)), 0) > 0


def _signed_area(poly2d):
    x, y = poly2d[:, 0], poly2d[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def _loop_plane(pts, mesh, loop, fn):
    """Mean normal of the faces touching ``loop`` and the projected loop."""
    touching = []
    for v in loop:
        for h in mesh.outgoing(v):
            f = int(mesh.he_face[h])
            if f >= 0:
                touching.append(f)
    n = fn[touching].sum(axis=0) if touching else np.zeros(3)
    if np.linalg.norm(n) == 0:
        return None, None
    n /= np.linalg.norm(n)
    u, v = _tangent_basis(n)
    q = pts[loop] - pts[loop].mean(axis=0)
    return n, np.stack([q @ u, q @ v], axis=1)


def _ear_fill(pts, loop, xy, fs, grid):
    """Clip ears of a projected counter-clockwise loop; all or nothing."""
    idx = list(range(len(loop)))
    new = []
    added_edges = set()
    while len(idx) > 3:
        best = None
        m = len(idx)
        for j in range(m):
            a, b, c = idx[j - 1], idx[j], idx[(j + 1) % m]
            turn = np.cross(np.append(xy[b] - xy[a], 0), np.append(xy[c] - xy[b], 0))[2]
            if turn <= 0:
                continue
            va, vc = loop[a], loop[c]
            if va == vc or fs.has_edge(va, vc) or (min(va, vc), max(va, vc)) in added_edges:
                continue
            if grid is not None and not grid.points_adjacent(va, vc):
                continue
            tri = np.array([xy[a], xy[b], xy[c]])
            inside = False
            for o in idx:
                if o in (a, b, c):
                    continue
                if _in_triangle(xy[o], tri):
                    inside = True
                    break
            if inside:
                continue
            q = triangle_quality_array(pts[loop[a]], pts[loop[b]], pts[loop[c]])
            if best is None or q > best[0]:
                best = (float(q), j)
        if best is None:
            return None
        j = best[1]
        a, b, c = idx[j - 1], idx[j], idx[(j + 1) % m]
        new.append((loop[a], loop[b], loop[c]))
        added_edges.add((min(loop[a], loop[c]), max(loop[a], loop[c])))
        del idx[j]
    new.append(tuple(loop[i] for i in idx))
    return new


def _in_triangle(p, tri):
    d = []
    for i in range(3):
        a, b = tri[i], tri[(i + 1) % 3]
        d.append((b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]))
    return min(d) > 0


def _star_fill(pts, normals, loop, v, grid):
    """Fan ``v`` to every edge of the loop surrounding it, or None."""
    if grid is not None and not np.all(grid.points_adjacent(np.full(len(loop), v), loop)):
        return None
    u, w = _tangent_basis(normals[v])
    q = pts[loop] - pts[v]
    xy = np.stack([q @ u, q @ w], axis=1)
    if _signed_area(xy) <= 0:
        return None
    m = len(loop)
    tris = []
    for j in range(m):
        a, b = xy[j], xy[(j + 1) % m]
        if a[0] * b[1] - a[1] * b[0] <= 0:
            return None
        tris.append((loop[j], loop[(j + 1) % m], v))
    return tris


def reconstruct_initial(cloud, grid, k=16, hole_fill_max=8, *, min_coverage=0.9,
                        normals=None, return_info=False):
    """Triangulate ``cloud`` into a manifold mesh with boundary.

    Parameters
    ----------
    cloud : PointCloud
    grid : VoxelGrid
        Partition of ``cloud``; triangles only join points of adjacent boxes.
    k : int
        Neighbourhood size of the local triangulations.
    hole_fill_max : int or None
        Longest boundary loop (in edges) that gets filled. ``None`` fills
        every loop that projects to a positively oriented polygon.
    min_coverage : float
        Minimum fraction of points that must end up with a face.
    return_info : bool
        Also return a dict of diagnostics.

    Returns
    -------
    HalfEdgeMesh
        One vertex per input point (in order) carrying the cloud's labels as
        vertex flags.

    Raises
    ------
    DegenerateInput
        Fewer than three points or all points collinear.
    MeshingFailed
        Too few points received a face.
    """
    pts = cloud.points
    n = len(pts)
    if n < 3:
        raise DegenerateInput("need at least three points")
    sv = np.linalg.svd(pts - pts.mean(axis=0), compute_uv=False)
    if sv[1] <= 1e-12 * max(sv[0], 1e-300):
        raise DegenerateInput("points are collinear")
    if hole_fill_max is not None and hole_fill_max < 3:
        raise InvalidParam("hole_fill_max must be >= 3")
    kk = min(k, n - 1)
    nbrs = adjacent_neighbors(cloud, grid, kk)
    if normals is None:
        normals = orient_normals(pts, _pca_normals(pts, nbrs), nbrs)

    votes = _local_candidates(pts, normals, nbrs)
    info = {"candidates": len(votes)}
    tiers = []
    for need in (3, 2, 1):
        tier = [t for t, c in votes.items() if c == need]
        if not tier:
            tiers.append(np.zeros((0, 3), np.int64))
            continue
        tiers.append(np.array(sorted(tier), dtype=np.int64))
    info["consensus"] = len(tiers[0])

    fs = _FaceSet()
    rejected = 0
    for tier in tiers:
        if not len(tier):
            continue
        ok = np.all([grid.points_adjacent(tier[:, a], tier[:, b])
                     for a, b in ((0, 1), (1, 2), (0, 2))], axis=0)
        tier = tier[ok]
        p0, p1, p2 = pts[tier[:, 0]], pts[tier[:, 1]], pts[tier[:, 2]]
        fn = np.cross(p1 - p0, p2 - p0)
        ns = normals[tier].sum(axis=1)
        dots = np.einsum("ij,ij->i", fn, ns)
        tier = np.where((dots < 0)[:, None], tier[:, [0, 2, 1]], tier)
        cos = np.abs(dots) / np.maximum(np.linalg.norm(fn, axis=1) * np.linalg.norm(ns, axis=1), 1e-300)
        q = triangle_quality_array(p0, p1, p2)
        order = np.lexsort((np.arange(len(tier)), -q))
        for i in order:
            f = tuple(int(x) for x in tier[i])
            if cos[i] < 0.3 or q[i] <= 0 or not fs.can_add(f):
                rejected += 1
                continue
            fs.add(f)
    info["rejected"] = rejected

    faces, removed = repair_vertex_manifold(fs.faces, n)
    info["repaired"] = removed
    fs2 = _FaceSet()
    for f in faces:
        fs2.add(f)
    fs = fs2

    mesh = build_halfedge(pts, np.array(fs.faces, np.int64).reshape(-1, 3))
    # isolated points sitting in a hole become the apex of a fan
    stars = 0
    covered = np.zeros(n, bool)
    covered[mesh.faces.reshape(-1)] = True
    loops = mesh.boundary_loops()
    if (~covered).any() and loops:
        loop_of = {}
        for li, loop in enumerate(loops):
            for v in loop:
                loop_of.setdefault(v, li)
        used = set()
        for v in np.flatnonzero(~covered):
            cands = sorted({loop_of[int(j)] for j in nbrs[v] if j >= 0 and int(j) in loop_of} - used)
            for li in cands:
                loop = loops[li]
                if len(loop) > 2 * (hole_fill_max or 8) or len(set(loop)) != len(loop):
                    continue
                tris = _star_fill(pts, normals, loop, int(v), grid)
                if tris is not None and all(fs.can_add(t) for t in tris):
                    for t in tris:
                        fs.add(t)
                    used.add(li)
                    stars += 1
                    break
        if stars:
            mesh = build_halfedge(pts, np.array(fs.faces, np.int64).reshape(-1, 3))
    info["stars_filled"] = stars

    filled = 0
    fn = mesh.face_normals()
    for loop in mesh.boundary_loops():
        if hole_fill_max is not None and len(loop) > hole_fill_max:
            continue
        if len(set(loop)) != len(loop):
            continue
        nrm, xy = _loop_plane(pts, mesh, loop, fn)
        if nrm is None or _signed_area(xy) <= 0:
            continue
        tris = _ear_fill(pts, loop, xy, fs, grid if hole_fill_max is not None else None)
        if tris is None or not all(fs.can_add(t) for t in tris):
            continue
        for t in tris:
            fs.add(t)
        filled += 1
    info["holes_filled"] = filled
    if filled:
        faces, removed = repair_vertex_manifold(fs.faces, n)
        info["repaired"] += removed
        mesh = build_halfedge(pts, np.array(faces, np.int64).reshape(-1, 3))

    covered = np.zeros(n, bool)
    covered[mesh.faces.reshape(-1)] = True
    info["coverage"] = float(covered.mean())
    info["boundary_loops"] = len(mesh.boundary_loops())
    info["normal_mixing"] = int(_normal_mixing(pts, normals, nbrs, grid.v_scale))
    if info["normal_mixing"]:
        log.warning("%d points have neighbours on what looks like another sheet "
                    "(thin sheets closer than the box size?)", info["normal_mixing"])
    if info["coverage"] < min_coverage:
        raise MeshingFailed(f"only {covered.sum()} of {n} points received a face", info)
    if cloud.labels is not None:
        mesh = mesh.with_vertex_flags(np.asarray(cloud.labels).astype(np.int8))
    return (mesh, info) if return_info else mesh


def _normal_mixing(pts, normals, nbrs, v_scale):
    """Points whose close neighbours look like another sheet: opposing
    normals, or a parallel normal at an offset steeper than 70 degrees off
    the tangent plane."""
    valid = nbrs >= 0
    safe = np.where(valid, nbrs, 0)
    off = pts[safe] - pts[:, None, :]
    dist = np.linalg.norm(off, axis=2)
    close = valid & (dist < 0.5 * v_scale)
    cos = np.einsum("nj,nkj->nk", normals, normals[safe])
    opposed = cos < -0.5
    steep = (np.abs(np.einsum("nj,nkj->nk", normals, off)) > 0.94 * dist) & (np.abs(cos) > 0.95)
    return np.count_nonzero((close & (opposed | steep)).any(axis=1))
