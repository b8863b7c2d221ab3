"""Internal-edge rebuilding and isotropic remeshing with feature protection
and vertex-count control.

The remesher works on :class:`EditableMesh`, a mutable half-edge structure
whose two half-edges of edge ``e`` are ``2e`` and ``2e+1``. Deleted
elements are only flagged; :meth:`EditableMesh.to_halfedge` compacts.
"""

import heapq
import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyMesh, InvalidParam, NonManifoldInput
from .halfedge import EXTERNAL_EDGE, build_halfedge
from .metrics import triangle_quality_array
from .mesher import repair_vertex_manifold

log = logging.getLogger(__name__)


def _sub(a, b):
    return (a[0] - b[0], a[1] - b[1], a[2] - b[2])


def _cross(a, b):
    return (a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0])


def _dot(a, b):
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


def _dist(a, b):
    return math.sqrt((a[0] - b[0]) ** 2 + (a[1] - b[1]) ** 2 + (a[2] - b[2]) ** 2)


class EditableMesh:
    """Mutable manifold triangle mesh supporting split, collapse and flip.

    Parameters
    ----------
    vertices : array_like, shape (n, 3)
    faces : array_like, shape (m, 3)
        Consistently oriented triangles.
    flags : array_like of int, optional
        Per-vertex labels carried through the edits.
    """

    def __init__(self, vertices, faces, flags=None):
        V = np.asarray(vertices, dtype=np.float64).reshape(-1, 3)
        F = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
        n = len(V)
        self.pos = V.tolist()
        self.flag = [0] * n if flags is None else [int(x) for x in flags]
        self.size = [1.0] * n
        self.vh = [-1] * n
        self.vdel = [False] * n
        self.hto, self.hnext, self.hprev, self.hface, self.edel = [], [], [], [], []
        self.fh, self.fdel = [], []
        self._nv, self._ne, self._nf = n, 0, 0
        emap = {}
        for a, b, c in F.tolist():
            f = self._new_face()
            hs = []
            for u, v in ((a, b), (b, c), (c, a)):
                h = emap.get((u, v))
                if h is None:
                    h = self._new_edge(u, v)
                    emap[(u, v)] = h
                    emap[(v, u)] = h ^ 1
                elif self.hface[h] != -1:
                    raise NonManifoldInput(f"directed edge ({u}, {v}) used twice")
                hs.append(h)
            for i in range(3):
                self.hface[hs[i]] = f
                self._link(hs[i], hs[(i + 1) % 3])
                self.vh[self.hto[hs[i - 1]]] = hs[i]
            self.fh[f] = hs[0]
        bout = {}
        for h in range(len(self.hto)):
            if self.hface[h] == -1:
                u = self.hto[h ^ 1]
                if u in bout:
                    raise NonManifoldInput(f"vertex {u} joins several boundary fans")
                bout[u] = h
        for u, h in bout.items():
            self._link(h, bout[self.hto[h]])
            self.vh[u] = h

    @classmethod
    def from_halfedge(cls, mesh, flags=None):
        return cls(mesh.vertices, mesh.faces, mesh.vertex_flags if flags is None else flags)

    # -- raw construction ----------------------------------------------
    def _new_edge(self, a, b):
        h = len(self.hto)
        self.hto += [b, a]
        self.hnext += [-1, -1]
        self.hprev += [-1, -1]
        self.hface += [-1, -1]
        self.edel.append(False)
        self._ne += 1
        return h

    def _new_face(self):
        self.fh.append(-1)
        self.fdel.append(False)
        self._nf += 1
        return len(self.fh) - 1

    def _new_vertex(self, p, flag=0, size=1.0):
        self.pos.append(list(p))
        self.flag.append(flag)
        self.size.append(size)
        self.vh.append(-1)
        self.vdel.append(False)
        self._nv += 1
        return len(self.pos) - 1

    def _link(self, h, nh):
        self.hnext[h] = nh
        self.hprev[nh] = h

    # -- queries -------------------------------------------------------
    @property
    def n_vertices(self):
        return self._nv

    @property
    def n_edges(self):
        return self._ne

    @property
    def n_faces(self):
        return self._nf

    def source(self, h):
        return self.hto[h ^ 1]

    def is_boundary_halfedge(self, h):
        return self.hface[h] == -1

    def is_boundary_edge(self, e):
        return self.hface[2 * e] == -1 or self.hface[2 * e + 1] == -1

    def is_boundary_vertex(self, v):
        h = self.vh[v]
        return h == -1 or self.hface[h] == -1

    def outgoing(self, v):
        h0 = self.vh[v]
        if h0 == -1:
            return []
        out = []
        h = h0
        while True:
            out.append(h)
            h = self.hnext[h ^ 1]
            if h == h0:
                return out

    def neighbors(self, v):
        return [self.hto[h] for h in self.outgoing(v)]

    def valence(self, v):
        return len(self.outgoing(v))

    def find_halfedge(self, a, b):
        for h in self.outgoing(a):
            if self.hto[h] == b:
                return h
        return -1

    def edge_length(self, e):
        return _dist(self.pos[self.hto[2 * e]], self.pos[self.hto[2 * e + 1]])

    def live_edges(self):
        return [e for e in range(len(self.edel)) if not self.edel[e]]

    def _adjust_outgoing(self, v):
        h0 = self.vh[v]
        if h0 == -1:
            return
        h = h0
        while True:
            if self.hface[h] == -1:
                self.vh[v] = h
                return
            h = self.hnext[h ^ 1]
            if h == h0:
                return

    # -- split ---------------------------------------------------------
    def split_edge(self, e, p=None):
        """Insert a vertex on edge ``e`` (midpoint by default) and connect it
        to the opposite corners. Returns the new vertex."""
        h0, o0 = 2 * e, 2 * e + 1
        a, b = self.hto[h0], self.hto[o0]
        if p is None:
            pa, pb = self.pos[a], self.pos[b]
            p = ((pa[0] + pb[0]) / 2, (pa[1] + pb[1]) / 2, (pa[2] + pb[2]) / 2)
        v = self._new_vertex(p, min(self.flag[a], self.flag[b]),
                             0.5 * (self.size[a] + self.size[b]))
        v2 = self.hto[o0]
        e1 = self._new_edge(v, v2)
        t1 = e1 ^ 1
        f0, f3 = self.hface[h0], self.hface[o0]
        self.vh[v] = h0
        self.hto[o0] = v
        if f0 != -1:
            h1 = self.hnext[h0]
            h2 = self.hnext[h1]
            v1 = self.hto[h1]
            e0 = self._new_edge(v, v1)
            t0 = e0 ^ 1
            f1 = self._new_face()
            self.fh[f0] = h0
            self.fh[f1] = h2
            self.hface[h1] = f0
            self.hface[t0] = f0
            self.hface[h0] = f0
            self.hface[h2] = f1
            self.hface[t1] = f1
            self.hface[e0] = f1
            self._link(h0, h1)
            self._link(h1, t0)
            self._link(t0, h0)
            self._link(e0, h2)
            self._link(h2, t1)
            self._link(t1, e0)
        else:
            self._link(self.hprev[h0], t1)
            self._link(t1, h0)
        if f3 != -1:
            o1 = self.hnext[o0]
            o2 = self.hnext[o1]
            v3 = self.hto[o1]
            e2 = self._new_edge(v, v3)
            t2 = e2 ^ 1
            f2 = self._new_face()
            self.fh[f2] = o1
            self.fh[f3] = o0
            self.hface[o1] = f2
            self.hface[t2] = f2
            self.hface[e1] = f2
            self.hface[o2] = f3
            self.hface[o0] = f3
            self.hface[e2] = f3
            self._link(e1, o1)
            self._link(o1, t2)
            self._link(t2, e1)
            self._link(o0, e2)
            self._link(e2, o2)
            self._link(o2, o0)
        else:
            self._link(e1, self.hnext[o0])
            self._link(o0, e1)
            self.vh[v] = e1
        if self.vh[v2] == h0:
            self.vh[v2] = t1
        return v

    # -- collapse ------------------------------------------------------
    def is_collapse_ok(self, h):
        """Whether collapsing ``h`` (removing its source into its target)
        keeps the mesh manifold (link condition plus boundary rules)."""
        o = h ^ 1
        v0, v1 = self.hto[o], self.hto[h]
        vl = vr = -1
        if self.hface[h] != -1:
            h1 = self.hnext[h]
            vl = self.hto[h1]
            h2 = self.hnext[h1]
            if self.hface[h1 ^ 1] == -1 and self.hface[h2 ^ 1] == -1:
                return False
        if self.hface[o] != -1:
            h1 = self.hnext[o]
            vr = self.hto[h1]
            h2 = self.hnext[h1]
            if self.hface[h1 ^ 1] == -1 and self.hface[h2 ^ 1] == -1:
                return False
        if vl == vr:
            return False
        if (self.is_boundary_vertex(v0) and self.is_boundary_vertex(v1)
                and self.hface[h] != -1 and self.hface[o] != -1):
            return False
        n1 = set(self.neighbors(v1))
        for w in self.neighbors(v0):
            if w != v1 and w != vl and w != vr and w in n1:
                return False
        return True

    def collapse(self, h):
        """Remove the source of ``h``, merging it into the target."""
        h0 = h
        h1 = self.hprev[h0]
        o0 = h0 ^ 1
        o1 = self.hnext[o0]
        self._remove_edge(h0)
        if self.hnext[self.hnext[h1]] == h1:
            self._remove_loop(h1)
        if self.hnext[self.hnext[o1]] == o1:
            self._remove_loop(o1)

    def _remove_edge(self, h):
        hn, hp = self.hnext[h], self.hprev[h]
        o = h ^ 1
        on, op = self.hnext[o], self.hprev[o]
        fh, fo = self.hface[h], self.hface[o]
        vh, vo = self.hto[h], self.hto[o]
        for hc in self.outgoing(vo):
            self.hto[hc ^ 1] = vh
        self._link(hp, hn)
        self._link(op, on)
        if fh != -1:
            self.fh[fh] = hn
        if fo != -1:
            self.fh[fo] = on
        if self.vh[vh] == o:
            self.vh[vh] = hn
        self._adjust_outgoing(vh)
        self.vh[vo] = -1
        self.vdel[vo] = True
        self._nv -= 1
        self.edel[h >> 1] = True
        self._ne -= 1

    def _remove_loop(self, h):
        h0 = h
        h1 = self.hnext[h0]
        o0, o1 = h0 ^ 1, h1 ^ 1
        v0, v1 = self.hto[h0], self.hto[h1]
        fh, fo = self.hface[h0], self.hface[o0]
        self._link(h1, self.hnext[o0])
        self._link(self.hprev[o0], h1)
        self.hface[h1] = fo
        self.vh[v0] = h1
        self._adjust_outgoing(v0)
        self.vh[v1] = o1
        self._adjust_outgoing(v1)
        if fo != -1 and self.fh[fo] == o0:
            self.fh[fo] = h1
        if fh != -1:
            self.fdel[fh] = True
            self._nf -= 1
        self.edel[h0 >> 1] = True
        self._ne -= 1

    # -- flip ----------------------------------------------------------
    def is_flip_ok(self, e):
        if self.is_boundary_edge(e):
            return False
        h0, h1 = 2 * e, 2 * e + 1
        v0 = self.hto[self.hnext[h0]]
        v1 = self.hto[self.hnext[h1]]
        if v0 == v1:
            return False
        return self.find_halfedge(v0, v1) == -1

    def flip(self, e):
        """Replace edge ``e`` by the other diagonal of its two triangles."""
        a0, b0 = 2 * e, 2 * e + 1
        a1 = self.hnext[a0]
        a2 = self.hnext[a1]
        b1 = self.hnext[b0]
        b2 = self.hnext[b1]
        va0, va1 = self.hto[a0], self.hto[a1]
        vb0, vb1 = self.hto[b0], self.hto[b1]
        fa, fb = self.hface[a0], self.hface[b0]
        self.hto[a0] = va1
        self.hto[b0] = vb1
        self._link(a0, a2)
        self._link(a2, b1)
        self._link(b1, a0)
        self._link(b0, b2)
        self._link(b2, a1)
        self._link(a1, b0)
        self.hface[a1] = fb
        self.hface[b1] = fa
        self.fh[fa] = a0
        self.fh[fb] = b0
        if self.vh[va0] == b0:
            self.vh[va0] = a1
        if self.vh[vb0] == a0:
            self.vh[vb0] = b1

    # -- export --------------------------------------------------------
    def face_array(self):
        """Live faces as vertex triples (uncompacted vertex indices)."""
        fh = np.asarray(self.fh, dtype=np.int64)[~np.asarray(self.fdel, bool)]
        hto = np.asarray(self.hto, dtype=np.int64)
        hnext = np.asarray(self.hnext, dtype=np.int64)
        h1 = fh
        h2 = hnext[h1]
        h3 = hnext[h2]
        return np.stack([hto[h3], hto[h1], hto[h2]], axis=1)

    def edge_array(self):
        e = np.flatnonzero(~np.asarray(self.edel, bool))
        hto = np.asarray(self.hto, dtype=np.int64)
        return np.stack([hto[2 * e + 1], hto[2 * e]], axis=1)

    def to_halfedge(self):
        """Compact into an immutable :class:`HalfEdgeMesh` (live vertices in
        creation order)."""
        live = np.flatnonzero(~np.asarray(self.vdel, bool))
        remap = -np.ones(len(self.pos), np.int64)
        remap[live] = np.arange(len(live))
        F = remap[self.face_array()]
        V = np.asarray(self.pos, dtype=np.float64)[live]
        flags = np.asarray(self.flag, dtype=np.int64)[live]
        return build_halfedge(V, F, flags.astype(np.int8))


# ---------------------------------------------------------------------------

def mean_edge_length(mesh):
    """Mean length over the unique edges of ``mesh``."""
    if isinstance(mesh, EditableMesh):
        e = mesh.edge_array()
        V = np.asarray(mesh.pos)
    else:
        e = mesh.edges()
        V = mesh.vertices
    if not len(e):
        raise EmptyMesh("mesh has no edges")
    return float(np.linalg.norm(V[e[:, 0]] - V[e[:, 1]], axis=1).mean())


def _vertex_boxes(mesh, grid):
    V = mesh.vertices
    if len(V) == len(grid.cloud) and np.array_equal(V, grid.cloud.points):
        return grid.point_box
    return np.floor((V - grid.origin) / grid.v_scale).astype(np.int64)


def rebuild_internal_edges(mesh, grid):
    """Delete faces joining vertices of non-adjacent boxes.

    The boundary loops left behind are the rebuilt internal edges. Pinched
    vertices are repaired and vertices without faces are dropped; vertex
    flags follow their vertices.
    """
    boxes = _vertex_boxes(mesh, grid)
    F = mesh.faces
    b = boxes[F]
    ok = np.ones(len(F), bool)
    for i, j in ((0, 1), (1, 2), (0, 2)):
        ok &= np.abs(b[:, i] - b[:, j]).max(axis=1) <= 1
    if ok.all() and mesh.n_isolated == 0:
        return mesh
    kept, _ = repair_vertex_manifold(F[ok], mesh.n_vertices)
    F = np.asarray(kept, np.int64).reshape(-1, 3)
    if not len(F):
        log.warning("rebuilding internal edges removed every face")
    used = np.zeros(mesh.n_vertices, bool)
    used[F.reshape(-1)] = True
    remap = -np.ones(mesh.n_vertices, np.int64)
    remap[used] = np.arange(used.sum())
    return build_halfedge(mesh.vertices[used], remap[F], mesh.vertex_flags[used])


def _surface_variation_of(points, k):
    from .geometry import PointCloud
    from .resample import surface_variation
    return surface_variation(PointCloud(points), min(k, len(points) - 1))


def adaptive_target_length(mesh, n_classes=5, rates=(2.0, 3.0, 4.0, 5.0, 6.0), *,
                           classes=None, k=16, uniform_cv=0.25):
    """Per-vertex target edge lengths scaled inversely to curvature class rate.

    ``classes`` defaults to equal-population classes of the surface
    variation of the vertex positions. When that variation is nearly
    constant (coefficient of variation below ``uniform_cv``) every vertex
    gets the mean edge length.
    """
    if len(rates) < n_classes:
        raise InvalidParam("one rate per class required")
    l = mean_edge_length(mesh)
    if classes is None:
        from .resample import quantile_classes
        var = _surface_variation_of(mesh.vertices, k)
        mean = var.mean()
        if mean <= 0 or var.std() / mean < uniform_cv:
            return np.full(mesh.n_vertices, l)
        classes = quantile_classes(var, n_classes)
    classes = np.asarray(classes, np.int64)
    if len(np.unique(classes)) < 2:
        return np.full(mesh.n_vertices, l)
    w = np.asarray(rates, dtype=np.float64)[np.clip(classes, 0, n_classes - 1)]
    return l * w.mean() / w


@dataclass
class RemeshParams:
    """Settings of :func:`isotropic_remesh`.

    Attributes
    ----------
    iterations : int
    preserve_edges : bool
        Boundary vertices never move or disappear.
    adaptive : bool
        Use per-vertex target lengths from :func:`adaptive_target_length`.
    features : array_like of bool, optional
        External-edge vertices; defaults to ``vertex_flags == 1``.
    classes : array_like of int, optional
        Curvature classes for the adaptive mode.
    rates : sequence of float
        Class rates for the adaptive mode.
    feature_guard : int
        An external-edge vertex with at least this many external-edge
        neighbours is never removed (3 reads "more than two").
    smoothing : float
        Damping of the tangential smoothing step.
    """

    iterations: int = 5
    preserve_edges: bool = False
    adaptive: bool = False
    features: object = None
    classes: object = None
    rates: tuple = (2.0, 3.0, 4.0, 5.0, 6.0)
    feature_guard: int = 3
    smoothing: float = 0.5

    def __post_init__(self):
        if self.iterations < 1:
            raise InvalidParam("iterations must be >= 1")
        if not 0 <= self.smoothing <= 1:
            raise InvalidParam("smoothing must lie in [0, 1]")


@dataclass
class RemeshInfo:
    """Per-iteration counters of a remeshing run."""

    splits: list
    collapses: list
    flips: list
    q_avg: list
    deficit: int


class _Remesher:
    def __init__(self, mesh, params):
        self.p = params
        flags = np.asarray(mesh.vertex_flags, np.int64)
        self.m = EditableMesh(mesh.vertices, mesh.faces, flags)
        feats = (flags == EXTERNAL_EDGE) if params.features is None else np.asarray(params.features, bool)
        # feature flag lives in ``ext``; ``flag`` keeps the caller's labels
        self.ext = [bool(x) for x in feats]
        if params.adaptive:
            t = adaptive_target_length(mesh, len(params.rates), params.rates, classes=params.classes)
            self.m.size = (t / t.mean()).tolist()
        self.l = 0.0

    # ---------------------------------------------------------------
    def target(self, a, b):
        return self.l * 0.5 * (self.m.size[a] + self.m.size[b])

    def _ext_count(self, v):
        return sum(1 for w in self.m.neighbors(v) if self.ext[w])

    def _fixed(self, v):
        m = self.m
        if self.p.preserve_edges and m.is_boundary_vertex(v):
            return True
        return self.ext[v] and self._ext_count(v) >= self.p.feature_guard

    def _anchored(self, v):
        return self.ext[v] or self.m.is_boundary_vertex(v)

    def split_long(self):
        m = self.m
        count = 0
        for _ in range(20):
            todo = []
            for e in m.live_edges():
                a, b = m.hto[2 * e], m.hto[2 * e + 1]
                if m.edge_length(e) > 4.0 / 3.0 * self.target(a, b):
                    todo.append(e)
            if not todo:
                break
            for e in todo:
                a, b = m.hto[2 * e], m.hto[2 * e + 1]
                ext = self.ext[a] and self.ext[b]
                m.split_edge(e)
                self.ext.append(ext)
                count += 1
        return count

    def _collapse_plan(self, e):
        """(halfedge to collapse, target position) or None."""
        m = self.m
        h = 2 * e
        a, b = m.hto[h ^ 1], m.hto[h]
        fa, fb = self._fixed(a), self._fixed(b)
        if fa and fb:
            return None
        pa, pb = m.pos[a], m.pos[b]
        mid = ((pa[0] + pb[0]) / 2, (pa[1] + pb[1]) / 2, (pa[2] + pb[2]) / 2)
        if fa or fb:
            keep = a if fa else b
            pos = tuple(m.pos[keep])
        else:
            na, nb = self._anchored(a), self._anchored(b)
            if na and not nb:
                keep, pos = a, tuple(pa)
            elif nb and not na:
                keep, pos = b, tuple(pb)
            else:
                if self.p.preserve_edges and m.is_boundary_vertex(a) and m.is_boundary_vertex(b):
                    return None
                keep = b
                pos = mid
        hh = h if keep == b else h ^ 1
        return hh, pos

    def _collapse_valid(self, h, pos):
        m = self.m
        v0, v1 = m.hto[h ^ 1], m.hto[h]
        if not m.is_collapse_ok(h):
            return False
        # valence guards on the two opposite corners
        for hx in (h, h ^ 1):
            if m.hface[hx] != -1:
                vo = m.hto[m.hnext[hx]]
                if m.valence(vo) <= 3 and not m.is_boundary_vertex(vo):
                    return False
        lim = 4.0 / 3.0
        for v in (v0, v1):
            for w in m.neighbors(v):
                if w in (v0, v1):
                    continue
                if _dist(pos, m.pos[w]) > lim * self.target(v1, w):
                    return False
        # no face around either endpoint may flip or degenerate
        for v in (v0, v1):
            for hc in m.outgoing(v):
                f = m.hface[hc]
                if f == -1:
                    continue
                h2 = m.hnext[hc]
                x, y = m.hto[hc], m.hto[h2]
                if x in (v0, v1) or y in (v0, v1):
                    continue
                pv, px, py = m.pos[v], m.pos[x], m.pos[y]
                n0 = _cross(_sub(px, pv), _sub(py, pv))
                n1 = _cross(_sub(px, pos), _sub(py, pos))
                if _dot(n0, n1) <= 1e-12 * _dot(n0, n0):
                    return False
        return True

    def collapse_short(self, budget):
        m = self.m
        heap = []
        for e in m.live_edges():
            a, b = m.hto[2 * e], m.hto[2 * e + 1]
            le = m.edge_length(e)
            if le < 0.8 * self.target(a, b):
                heap.append((le, e))
        heapq.heapify(heap)
        done = 0
        while heap and done < budget:
            le, e = heapq.heappop(heap)
            if m.edel[e]:
                continue
            a, b = m.hto[2 * e], m.hto[2 * e + 1]
            cur = m.edge_length(e)
            if cur >= 0.8 * self.target(a, b):
                continue
            if cur != le:
                heapq.heappush(heap, (cur, e))
                continue
            plan = self._collapse_plan(e)
            if plan is None:
                continue
            h, pos = plan
            if not self._collapse_valid(h, pos):
                continue
            keep = m.hto[h]
            m.collapse(h)
            m.pos[keep] = list(pos)
            done += 1
            for hc in m.outgoing(keep):
                e2 = hc >> 1
                w = m.hto[hc]
                l2 = m.edge_length(e2)
                if l2 < 0.8 * self.target(keep, w):
                    heapq.heappush(heap, (l2, e2))
        return done

    def _deviation(self, v, delta):
        t = 4 if self.m.is_boundary_vertex(v) else 6
        return (self.m.valence(v) + delta - t) ** 2

    def flip_edges(self):
        m = self.m
        flips = 0
        for e in m.live_edges():
            if m.edel[e] or not m.is_flip_ok(e):
                continue
            h0, h1 = 2 * e, 2 * e + 1
            a, b = m.hto[h0], m.hto[h1]
            c, d = m.hto[m.hnext[h0]], m.hto[m.hnext[h1]]
            if self.ext[a] and self.ext[b]:
                continue
            va, vb = m.valence(a), m.valence(b)
            if va <= 3 or vb <= 3:
                continue
            before = (self._deviation(a, 0) + self._deviation(b, 0)
                      + self._deviation(c, 0) + self._deviation(d, 0))
            after = (self._deviation(a, -1) + self._deviation(b, -1)
                     + self._deviation(c, 1) + self._deviation(d, 1))
            if after >= before:
                continue
            # face (b, c, a) / (a, d, b) become (c, d, ...) after the flip
            pa, pb, pc, pd = m.pos[a], m.pos[b], m.pos[c], m.pos[d]
            if not (_acute(pc, pd, pb) and _acute(pd, pc, pa)):
                continue
            n_old = _cross(_sub(pc, pb), _sub(pa, pb))
            n_old2 = _cross(_sub(pd, pa), _sub(pb, pa))
            n1 = _cross(_sub(pd, pc), _sub(pb, pc))
            n2 = _cross(_sub(pc, pd), _sub(pa, pd))
            ref = (n_old[0] + n_old2[0], n_old[1] + n_old2[1], n_old[2] + n_old2[2])
            if _dot(n1, ref) <= 0 or _dot(n2, ref) <= 0:
                continue
            m.flip(e)
            flips += 1
        return flips

    def smooth(self):
        m = self.m
        lam = self.p.smoothing
        if lam == 0:
            return
        V = np.asarray(m.pos, dtype=np.float64)
        E = m.edge_array()
        F = m.face_array()
        n = len(V)
        acc = np.zeros_like(V)
        deg = np.zeros(n)
        np.add.at(acc, E[:, 0], V[E[:, 1]])
        np.add.at(acc, E[:, 1], V[E[:, 0]])
        np.add.at(deg, E[:, 0], 1)
        np.add.at(deg, E[:, 1], 1)
        fn = np.cross(V[F[:, 1]] - V[F[:, 0]], V[F[:, 2]] - V[F[:, 0]])
        vn = np.zeros_like(V)
        for i in range(3):
            np.add.at(vn, F[:, i], fn)
        ln = np.linalg.norm(vn, axis=1)
        hface = np.asarray(m.hface)
        hto = np.asarray(m.hto)
        live_h = np.repeat(~np.asarray(m.edel, bool), 2)
        bnd = np.zeros(n, bool)
        bnd[hto[(hface == -1) & live_h]] = True
        move = (deg > 0) & (ln > 0) & ~bnd & ~np.asarray(self.ext, bool) & ~np.asarray(m.vdel, bool)
        idx = np.flatnonzero(move)
        nrm = vn[idx] / ln[idx, None]
        u = acc[idx] / deg[idx, None] - V[idx]
        u -= np.einsum("ij,ij->i", u, nrm)[:, None] * nrm
        V[idx] += lam * u
        for i, p in zip(idx.tolist(), V[idx].tolist()):
            m.pos[i] = p

    def q_avg(self):
        V = np.asarray(self.m.pos, dtype=np.float64)
        F = self.m.face_array()
        return float(triangle_quality_array(V[F[:, 0]], V[F[:, 1]], V[F[:, 2]]).mean())

    def check(self):
        """Every edge has at most two faces, every directed edge one."""
        F = self.m.face_array()
        d = np.stack([F, np.roll(F, -1, axis=1)], axis=2).reshape(-1, 2)
        if len(np.unique(d, axis=0)) != len(d):
            raise NonManifoldInput("remeshing produced a non-manifold edge")


def _acute(p, q, r):
    """All angles of triangle (p, q, r) are below 90 degrees."""
    for a, b, c in ((p, q, r), (q, r, p), (r, p, q)):
        if _dot(_sub(b, a), _sub(c, a)) <= 0:
            return False
    return True


def isotropic_remesh(mesh, params=None, *, return_info=False):
    """Make the triangles of ``mesh`` near-equilateral at constant size.

    Each iteration recomputes the mean edge length ``l``, splits edges
    longer than ``4/3 l``, collapses edges shorter than ``4/5 l`` (shortest
    first, at most as many as were split plus any earlier shortfall), flips
    edges to even out valences, and smooths vertices in their tangent
    planes. External-edge vertices do not move, and crease vertices with
    many crease neighbours are never removed.

    Returns
    -------
    HalfEdgeMesh, or (HalfEdgeMesh, RemeshInfo) with ``return_info``.
        The vertex count equals the input count unless the collapse budget
        could not be met, in which case the surplus is ``info.deficit``.
    """
    params = params or RemeshParams()
    if mesh.n_faces == 0:
        raise EmptyMesh("mesh has no faces")
    r = _Remesher(mesh, params)
    info = RemeshInfo([], [], [], [r.q_avg()], 0)
    deficit = 0
    for _ in range(params.iterations):
        r.l = mean_edge_length(r.m)
        n_split = r.split_long()
        budget = n_split + deficit
        n_coll = r.collapse_short(budget)
        deficit = budget - n_coll
        n_flip = r.flip_edges()
        r.smooth()
        r.check()
        info.splits.append(n_split)
        info.collapses.append(n_coll)
        info.flips.append(n_flip)
        info.q_avg.append(r.q_avg())
    info.deficit = deficit
    if deficit:
        log.info("collapse budget missed by %d; vertex count grew accordingly", deficit)
    out = r.m.to_halfedge()
    return (out, info) if return_info else out
