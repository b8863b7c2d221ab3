"""Half-edge connectivity for oriented triangle meshes with boundary.

Half-edges ``3f``, ``3f+1``, ``3f+2`` belong to face ``f`` and start at
``faces[f, 0]``, ``faces[f, 1]``, ``faces[f, 2]``. Boundary half-edges are
appended after the interior ones; their face is ``-1``.
"""

from collections import deque

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .errors import DegenerateInput, InvalidParam, NonManifoldEdge, NonManifoldVertex, OrientationError

ORDINARY = 0
EXTERNAL_EDGE = 1


def _ro(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


class HalfEdgeMesh:
    """Immutable oriented 2-manifold triangle mesh, possibly with boundary.

    Build instances with :func:`build_halfedge`; the constructor only stores
    arrays that are already consistent.
    """

    def __init__(self, vertices, faces, he_vertex, he_twin, he_next, he_face,
                 vertex_halfedge, vertex_flags):
        self.vertices = _ro(vertices)
        self.faces = _ro(faces)
        self.he_vertex = _ro(he_vertex)
        self.he_twin = _ro(he_twin)
        self.he_next = _ro(he_next)
        self.he_face = _ro(he_face)
        self.vertex_halfedge = _ro(vertex_halfedge)
        self.vertex_flags = _ro(vertex_flags)
        self._cache = {}

    def __repr__(self):
        return (f"HalfEdgeMesh(V={self.n_vertices}, E={self.n_edges}, "
                f"F={self.n_faces}, boundary_loops={len(self.boundary_loops())})")

    # -- counts ---------------------------------------------------------
    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_faces(self):
        return len(self.faces)

    @property
    def n_halfedges(self):
        return len(self.he_vertex)

    @property
    def n_edges(self):
        return len(self.edges())

    @property
    def face_halfedge(self):
        return np.arange(self.n_faces) * 3

    @property
    def he_target(self):
        return self.he_vertex[self.he_twin]

    @property
    def n_isolated(self):
        return int(np.sum(self.vertex_halfedge < 0))

    # -- derived topology ----------------------------------------------
    def edges(self):
        """Unique undirected edges as sorted pairs, lexicographic order."""
        if "edges" not in self._cache:
            h = np.arange(self.n_halfedges)
            a, b = self.he_vertex, self.he_vertex[self.he_twin]
            keep = h < self.he_twin
            e = np.stack([np.minimum(a, b)[keep], np.maximum(a, b)[keep]], 1)
            e = e[np.lexsort((e[:, 1], e[:, 0]))] if len(e) else e.reshape(0, 2)
            self._cache["edges"] = _ro(e)
        return self._cache["edges"]

    def boundary_mask(self):
        """Boolean mask over vertices lying on a boundary loop."""
        m = np.zeros(self.n_vertices, bool)
        m[self.he_vertex[self.he_face < 0]] = True
        return m

    def boundary_loops(self):
        """Boundary loops as lists of vertex indices in half-edge order."""
        if "loops" not in self._cache:
            seen = set()
            loops = []
            for b in np.flatnonzero(self.he_face < 0):
                if b in seen:
                    continue
                loop = []
                h = int(b)
                while h not in seen:
                    seen.add(h)
                    loop.append(int(self.he_vertex[h]))
                    h = int(self.he_next[h])
                loops.append(loop)
            self._cache["loops"] = loops
        return self._cache["loops"]

    def face_components(self):
        """Connected-component label per face (faces joined by edges)."""
        if "fcomp" not in self._cache:
            interior = np.flatnonzero((self.he_face >= 0) & (self.he_face[self.he_twin] >= 0))
            a = self.he_face[interior]
            b = self.he_face[self.he_twin[interior]]
            g = coo_matrix((np.ones(len(a)), (a, b)), shape=(self.n_faces, self.n_faces))
            _, lab = connected_components(g, directed=False)
            self._cache["fcomp"] = _ro(lab)
        return self._cache["fcomp"]

    def euler_characteristic(self):
        """V - E + F over vertices referenced by at least one face."""
        v = self.n_vertices - self.n_isolated
        return v - self.n_edges + self.n_faces

    def component_stats(self):
        """Per connected component: V, E, F, boundary loops, chi, genus."""
        if self.n_faces == 0:
            return []
        lab = self.face_components()
        n_comp = int(lab.max()) + 1
        stats = []
        he_comp = np.where(self.he_face >= 0, lab[np.maximum(self.he_face, 0)], -1)
        # boundary half-edges inherit the component of their twin
        he_comp = np.where(he_comp < 0, he_comp[self.he_twin], he_comp)
        loops = self.boundary_loops()
        loop_comp = []
        first_b = {}
        for b in np.flatnonzero(self.he_face < 0):
            first_b.setdefault(int(self.he_vertex[b]), int(b))
        for loop in loops:
            loop_comp.append(int(he_comp[first_b[loop[0]]]))
        for c in range(n_comp):
            fmask = lab == c
            F = int(fmask.sum())
            V = len(np.unique(self.faces[fmask]))
            hmask = he_comp == c
            E = int(np.sum(hmask & (np.arange(self.n_halfedges) < self.he_twin)))
            b = loop_comp.count(c)
            chi = V - E + F
            stats.append({"vertices": V, "edges": E, "faces": F,
                          "boundary_loops": b, "euler": chi,
                          "genus": (2 - chi - b) // 2})
        return stats

    def genus(self):
        return sum(s["genus"] for s in self.component_stats())

    # -- local queries -------------------------------------------------
    def outgoing(self, v):
        """Outgoing half-edges of ``v`` in rotation order."""
        start = int(self.vertex_halfedge[v])
        if start < 0:
            return []
        out = [start]
        h = int(self.he_next[self.he_twin[start]])
        while h != start:
            out.append(h)
            h = int(self.he_next[self.he_twin[h]])
        return out

    def vertex_neighbors(self, v):
        return [int(self.he_vertex[self.he_twin[h]]) for h in self.outgoing(v)]

    def adjacency_lists(self):
        """Neighbour list of every vertex (sorted)."""
        if "adj" not in self._cache:
            e = self.edges()
            order = np.argsort(np.concatenate([e[:, 0], e[:, 1]]), kind="stable")
            other = np.concatenate([e[:, 1], e[:, 0]])[order]
            start = np.searchsorted(np.concatenate([e[:, 0], e[:, 1]])[order],
                                    np.arange(self.n_vertices + 1))
            self._cache["adj"] = [np.sort(other[start[i]:start[i + 1]])
                                  for i in range(self.n_vertices)]
        return self._cache["adj"]

    def valence(self):
        e = self.edges()
        return np.bincount(e.ravel(), minlength=self.n_vertices)

    # -- geometry ------------------------------------------------------
    def face_normals(self, unit=True):
        p = self.vertices[self.faces]
        n = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
        if unit:
            ln = np.linalg.norm(n, axis=1, keepdims=True)
            n = n / np.where(ln > 0, ln, 1.0)
        return n

    def face_areas(self):
        return 0.5 * np.linalg.norm(self.face_normals(unit=False), axis=1)

    def vertex_normals(self):
        """Area-weighted unit vertex normals (zero for isolated vertices)."""
        fn = self.face_normals(unit=False)
        vn = np.zeros_like(self.vertices)
        for i in range(3):
            np.add.at(vn, self.faces[:, i], fn)
        ln = np.linalg.norm(vn, axis=1, keepdims=True)
        return vn / np.where(ln > 0, ln, 1.0)

    def edge_lengths(self):
        e = self.edges()
        return np.linalg.norm(self.vertices[e[:, 0]] - self.vertices[e[:, 1]], axis=1)

    # -- conversion ----------------------------------------------------
    def to_arrays(self):
        """Copies of ``(vertices, faces)``."""
        return np.array(self.vertices), np.array(self.faces)

    def with_vertex_flags(self, flags):
        flags = np.asarray(flags, dtype=np.int8)
        if flags.shape != (self.n_vertices,):
            raise InvalidParam("one flag per vertex required")
        return HalfEdgeMesh(self.vertices, self.faces, self.he_vertex, self.he_twin,
                            self.he_next, self.he_face, self.vertex_halfedge, flags)

    def with_vertices(self, vertices):
        vertices = np.asarray(vertices, dtype=np.float64)
        if vertices.shape != self.vertices.shape:
            raise InvalidParam("vertex array shape must not change")
        return HalfEdgeMesh(vertices, self.faces, self.he_vertex, self.he_twin,
                            self.he_next, self.he_face, self.vertex_halfedge,
                            self.vertex_flags)


def _orient_faces(faces, n_vertices):
    """Flip faces so that neighbours traverse shared edges oppositely."""
    m = len(faces)
    if m == 0:
        return faces
    d = np.stack([faces, np.roll(faces, -1, axis=1)], axis=2).reshape(-1, 2)
    key = np.minimum(d[:, 0], d[:, 1]) * n_vertices + np.maximum(d[:, 0], d[:, 1])
    order = np.argsort(key, kind="stable")
    ks = key[order]
    uniq, start, counts = np.unique(ks, return_index=True, return_counts=True)
    bad = counts > 2
    if np.any(bad):
        k = int(uniq[np.argmax(bad)])
        raise NonManifoldEdge((k // n_vertices, k % n_vertices), int(counts[np.argmax(bad)]))
    pair = start[counts == 2]
    h0 = order[pair]
    h1 = order[pair + 1]
    f0, f1 = h0 // 3, h1 // 3
    same = d[h0, 0] == d[h1, 0]
    nbrs = [[] for _ in range(m)]
    for a, b, s in zip(f0.tolist(), f1.tolist(), same.tolist()):
        nbrs[a].append((b, s))
        nbrs[b].append((a, s))
    flip = np.zeros(m, bool)
    seen = np.zeros(m, bool)
    for seed in range(m):
        if seen[seed]:
            continue
        seen[seed] = True
        queue = deque([seed])
        while queue:
            f = queue.popleft()
            for g, s in nbrs[f]:
                want = flip[f] ^ s
                if not seen[g]:
                    seen[g] = True
                    flip[g] = want
                    queue.append(g)
                elif flip[g] != want:
                    raise OrientationError("mesh is not orientable")
    out = faces.copy()
    out[flip] = out[flip][:, ::-1]
    return out


def build_halfedge(vertices, faces, vertex_flags=None):
    """Build a :class:`HalfEdgeMesh` from vertex positions and triangles.

    Inconsistent face windings are repaired per connected component by
    propagating the winding of the lowest-indexed face.

    Raises
    ------
    DegenerateInput
        A face repeats a vertex index.
    NonManifoldEdge
        An edge is shared by three or more faces.
    NonManifoldVertex
        A vertex joins two or more separate face fans.
    OrientationError
        A component cannot be consistently oriented.
    """
    V = np.asarray(vertices, dtype=np.float64).reshape(-1, 3)
    F = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
    n = len(V)
    if len(F) and (F.min() < 0 or F.max() >= n):
        raise InvalidParam("face index out of range")
    degenerate = (F[:, 0] == F[:, 1]) | (F[:, 1] == F[:, 2]) | (F[:, 0] == F[:, 2])
    if np.any(degenerate):
        raise DegenerateInput(f"face {int(np.argmax(degenerate))} repeats a vertex")
    F = _orient_faces(F, n)
    m = len(F)
    n_int = 3 * m
    origin = F.reshape(-1)
    target = np.roll(F, -1, axis=1).reshape(-1)
    nxt = (np.arange(n_int) // 3) * 3 + (np.arange(n_int) + 1) % 3
    key = origin * n + target
    rkey = target * n + origin
    order = np.argsort(key)
    pos = np.searchsorted(key[order], rkey)
    pos = np.minimum(pos, max(n_int - 1, 0))
    has_twin = (key[order][pos] == rkey) if n_int else np.zeros(0, bool)
    twin_int = np.where(has_twin, order[pos] if n_int else pos, -1)

    no_twin = np.flatnonzero(twin_int < 0)
    nb = len(no_twin)
    he_vertex = np.concatenate([origin, target[no_twin]])
    he_face = np.concatenate([np.arange(n_int) // 3, -np.ones(nb, np.int64)])
    he_twin = np.concatenate([twin_int, no_twin]).astype(np.int64)
    bidx = n_int + np.arange(nb)
    he_twin[no_twin] = bidx
    he_next = np.concatenate([nxt, np.zeros(nb, np.int64)])

    vertex_he = -np.ones(n, np.int64)
    if n_int:
        vertex_he[origin[::-1]] = np.arange(n_int)[::-1]
    if nb:
        b_origin = he_vertex[bidx]
        counts = np.bincount(b_origin, minlength=n)
        if np.any(counts > 1):
            raise NonManifoldVertex(int(np.argmax(counts > 1)))
        first = -np.ones(n, np.int64)
        first[b_origin] = bidx
        # boundary half-edge b runs target -> origin of its interior twin
        he_next[bidx] = first[origin[no_twin]]
        vertex_he[b_origin] = bidx

    # every vertex must form a single fan
    inc = np.bincount(origin, minlength=n)
    tw, nx = he_twin, he_next
    for v in np.flatnonzero(vertex_he >= 0):
        start = int(vertex_he[v])
        h = start
        count = 0
        while True:
            if he_face[h] >= 0:
                count += 1
            h = int(nx[tw[h]])
            if h == start:
                break
        if count != inc[v]:
            raise NonManifoldVertex(int(v))

    flags = np.zeros(n, np.int8) if vertex_flags is None else np.asarray(vertex_flags, np.int8)
    if flags.shape != (n,):
        raise InvalidParam("one flag per vertex required")
    return HalfEdgeMesh(V, F, he_vertex, he_twin, he_next, he_face, vertex_he, flags)
