"""Triangle quality, minimum angles, histograms, colour maps and the
distance of mesh vertices to the MLS surface of a reference cloud."""

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyMesh, InsufficientPoints, InvalidParam, ProjectionUnstable
from .geometry import NeighborIndex, bounding_box

Q_FLOOR = 0.1
THETA_FLOOR = 5.0
BELOW_FLOOR = "below_quality_floor"
HISTOGRAM_EDGES = np.linspace(0.0, 60.0, 61)


def _as_tri(t):
    t = np.asarray(t, dtype=np.float64)
    if t.shape[-2:] != (3, 3):
        raise InvalidParam("triangles must have shape (..., 3, 3)")
    return t[..., 0, :], t[..., 1, :], t[..., 2, :]


def triangle_quality_array(p0, p1, p2):
    """Vectorised ``(6/sqrt 3) * inradius / longest edge``; 0 when degenerate."""
    a = np.linalg.norm(p1 - p2, axis=-1)
    b = np.linalg.norm(p2 - p0, axis=-1)
    c = np.linalg.norm(p0 - p1, axis=-1)
    area = 0.5 * np.linalg.norm(np.cross(p1 - p0, p2 - p0), axis=-1)
    s = 0.5 * (a + b + c)
    hmax = np.maximum(np.maximum(a, b), c)
    ok = (s > 0) & (hmax > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        q = (6.0 / np.sqrt(3.0)) * (area / np.where(ok, s, 1.0)) / np.where(ok, hmax, 1.0)
    return np.clip(np.where(ok, q, 0.0), 0.0, 1.0)


def corner_angles_array(p0, p1, p2):
    """Interior angles (degrees) at the three corners, shape (..., 3)."""
    def ang(a, b, c):
        u, v = b - a, c - a
        return np.degrees(np.arctan2(np.linalg.norm(np.cross(u, v), axis=-1),
                                     np.einsum("...i,...i->...", u, v)))
    out = np.stack([ang(p0, p1, p2), ang(p1, p2, p0), ang(p2, p0, p1)], axis=-1)
    # zero-area triangles report 0 at every corner
    area2 = np.linalg.norm(np.cross(p1 - p0, p2 - p0), axis=-1)
    return np.where((area2 > 0)[..., None], out, 0.0)


def triangle_quality(t):
    """Quality in [0, 1] of a triangle given as a (3, 3) vertex array.

    >>> round(triangle_quality([[0, 0, 0], [1, 0, 0], [0, 1, 0]]), 4)
    0.7174
    """
    return float(triangle_quality_array(*_as_tri(t)))


def min_angle(t):
    """Smallest interior angle of a (3, 3) triangle, in degrees."""
    return float(corner_angles_array(*_as_tri(t)).min(axis=-1))


@dataclass
class QualityReport:
    """Aggregated mesh statistics. A ``None`` statistic carries its reason in
    ``reasons``."""

    q_min: float
    q_avg: float
    theta_min: float
    theta_avg: float
    reasons: dict
    histogram_edges: np.ndarray
    histogram_counts: np.ndarray
    vertex_min_angles: np.ndarray = field(repr=False)
    triangle_q: np.ndarray = field(repr=False)
    triangle_theta: np.ndarray = field(repr=False)
    triangle_count: int = 0
    vertex_count: int = 0
    delta_max: float = None
    delta_avg: float = None


def triangle_stats(vertices, faces):
    """Per-triangle quality and minimum angle plus per-vertex minimum corner
    angle (NaN for vertices without faces)."""
    V = np.asarray(vertices, dtype=np.float64)
    F = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
    p0, p1, p2 = V[F[:, 0]], V[F[:, 1]], V[F[:, 2]]
    q = triangle_quality_array(p0, p1, p2)
    corners = corner_angles_array(p0, p1, p2)
    theta = corners.min(axis=1)
    vmin = np.full(len(V), np.inf)
    np.minimum.at(vmin, F.reshape(-1), corners.reshape(-1))
    vmin[np.isinf(vmin)] = np.nan
    return q, theta, vmin


def angle_histogram(theta):
    """Counts of per-triangle minimum angles in 60 one-degree bins."""
    counts, _ = np.histogram(np.clip(theta, 0.0, 60.0), bins=HISTOGRAM_EDGES)
    return counts


def mesh_report(mesh, original=None, mls_k=12):
    """Quality statistics of ``mesh``; MLS error when ``original`` is given.

    ``q_min`` is reported missing when some triangle has quality below 0.1,
    ``theta_min`` when some minimum angle is below 5 degrees; the averages
    always cover every triangle.
    """
    if mesh.n_faces == 0:
        raise EmptyMesh("mesh has no faces")
    q, theta, vmin = triangle_stats(mesh.vertices, mesh.faces)
    reasons = {}
    q_min = float(q.min())
    t_min = float(theta.min())
    if q_min < Q_FLOOR:
        q_min = None
        reasons["q_min"] = BELOW_FLOOR
    if t_min < THETA_FLOOR:
        t_min = None
        reasons["theta_min"] = BELOW_FLOOR
    rep = QualityReport(
        q_min=q_min, q_avg=float(q.mean()), theta_min=t_min, theta_avg=float(theta.mean()),
        reasons=reasons, histogram_edges=HISTOGRAM_EDGES.copy(),
        histogram_counts=angle_histogram(theta), vertex_min_angles=vmin,
        triangle_q=q, triangle_theta=theta,
        triangle_count=mesh.n_faces, vertex_count=mesh.n_vertices - mesh.n_isolated)
    if original is not None:
        rep.delta_max, rep.delta_avg = mls_error(mesh, original, mls_k)
    return rep


def mls_project(points, reference, k=12, h=None, tol=None, max_iter=20):
    """Project ``points`` onto the MLS surface of ``reference``.

    Each step fits a plane to the ``k`` nearest reference points with
    Gaussian weights ``exp(-d^2/h^2)`` around the current position and moves
    the position onto it.

    Returns
    -------
    projected : ndarray
    converged : ndarray of bool
    """
    ref = reference.points
    if len(ref) <= k:
        raise InsufficientPoints(f"need more than {k} reference points, got {len(ref)}")
    index = NeighborIndex(ref)
    if h is None:
        from .preprocess import compute_h
        h = compute_h(reference, k)
    if tol is None:
        tol = 1e-6 * bounding_box(reference).diagonal
    x = np.array(points, dtype=np.float64)
    active = np.arange(len(x))
    converged = np.zeros(len(x), bool)
    for _ in range(max_iter):
        if not len(active):
            break
        idx, d = index.query(x[active], k)
        w = np.exp(-(d / h) ** 2)
        w_sum = w.sum(axis=1, keepdims=True)
        # far-away positions get vanishing weights; fall back on uniform ones
        w = np.where(w_sum > 1e-300, w, 1.0)
        w /= w.sum(axis=1, keepdims=True)
        nb = ref[idx]
        c = np.einsum("nk,nkj->nj", w, nb)
        dc = nb - c[:, None, :]
        cov = np.einsum("nk,nki,nkj->nij", w, dc, dc)
        n = np.linalg.eigh(cov)[1][:, :, 0]
        step = np.einsum("nj,nj->n", x[active] - c, n)[:, None] * n
        x[active] -= step
        moved = np.linalg.norm(step, axis=1)
        done = moved < tol
        converged[active[done]] = True
        active = active[~done]
    return x, converged


def mls_error(mesh, original, k=12):
    """``(max, mean)`` distance of the mesh vertices to the MLS surface of
    ``original``, as fractions of the cloud's bounding-box diagonal.

    Raises
    ------
    ProjectionUnstable
        More than 1% of the vertices did not converge within 20 steps.
    """
    used = np.zeros(mesh.n_vertices, bool)
    used[mesh.faces.reshape(-1)] = True
    v = mesh.vertices[used] if mesh.n_faces else mesh.vertices
    if not len(v):
        raise EmptyMesh("mesh has no vertices")
    proj, ok = mls_project(v, original, k)
    frac = 1.0 - ok.mean()
    if frac > 0.01:
        raise ProjectionUnstable(f"{frac:.1%} of vertices did not converge",
                                 {"unconverged": int((~ok).sum()), "vertices": len(v)})
    diag = bounding_box(original).diagonal
    delta = np.linalg.norm(proj - v, axis=1) / diag
    return float(delta.max()), float(delta.mean())


def angle_colors(angles):
    """RGB (uint8) for angles in degrees: 0 blue, 30 green, 60 red.

    Values are clamped to [0, 60]; NaN maps to grey.
    """
    a = np.asarray(angles, dtype=np.float64)
    t = np.clip(np.nan_to_num(a, nan=0.0), 0.0, 60.0) / 60.0
    lo = np.clip(2 * t, 0, 1)
    hi = np.clip(2 * t - 1, 0, 1)
    r = hi
    g = np.where(t <= 0.5, lo, 1 - hi)
    b = 1 - lo
    rgb = np.round(255 * np.stack([r, g, b], axis=-1)).astype(np.uint8)
    rgb[np.isnan(a)] = 128
    return rgb


def vertex_colors(mesh):
    """Colour map of the per-vertex minimum corner angle."""
    _, _, vmin = triangle_stats(mesh.vertices, mesh.faces)
    return angle_colors(vmin)
