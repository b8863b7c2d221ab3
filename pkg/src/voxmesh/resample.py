"""Feature classification, quota allocation and round-scheduled farthest
point sampling over a voxel grid."""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientPoints, InvalidParam, QuotaExceedsPopulation, TargetExceedsInput
from .geometry import NeighborIndex, PointCloud

ORDINARY = 0
EXTERNAL_EDGE = 1

DEFAULT_EDGE_RATES = {EXTERNAL_EDGE: 7.0, ORDINARY: 3.0}
DEFAULT_CURVATURE_RATES = (2.0, 3.0, 4.0, 5.0, 6.0)


def surface_variation(cloud, k):
    """``l0 / (l0 + l1 + l2)`` of each point's neighbourhood covariance.

    The neighbourhood is the point and its ``k`` nearest neighbours; values
    lie in ``[0, 1/3]`` and vanish on planes.
    """
    if len(cloud) <= k:
        raise InsufficientPoints(f"need more than {k} points, got {len(cloud)}")
    pts = cloud.points
    idx, _ = NeighborIndex(pts).neighbors(k)
    nb = np.concatenate([pts[:, None, :], pts[idx]], axis=1)
    c = nb - nb.mean(axis=1, keepdims=True)
    cov = np.einsum("nki,nkj->nij", c, c) / nb.shape[1]
    ev = np.clip(np.linalg.eigvalsh(cov), 0.0, None)
    tot = ev.sum(axis=1)
    var = np.where(tot > 0, ev[:, 0] / np.where(tot > 0, tot, 1.0), 0.0)
    # exact planes produce round-off sized values
    return np.where(var < 1e-9, 0.0, var)


def classify_edge_points(cloud, k=16, threshold=0.03):
    """Binary labels: 1 where the surface variation exceeds ``threshold``.

    A local stand-in for a dedicated sharp-feature detector; clouds that
    already carry labels can skip it.
    """
    if not 0 <= threshold <= 1:
        raise InvalidParam("threshold must lie in [0, 1]")
    return (surface_variation(cloud, k) > threshold).astype(np.int64)


def classify_by_curvature(cloud, k=16, n_classes=5):
    """Equal-population classes of surface variation, 0 = flattest.

    Points with identical variation share the lowest class of their group,
    so a plane falls entirely into class 0.
    """
    if n_classes < 2:
        raise InvalidParam("n_classes must be >= 2")
    return quantile_classes(surface_variation(cloud, k), n_classes)


def quantile_classes(values, n_classes):
    values = np.asarray(values, dtype=np.float64)
    n = len(values)
    order = np.lexsort((np.arange(n), values))
    cls = np.empty(n, np.int64)
    cls[order] = (np.arange(n) * n_classes) // max(n, 1)
    # equal values take the smallest class of their tie group
    sv = values[order]
    group_start = np.concatenate([[True], sv[1:] != sv[:-1]])
    first = np.maximum.accumulate(np.where(group_start, np.arange(n), 0))
    cls[order] = cls[order][first]
    return cls


def _rate_map(class_rates, classes):
    if class_rates is None:
        rates = {int(c): 1.0 for c in classes}
    elif isinstance(class_rates, dict):
        rates = {int(c): float(r) for c, r in class_rates.items()}
    else:
        rates = {c: float(r) for c, r in enumerate(class_rates)}
    for c in classes:
        if int(c) not in rates:
            raise InvalidParam(f"no rate given for class {int(c)}")
    if any(r < 0 for r in rates.values()):
        raise InvalidParam("rates must be non-negative")
    return rates


@dataclass
class SamplingPlan:
    """Per (box, class) sample counts summing exactly to ``target_total``."""

    target_total: int
    quotas: dict
    class_rates: dict
    labels: np.ndarray = field(repr=False)

    def box_quota(self, key):
        return sum(q for (b, _), q in self.quotas.items() if b == key)


def largest_remainder(real, caps=None):
    """Integerise non-negative reals so the sum equals ``round(sum(real))``.

    Leftover units go to the largest fractional parts; ties go to the
    earlier entry. Entries already at their cap are skipped.
    """
    real = np.asarray(real, dtype=np.float64)
    total = int(round(real.sum()))
    base = np.floor(real + 1e-9).astype(np.int64)
    base = np.minimum(base, caps) if caps is not None else base
    frac = real - base
    left = total - int(base.sum())
    order = np.lexsort((np.arange(len(real)), -np.round(frac, 12)))
    for i in order:
        if left <= 0:
            break
        if caps is not None and base[i] >= caps[i]:
            continue
        base[i] += 1
        left -= 1
    return base


def plan_allocation(grid, labels, target, class_rates=None):
    """Split ``target`` samples over occupied (box, class) cells.

    The real-valued share of a cell is proportional to its population times
    its class rate. Shares exceeding the population are capped and the
    excess is spread over the remaining cells, then largest-remainder
    rounding makes the total exact.

    Raises
    ------
    TargetExceedsInput
        ``target`` is larger than the cloud (up-sample first).
    InvalidParam
        ``target < 3`` or all weights are zero.
    """
    n = len(grid.cloud)
    target = int(target)
    if target < 3:
        raise InvalidParam("target must be >= 3")
    if target > n:
        raise TargetExceedsInput(f"target {target} exceeds the {n} input points")
    labels = np.zeros(n, np.int64) if labels is None else np.asarray(labels, np.int64)
    if labels.shape != (n,):
        raise InvalidParam("one label per point required")
    classes = np.unique(labels)
    rates = _rate_map(class_rates, classes)

    cells, pops = [], []
    for key in grid.box_keys:
        members = grid.boxes[key]
        cnt = np.bincount(labels[members], minlength=int(classes.max()) + 1)
        for c in np.flatnonzero(cnt):
            cells.append((key, int(c)))
            pops.append(int(cnt[c]))
    pops = np.asarray(pops, dtype=np.float64)
    w = np.array([rates[c] for _, c in cells]) * pops
    if w.sum() <= 0:
        raise InvalidParam("all class weights are zero")

    real = np.zeros(len(cells))
    free = w > 0
    remaining = float(target)
    while True:
        share = np.zeros(len(cells))
        share[free] = remaining * w[free] / w[free].sum()
        over = free & (share >= pops)
        if not over.any():
            real[free] = share[free]
            break
        real[over] = pops[over]
        remaining -= pops[over].sum()
        free &= ~over
        if not free.any() or remaining <= 0:
            break
    if not free.any() and remaining > 1e-9:
        # weighted cells cannot absorb the target; fall back on the rest
        spare = pops - real
        real += remaining * spare / spare.sum()
    q = largest_remainder(real, caps=pops.astype(np.int64))
    quotas = {cell: int(v) for cell, v in zip(cells, q) if v > 0}
    return SamplingPlan(target, quotas, rates, labels)


def fps_box(points, seeds, m):
    """Greedy farthest point sampling inside one box.

    The first pick is the point farthest from ``seeds`` (or, without seeds,
    from the centroid of ``points``); each further pick maximises the
    distance to the seeds and everything picked so far. Ties go to the lower
    index.

    Returns
    -------
    list of int
        Local indices into ``points`` in pick order.
    """
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if m > len(points):
        raise QuotaExceedsPopulation(f"quota {m} exceeds the {len(points)} points of the box")
    if m <= 0:
        return []
    seeds = np.asarray(seeds, dtype=np.float64).reshape(-1, 3)
    if len(seeds):
        d = np.full(len(points), np.inf)
        for chunk in range(0, len(seeds), 512):
            s = seeds[chunk:chunk + 512]
            dd = np.linalg.norm(points[:, None, :] - s[None, :, :], axis=2)
            d = np.minimum(d, dd.min(axis=1))
    else:
        d = np.linalg.norm(points - points.mean(axis=0), axis=1)
    chosen = []
    taken = np.zeros(len(points), bool)
    for _ in range(m):
        score = np.where(taken, -np.inf, d)
        i = int(np.argmax(score))
        chosen.append(i)
        taken[i] = True
        if len(seeds) == 0 and len(chosen) == 1:
            d = np.linalg.norm(points - points[i], axis=1)
        else:
            d = np.minimum(d, np.linalg.norm(points - points[i], axis=1))
    return chosen


def _sample_box(grid, plan, key, chosen_by_box):
    pts = grid.cloud.points
    seeds = [chosen_by_box[nk] for nk in grid.neighbors_of(key) if nk in chosen_by_box]
    seed_idx = np.concatenate(seeds) if seeds else np.zeros(0, np.int64)
    members = grid.boxes[key]
    mine = []
    cls_here = np.unique(plan.labels[members])
    for c in sorted(cls_here.tolist(), reverse=True):
        m = plan.quotas.get((key, c), 0)
        if m == 0:
            continue
        cell = members[plan.labels[members] == c]
        seed_all = np.concatenate([seed_idx, np.asarray(mine, np.int64)])
        local = fps_box(pts[cell], pts[seed_all], m)
        mine.extend(cell[local].tolist())
    return np.asarray(sorted(mine), dtype=np.int64)


def resample_indices(grid, plan, workers=1):
    """Indices of the points chosen by the round-scheduled sampler (sorted).

    Boxes are visited colour by colour (eight rounds); boxes of one round
    are never adjacent, so they can run concurrently and the result does
    not depend on ``workers``.
    """
    chosen_by_box = {}
    busy = {b for (b, _), q in plan.quotas.items() if q > 0}
    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for keys in grid.rounds():
            keys = [k for k in keys if k in busy]
            if pool is None:
                results = [_sample_box(grid, plan, k, chosen_by_box) for k in keys]
            else:
                results = list(pool.map(lambda k: _sample_box(grid, plan, k, chosen_by_box), keys))
            for k, r in zip(keys, results):
                if len(r):
                    chosen_by_box[k] = r
    finally:
        if pool is not None:
            pool.shutdown()
    if not chosen_by_box:
        return np.zeros(0, np.int64)
    return np.sort(np.concatenate(list(chosen_by_box.values())))


def resample(grid, plan, workers=1):
    """Resampled cloud of exactly ``plan.target_total`` input points."""
    idx = resample_indices(grid, plan, workers=workers)
    return PointCloud(grid.cloud.points[idx], plan.labels[idx])
