"""End-to-end reconstruction: denoise, uniformise, resample, mesh, remesh,
measure."""

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .config import config_hash, default_config, parse_rates, validate
from .errors import TargetExceedsInput, VoxmeshError
from .halfedge import EXTERNAL_EDGE
from .mesher import reconstruct_initial
from .metrics import mesh_report
from .optimize import RemeshParams, isotropic_remesh, rebuild_internal_edges
from .preprocess import SmoothingParams, mls_smooth, octree_uniform, upsample_delaunay
from .resample import (DEFAULT_CURVATURE_RATES, DEFAULT_EDGE_RATES, classify_by_curvature,
                       classify_edge_points, plan_allocation, resample)
from .voxel import build_grid

log = logging.getLogger(__name__)


class StageError(VoxmeshError):
    """A pipeline stage failed; ``stage`` names it and ``cause`` is the
    original exception."""

    def __init__(self, stage, cause):
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause


class _Timer:
    def __init__(self):
        self.timings = {}

    def stage(self, name):
        timer = self

        class _Ctx:
            def __enter__(self):
                self.t0 = time.perf_counter()

            def __exit__(self, exc_type, exc, tb):
                timer.timings[name] = time.perf_counter() - self.t0
                if exc is not None and isinstance(exc, Exception) and not isinstance(exc, StageError):
                    raise StageError(name, exc) from exc
                return False

        return _Ctx()


@dataclass
class PipelineResult:
    mesh: object
    report: object
    resampled: object
    initial_mesh: object
    remesh_info: object
    config: dict
    timings: dict = field(default_factory=dict)
    mesh_grid: object = None
    labels: object = None


def class_rates(mode, rates):
    """Rate mapping for the sampling plan from a rate list such as [7, 3]."""
    if mode == "none":
        return None
    if mode == "edges":
        if rates is None:
            return dict(DEFAULT_EDGE_RATES)
        return {EXTERNAL_EDGE: rates[0], 0: rates[1]}
    return list(DEFAULT_CURVATURE_RATES if rates is None else rates)


def preprocess_cloud(cloud, cfg, target=None):
    """Denoise, then uniformise; up-sample when fewer than ``target`` points
    survive."""
    p = cfg["preprocess"]
    out = cloud
    if p["passes"] > 0 and p["k"] > 0:
        out = mls_smooth(out, SmoothingParams(k=int(p["k"]), passes=int(p["passes"])))
    smoothed = out
    out = octree_uniform(smoothed, p["octree_scale"])
    if target is not None and len(out) < target:
        if len(smoothed) >= target:
            return smoothed
        up = upsample_delaunay(smoothed, int(p["upsample_s"]))
        out = octree_uniform(up, p["octree_scale"])
        if len(out) < target:
            out = up
        if len(out) < target:
            raise TargetExceedsInput(f"only {len(out)} points after up-sampling, {target} requested")
    return out


def label_cloud(cloud, cfg):
    mode = cfg["resample"]["mode"]
    if mode == "none":
        return np.zeros(len(cloud), np.int64)
    if cloud.labels is not None:
        return np.asarray(cloud.labels, np.int64)
    k = int(cfg["resample"]["feature_k"])
    if mode == "edges":
        return classify_edge_points(cloud, k, float(cfg["resample"]["edge_threshold"]))
    return classify_by_curvature(cloud, k, len(DEFAULT_CURVATURE_RATES))


def resample_cloud(cloud, cfg, workers=1):
    """Grid, labels, plan and resampling of an already preprocessed cloud."""
    r = cfg["resample"]
    target = int(r["points"]) if r["points"] is not None else len(cloud)
    grid = build_grid(cloud, cfg["grid"]["v_scale"])
    labels = label_cloud(cloud, cfg)
    plan = plan_allocation(grid, labels, target, class_rates(r["mode"], parse_rates(r["rates"])))
    return resample(grid, plan, workers=workers)


def remesh_params(cfg, mesh):
    mode = cfg["resample"]["mode"]
    rm = cfg["remesh"]
    preserve = rm["preserve_edges"]
    if preserve is None:
        preserve = mode == "edges" or bool(rm["keep_internal_edges"])
    flags = np.asarray(mesh.vertex_flags, np.int64)
    features = flags == EXTERNAL_EDGE if mode == "edges" else np.zeros(len(flags), bool)
    classes = flags if mode == "curvature" else None
    rates = parse_rates(cfg["resample"]["rates"]) if mode == "curvature" else None
    return RemeshParams(iterations=max(int(rm["iterations"]), 1), preserve_edges=bool(preserve),
                        adaptive=bool(rm["adaptive"]), features=features, classes=classes,
                        rates=tuple(rates or DEFAULT_CURVATURE_RATES))


def topology(mesh):
    stats = mesh.component_stats()
    return {
        "boundary_loops": len(mesh.boundary_loops()),
        "euler_characteristic": int(mesh.euler_characteristic()),
        "components": len(stats),
        "genus": int(sum(s["genus"] for s in stats)),
        "isolated_vertices": int(mesh.n_isolated),
    }


def reconstruct(cloud, config=None, *, workers=1):
    """Run every stage on ``cloud``.

    Parameters
    ----------
    cloud : PointCloud
    config : dict, optional
        Effective configuration (see :mod:`voxmesh.config`).
    workers : int
        Thread count of the resampler; results do not depend on it.

    Raises
    ------
    StageError
        Wraps the failure of any stage, naming it.
    """
    cfg = validate(config if config is not None else default_config())
    timer = _Timer()
    target = cfg["resample"]["points"]
    target = int(target) if target is not None else None
    with timer.stage("preprocess"):
        pre = preprocess_cloud(cloud, cfg, target)
    with timer.stage("resample"):
        sampled = resample_cloud(pre, cfg, workers)
    with timer.stage("mesh"):
        mesh_grid = build_grid(sampled)
        keep = bool(cfg["remesh"]["keep_internal_edges"])
        hole = int(cfg["mesh"]["hole_fill_max"]) if keep else None
        initial = reconstruct_initial(sampled, mesh_grid, int(cfg["mesh"]["k"]), hole)
        if keep:
            initial = rebuild_internal_edges(initial, mesh_grid)
    info = None
    with timer.stage("remesh"):
        if int(cfg["remesh"]["iterations"]) > 0:
            final, info = isotropic_remesh(initial, remesh_params(cfg, initial), return_info=True)
        else:
            final = initial
    with timer.stage("metrics"):
        report = mesh_report(final, cloud, int(cfg["metrics"]["mls_k"]))
    return PipelineResult(final, report, sampled, initial, info, cfg, timer.timings, mesh_grid,
                          np.asarray(sampled.labels))


def report_metadata(cfg, source=None):
    return {
        "input": None if source is None else str(source),
        "target_points": cfg["resample"]["points"],
        "config_sha256": config_hash(cfg),
        # nothing in the pipeline is random; the seed is recorded for callers
        "seed": cfg["resample"]["seed"],
        "config": cfg,
    }
