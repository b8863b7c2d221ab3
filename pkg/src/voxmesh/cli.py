"""Command line interface.

Exit codes: 0 success, 2 usage or invalid option, 3 unreadable or
malformed input, 4 failure inside a pipeline stage.
"""

import argparse
import json
import logging
import sys
from pathlib import Path

from . import io as vio
from .config import default_config, load_config, merge, validate
from .errors import EmptyInput, InvalidParam, IoError, ParseError, VoxmeshError
from .metrics import mesh_report, vertex_colors
from .optimize import isotropic_remesh
from .pipeline import (StageError, preprocess_cloud, reconstruct, remesh_params, report_metadata,
                       resample_cloud, topology)

EXIT_OK, EXIT_USAGE, EXIT_PARSE, EXIT_STAGE = 0, 2, 3, 4

log = logging.getLogger("voxmesh")


class _Fail(Exception):
    def __init__(self, code, stage, exc):
        super().__init__(str(exc))
        self.code, self.stage, self.exc = code, stage, exc


def _common(p):
    p.add_argument("--config", help="YAML or JSON configuration file")
    p.add_argument("-o", "--output", help="output file")
    p.add_argument("-v", "--verbose", action="store_true")


def _sampling(p):
    p.add_argument("--points", type=int, help="number of output points")
    p.add_argument("--mode", choices=["none", "edges", "curvature"])
    p.add_argument("--rates", help="class rates, e.g. 7:3 (edges) or 2:3:4:5:6 (curvature)")
    p.add_argument("--threads", type=int, default=1, help="resampler worker threads")


def _remeshing(p):
    p.add_argument("--iterations", type=int)
    p.add_argument("--adaptive", action="store_true", default=None)
    p.add_argument("--preserve-edges", action="store_true", default=None)


def build_parser():
    parser = argparse.ArgumentParser(prog="voxmesh", description=(
        "Reconstruct isotropic triangle meshes from point clouds."))
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("reconstruct", help="run the whole pipeline")
    p.add_argument("input")
    _common(p)
    _sampling(p)
    _remeshing(p)
    p.add_argument("--keep-internal-edges", action="store_true", default=None)
    p.add_argument("--report", help="JSON report path (default: <output>.report.json)")
    p.add_argument("--colormap", help="write a PLY coloured by per-vertex minimum angle")

    p = sub.add_parser("metrics", help="quality report of a mesh against a cloud")
    p.add_argument("mesh")
    p.add_argument("cloud")
    p.add_argument("--config")
    p.add_argument("--report", help="JSON report path (default: <mesh>.report.json)")
    p.add_argument("--colormap")
    p.add_argument("-v", "--verbose", action="store_true")

    p = sub.add_parser("preprocess", help="denoise and uniformise a cloud")
    p.add_argument("input")
    _common(p)
    p.add_argument("--k", type=int, help="smoothing neighbourhood size")
    p.add_argument("--passes", type=int)

    p = sub.add_parser("resample", help="resample a cloud to an exact count")
    p.add_argument("input")
    _common(p)
    _sampling(p)

    p = sub.add_parser("remesh", help="isotropic remeshing of a mesh")
    p.add_argument("input")
    _common(p)
    _remeshing(p)
    p.add_argument("--report")
    return parser


def effective_config(args):
    """Defaults < config file < command line flags."""
    cfg = load_config(args.config) if getattr(args, "config", None) else default_config()
    flags = {
        "resample.points": getattr(args, "points", None),
        "resample.mode": getattr(args, "mode", None),
        "resample.rates": getattr(args, "rates", None),
        "remesh.iterations": getattr(args, "iterations", None),
        "remesh.adaptive": getattr(args, "adaptive", None),
        "remesh.preserve_edges": getattr(args, "preserve_edges", None),
        "remesh.keep_internal_edges": getattr(args, "keep_internal_edges", None),
        "preprocess.k": getattr(args, "k", None),
        "preprocess.passes": getattr(args, "passes", None),
    }
    return validate(merge(cfg, {k: v for k, v in flags.items() if v is not None}))


def _default_output(path, suffix):
    p = Path(path)
    return str(p.with_name(p.stem + suffix))


def _sidecar(report_path, suffix):
    p = Path(report_path)
    name = p.name
    for ext in (".json", ".report"):
        if name.endswith(ext):
            name = name[: -len(ext)]
    return str(p.with_name(name + suffix))


def _load(fn, path):
    try:
        return fn(path)
    except (ParseError, IoError, EmptyInput) as exc:
        raise _Fail(EXIT_PARSE, "load", exc) from exc


def _stage(name, fn, *a, **kw):
    try:
        return fn(*a, **kw)
    except StageError as exc:
        raise _Fail(EXIT_STAGE, exc.stage, exc.cause) from exc
    except VoxmeshError as exc:
        raise _Fail(EXIT_STAGE, name, exc) from exc


def _write_reports(report, mesh, path, cfg, source, timings=None, colormap=None, extra=None):
    meta = report_metadata(cfg, source)
    if extra:
        meta.update(extra)
    if report is None:
        doc = vio.ReportDocument.empty(metadata=meta, topology=topology(mesh))
    else:
        doc = vio.ReportDocument.from_quality(report, metadata=meta, topology=topology(mesh))
    vio.save_report(doc, path)
    vio.save_histogram_csv(doc, _sidecar(path, ".histogram.csv"))
    if timings is not None:
        # timings vary between runs, so they stay out of the report itself
        vio.atomic_write(_sidecar(path, ".timings.json"),
                         (json.dumps(timings, indent=2, sort_keys=True) + "\n").encode())
    if colormap:
        vio.save_mesh(mesh, colormap, vertex_colors=vertex_colors(mesh))


def cmd_reconstruct(args):
    cfg = effective_config(args)
    cloud = _load(vio.load_point_cloud, args.input)
    res = _stage("reconstruct", reconstruct, cloud, cfg, workers=args.threads)
    out = args.output or _default_output(args.input, "_mesh.ply")
    report = args.report or _default_output(out, ".report.json")
    vio.save_mesh(res.mesh, out)
    extra = {"remesh_deficit": res.remesh_info.deficit if res.remesh_info else 0}
    _write_reports(res.report, res.mesh, report, cfg, args.input, res.timings, args.colormap, extra)
    log.info("wrote %s (%d vertices, %d faces)", out, res.mesh.n_vertices, res.mesh.n_faces)
    return EXIT_OK


def cmd_metrics(args):
    cfg = effective_config(args)
    mesh = _load(vio.load_mesh, args.mesh)
    cloud = _load(vio.load_point_cloud, args.cloud)
    report = None
    if mesh.n_faces:
        report = _stage("metrics", mesh_report, mesh, cloud, int(cfg["metrics"]["mls_k"]))
    path = args.report or _default_output(args.mesh, ".report.json")
    _write_reports(report, mesh, path, cfg, args.cloud,
                   colormap=args.colormap if mesh.n_faces else None)
    return EXIT_OK


def cmd_preprocess(args):
    cfg = effective_config(args)
    cloud = _load(vio.load_point_cloud, args.input)
    out = _stage("preprocess", preprocess_cloud, cloud, cfg)
    vio.save_point_cloud(out, args.output or _default_output(args.input, "_pre.ply"))
    return EXIT_OK


def cmd_resample(args):
    cfg = effective_config(args)
    cloud = _load(vio.load_point_cloud, args.input)
    out = _stage("resample", resample_cloud, cloud, cfg, args.threads)
    vio.save_point_cloud(out, args.output or _default_output(args.input, "_resampled.ply"))
    return EXIT_OK


def cmd_remesh(args):
    cfg = effective_config(args)
    mesh = _load(vio.load_mesh, args.input)
    before = _stage("metrics", mesh_report, mesh)
    out, info = _stage("remesh", isotropic_remesh, mesh, remesh_params(cfg, mesh), return_info=True)
    after = _stage("metrics", mesh_report, out)
    path = args.output or _default_output(args.input, "_remeshed.ply")
    vio.save_mesh(out, path)
    report = args.report or _default_output(path, ".report.json")
    _write_reports(after, out, report, cfg, args.input,
                   extra={"q_avg_before": before.q_avg, "theta_avg_before": before.theta_avg,
                          "remesh_deficit": info.deficit})
    return EXIT_OK


COMMANDS = {"reconstruct": cmd_reconstruct, "metrics": cmd_metrics, "preprocess": cmd_preprocess,
            "resample": cmd_resample, "remesh": cmd_remesh}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="voxmesh: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except _Fail as exc:
        print(f"voxmesh: [{exc.stage}] {type(exc.exc).__name__}: {exc.exc}", file=sys.stderr)
        return exc.code
    except InvalidParam as exc:
        print(f"voxmesh: [config] {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ParseError as exc:
        print(f"voxmesh: [config] {exc}", file=sys.stderr)
        return EXIT_PARSE
    except IoError as exc:
        print(f"voxmesh: [write] {exc}", file=sys.stderr)
        return EXIT_STAGE


if __name__ == "__main__":
    sys.exit(main())
