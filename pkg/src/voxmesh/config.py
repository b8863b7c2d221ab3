"""Pipeline configuration: defaults, file loading and overrides.

Configuration files are YAML or JSON, either nested (``remesh:
{iterations: 3}``) or with dotted keys (``remesh.iterations: 3``). The
worker count is not part of the configuration: it never changes results.
"""

import copy
import hashlib
import json
from pathlib import Path

import yaml

from .errors import InvalidParam, IoError, ParseError

DEFAULTS = {
    "preprocess": {"k": 8, "passes": 1, "octree_scale": None, "upsample_s": 6},
    "grid": {"v_scale": None},
    "resample": {"points": None, "mode": "none", "rates": None,
                 "edge_threshold": 0.03, "feature_k": 16, "seed": None},
    "mesh": {"k": 16, "hole_fill_max": 8},
    "remesh": {"iterations": 5, "preserve_edges": None, "adaptive": False,
               "keep_internal_edges": False},
    "metrics": {"mls_k": 12},
}

MODES = ("none", "edges", "curvature")


def default_config():
    return copy.deepcopy(DEFAULTS)


def _set(cfg, dotted, value):
    parts = dotted.split(".")
    if len(parts) != 2 or parts[0] not in DEFAULTS or parts[1] not in DEFAULTS[parts[0]]:
        raise InvalidParam(f"unknown configuration key {dotted!r}")
    cfg[parts[0]][parts[1]] = value


def _flatten(data, prefix=""):
    for key, value in data.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            yield from _flatten(value, name + ".")
        else:
            yield name, value


def merge(cfg, overrides):
    """Copy of ``cfg`` with nested or dotted ``overrides`` applied."""
    out = copy.deepcopy(cfg)
    for key, value in _flatten(overrides or {}):
        _set(out, key, value)
    return out


def load_config(path):
    """Defaults overridden by the YAML or JSON file at ``path``."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    try:
        data = json.loads(text) if str(path).endswith(".json") else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ParseError(f"invalid configuration file: {exc}") from exc
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ParseError("configuration must be a mapping")
    return validate(merge(default_config(), data))


def parse_rates(text):
    """``"7:3"`` -> ``[7.0, 3.0]``."""
    if text is None:
        return None
    if isinstance(text, (list, tuple)):
        vals = [float(x) for x in text]
    else:
        try:
            vals = [float(x) for x in str(text).split(":")]
        except ValueError:
            raise InvalidParam(f"rates must look like 7:3, got {text!r}") from None
    if not vals or any(v < 0 for v in vals) or sum(vals) <= 0:
        raise InvalidParam(f"invalid rates {text!r}")
    return vals


def validate(cfg):
    r = cfg["resample"]
    if r["mode"] not in MODES:
        raise InvalidParam(f"mode must be one of {', '.join(MODES)}")
    if r["points"] is not None and int(r["points"]) < 3:
        raise InvalidParam("points must be >= 3")
    rates = parse_rates(r["rates"])
    if rates is not None:
        need = {"edges": 2, "curvature": 5}.get(r["mode"])
        if need and len(rates) != need:
            raise InvalidParam(f"{r['mode']} mode takes {need} rates")
    if int(cfg["remesh"]["iterations"]) < 0:
        raise InvalidParam("iterations must be >= 0")
    for key in ("k", "passes", "upsample_s"):
        if int(cfg["preprocess"][key]) < 0:
            raise InvalidParam(f"preprocess.{key} must be >= 0")
    return cfg


def canonical_json(cfg):
    return json.dumps(cfg, sort_keys=True, separators=(",", ":"))


def config_hash(cfg):
    return hashlib.sha256(canonical_json(cfg).encode("utf-8")).hexdigest()
