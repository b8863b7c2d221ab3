"""Reading point clouds and writing meshes, reports and histograms.

Supported formats: PLY (ascii and binary little/big endian), Wavefront OBJ
(``v``/``f`` records) and XYZ (whitespace separated columns). Writers are
deterministic: floats are printed as the shortest round-trip decimal and
JSON keys keep a fixed order.
"""

import csv
import io as _io
import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import EmptyInput, IoError, ParseError
from .geometry import PointCloud
from .halfedge import build_halfedge

_PLY_TYPES = {
    "char": "i1", "int8": "i1", "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2", "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4", "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4", "double": "f8", "float64": "f8",
}

def _format(path, fmt):
    if fmt is None:
        fmt = Path(path).suffix.lower().lstrip(".")
    fmt = fmt.lower()
    if fmt not in ("ply", "obj", "xyz"):
        raise ParseError(f"unsupported format {fmt!r}")
    return fmt


def atomic_write(path, data):
    """Write ``data`` (bytes) to ``path`` through a temporary file + rename."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(data)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def _num(x):
    return repr(float(x))


# -- PLY -----------------------------------------------------------------

def _read_ply_header(fh):
    if fh.readline().strip() != b"ply":
        raise ParseError("missing 'ply' magic", line=1)
    fmt = None
    elements = []
    lineno = 1
    while True:
        raw = fh.readline()
        lineno += 1
        if not raw:
            raise ParseError("header not terminated by end_header", line=lineno)
        tok = raw.decode("ascii", errors="replace").split()
        if not tok or tok[0] in ("comment", "obj_info"):
            continue
        if tok[0] == "end_header":
            break
        if tok[0] == "format":
            if len(tok) < 2 or tok[1] not in ("ascii", "binary_little_endian", "binary_big_endian"):
                raise ParseError(f"unknown PLY format {' '.join(tok[1:])!r}", line=lineno)
            fmt = tok[1]
        elif tok[0] == "element":
            if len(tok) != 3 or not tok[2].isdigit():
                raise ParseError("malformed element line", line=lineno)
            elements.append({"name": tok[1], "count": int(tok[2]), "props": []})
        elif tok[0] == "property":
            if not elements:
                raise ParseError("property before element", line=lineno)
            if tok[1] == "list":
                if len(tok) != 5 or tok[2] not in _PLY_TYPES or tok[3] not in _PLY_TYPES:
                    raise ParseError("malformed list property", line=lineno)
                elements[-1]["props"].append((tok[4], _PLY_TYPES[tok[2]], _PLY_TYPES[tok[3]]))
            else:
                if len(tok) != 3 or tok[1] not in _PLY_TYPES:
                    raise ParseError("malformed property", line=lineno)
                elements[-1]["props"].append((tok[2], _PLY_TYPES[tok[1]], None))
        else:
            raise ParseError(f"unexpected header keyword {tok[0]!r}", line=lineno)
    if fmt is None:
        raise ParseError("missing format line", line=lineno)
    return fmt, elements, lineno


def _read_ply(path):
    """Return ``{element name: {property: array or list of arrays}}``."""
    try:
        fh = open(path, "rb")
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    with fh:
        fmt, elements, lineno = _read_ply_header(fh)
        body = fh.read()
    out = {}
    if fmt == "ascii":
        lines = body.decode("ascii", errors="replace").splitlines()
        pos = 0
        for el in elements:
            data = {name: [] for name, _, _ in el["props"]}
            for _ in range(el["count"]):
                while pos < len(lines) and not lines[pos].strip():
                    pos += 1
                if pos >= len(lines):
                    raise ParseError(f"unexpected end of {el['name']} data", line=lineno + pos + 1)
                tok = lines[pos].split()
                t = 0
                try:
                    for name, dt, it in el["props"]:
                        if it is None:
                            data[name].append(float(tok[t]) if dt[0] == "f" else int(tok[t]))
                            t += 1
                        else:
                            cnt = int(tok[t])
                            data[name].append([int(x) for x in tok[t + 1:t + 1 + cnt]])
                            if len(data[name][-1]) != cnt:
                                raise IndexError
                            t += 1 + cnt
                except (ValueError, IndexError):
                    raise ParseError(f"malformed {el['name']} record", line=lineno + pos + 1)
                if t != len(tok):
                    raise ParseError(f"malformed {el['name']} record", line=lineno + pos + 1)
                pos += 1
            out[el["name"]] = {k: (np.asarray(v, dtype=dt) if it is None else v)
                               for (k, dt, it), v in zip(el["props"], data.values())}
        return out
    endian = "<" if fmt == "binary_little_endian" else ">"
    off = 0
    for el in elements:
        props = el["props"]
        if all(it is None for _, _, it in props):
            dtype = np.dtype([(name, endian + dt) for name, dt, _ in props])
            nbytes = dtype.itemsize * el["count"]
            if off + nbytes > len(body):
                raise ParseError(f"truncated binary {el['name']} data")
            rec = np.frombuffer(body, dtype=dtype, count=el["count"], offset=off)
            off += nbytes
            out[el["name"]] = {name: rec[name].astype(dt) for name, dt, _ in props}
            continue
        data = {name: [] for name, _, _ in props}
        try:
            for _ in range(el["count"]):
                for name, dt, it in props:
                    if it is None:
                        d = np.dtype(endian + dt)
                        data[name].append(np.frombuffer(body, d, 1, off)[0])
                        off += d.itemsize
                    else:
                        cd, idt = np.dtype(endian + dt), np.dtype(endian + it)
                        cnt = int(np.frombuffer(body, cd, 1, off)[0])
                        off += cd.itemsize
                        data[name].append(np.frombuffer(body, idt, cnt, off).astype(np.int64))
                        off += idt.itemsize * cnt
        except ValueError:
            raise ParseError(f"truncated binary {el['name']} data")
        out[el["name"]] = {name: (np.asarray(v, dtype=dt) if it is None else v)
                           for (name, dt, it), v in zip(props, data.values())}
    return out


def _ply_cloud(data):
    if "vertex" not in data:
        raise ParseError("PLY file has no vertex element")
    v = data["vertex"]
    if not all(c in v for c in "xyz"):
        raise ParseError("vertex element lacks x/y/z properties")
    pts = np.stack([v["x"], v["y"], v["z"]], axis=1).astype(np.float64)
    labels = np.asarray(v["class"]).astype(np.int64) if "class" in v else None
    return pts, labels


def _ply_faces(data):
    face = data.get("face", {})
    key = "vertex_indices" if "vertex_indices" in face else "vertex_index"
    raw = face.get(key, [])
    faces = []
    for i, f in enumerate(raw):
        if len(f) != 3:
            raise ParseError(f"face {i} is not a triangle")
        faces.append([int(x) for x in f])
    return np.asarray(faces, dtype=np.int64).reshape(-1, 3)


def _write_ply(points, faces=None, *, labels=None, colors=None, binary=False):
    n = len(points)
    head = ["ply", "format " + ("binary_little_endian" if binary else "ascii") + " 1.0",
            f"element vertex {n}"]
    head += [f"property {'float' if binary else 'double'} {c}" for c in "xyz"]
    if labels is not None:
        head.append("property int class")
    if colors is not None:
        head += [f"property uchar {c}" for c in ("red", "green", "blue")]
    if faces is not None:
        head += [f"element face {len(faces)}", "property list uchar int vertex_indices"]
    head.append("end_header")
    header = ("\n".join(head) + "\n").encode("ascii")
    if binary:
        fields = [(c, "<f4") for c in "xyz"]
        if labels is not None:
            fields.append(("class", "<i4"))
        if colors is not None:
            fields += [(c, "u1") for c in ("red", "green", "blue")]
        rec = np.empty(n, dtype=fields)
        for j, c in enumerate("xyz"):
            rec[c] = points[:, j]
        if labels is not None:
            rec["class"] = labels
        if colors is not None:
            for j, c in enumerate(("red", "green", "blue")):
                rec[c] = colors[:, j]
        parts = [header, rec.tobytes()]
        if faces is not None:
            frec = np.empty(len(faces), dtype=[("n", "u1"), ("v", "<i4", (3,))])
            frec["n"] = 3
            frec["v"] = faces
            parts.append(frec.tobytes())
        return b"".join(parts)
    buf = _io.StringIO()
    for i in range(n):
        row = [_num(x) for x in points[i]]
        if labels is not None:
            row.append(str(int(labels[i])))
        if colors is not None:
            row += [str(int(c)) for c in colors[i]]
        buf.write(" ".join(row) + "\n")
    if faces is not None:
        for f in faces:
            buf.write(f"3 {int(f[0])} {int(f[1])} {int(f[2])}\n")
    return header + buf.getvalue().encode("ascii")


# -- OBJ / XYZ -----------------------------------------------------------

def _read_text(path):
    try:
        with open(path, "r", encoding="utf-8", errors="replace") as fh:
            return fh.read().splitlines()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc


def _read_obj(path):
    verts, faces = [], []
    for lineno, line in enumerate(_read_text(path), 1):
        tok = line.split()
        if not tok or tok[0].startswith("#"):
            continue
        try:
            if tok[0] == "v":
                if len(tok) < 4:
                    raise ValueError
                verts.append([float(t) for t in tok[1:4]])
            elif tok[0] == "f":
                idx = [int(t.split("/")[0]) for t in tok[1:]]
                if len(idx) != 3:
                    raise ParseError("only triangular faces are supported", line=lineno)
                faces.append([i - 1 if i > 0 else len(verts) + i for i in idx])
        except ValueError:
            raise ParseError(f"malformed {tok[0]!r} record", line=lineno)
    return np.asarray(verts, float).reshape(-1, 3), np.asarray(faces, np.int64).reshape(-1, 3)


def _read_xyz(path):
    pts = []
    for lineno, line in enumerate(_read_text(path), 1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        tok = s.replace(",", " ").split()
        try:
            if len(tok) < 3:
                raise ValueError
            pts.append([float(t) for t in tok[:3]])
        except ValueError:
            raise ParseError("expected at least three numeric columns", line=lineno)
    return np.asarray(pts, float).reshape(-1, 3)


# -- public API ------------------------------------------------------------

def load_point_cloud(path, format=None):
    """Load positions (and a PLY ``class`` property as labels).

    Raises
    ------
    ParseError
        Malformed header or record (carries the offending line number).
    EmptyInput
        The file holds no points.
    """
    fmt = _format(path, format)
    labels = None
    if fmt == "ply":
        pts, labels = _ply_cloud(_read_ply(path))
    elif fmt == "obj":
        pts, _ = _read_obj(path)
    else:
        pts = _read_xyz(path)
    if len(pts) == 0:
        raise EmptyInput(f"{path} contains no points")
    return PointCloud(pts, labels)


def load_mesh(path, format=None):
    """Load a triangle mesh from PLY or OBJ as a :class:`HalfEdgeMesh`."""
    fmt = _format(path, format)
    if fmt == "ply":
        data = _read_ply(path)
        pts, labels = _ply_cloud(data)
        faces = _ply_faces(data)
    elif fmt == "obj":
        pts, faces = _read_obj(path)
        labels = None
    else:
        raise ParseError("XYZ files carry no faces")
    if len(faces) and (faces.min() < 0 or faces.max() >= len(pts)):
        raise ParseError("face references a missing vertex")
    flags = None if labels is None else np.asarray(labels).astype(np.int8)
    return build_halfedge(pts, faces, flags)


def save_point_cloud(cloud, path, format=None, binary=False):
    fmt = _format(path, format)
    pts = cloud.points
    if fmt == "ply":
        data = _write_ply(pts, labels=cloud.labels, binary=binary)
    elif fmt == "obj":
        data = "".join(f"v {_num(p[0])} {_num(p[1])} {_num(p[2])}\n" for p in pts).encode()
    else:
        data = "".join(f"{_num(p[0])} {_num(p[1])} {_num(p[2])}\n" for p in pts).encode()
    atomic_write(path, data)


def save_mesh(mesh, path, format=None, vertex_colors=None, binary=False):
    """Write vertices and faces.

    PLY output may carry uchar RGB colours; non-zero vertex flags are kept
    as a ``class`` property.
    """
    fmt = _format(path, format)
    V, F = mesh.vertices, mesh.faces
    if fmt == "ply":
        colors = None if vertex_colors is None else np.asarray(vertex_colors, np.uint8)
        flags = mesh.vertex_flags if np.any(mesh.vertex_flags) else None
        data = _write_ply(V, F, labels=flags, colors=colors, binary=binary)
    elif fmt == "obj":
        buf = _io.StringIO()
        for p in V:
            buf.write(f"v {_num(p[0])} {_num(p[1])} {_num(p[2])}\n")
        for f in F:
            buf.write(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}\n")
        data = buf.getvalue().encode("ascii")
    else:
        raise ParseError("XYZ cannot store faces")
    atomic_write(path, data)


@dataclass
class ReportDocument:
    """Serializable quality report plus run metadata.

    Each scalar statistic is either a float or ``None``; ``reasons`` maps a
    statistic name to the reason it is missing.
    """

    theta_min: float = None
    theta_avg: float = None
    q_min: float = None
    q_avg: float = None
    reasons: dict = field(default_factory=dict)
    histogram_edges: list = field(default_factory=list)
    histogram_counts: list = field(default_factory=list)
    delta_max: float = None
    delta_avg: float = None
    triangle_count: int = 0
    vertex_count: int = 0
    topology: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    @classmethod
    def from_quality(cls, report, *, metadata=None, topology=None):
        return cls(
            theta_min=report.theta_min, theta_avg=report.theta_avg,
            q_min=report.q_min, q_avg=report.q_avg,
            reasons=dict(report.reasons),
            histogram_edges=[float(x) for x in report.histogram_edges],
            histogram_counts=[int(x) for x in report.histogram_counts],
            delta_max=report.delta_max, delta_avg=report.delta_avg,
            triangle_count=int(report.triangle_count),
            vertex_count=int(report.vertex_count),
            topology=dict(topology or {}), metadata=dict(metadata or {}),
        )

    @classmethod
    def empty(cls, *, metadata=None, topology=None):
        """All-null report of a mesh without faces."""
        from .metrics import HISTOGRAM_EDGES
        names = ("theta_min", "theta_avg", "q_min", "q_avg", "delta_max", "delta_avg")
        return cls(reasons={n: "empty_mesh" for n in names},
                   histogram_edges=[float(x) for x in HISTOGRAM_EDGES],
                   histogram_counts=[0] * (len(HISTOGRAM_EDGES) - 1),
                   topology=dict(topology or {}), metadata=dict(metadata or {}))

    def _stat(self, name):
        value = getattr(self, name)
        return {"value": None if value is None else float(value),
                "reason": self.reasons.get(name) if value is None else None}

    def to_dict(self):
        return {
            "format": "voxmesh-report",
            "version": 1,
            "triangle_count": self.triangle_count,
            "vertex_count": self.vertex_count,
            "statistics": {k: self._stat(k) for k in ("theta_min", "theta_avg", "q_min", "q_avg")},
            "histogram": {"bin_edges_deg": list(self.histogram_edges),
                          "counts": list(self.histogram_counts)},
            "mls_error": {k: self._stat(k) for k in ("delta_max", "delta_avg")},
            "topology": self.topology,
            "metadata": self.metadata,
        }


def report_json(report):
    return json.dumps(report.to_dict(), indent=2, sort_keys=False, allow_nan=False) + "\n"


def save_report(report, path):
    """Write the JSON report document (fixed key order)."""
    atomic_write(path, report_json(report).encode("utf-8"))


def save_histogram_csv(report, path):
    """Rows of ``bin_start_deg,bin_end_deg,count``."""
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["bin_start_deg", "bin_end_deg", "count"])
    e = report.histogram_edges
    for i, c in enumerate(report.histogram_counts):
        w.writerow([_num(e[i]), _num(e[i + 1]), int(c)])
    atomic_write(path, buf.getvalue().encode("ascii"))


def load_report(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(str(exc), line=exc.lineno)
