import json
import subprocess
import sys

import numpy as np
import pytest

from voxmesh import build_halfedge, load_mesh, load_point_cloud, save_mesh, save_point_cloud
from voxmesh.cli import main
from voxmesh.shapes import add_noise, sphere


@pytest.fixture(scope="module")
def cloud_file(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    p = d / "sphere.ply"
    save_point_cloud(sphere(6000, seed=1), p, binary=True)
    return p


def test_reconstruct_outputs(cloud_file, tmp_path):
    out = tmp_path / "m.ply"
    rc = main(["reconstruct", str(cloud_file), "--points", "1500", "-o", str(out),
               "--colormap", str(tmp_path / "c.ply")])
    assert rc == 0
    assert load_mesh(out).n_vertices == 1500
    rep = json.loads((tmp_path / "m.report.json").read_text())
    assert rep["topology"]["boundary_loops"] == 0
    assert rep["topology"]["euler_characteristic"] == 2
    assert rep["metadata"]["target_points"] == 1500
    assert (tmp_path / "m.histogram.csv").exists()
    assert (tmp_path / "m.timings.json").exists()
    header = (tmp_path / "c.ply").read_bytes().split(b"end_header")[0]
    assert b"property uchar red" in header


def test_reconstruct_is_byte_identical(cloud_file, tmp_path):
    blobs = []
    for i, threads in enumerate([1, 4]):
        out = tmp_path / f"m{i}.ply"
        assert main(["reconstruct", str(cloud_file), "--points", "1200", "--threads",
                     str(threads), "-o", str(out), "--report", str(tmp_path / f"r{i}.json")]) == 0
        blobs.append((out.read_bytes(), (tmp_path / f"r{i}.json").read_bytes()))
    assert blobs[0] == blobs[1]


def test_resample_and_preprocess(cloud_file, tmp_path):
    assert main(["resample", str(cloud_file), "--points", "500", "-o", str(tmp_path / "r.xyz")]) == 0
    assert len(load_point_cloud(tmp_path / "r.xyz")) == 500
    noisy = tmp_path / "noisy.ply"
    save_point_cloud(add_noise(sphere(3000, seed=2), 0.02, seed=3), noisy)
    assert main(["preprocess", str(noisy), "--k", "8", "-o", str(tmp_path / "d.ply")]) == 0
    P = load_point_cloud(tmp_path / "d.ply").points
    before = load_point_cloud(noisy).points
    err = lambda X: np.sqrt(np.mean((np.linalg.norm(X, axis=1) - 1) ** 2))
    assert err(P) < err(before)


def test_remesh_improves_quality(cloud_file, tmp_path):
    init = tmp_path / "init.ply"
    assert main(["reconstruct", str(cloud_file), "--points", "1500", "--iterations", "0",
                 "-o", str(init)]) == 0
    assert main(["remesh", str(init), "--iterations", "5", "-o", str(tmp_path / "re.ply")]) == 0
    rep = json.loads((tmp_path / "re.report.json").read_text())
    assert rep["statistics"]["q_avg"]["value"] > rep["metadata"]["q_avg_before"]


def test_metrics_marks_sliver(tmp_path):
    V = [[0, 0, 0], [1, 0, 0], [0.5, 0.01, 0], [0.5, -0.8, 0]]
    save_mesh(build_halfedge(V, [[0, 1, 2], [1, 0, 3]]), tmp_path / "s.ply")
    rng = np.random.default_rng(0)
    from voxmesh import PointCloud
    save_point_cloud(PointCloud(np.c_[rng.random((200, 2)) - [0, 0.8], np.zeros(200)]),
                     tmp_path / "c.xyz")
    assert main(["metrics", str(tmp_path / "s.ply"), str(tmp_path / "c.xyz")]) == 0
    rep = json.loads((tmp_path / "s.report.json").read_text())
    assert rep["statistics"]["theta_min"] == {"value": None, "reason": "below_quality_floor"}


def test_metrics_empty_mesh(tmp_path):
    (tmp_path / "e.ply").write_text("ply\nformat ascii 1.0\nelement vertex 3\nproperty double x\n"
                                    "property double y\nproperty double z\nelement face 0\n"
                                    "property list uchar int vertex_indices\nend_header\n"
                                    "0 0 0\n1 0 0\n0 1 0\n")
    (tmp_path / "c.xyz").write_text("0 0 0\n1 0 0\n0 1 0\n")
    assert main(["metrics", str(tmp_path / "e.ply"), str(tmp_path / "c.xyz")]) == 0
    rep = json.loads((tmp_path / "e.report.json").read_text())
    assert all(v["value"] is None for v in rep["statistics"].values())
    assert sum(rep["histogram"]["counts"]) == 0


def test_exit_codes(cloud_file, tmp_path, capsys):
    assert main(["reconstruct", str(tmp_path / "missing.ply")]) == 3
    assert "voxmesh: [load]" in capsys.readouterr().err
    bad = tmp_path / "bad.xyz"
    bad.write_text("1 2\n")
    assert main(["reconstruct", str(bad)]) == 3
    with pytest.raises(SystemExit) as ex:
        main(["reconstruct", str(cloud_file), "--mode", "sideways"])
    assert ex.value.code == 2
    assert main(["reconstruct", str(cloud_file), "--mode", "edges", "--rates", "1:2:3"]) == 2
    few = tmp_path / "few.xyz"
    few.write_text("0 0 0\n1 0 0\n0 1 0\n0 0 1\n")
    assert main(["reconstruct", str(few), "--points", "3", "-o", str(tmp_path / "f.ply")]) == 4
    assert "voxmesh: [" in capsys.readouterr().err


def test_config_file_and_flag_precedence(cloud_file, tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("resample:\n  points: 800\nremesh.iterations: 2\n")
    out = tmp_path / "m.ply"
    assert main(["reconstruct", str(cloud_file), "--config", str(cfg), "--points", "900",
                 "-o", str(out)]) == 0
    rep = json.loads((tmp_path / "m.report.json").read_text())
    assert rep["metadata"]["config"]["remesh"]["iterations"] == 2
    assert load_mesh(out).n_vertices == 900
    cfg.write_text("remesh: {iteratons: 2}\n")
    assert main(["reconstruct", str(cloud_file), "--config", str(cfg)]) == 2


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "voxmesh", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "reconstruct" in r.stdout
