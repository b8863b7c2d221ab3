import numpy as np
import pytest

from voxmesh import build_halfedge, reconstruct
from voxmesh.config import default_config, merge
from voxmesh.shapes import sphere


def octahedron():
    V = np.array([[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]], float)
    F = [[0, 2, 4], [2, 1, 4], [1, 3, 4], [3, 0, 4], [2, 0, 5], [1, 2, 5], [3, 1, 5], [0, 3, 5]]
    return build_halfedge(V, F)


def icosahedron():
    t = (1 + 5 ** 0.5) / 2
    V = np.array([[-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
                  [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
                  [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1]], float)
    V /= np.linalg.norm(V[0])
    F = [[0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
         [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
         [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
         [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1]]
    return build_halfedge(V, F)


def equilateral_grid(nx=8, ny=8, l=1.0):
    """Planar patch of equilateral triangles with edge ``l``."""
    h = l * np.sqrt(3) / 2
    V = np.array([[i * l + (j % 2) * l / 2, j * h, 0.0] for j in range(ny) for i in range(nx)])
    F = []
    for j in range(ny - 1):
        for i in range(nx - 1):
            a, b = j * nx + i, j * nx + i + 1
            c, d = (j + 1) * nx + i, (j + 1) * nx + i + 1
            if j % 2 == 0:
                F += [[a, b, c], [b, d, c]]
            else:
                F += [[a, b, d], [a, d, c]]
    return build_halfedge(V, F)


@pytest.fixture(scope="session")
def sphere_run():
    """Unit sphere, 50k input points reduced to 10k vertices."""
    cfg = merge(default_config(), {"resample.points": 10000})
    cloud = sphere(50000, seed=0)
    return cloud, reconstruct(cloud, cfg)


_RESULTS = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when not in ("setup", "call"):
        return
    if rep.when == "setup" and rep.passed:
        return
    n = mark.args[0]
    ok = rep.passed
    detail = "; ".join(v for k, v in item.user_properties if k == "detail")
    prev = _RESULTS.get(n, (True, []))
    _RESULTS[n] = (prev[0] and ok, prev[1] + ([detail] if detail else []))


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_RESULTS):
        ok, details = _RESULTS[n]
        line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}"
        if details:
            line += "  (" + "; ".join(details) + ")"
        terminalreporter.write_line(line)
