"""
Holes that should stay open
===========================

A sphere with both polar caps cut away is an annulus. The initial mesher
fills every hole it can close; rebuilding internal edges instead deletes
the triangles that span non-adjacent voxel boxes, which reopens the real
holes and leaves small meshing gaps closed.
"""

import numpy as np

from voxmesh import reconstruct
from voxmesh.config import default_config, merge
from voxmesh.pipeline import topology
from voxmesh.shapes import cap_height_for_hole, capped_sphere

target = 4000
# box size of the resampled cloud: 2 * longest border / cbrt(count)
v = 2 * 2.0 / np.cbrt(target)
cloud = capped_sphere(20000, cap_height_for_hole(4 * v), seed=3)

for keep in (False, True):
    cfg = merge(default_config(), {"resample.points": target,
                                   "remesh.keep_internal_edges": keep})
    res = reconstruct(cloud, cfg)
    t = topology(res.mesh)
    print(f"keep_internal_edges={keep}: {t['boundary_loops']} boundary loops, "
          f"chi={t['euler_characteristic']}, V={res.mesh.n_vertices}")
