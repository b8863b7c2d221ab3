"""Voxel-structure point cloud to isotropic triangle mesh reconstruction.

The pipeline denoises a cloud, partitions it into cubic boxes, picks an
exact number of points with box-local farthest point sampling, triangulates
them and remeshes the result towards equilateral triangles.
"""

from .errors import (DegenerateInput, EmptyInput, EmptyMesh, InsufficientPoints, InvalidParam,
                     IoError, MeshingFailed, MeshTopologyError, NonManifoldEdge,
                     NonManifoldInput, NonManifoldVertex, OrientationError, ParseError,
                     ProjectionUnstable, QuotaExceedsPopulation, TargetExceedsInput,
                     VoxmeshError)
from .geometry import AABB, NeighborIndex, PointCloud, bounding_box, knn
from .halfedge import EXTERNAL_EDGE, ORDINARY, HalfEdgeMesh, build_halfedge
from .io import (load_mesh, load_point_cloud, save_mesh, save_point_cloud)
from .mesher import estimate_normals, reconstruct_initial
from .metrics import QualityReport, mesh_report, min_angle, mls_error, triangle_quality
from .optimize import (EditableMesh, RemeshParams, adaptive_target_length, isotropic_remesh,
                       mean_edge_length, rebuild_internal_edges)
from .pipeline import reconstruct
from .preprocess import (SmoothingParams, compute_h, edge_insert_count, mls_smooth,
                         octree_uniform, upsample_delaunay)
from .resample import (SamplingPlan, classify_by_curvature, classify_edge_points, fps_box,
                       plan_allocation, resample)
from .voxel import VoxelGrid, adjacent, build_grid, default_scale, intrinsic_distance, round_color

__version__ = "0.1.0"
