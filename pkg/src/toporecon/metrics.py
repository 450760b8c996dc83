"""Topological fidelity and one-way Chamfer distance."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import EmptyMeshError, LengthMismatchError
from .geometry import point_segment_distance, point_triangle_distance
from .pointcloud_io import PointCloud


def tfi(true_counts, recon_meshes) -> list[float]:
    """Mean absolute Betti-number error per dimension over a shape collection.

    ``recon_meshes`` may hold meshes (anything with ``betti()``) or Betti
    sequences directly.
    """
    true_counts = [list(t) for t in true_counts]
    if not true_counts or len(true_counts) != len(recon_meshes):
        raise LengthMismatchError(
            f"need matching non-empty lists, got {len(true_counts)} truths and {len(recon_meshes)} meshes"
        )
    recon = [list(m.betti()) if hasattr(m, "betti") else list(m) for m in recon_meshes]
    width = max(max(len(t) for t in true_counts), max(len(r) for r in recon))
    pad = lambda v: v + [0] * (width - len(v))  # noqa: E731
    diff = np.abs(np.array([pad(t) for t in true_counts]) - np.array([pad(r) for r in recon]))
    return diff.mean(axis=0).tolist()


def point_mesh_distances(points: np.ndarray, mesh, chunk: int = 256) -> np.ndarray:
    """Exact distance from every point to the nearest simplex of ``mesh``."""
    if len(mesh.simplices) == 0:
        raise EmptyMeshError("mesh has no simplices")
    tri = mesh.vertices[mesh.simplices]
    out = np.empty(len(points))
    for start in range(0, len(points), chunk):
        block = points[start:start + chunk]
        if mesh.dim == 1:
            dist = point_segment_distance(block, tri[:, 0], tri[:, 1])
        else:
            dist = point_triangle_distance(block, tri[:, 0], tri[:, 1], tri[:, 2])
        out[start:start + chunk] = dist.min(axis=1)
    return out


def chamfer_one_way(cloud: PointCloud, mesh) -> float:
    """Mean cloud-to-mesh distance in units of the cloud's average spacing."""
    if not cloud.avg_spacing > 0:
        raise ValueError("cloud has zero average spacing")
    return float(point_mesh_distances(cloud.points, mesh).mean() / cloud.avg_spacing)


@dataclass
class ShapeReport:
    shape_id: str
    n_true: list[int]
    n_recon: list[int]
    chamfer: float


@dataclass
class EvalReport:
    tfi: list[float]
    chamfer_one_way: float
    per_shape: list[ShapeReport] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=1, sort_keys=True)


def evaluate(shape_ids, clouds, meshes, true_counts) -> EvalReport:
    if not (len(shape_ids) == len(clouds) == len(meshes) == len(true_counts)) or not shape_ids:
        raise LengthMismatchError("shape ids, clouds, meshes and truths must have equal non-zero length")
    rows = []
    for sid, cloud, mesh, truth in zip(shape_ids, clouds, meshes, true_counts):
        rows.append(ShapeReport(str(sid), [int(x) for x in truth], [int(x) for x in mesh.betti()],
                                chamfer_one_way(cloud, mesh)))
    scores = tfi([r.n_true for r in rows], [r.n_recon for r in rows])
    return EvalReport(scores, float(np.mean([r.chamfer for r in rows])), rows)
