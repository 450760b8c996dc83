"""End-to-end reconstruction: cloud -> field -> optimized diagram -> mesh."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .complex import SimplicialComplex, build_vertex_set, triangulate
from .extract import SurfaceMesh, extract_surface
from .field import GaussianParams, init_params
from .metrics import chamfer_one_way
from .persistence import PersistenceDiagram, compute_persistence
from .pointcloud_io import PointCloud
from .topo_opt import LossSpec, OptimizerConfig, OptimizeResult, optimize

log = logging.getLogger(__name__)


def default_grid(dim: int) -> tuple[int, int]:
    base = 32 if dim == 2 else 24
    return base, base ** dim // 4


def build_complex(cloud: PointCloud, base_res: int, extra: int, seed: int,
                  params: GaussianParams | None = None) -> SimplicialComplex:
    params = init_params(cloud) if params is None else params
    verts = build_vertex_set(cloud, base_res, extra, params, rng_seed=seed)
    return triangulate(verts, cloud.dim, grid_res=base_res if cloud.dim == 3 else None)


@dataclass
class Reconstruction:
    mesh: SurfaceMesh
    optimization: OptimizeResult
    complex: SimplicialComplex
    chamfer: float
    timings: dict = field(default_factory=dict)

    @property
    def diagram(self) -> PersistenceDiagram:
        return self.optimization.diagram

    @property
    def fallback(self) -> bool:
        return bool(self.mesh.notes.get("fallback", False))


def reconstruct(cloud: PointCloud, spec: LossSpec, base_res: int | None = None, extra: int | None = None,
                cfg: OptimizerConfig | None = None, seed: int = 0, debug: bool = False) -> Reconstruction:
    cfg = cfg or OptimizerConfig(rng_seed=seed)
    b0, e0 = default_grid(cloud.dim)
    base_res = b0 if base_res is None else base_res
    extra = e0 if extra is None else extra
    t0 = time.perf_counter()
    K = build_complex(cloud, base_res, extra, seed)
    t1 = time.perf_counter()
    log.info("complex: %s simplices per dimension", K.counts())
    result = optimize(cloud, K, spec, cfg)
    t2 = time.perf_counter()
    # diagram over every dimension for export and extraction checks
    full = compute_persistence(result.fc, check=False)
    result.diagram = full
    mesh = extract_surface(result.fc, full, spec, cloud=cloud, debug=debug)
    t3 = time.perf_counter()
    score = chamfer_one_way(cloud, mesh)
    timings = {"complex": t1 - t0, "optimize": t2 - t1, "extract": t3 - t2}
    return Reconstruction(mesh, result, K, score, timings)


def initial_diagram(cloud: PointCloud, base_res: int | None = None, extra: int | None = None,
                    seed: int = 0, params: GaussianParams | None = None, dims=None) -> PersistenceDiagram:
    from .complex import attach_filtration

    b0, e0 = default_grid(cloud.dim)
    K = build_complex(cloud, b0 if base_res is None else base_res, e0 if extra is None else extra, seed)
    params = init_params(cloud) if params is None else params
    return compute_persistence(attach_filtration(K, cloud, params), dims=dims)
