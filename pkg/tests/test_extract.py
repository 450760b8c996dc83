import numpy as np
import pytest

from toporecon.complex import FilteredComplex, SimplicialComplex, attach_filtration, grid_points, triangulate
from toporecon.errors import ConvergenceFailureError, EmptyMeshError, EmptySuperlevelError
from toporecon.extract import (
    FALLBACK,
    REFINED,
    SurfaceMesh,
    chain_betti,
    extract_surface,
    hole_boundary,
    load_mesh,
    refine_chain,
    refine_cycle,
    superlevel_boundary,
)
from toporecon.field import GaussianParams, init_params
from toporecon.persistence import compute_persistence, cycle_representative
from toporecon.pipeline import reconstruct
from toporecon.pointcloud_io import PointCloud, normalize
from toporecon.topo_opt import LossSpec, OptimizerConfig, dominant_pairs

from conftest import cloud_of

# a square 0-1-2-3 with a center vertex 4, split into a fan of four triangles
FAN_VERTS = np.array([[0, 0], [1, 0], [1, 1], [0, 1], [0.5, 0.5]], dtype=float)
FAN_TRIS = [(0, 1, 4), (1, 2, 4), (2, 3, 4), (0, 3, 4)]


def fan(values):
    K = SimplicialComplex.from_top_simplices(FAN_VERTS, FAN_TRIS, is_domain=True)
    return FilteredComplex.from_vertex_values(K, values)


def edge_ids(K, edges):
    index = K.simplex_index(1)
    return {index[tuple(sorted(e))] for e in edges}


def edge_set(K, ids):
    return {tuple(K.simplices[1][i].tolist()) for i in ids}


SQUARE = [(0, 1), (1, 2), (2, 3), (0, 3)]


def test_move_through_high_vertex():
    fc = fan([0.5, 0.5, 2.0, 2.0, 5.0])
    out = refine_chain(fc, edge_ids(fc.complex, SQUARE), debug=True, max_moves=1)
    assert edge_set(fc.complex, out) == {(1, 2), (2, 3), (0, 3), (0, 4), (1, 4)}


def test_collapse_low_middle_vertex():
    fc = fan([2.0, 2.0, 2.0, 2.0, 0.1])
    wiggle = [(0, 4), (1, 4), (1, 2), (2, 3), (0, 3)]
    out = refine_chain(fc, edge_ids(fc.complex, wiggle), debug=True, max_moves=1)
    assert edge_set(fc.complex, out) == set(SQUARE)


def test_locally_optimal_is_fixed_point():
    fc = fan([2.0, 2.1, 2.2, 2.3, 0.1])
    start = edge_ids(fc.complex, SQUARE)
    assert refine_chain(fc, start, debug=True) == start


def ring_field(n=60, res=40, radius=0.3):
    theta = np.linspace(0, 2 * np.pi, n, endpoint=False)
    pts = 0.5 + radius * np.c_[np.cos(theta), np.sin(theta)]
    cloud = cloud_of(pts)
    K = triangulate(grid_points(res, 2), 2)
    return cloud, attach_filtration(K, cloud, init_params(cloud))


def test_refine_cycle_keeps_homology():
    cloud, fc = ring_field()
    dg = compute_persistence(fc)
    rep = cycle_representative(fc, dg[1][0])
    mesh = refine_cycle(fc, rep, debug=True)
    assert mesh.provenance == REFINED
    assert mesh.betti() == [1, 1]
    assert mesh.boundary_is_empty()
    assert not mesh.self_intersections()
    # refinement pulls the loop towards high field values
    before = fc.vertex_values[np.unique(fc.complex.simplices[1][list(rep.simplices)])].mean()
    after_ids = np.unique(fc.complex.simplices[1][mesh.source_ids])
    assert fc.vertex_values[after_ids].mean() >= before


def test_superlevel_below_min_is_box():
    cloud, fc = ring_field(res=10)
    mesh = superlevel_boundary(fc, fc.vertex_values.min() - 1.0)
    assert mesh.betti() == [1, 1]
    assert np.all((np.isclose(mesh.vertices, -0.1) | np.isclose(mesh.vertices, 1.1)).any(axis=1))


def test_superlevel_single_gaussian_half_peak():
    cloud = cloud_of([[0.5, 0.5]])
    K = triangulate(grid_points(30, 2), 2)
    fc = attach_filtration(K, cloud, GaussianParams((0.2 * np.eye(2))[None]))
    mesh = superlevel_boundary(fc, 0.5 * fc.vertex_values.max())
    assert mesh.betti() == [1, 1]
    assert mesh.boundary_is_empty()


def test_superlevel_above_max():
    cloud, fc = ring_field(res=10)
    with pytest.raises(EmptySuperlevelError):
        superlevel_boundary(fc, fc.vertex_values.max() + 1.0)


def test_hole_boundary_is_cycle():
    cloud, fc = ring_field()
    pair = compute_persistence(fc)[1][0]
    chain = hole_boundary(fc, pair)
    assert chain_betti(fc.complex, 1, chain) == [1, 1]
    mesh = SurfaceMesh.from_chain(fc.complex, 1, chain, FALLBACK)
    assert mesh.boundary_is_empty()


def test_extract_count_mismatch():
    cloud, fc = ring_field()
    dg = compute_persistence(fc)
    with pytest.raises(ConvergenceFailureError):
        extract_surface(fc, dg, LossSpec.gap(1, 3, {1: 3}))


def test_extract_two_separate_circles():
    theta = np.linspace(0, 2 * np.pi, 80, endpoint=False)
    circle = np.c_[np.cos(theta), np.sin(theta)]
    pts = np.vstack([circle - [1.6, 0.0], circle + [1.6, 0.0]])
    cloud = normalize(PointCloud.from_points(pts))
    spec = LossSpec.gap(1, 2, {0: 2, 1: 2})
    rec = reconstruct(cloud, spec, base_res=32, extra=480, cfg=OptimizerConfig(learning_rate=0.05, max_iters=100),
                      debug=True)
    assert rec.mesh.betti() == [2, 2]
    assert not rec.fallback
    assert not rec.mesh.self_intersections()


def test_extract_sphere_shell():
    # a small sphere sample on a coarse 3D grid: one void, closed surface
    rng = np.random.default_rng(0)
    pts = rng.normal(size=(120, 3))
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    cloud = normalize(PointCloud.from_points(pts))
    K = triangulate(grid_points(14, 3), 3)
    fc = attach_filtration(K, cloud, GaussianParams(init_params(cloud).alphas * 1.5))
    dg = compute_persistence(fc, dims=[2])
    assert len(dominant_pairs(dg, 2)) == 1
    mesh = extract_surface(fc, dg, LossSpec.gap(2, 1, {0: 1, 1: 0, 2: 1}), debug=True)
    assert mesh.betti() == [1, 0, 1]
    assert mesh.boundary_is_empty()
    assert not mesh.self_intersections()


def test_mesh_file_round_trip(tmp_path):
    cloud, fc = ring_field()
    mesh = extract_surface(fc, compute_persistence(fc), LossSpec.gap(1, 1, {1: 1}))
    obj, ply = mesh.write(tmp_path / "ring")
    for path in (obj, ply):
        back = load_mesh(path, ambient_dim=2)
        np.testing.assert_allclose(back.vertices, mesh.vertices, atol=1e-8)
        np.testing.assert_array_equal(back.simplices, mesh.simplices)
        assert back.betti() == mesh.betti()


def test_load_mesh_errors(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_mesh(tmp_path / "none.obj")
    (tmp_path / "empty.obj").write_text("# nothing\nv 0 0 0\n")
    with pytest.raises(EmptyMeshError):
        load_mesh(tmp_path / "empty.obj")


def test_self_intersection_detected():
    # a bow-tie polyline crossing itself
    verts = np.array([[0, 0], [1, 1], [1, 0], [0, 1]], dtype=float)
    mesh = SurfaceMesh(1, verts, np.array([[0, 1], [1, 2], [2, 3], [3, 0]]), "test")
    assert mesh.self_intersections() == [(0, 2)]


def test_extract_theta_gives_two_disjoint_loops():
    # a circle split by a diameter: both holes border the same one-sample wall
    theta = np.linspace(0, 2 * np.pi, 120, endpoint=False)
    wall = np.c_[np.zeros(25), np.linspace(-0.92, 0.92, 25)]
    cloud = cloud_of(0.5 + 0.3 * np.vstack([np.c_[np.cos(theta), np.sin(theta)], wall]))
    fc = attach_filtration(triangulate(grid_points(60, 2), 2), cloud, init_params(cloud))
    dg = compute_persistence(fc)
    assert len(dominant_pairs(dg, 1)) == 2
    mesh = extract_surface(fc, dg, LossSpec.gap(1, 2, {0: 2, 1: 2}), cloud=cloud, debug=True)
    assert mesh.betti() == [2, 2]
    assert mesh.boundary_is_empty()
    assert not mesh.self_intersections()
    # no vertex of degree four: the loops do not touch
    assert np.all(np.bincount(mesh.simplices.ravel()) == 2)
