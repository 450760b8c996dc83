"""Evaluation vertex set, triangulation, and superlevel filtration values."""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .delaunay import delaunay_2d
from .errors import DegenerateInputError, NonMonotoneFiltrationError
from .field import GaussianParams, eval_field_many
from .pointcloud_io import PointCloud

logger = logging.getLogger(__name__)

DOMAIN_LO, DOMAIN_HI = -0.1, 1.1
FINE_FACTOR = 4


@dataclass
class SimplicialComplex:
    """Simplices stored per dimension as sorted vertex-index rows.

    ``faces[k][i, j]`` is the id of the (k-1)-face of simplex (k, i) that
    omits its j-th vertex. ``is_domain`` marks pure d-dimensional
    triangulations of a region of R^d (every (d-1)-simplex has at most two
    cofaces), which enables the dual persistence shortcut.
    """

    vertices: np.ndarray
    simplices: list[np.ndarray]
    faces: list[np.ndarray | None]
    is_domain: bool = False
    _cofaces: dict = field(default_factory=dict, repr=False)

    @property
    def dim(self) -> int:
        return len(self.simplices) - 1

    @property
    def n_vertices(self) -> int:
        return len(self.simplices[0])

    def counts(self) -> list[int]:
        return [len(s) for s in self.simplices]

    def euler_characteristic(self) -> int:
        return sum((-1) ** k * n for k, n in enumerate(self.counts()))

    def simplex_index(self, k: int) -> dict[tuple[int, ...], int]:
        key = ("index", k)
        if key not in self._cofaces:
            self._cofaces[key] = {tuple(int(v) for v in row): i for i, row in enumerate(self.simplices[k])}
        return self._cofaces[key]

    def cofaces(self, k: int) -> list[list[int]]:
        """For each k-simplex, the ids of the (k+1)-simplices containing it."""
        key = ("cofaces", k)
        if key not in self._cofaces:
            out: list[list[int]] = [[] for _ in range(len(self.simplices[k]))]
            if k + 1 <= self.dim:
                for i, row in enumerate(self.faces[k + 1]):
                    for f in row:
                        out[int(f)].append(i)
            self._cofaces[key] = out
        return self._cofaces[key]

    @classmethod
    def from_top_simplices(cls, vertices, tops, is_domain: bool = False) -> "SimplicialComplex":
        vertices = np.asarray(vertices, dtype=float)
        rows = np.unique(np.sort(np.asarray(tops, dtype=np.int64), axis=1), axis=0)
        top = rows.shape[1] - 1
        arrays: list[np.ndarray] = [None] * (top + 1)
        arrays[top] = rows
        for k in range(top, 1, -1):
            sub = np.concatenate([np.delete(arrays[k], j, axis=1) for j in range(k + 1)])
            arrays[k - 1] = np.unique(sub, axis=0)
        arrays[0] = np.arange(len(vertices), dtype=np.int64)[:, None]
        return cls._with_faces(vertices, arrays, is_domain)

    @classmethod
    def from_simplices(cls, vertices, simplices, is_domain: bool = False) -> "SimplicialComplex":
        """Closure under faces of an arbitrary simplex collection."""
        vertices = np.asarray(vertices, dtype=float)
        n = len(vertices)
        by_dim: dict[int, set[tuple[int, ...]]] = {0: {(v,) for v in range(n)}}
        for s in simplices:
            s = tuple(sorted(int(v) for v in s))
            if len(set(s)) != len(s):
                raise DegenerateInputError(f"repeated vertex in simplex {s}")
            if s and (s[0] < 0 or s[-1] >= n):
                raise DegenerateInputError(f"simplex {s} references a missing vertex")
            by_dim.setdefault(len(s) - 1, set()).add(s)
        top = max(by_dim)
        arrays: list[np.ndarray] = [np.empty((0, 1), dtype=np.int64)] * (top + 1)
        for k in range(top, 0, -1):
            rows = np.array(sorted(by_dim.get(k, set())), dtype=np.int64).reshape(-1, k + 1)
            arrays[k] = rows
            if len(rows):
                sub = {tuple(r) for r in np.delete(rows, 0, axis=1)}
                for j in range(1, k + 1):
                    sub |= {tuple(r) for r in np.delete(rows, j, axis=1)}
                by_dim.setdefault(k - 1, set()).update(sub)
        arrays[0] = np.arange(n, dtype=np.int64)[:, None]
        return cls._with_faces(vertices, arrays, is_domain)

    @classmethod
    def _with_faces(cls, vertices, arrays: list[np.ndarray], is_domain: bool) -> "SimplicialComplex":
        faces: list[np.ndarray | None] = [None]
        for k in range(1, len(arrays)):
            rows = arrays[k]
            lower = arrays[k - 1]
            if len(rows) == 0:
                faces.append(np.empty((0, k + 1), dtype=np.int64))
                continue
            lookup = _row_lookup(lower)
            cols = [lookup(np.delete(rows, j, axis=1)) for j in range(k + 1)]
            faces.append(np.stack(cols, axis=1))
        return cls(vertices, arrays, faces, is_domain)

    def validate(self) -> None:
        """Check canonical ordering, uniqueness and face closure."""
        for k, rows in enumerate(self.simplices):
            if len(rows) and k and np.any(np.diff(rows, axis=1) <= 0):
                raise DegenerateInputError(f"{k}-simplices not in canonical sorted form")
            if len({tuple(r) for r in rows}) != len(rows):
                raise DegenerateInputError(f"duplicate {k}-simplices")
            if k:
                expect = np.stack([np.delete(rows, j, axis=1) for j in range(k + 1)], axis=1)
                got = self.simplices[k - 1][self.faces[k]]
                if not np.array_equal(expect, got):
                    raise DegenerateInputError(f"face table of dimension {k} is inconsistent")


def _row_lookup(table: np.ndarray):
    """Return f(rows) -> indices of rows in ``table`` (all rows must exist)."""
    width = table.shape[1]
    base = int(table.max()) + 1 if table.size else 1
    keys = np.zeros(len(table), dtype=object if base ** width > 2 ** 62 else np.int64)
    for j in range(width):
        keys = keys * base + table[:, j]
    order = np.argsort(keys, kind="stable")
    sorted_keys = keys[order]

    def lookup(rows: np.ndarray) -> np.ndarray:
        q = np.zeros(len(rows), dtype=keys.dtype)
        for j in range(width):
            q = q * base + rows[:, j]
        pos = np.searchsorted(sorted_keys, q)
        pos = np.clip(pos, 0, len(sorted_keys) - 1)
        if not np.array_equal(sorted_keys[pos], q):
            raise DegenerateInputError("complex is not closed under faces")
        return order[pos].astype(np.int64)

    return lookup


@dataclass
class FilteredComplex:
    complex: SimplicialComplex
    vertex_values: np.ndarray
    simplex_values: list[np.ndarray]

    @classmethod
    def from_vertex_values(cls, complex: SimplicialComplex, values) -> "FilteredComplex":
        values = np.asarray(values, dtype=float)
        if values.shape != (complex.n_vertices,):
            raise ValueError("one value per vertex required")
        simplex_values = [values[rows].min(axis=1) if len(rows) else np.empty(0) for rows in complex.simplices]
        return cls(complex, values, simplex_values)

    @property
    def dim(self) -> int:
        return self.complex.dim

    def check_monotone(self) -> None:
        for k in range(1, len(self.simplex_values)):
            if len(self.simplex_values[k]) == 0:
                continue
            face_vals = self.simplex_values[k - 1][self.complex.faces[k]]
            if np.any(face_vals < self.simplex_values[k][:, None]):
                raise NonMonotoneFiltrationError(f"a {k}-simplex exceeds the value of one of its faces")

    def vertex_ranks(self) -> np.ndarray:
        """Position of each vertex in the superlevel order (value desc, index asc)."""
        n = len(self.vertex_values)
        order = np.lexsort((np.arange(n), -self.vertex_values))
        ranks = np.empty(n, dtype=np.int64)
        ranks[order] = np.arange(n)
        return ranks

    def superlevel(self, alpha: float, strict: bool = True) -> list[np.ndarray]:
        """Ids of simplices in K^alpha, per dimension."""
        if strict:
            return [np.flatnonzero(v > alpha) for v in self.simplex_values]
        return [np.flatnonzero(v >= alpha) for v in self.simplex_values]


def grid_points(base_res: int, dim: int) -> np.ndarray:
    axis = np.linspace(DOMAIN_LO, DOMAIN_HI, base_res)
    mesh = np.meshgrid(*([axis] * dim), indexing="ij")
    # axis 0 varies fastest
    return np.stack([m.ravel(order="F") for m in mesh], axis=1)


def build_vertex_set(
    cloud: PointCloud,
    base_res: int,
    extra: int,
    params: GaussianParams,
    rng_seed: int = 0,
) -> np.ndarray:
    """Uniform grid over the padded domain plus field-weighted samples.

    The samples are drawn without replacement from the cell centers of a grid
    ``FINE_FACTOR`` times finer, with probability proportional to the field,
    then jittered by up to a quarter fine cell to keep them in general position.
    """
    if base_res < 4:
        raise ValueError("base_res must be at least 4")
    if extra < 0:
        raise ValueError("extra must be non-negative")
    d = cloud.dim
    base = grid_points(base_res, d)
    if extra == 0:
        return base
    m = FINE_FACTOR * base_res
    h = (DOMAIN_HI - DOMAIN_LO) / m
    centers_1d = DOMAIN_LO + (np.arange(m) + 0.5) * h
    fine = np.stack([g.ravel(order="F") for g in np.meshgrid(*([centers_1d] * d), indexing="ij")], axis=1)
    weights = eval_field_many(fine, cloud, params, chunk=64)
    weights = weights / weights.sum()
    rng = np.random.default_rng(rng_seed)
    take = min(extra, int(np.count_nonzero(weights)))
    chosen = np.sort(rng.choice(len(fine), size=take, replace=False, p=weights))
    samples = fine[chosen] + rng.uniform(-0.25 * h, 0.25 * h, size=(take, d))
    verts = np.concatenate([base, samples])
    _, first = np.unique(verts, axis=0, return_index=True)
    return verts[np.sort(first)]


_KUHN_PATHS = [tuple(p) for p in itertools.permutations(range(3))]


def _kuhn_tets(res: int) -> np.ndarray:
    """Freudenthal split of every cell of a res^3 lattice (axis 0 fastest)."""
    c = np.arange(res - 1)
    i, j, k = np.meshgrid(c, c, c, indexing="ij")
    corner = np.stack([i.ravel(order="F"), j.ravel(order="F"), k.ravel(order="F")], axis=1)
    stride = np.array([1, res, res * res])
    tets = []
    for perm in _KUHN_PATHS:
        step = np.zeros(3, dtype=np.int64)
        verts = [corner @ stride]
        for axis in perm:
            step[axis] = 1
            verts.append((corner + step) @ stride)
        tets.append(np.stack(verts, axis=1))
    # group the six tets of each cell together
    return np.stack(tets, axis=1).reshape(-1, 4)


def _infer_grid_res(vertices: np.ndarray) -> int | None:
    n = len(vertices)
    res = int(round(n ** (1 / 3)))
    while res ** 3 > n:
        res -= 1
    while res >= 2:
        if np.allclose(vertices[: res ** 3], grid_points(res, 3)):
            return res
        res -= 1
    return None


def _barycentric(p: np.ndarray, tet_pts: np.ndarray) -> np.ndarray:
    """Barycentric coordinates of p in each tet of ``tet_pts`` (m, 4, 3)."""
    T = (tet_pts[:, 1:, :] - tet_pts[:, :1, :]).transpose(0, 2, 1)
    lam = np.linalg.solve(T, (p - tet_pts[:, 0, :])[:, :, None])[:, :, 0]
    return np.concatenate([1.0 - lam.sum(axis=1, keepdims=True), lam], axis=1)


def _triangulate_3d_grid(vertices: np.ndarray, res: int) -> np.ndarray:
    tets = [tuple(t) for t in _kuhn_tets(res)]
    h = (DOMAIN_HI - DOMAIN_LO) / (res - 1)
    cell_tets: dict[int, list[int]] = {}
    for t in range(len(tets)):
        cell_tets.setdefault(t // 6, []).append(t)
    for p in range(res ** 3, len(vertices)):
        x = vertices[p]
        cell = np.clip(np.floor((x - DOMAIN_LO) / h).astype(int), 0, res - 2)
        cid = int(cell[0] + cell[1] * (res - 1) + cell[2] * (res - 1) ** 2)
        ids = cell_tets[cid]
        lam = _barycentric(x, vertices[np.array([tets[t] for t in ids])])
        best = int(np.argmax(lam.min(axis=1)))
        if lam[best].min() <= 1e-9:
            logger.debug("dropping sample %d on a tetrahedron face", p)
            continue
        a, b, c, d = tets[ids[best]]
        new = [(p, b, c, d), (a, p, c, d), (a, b, p, d), (a, b, c, p)]
        tets[ids[best]] = new[0]
        for t in new[1:]:
            ids.append(len(tets))
            tets.append(t)
    return np.array(tets, dtype=np.int64)


def _drop_unused(vertices: np.ndarray, tops: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    used = np.zeros(len(vertices), dtype=bool)
    used[tops.ravel()] = True
    if used.all():
        return vertices, tops
    remap = np.cumsum(used) - 1
    return vertices[used], remap[tops]


def triangulate(vertices, d: int, grid_res: int | None = None) -> SimplicialComplex:
    """Triangulate the vertex set into a simplicial complex closed under faces.

    2D: perturbed Delaunay by incremental insertion. 3D: Freudenthal split of
    the uniform grid prefix, then 1-to-4 splits for the remaining vertices;
    inputs without a grid prefix fall back to Qhull.
    Vertices that end up in no top simplex (duplicates) are removed.
    """
    vertices = np.asarray(vertices, dtype=float)
    if vertices.ndim != 2 or vertices.shape[1] != d or d not in (2, 3):
        raise DegenerateInputError(f"expected an (n, {d}) vertex array with d in {{2, 3}}")
    if len(vertices) < d + 1:
        raise DegenerateInputError(f"need at least {d + 1} vertices")
    if d == 2:
        tops = delaunay_2d(vertices)
    else:
        res = grid_res or _infer_grid_res(vertices)
        if res is not None:
            tops = _triangulate_3d_grid(vertices, res)
        else:
            tops = _qhull_3d(vertices)
    vertices, tops = _drop_unused(vertices, tops)
    return SimplicialComplex.from_top_simplices(vertices, tops, is_domain=True)


def _qhull_3d(vertices: np.ndarray) -> np.ndarray:
    from scipy.spatial import Delaunay, QhullError

    centered = vertices - vertices.mean(axis=0)
    if np.linalg.matrix_rank(centered, tol=1e-12) < 3:
        raise DegenerateInputError("all points are coplanar")
    try:
        return Delaunay(vertices).simplices.astype(np.int64)
    except QhullError as exc:
        raise DegenerateInputError(str(exc)) from exc


def attach_filtration(complex: SimplicialComplex, cloud: PointCloud, params: GaussianParams) -> FilteredComplex:
    values = eval_field_many(complex.vertices, cloud, params)
    return FilteredComplex.from_vertex_values(complex, values)


def write_off(path, complex: SimplicialComplex) -> None:
    """Vertices plus every triangle of the complex (2D vertices get z = 0)."""
    verts = complex.vertices
    if verts.shape[1] == 2:
        verts = np.hstack([verts, np.zeros((len(verts), 1))])
    tris = complex.simplices[2] if complex.dim >= 2 else np.empty((0, 3), dtype=np.int64)
    edges = len(complex.simplices[1]) if complex.dim >= 1 else 0
    lines = ["OFF", f"{len(verts)} {len(tris)} {edges}"]
    lines += [" ".join(f"{v:.17g}" for v in row) for row in verts]
    lines += ["3 " + " ".join(str(int(v)) for v in row) for row in tris]
    Path(path).write_text("\n".join(lines) + "\n")
