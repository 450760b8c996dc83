"""Output surfaces from persistent cycles.

A dominant (d-1)-class is first realized by its cycle representative, a
chain of (d-1)-simplices of the complex. Local moves then add the boundary
of one adjacent d-simplex at a time, which keeps the chain in the same
homology class, while pulling it towards high field values. If refinement
fails to produce the requested topology, the boundary of the hole region
of each class is used instead, at a level where all chosen classes are alive.
Classes separated by a thin wall start from such boundaries as well, pulled
back from the wall so that each class gets its own closed piece.
"""
from __future__ import annotations

import heapq
import itertools
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .complex import FilteredComplex, SimplicialComplex
from .errors import ConvergenceFailureError, EmptyMeshError, EmptySuperlevelError, ParseError
from .geometry import segments_intersect, triangles_intersect
from .persistence import (
    CycleRep,
    PersistenceDiagram,
    PersistencePair,
    betti_numbers,
    cycle_representative,
)
from .topo_opt import DOMINANCE_GAMMA, LossSpec, dominant_pairs

log = logging.getLogger(__name__)

REFINED = "refined_cycle"
FALLBACK = "superlevel_boundary"

MIN_KEEP_FRACTION = 0.2
MAX_CHAMFER_GROWTH = 1.5


@dataclass
class SurfaceMesh:
    """A closed (d-1)-dimensional simplicial mesh embedded in R^d."""

    dim: int
    vertices: np.ndarray  # (m, ambient dim)
    simplices: np.ndarray  # (s, dim + 1) rows indexing ``vertices``
    provenance: str
    source_ids: np.ndarray | None = None  # complex ids of the simplices
    notes: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.simplices)

    @classmethod
    def from_chain(cls, complex: SimplicialComplex, k: int, ids, provenance: str) -> "SurfaceMesh":
        ids = np.array(sorted(int(i) for i in ids), dtype=np.int64)
        rows = complex.simplices[k][ids] if len(ids) else np.empty((0, k + 1), dtype=np.int64)
        used, inverse = np.unique(rows, return_inverse=True)
        simplices = inverse.reshape(rows.shape).astype(np.int64)
        return cls(k, complex.vertices[used].copy(), simplices, provenance, ids)

    def as_complex(self) -> SimplicialComplex:
        return SimplicialComplex.from_simplices(self.vertices, [tuple(r) for r in self.simplices])

    def betti(self) -> list[int]:
        if len(self.simplices) == 0:
            return [0] * (self.dim + 1)
        return betti_numbers(self.as_complex())[: self.dim + 1]

    def boundary_is_empty(self) -> bool:
        counts: dict[tuple[int, ...], int] = {}
        for row in self.simplices:
            for j in range(len(row)):
                f = tuple(sorted(int(v) for i, v in enumerate(row) if i != j))
                counts[f] = counts.get(f, 0) ^ 1
        return not any(counts.values())

    def self_intersections(self, eps: float = 1e-12) -> list[tuple[int, int]]:
        """Pairs of simplices sharing no vertex whose closed sets intersect."""
        rows = self.simplices
        pts = self.vertices[rows]  # (s, k+1, D)
        lo, hi = pts.min(axis=1) - eps, pts.max(axis=1) + eps
        test = segments_intersect if self.dim == 1 else triangles_intersect
        hits = []
        for i in range(len(rows)):
            overlap = np.all((lo[i + 1:] <= hi[i]) & (hi[i + 1:] >= lo[i]), axis=1)
            for j in (np.flatnonzero(overlap) + i + 1).tolist():
                if set(rows[i].tolist()) & set(rows[j].tolist()):
                    continue
                if test(*pts[i], *pts[j], eps=eps) if self.dim == 1 else test(pts[i], pts[j], eps=eps):
                    hits.append((i, j))
        return hits

    def to_obj(self) -> str:
        lines = [f"# {self.provenance}"]
        for v in self.vertices:
            coords = list(v) + [0.0] * (3 - len(v))
            lines.append("v " + " ".join(f"{c:.9g}" for c in coords))
        tag = "l" if self.dim == 1 else "f"
        for row in self.simplices:
            lines.append(tag + " " + " ".join(str(int(i) + 1) for i in row))
        return "\n".join(lines) + "\n"

    def to_ply(self) -> str:
        element = "edge" if self.dim == 1 else "face"
        head = ["ply", "format ascii 1.0", f"comment {self.provenance}",
                f"element vertex {len(self.vertices)}",
                "property float x", "property float y", "property float z"]
        if self.dim == 1:
            head += [f"element edge {len(self.simplices)}", "property int vertex1", "property int vertex2"]
        else:
            head += [f"element face {len(self.simplices)}", "property list uchar int vertex_indices"]
        head.append("end_header")
        body = []
        for v in self.vertices:
            coords = list(v) + [0.0] * (3 - len(v))
            body.append(" ".join(f"{c:.9g}" for c in coords))
        for row in self.simplices:
            ids = " ".join(str(int(i)) for i in row)
            body.append(ids if element == "edge" else f"{len(row)} {ids}")
        return "\n".join(head + body) + "\n"

    def write(self, stem) -> tuple[Path, Path]:
        stem = Path(stem)
        obj, ply = stem.with_suffix(".obj"), stem.with_suffix(".ply")
        obj.write_text(self.to_obj())
        ply.write_text(self.to_ply())
        return obj, ply

    def transformed(self, fn) -> "SurfaceMesh":
        """Copy with every vertex mapped through ``fn`` (connectivity unchanged)."""
        return SurfaceMesh(self.dim, np.asarray(fn(self.vertices), dtype=float), self.simplices.copy(),
                           self.provenance, self.source_ids, dict(self.notes))


def load_mesh(path, ambient_dim: int | None = None) -> SurfaceMesh:
    """Read a mesh written by :meth:`SurfaceMesh.write` (OBJ or ASCII PLY).

    Polylines (OBJ ``l`` lines, PLY ``edge`` elements) become 1-dimensional
    meshes and faces become triangle meshes. Trailing zero z coordinates are
    dropped when ``ambient_dim`` is 2.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"mesh file not found: {path}")
    lines = path.read_text().splitlines()
    verts, cells, provenance = [], [], "loaded"
    try:
        if path.suffix.lower() == ".ply":
            n_v = n_c = 0
            start = None
            for i, line in enumerate(lines):
                tok = line.split()
                if tok[:2] == ["element", "vertex"]:
                    n_v = int(tok[2])
                elif tok[:1] == ["element"] and tok[1] in ("edge", "face"):
                    n_c = int(tok[2])
                elif tok[:1] == ["comment"]:
                    provenance = " ".join(tok[1:])
                elif tok == ["end_header"]:
                    start = i + 1
                    break
            if start is None:
                raise ParseError(f"{path}: missing end_header")
            body = lines[start:]
            verts = [[float(x) for x in body[i].split()[:3]] for i in range(n_v)]
            for row in body[n_v:n_v + n_c]:
                tok = [int(x) for x in row.split()]
                cells.append(tok if len(tok) == 2 else tok[1:])
        else:
            for line in lines:
                tok = line.split()
                if not tok:
                    continue
                if tok[0] == "#" and len(tok) > 1 and provenance == "loaded":
                    provenance = " ".join(tok[1:])
                elif tok[0] == "v":
                    verts.append([float(x) for x in tok[1:4]])
                elif tok[0] in ("l", "f"):
                    cells.append([int(x.split("/")[0]) - 1 for x in tok[1:]])
    except (ValueError, IndexError) as exc:
        raise ParseError(f"{path}: malformed mesh ({exc})") from exc
    if not cells:
        raise EmptyMeshError(f"{path}: mesh has no simplices")
    vertices = np.array(verts, dtype=float)
    if ambient_dim is not None:
        vertices = vertices[:, :ambient_dim]
    simplices = np.array(cells, dtype=np.int64)
    return SurfaceMesh(simplices.shape[1] - 1, vertices, simplices, provenance)


# ---------------------------------------------------------------------------
# refinement


class _Chain:
    """A mutable (d-1)-chain of a domain triangulation with local checks."""

    def __init__(self, fc: FilteredComplex, simplices, debug: bool = False):
        self.fc = fc
        self.K = fc.complex
        self.d = self.K.dim
        self.k = self.d - 1
        self.f = fc.vertex_values
        self.rows = self.K.simplices
        self.cof = self.K.cofaces(self.k)
        self.members: set[int] = set(int(s) for s in simplices)
        self.debug = debug
        # chain degree of every (k-1)-face
        self.degree: dict[int, int] = {}
        for s in self.members:
            for g in self._faces(s):
                self.degree[g] = self.degree.get(g, 0) + 1
        rng = np.random.default_rng(12345)
        self._zobrist = rng.integers(1, 2 ** 62, size=len(self.rows[self.k]), dtype=np.int64)
        self.state = 0
        for s in self.members:
            self.state ^= int(self._zobrist[s])
        self.visited = {self.state}
        self.moves = 0

    def _faces(self, s: int) -> list[int]:
        if self.k == 0:
            return []
        return [int(g) for g in self.K.faces[self.k][s]]

    def vertices(self) -> set[int]:
        return {int(v) for s in self.members for v in self.rows[self.k][s]}

    # -- move generation ------------------------------------------------------

    def proposal(self, t: int):
        """Faces to toggle for d-simplex ``t`` if its move rule fires, else None.

        The chain faces of t are those opposite to a vertex set O; the common
        part of these faces is the remaining vertex set C. The move swaps the
        part of the chain around C for the complementary faces around O, and
        fires when max f over C is below max f over O.
        """
        faces = [int(g) for g in self.K.faces[self.d][t]]
        verts = [int(v) for v in self.rows[self.d][t]]
        inside = [g in self.members for g in faces]
        n_in = sum(inside)
        if n_in == 0 or n_in == len(faces):
            return None
        opposite = [verts[j] for j in range(len(verts)) if inside[j]]
        common = [verts[j] for j in range(len(verts)) if not inside[j]]
        if not self.f[common].max() < self.f[opposite].max():
            return None
        return faces

    def try_apply(self, t: int) -> bool:
        faces = self.proposal(t)
        if faces is None:
            return False
        new_state = self.state
        for g in faces:
            new_state ^= int(self._zobrist[g])
        if new_state in self.visited:
            return False
        before = self._betti() if self.debug else None
        self._toggle(faces)
        if not self._locally_manifold(t):
            self._toggle(faces)
            return False
        if self.debug:
            after = self._betti()
            assert after == before, f"move changed Betti numbers {before} -> {after}"
        self.state = new_state
        self.visited.add(new_state)
        self.moves += 1
        return True

    def _toggle(self, faces: list[int]) -> None:
        for s in faces:
            delta = -1 if s in self.members else 1
            if delta > 0:
                self.members.add(s)
            else:
                self.members.discard(s)
            for g in self._faces(s):
                self.degree[g] = self.degree.get(g, 0) + delta

    # -- checks -----------------------------------------------------------------

    def _locally_manifold(self, t: int) -> bool:
        verts = [int(v) for v in self.rows[self.d][t]]
        if self.k == 1:
            return all(self.degree.get(v, 0) in (0, 2) for v in verts)
        # surfaces: every edge of t has 0 or 2 chain triangles, every vertex
        # of t has a single-cycle (or empty) link
        edge_index = self.K.simplex_index(1)
        for a, b in itertools.combinations(sorted(verts), 2):
            if self.degree.get(edge_index[a, b], 0) not in (0, 2):
                return False
        return all(self._link_is_cycle(v) for v in verts)

    def _star(self, v: int) -> list[int]:
        out = []
        for e in self.K.cofaces(0)[v]:
            for tri in self.K.cofaces(1)[e]:
                if tri in self.members:
                    out.append(tri)
        return sorted(set(out))

    def _link_is_cycle(self, v: int) -> bool:
        star = self._star(v)
        if not star:
            return True
        adj: dict[int, list[int]] = {}
        for tri in star:
            a, b = (int(u) for u in self.rows[2][tri] if u != v)
            adj.setdefault(a, []).append(b)
            adj.setdefault(b, []).append(a)
        if any(len(n) != 2 for n in adj.values()):
            return False
        start = next(iter(adj))
        seen, stack = {start}, [start]
        while stack:
            for w in adj[stack.pop()]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return len(seen) == len(adj)

    def _betti(self) -> list[int]:
        return chain_betti(self.K, self.k, self.members)

    # -- driver -------------------------------------------------------------------

    def refine(self, max_moves: int) -> None:
        rows = self.rows[self.k]
        heap = [(float(self.f[rows[s]].min()), s) for s in self.members]
        heapq.heapify(heap)
        while heap and self.moves < max_moves:
            _, s = heapq.heappop(heap)
            if s not in self.members:
                continue
            for t in sorted(self.cof[s]):
                if self.try_apply(t):
                    for g in self.K.faces[self.d][t]:
                        g = int(g)
                        if g in self.members:
                            heapq.heappush(heap, (float(self.f[rows[g]].min()), g))
                    # neighbours of the changed region may now admit moves
                    for g in self._neighbours(t):
                        heapq.heappush(heap, (float(self.f[rows[g]].min()), g))
                    break


    def _neighbours(self, t: int) -> list[int]:
        verts = set(int(v) for v in self.rows[self.d][t])
        out = []
        for v in verts:
            if self.k == 1:
                out += [e for e in self.K.cofaces(0)[v] if e in self.members]
            else:
                out += self._star(v)
        return out


def chain_betti(K: SimplicialComplex, k: int, members) -> list[int]:
    """Betti numbers of the subcomplex spanned by a (k)-chain, k in {1, 2}."""
    members = sorted(int(s) for s in members)
    if not members:
        return [0] * (k + 1)
    rows = K.simplices[k][members]
    verts = np.unique(rows)
    parent = {int(v): int(v) for v in verts}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for row in rows:
        r0 = find(int(row[0]))
        for v in row[1:]:
            rv = find(int(v))
            if rv != r0:
                parent[rv] = r0
    b0 = len({find(int(v)) for v in verts})
    if k == 1:
        return [b0, len(rows) - len(verts) + b0]
    edges = np.unique(K.faces[2][members])
    chi = len(verts) - len(edges) + len(rows)
    # a 2-chain whose edges all have even degree: its cycle space is spanned by
    # the edge-connected components exactly when every edge has degree 2
    deg = np.bincount(K.faces[2][members].ravel(), minlength=len(K.simplices[1]))[edges]
    if np.all(deg == 2):
        b2 = _edge_components(K, members)
    else:
        sub = SimplicialComplex.from_simplices(K.vertices, [tuple(r) for r in rows])
        return betti_numbers(sub)[:3]
    return [b0, b0 + b2 - chi, b2]


def _edge_components(K: SimplicialComplex, members: list[int]) -> int:
    by_edge: dict[int, list[int]] = {}
    for tri in members:
        for e in K.faces[2][tri]:
            by_edge.setdefault(int(e), []).append(tri)
    parent = {t: t for t in members}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for tris in by_edge.values():
        r0 = find(tris[0])
        for t in tris[1:]:
            rt = find(t)
            if rt != r0:
                parent[rt] = r0
    return len({find(t) for t in members})


def refine_chain(fc: FilteredComplex, simplices, debug: bool = False, max_moves: int | None = None) -> set[int]:
    chain = _Chain(fc, simplices, debug=debug)
    if max_moves is None:
        max_moves = 20 * len(fc.complex.simplices[chain.k])
    chain.refine(max_moves)
    return chain.members


def refine_cycle(fc: FilteredComplex, rep: CycleRep, debug: bool = False) -> SurfaceMesh:
    """Improve a (d-1)-cycle representative with homology-preserving moves."""
    if rep.dim != fc.dim - 1:
        raise ValueError(f"representative must have dimension {fc.dim - 1}")
    members = refine_chain(fc, rep.simplices, debug=debug)
    return SurfaceMesh.from_chain(fc.complex, rep.dim, members, REFINED)


# ---------------------------------------------------------------------------
# superlevel boundaries


def _top_boundary(K: SimplicialComplex, tops: np.ndarray) -> np.ndarray:
    d = K.dim
    if len(tops) == 0:
        return np.empty(0, dtype=np.int64)
    counts = np.bincount(K.faces[d][tops].ravel(), minlength=len(K.simplices[d - 1]))
    return np.flatnonzero(counts % 2 == 1)


def superlevel_boundary(fc: FilteredComplex, threshold: float) -> SurfaceMesh:
    """(d-1)-simplices with exactly one coface in the superlevel set {f > threshold}."""
    K = fc.complex
    d = K.dim
    tops = np.flatnonzero(fc.simplex_values[d] > threshold)
    if len(tops) == 0:
        raise EmptySuperlevelError(f"no {d}-simplex has value above {threshold}")
    return SurfaceMesh.from_chain(K, d - 1, _top_boundary(K, tops), FALLBACK)


def hole_region(fc: FilteredComplex, pair: PersistencePair, threshold: float | None = None) -> set[int]:
    """d-simplices of the region of {f <= t} enclosed by the class of ``pair``.

    The region is the component, through faces outside the superlevel set,
    of the d-simplex that kills the class; t defaults to the lifetime midpoint.
    """
    K = fc.complex
    d = K.dim
    t = 0.5 * (pair.birth + pair.death) if threshold is None else threshold
    if pair.essential or pair.death_simplex < 0:
        raise ValueError("hole regions exist only for finite pairs")
    low_top = fc.simplex_values[d] <= t
    low_face = fc.simplex_values[d - 1] <= t
    cof = K.cofaces(d - 1)
    seed = int(pair.death_simplex)
    seen = {seed}
    stack = [seed]
    while stack:
        tt = stack.pop()
        for g in K.faces[d][tt]:
            if not low_face[g]:
                continue
            for nb in cof[int(g)]:
                if nb not in seen and low_top[nb]:
                    seen.add(nb)
                    stack.append(nb)
    return seen


def hole_boundary(fc: FilteredComplex, pair: PersistencePair, threshold: float | None = None) -> set[int]:
    """Boundary of :func:`hole_region`, a (d-1)-cycle in the class of ``pair``."""
    region = np.array(sorted(hole_region(fc, pair, threshold)), dtype=np.int64)
    return set(_top_boundary(fc.complex, region).tolist())


def _largest_component(K: SimplicialComplex, tops: set[int]) -> set[int]:
    """Largest part of a set of d-simplices connected through shared faces."""
    by_face: dict[int, list[int]] = {}
    for t in tops:
        for g in K.faces[K.dim][t]:
            by_face.setdefault(int(g), []).append(t)
    best: set[int] = set()
    left = set(tops)
    while left:
        seed = min(left)
        part, stack = {seed}, [seed]
        while stack:
            for g in K.faces[K.dim][stack.pop()]:
                for nb in by_face[int(g)]:
                    if nb not in part:
                        part.add(nb)
                        stack.append(nb)
        left -= part
        if len(part) > len(best):
            best = part
    return best


# ---------------------------------------------------------------------------
# extraction


def expected_betti(d: int, n_classes: int, target_counts: dict[int, int]) -> list[int]:
    """Betti numbers the output mesh must have for ``n_classes`` closed pieces."""
    k = d - 1
    out = [target_counts.get(j, n_classes if j in (0, k) else 0) for j in range(k + 1)]
    out[k] = n_classes
    return out


def _chain_vertices(K: SimplicialComplex, k: int, chain) -> set[int]:
    return {int(v) for s in chain for v in K.simplices[k][s]}


def _disjoint_basis(K: SimplicialComplex, k: int, reps: list[set[int]]) -> list[set[int]]:
    """Among Z2 combinations of the representatives, pick a basis of
    pairwise vertex-disjoint cycles when possible (fewest shared vertices,
    then fewest simplices)."""
    n = len(reps)
    if n <= 1 or n > 4:
        return reps
    combos = {}
    for mask in range(1, 2 ** n):
        chain: set[int] = set()
        for i in range(n):
            if mask >> i & 1:
                chain ^= reps[i]
        combos[mask] = chain
    best, best_key = reps, None
    for subset in itertools.combinations(sorted(combos), n):
        if _gf2_rank_masks(subset) < n:
            continue
        chains = [combos[m] for m in subset]
        verts = [_chain_vertices(K, k, c) for c in chains]
        shared = sum(len(verts[i] & verts[j]) for i in range(n) for j in range(i + 1, n))
        key = (shared, sum(len(c) for c in chains), subset)
        if best_key is None or key < best_key:
            best, best_key = chains, key
    return best


def _shared_vertices(K: SimplicialComplex, k: int, chains: list[set[int]]) -> int:
    verts = [_chain_vertices(K, k, c) for c in chains]
    return sum(len(verts[i] & verts[j]) for i in range(len(verts)) for j in range(i + 1, len(verts)))


def common_threshold(pairs: list[PersistencePair]) -> float:
    """Level at which every pair is alive: the lifetime midpoint for one pair,
    else halfway between the latest death and the earliest birth."""
    return 0.5 * (min(p.birth for p in pairs) + max(p.death for p in pairs))


def _hole_boundaries(fc: FilteredComplex, pairs: list[PersistencePair]) -> list[set[int]] | None:
    """Pairwise vertex-disjoint cycles around the holes of finite pairs, else None.

    Neighbouring hole regions meet along the wall between them. Each region
    drops its d-simplices touching a vertex of another region, so every
    boundary stays on its own side of the wall.
    """
    if any(p.essential or p.death_simplex < 0 for p in pairs):
        return None
    K, d = fc.complex, fc.complex.dim
    t = common_threshold(pairs)
    regions = [hole_region(fc, p, t) for p in pairs]
    verts = [{int(v) for s in r for v in K.simplices[d][s]} for r in regions]
    chains = []
    for i, region in enumerate(regions):
        others = set().union(*(verts[j] for j in range(len(regions)) if j != i))
        kept = {s for s in region if not others.intersection(int(v) for v in K.simplices[d][s])}
        kept = _largest_component(K, kept)
        if not kept:
            return None
        chains.append(set(_top_boundary(K, np.array(sorted(kept), dtype=np.int64)).tolist()))
    if _shared_vertices(K, d - 1, chains):
        return None
    return chains


def _gf2_rank_masks(masks) -> int:
    basis: dict[int, int] = {}
    for m in masks:
        while m:
            top = m.bit_length() - 1
            if top in basis:
                m ^= basis[top]
            else:
                basis[top] = m
                break
    return len(basis)


def select_pairs(diagram: PersistenceDiagram, d: int, spec: LossSpec | None,
                 gamma: float = DOMINANCE_GAMMA) -> list[PersistencePair]:
    k = d - 1
    pairs = dominant_pairs(diagram, k, gamma)
    if spec is not None and k in spec.target_counts and len(pairs) != spec.target_counts[k]:
        raise ConvergenceFailureError(
            f"{len(pairs)} dominant {k}-dimensional classes, expected {spec.target_counts[k]}"
        )
    if not pairs:
        raise ConvergenceFailureError(f"no {k}-dimensional class to extract")
    return pairs


def extract_surface(fc: FilteredComplex, diagram: PersistenceDiagram, spec: LossSpec | None = None,
                    cloud=None, gamma: float = DOMINANCE_GAMMA, debug: bool = False,
                    allow_fallback: bool = True) -> SurfaceMesh:
    """Mesh of the dominant top classes, refined or from the fallback boundary."""
    from .metrics import chamfer_one_way

    K = fc.complex
    d = K.dim
    k = d - 1
    pairs = select_pairs(diagram, d, spec, gamma)
    targets = spec.target_counts if spec is not None else {}
    want = expected_betti(d, len(pairs), targets)

    reps = [set(cycle_representative(fc, p).simplices) for p in pairs]
    reps = _disjoint_basis(K, k, reps)
    if _shared_vertices(K, k, reps):
        # classes separated by a thin wall: the boundaries of their hole
        # regions represent the same classes without sharing the wall
        holes = _hole_boundaries(fc, pairs)
        if holes is not None:
            reps = holes
    start: set[int] = set()
    for r in reps:
        start |= r
    reason = None
    refined = refine_chain(fc, start, debug=debug)
    mesh = SurfaceMesh.from_chain(K, k, refined, REFINED)
    got = mesh.betti()
    if got != want:
        reason = f"refined mesh has Betti numbers {got}, expected {want}"
    elif len(refined) < MIN_KEEP_FRACTION * len(start):
        reason = f"refinement kept {len(refined)} of {len(start)} simplices"
    elif cloud is not None:
        before = chamfer_one_way(cloud, SurfaceMesh.from_chain(K, k, start, REFINED))
        after = chamfer_one_way(cloud, mesh)
        if after > MAX_CHAMFER_GROWTH * before:
            reason = f"refinement raised the Chamfer distance from {before:.3g} to {after:.3g}"
    if reason is None:
        mesh.notes = {"fallback": False, "start_size": len(start), "final_size": len(refined)}
        return mesh
    log.info("falling back to superlevel boundaries: %s", reason)
    if not allow_fallback:
        raise ConvergenceFailureError(reason)
    chain: set[int] = set()
    t = common_threshold(pairs)
    for p in pairs:
        chain ^= hole_boundary(fc, p, t)
    mesh = SurfaceMesh.from_chain(K, k, chain, FALLBACK)
    got = mesh.betti()
    if got != want:
        raise ConvergenceFailureError(f"{reason}; fallback boundary has Betti numbers {got}, expected {want}")
    mesh.notes = {"fallback": True, "reason": reason}
    return mesh
