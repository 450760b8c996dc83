"""Superlevel-set persistence over Z2 with inverse maps and cycle representatives.

Simplices enter the filtration in the order of their descending-sorted
vertex ranks, where a vertex rank orders vertices by (value desc, index asc).
This total order realizes the symbolic perturbation of ties, so the pairing
of simplices is unique and every algorithm below must agree on it:

* dimension 0 by union-find (elder rule);
* dimension d-1 of a domain triangulation by union-find on the dual graph,
  processed in reverse order with the outer cell as the oldest node;
* everything else by standard column reduction with clearing.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .complex import FilteredComplex, SimplicialComplex
from .errors import (
    NonMonotoneFiltrationError,
    NotFaceClosedError,
    TooLargeForOracleError,
    UnsupportedDimensionError,
)


@dataclass(frozen=True)
class PersistencePair:
    dim: int
    birth: float
    death: float
    essential: bool
    birth_simplex: int
    death_simplex: int
    birth_vertex: int
    death_vertex: int

    @property
    def lifetime(self) -> float:
        return self.birth - self.death

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "birth": self.birth,
            "death": self.death,
            "essential": self.essential,
            "birth_vertex": self.birth_vertex,
            "death_vertex": self.death_vertex,
        }


@dataclass
class PersistenceDiagram:
    """Pairs with positive lifetime (plus all essential classes), per dimension.

    Within a dimension pairs are sorted by decreasing lifetime, ties broken
    by (birth_vertex, death_vertex). ``simplex_pairs`` keeps every pairing,
    zero-lifetime ones included, as (birth_simplex, death_simplex) arrays with
    -1 marking essential classes.
    """

    pairs: dict[int, list[PersistencePair]]
    simplex_pairs: dict[int, np.ndarray] = field(default_factory=dict)

    def __getitem__(self, k: int) -> list[PersistencePair]:
        return self.pairs.get(k, [])

    def dims(self) -> list[int]:
        return sorted(self.pairs)

    def multiset(self, k: int) -> list[tuple[float, float]]:
        return sorted((p.birth, p.death) for p in self[k])

    def to_json(self) -> str:
        rows = [p.to_dict() for k in self.dims() for p in self[k]]
        return json.dumps(rows, indent=1)


def _sort_pairs(pairs: list[PersistencePair]) -> list[PersistencePair]:
    return sorted(pairs, key=lambda p: (-p.lifetime, p.birth_vertex, p.death_vertex))


class _Order:
    """Filtration order data shared by the persistence routines."""

    def __init__(self, fc: FilteredComplex):
        self.fc = fc
        self.K = fc.complex
        self.ranks = fc.vertex_ranks()
        self.keys: list[np.ndarray] = []
        self.order: list[np.ndarray] = []  # order[k][j] = id of j-th k-simplex
        self.pos: list[np.ndarray] = []  # pos[k][id] = position within dimension
        for rows in self.K.simplices:
            r = np.sort(self.ranks[rows], axis=1)[:, ::-1]
            self.keys.append(r)
            order = np.lexsort(r.T[::-1]) if len(r) else np.empty(0, dtype=np.int64)
            pos = np.empty(len(r), dtype=np.int64)
            pos[order] = np.arange(len(r))
            self.order.append(order)
            self.pos.append(pos)
        n = len(self.ranks)
        self.vertex_by_rank = np.empty(n, dtype=np.int64)
        self.vertex_by_rank[self.ranks] = np.arange(n)

    def extremal_vertex(self, k: int, sid: int) -> int:
        """The vertex realizing the simplex value (the last one to enter)."""
        return int(self.vertex_by_rank[self.keys[k][sid, 0]])

    def value(self, k: int, sid: int) -> float:
        return float(self.fc.simplex_values[k][sid])


def _union_find_h0(od: _Order) -> tuple[list[tuple[int, int]], np.ndarray]:
    """Pairs (vertex, edge) and a mask of edges that merge components."""
    n = od.K.n_vertices
    parent = list(range(n))
    ranks = od.ranks.tolist()

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    pairs = []
    negative = np.zeros(len(od.K.simplices[1]) if od.K.dim >= 1 else 0, dtype=bool)
    if od.K.dim >= 1:
        edges = od.K.simplices[1]
        for e in od.order[1].tolist():
            u, v = int(edges[e, 0]), int(edges[e, 1])
            ru, rv = find(u), find(v)
            if ru == rv:
                continue
            if ranks[ru] > ranks[rv]:
                ru, rv = rv, ru
            parent[rv] = ru
            pairs.append((rv, e))
            negative[e] = True
    return pairs, negative


def _dual_top(od: _Order) -> tuple[list[tuple[int, int]], np.ndarray]:
    """(d-1, d) pairs of a domain triangulation by dual union-find.

    Returns the pairs and a mask of (d-1)-simplices that create a class.
    """
    K = od.K
    d = K.dim
    n_top, n_face = len(K.simplices[d]), len(K.simplices[d - 1])
    width = d + 1
    keys = np.full((n_top + n_face, width), -1, dtype=np.int64)
    keys[:n_top] = od.keys[d]
    keys[n_top:, :d] = od.keys[d - 1]
    seq = np.lexsort(keys.T[::-1])[::-1].tolist()

    outer = n_top
    parent = list(range(n_top + 1))
    born = [0] * (n_top + 1)
    born[outer] = -1
    cof = K.cofaces(d - 1)

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    pairs = []
    positive = np.zeros(n_face, dtype=bool)
    for t, item in enumerate(seq):
        if item < n_top:
            born[item] = t
            continue
        sigma = item - n_top
        sides = cof[sigma]
        a = sides[0]
        b = sides[1] if len(sides) > 1 else outer
        ra, rb = find(a), find(b)
        if ra == rb:
            continue
        if born[ra] > born[rb]:
            ra, rb = rb, ra
        # rb is the younger dual component
        parent[rb] = ra
        pairs.append((sigma, rb))
        positive[sigma] = True
    return pairs, positive


def _boundary_positions(od: _Order, k: int, sid: int) -> set[int]:
    return {int(od.pos[k - 1][f]) for f in od.K.faces[k][sid]}


def _reduce(od: _Order, k: int, skip: np.ndarray | None) -> list[tuple[int, int]]:
    """Reduce the boundary columns of k-simplices; return (face id, simplex id) pairs."""
    pivots: dict[int, set[int]] = {}
    pairs = []
    faces_order = od.order[k - 1]
    faces = od.K.faces[k]
    pos_lower = od.pos[k - 1]
    for sid in od.order[k].tolist():
        if skip is not None and skip[sid]:
            continue
        col = {int(pos_lower[f]) for f in faces[sid]}
        while col:
            low = max(col)
            other = pivots.get(low)
            if other is None:
                pivots[low] = col
                pairs.append((int(faces_order[low]), sid))
                break
            col ^= other
    return pairs


def _make_pair(od: _Order, k: int, b: int, dsid: int | None, global_min_vertex: int) -> PersistencePair:
    bv = od.extremal_vertex(k, b)
    if dsid is None:
        return PersistencePair(k, od.value(k, b), float(od.fc.vertex_values[global_min_vertex]), True,
                               b, -1, bv, global_min_vertex)
    dv = od.extremal_vertex(k + 1, dsid)
    return PersistencePair(k, od.value(k, b), od.value(k + 1, dsid), False, b, dsid, bv, dv)


def compute_persistence(fc: FilteredComplex, dims=None, check: bool = True) -> PersistenceDiagram:
    """Superlevel persistence diagram of ``fc`` in the requested dimensions."""
    if check:
        fc.check_monotone()
    K = fc.complex
    d = K.dim
    dims = sorted(set(range(d + 1) if dims is None else dims))
    if any(k < 0 or k > d for k in dims):
        raise UnsupportedDimensionError(f"dimensions must lie in 0..{d}")
    od = _Order(fc)
    gmin = int(od.vertex_by_rank[-1])
    raw: dict[int, list[tuple[int, int | None]]] = {}

    use_dual = K.is_domain and d >= 1
    if not use_dual:
        raw = _generic_pairs(od, dims)
    else:
        h0_pairs, neg_edges = _union_find_h0(od)
        top_pairs, pos_top_faces = (None, None)
        if (d - 1) in dims or any(1 <= k < d - 1 for k in dims):
            top_pairs, pos_top_faces = _dual_top(od)
        for k in dims:
            if k == 0:
                killed = {b for b, _ in h0_pairs}
                raw[0] = list(h0_pairs) + [(v, None) for v in range(K.n_vertices) if v not in killed]
            elif k == d - 1:
                raw[k] = list(top_pairs)
                if k == 1:
                    # positive edges not killed by a triangle are essential
                    killed = {b for b, _ in top_pairs}
                    raw[k] += [(e, None) for e in np.flatnonzero(~neg_edges).tolist() if e not in killed]
            elif k == d:
                raw[k] = []  # a domain triangulation carries no top-dimensional cycles
            else:
                skip = pos_top_faces if k + 1 == d - 1 else None
                pairs = _reduce(od, k + 1, skip)
                raw[k] = pairs
                if k == 1:
                    killed = {b for b, _ in pairs}
                    raw[k] += [(e, None) for e in np.flatnonzero(~neg_edges).tolist() if e not in killed]
    return _assemble(od, raw, gmin)


def _generic_pairs(od: _Order, dims: list[int]) -> dict[int, list[tuple[int, int | None]]]:
    K = od.K
    d = K.dim
    reduced: dict[int, list[tuple[int, int]]] = {}
    cleared: dict[int, np.ndarray] = {}
    for k in range(d, 0, -1):
        skip = cleared.get(k)
        reduced[k] = _reduce(od, k, skip)
        mask = np.zeros(len(K.simplices[k - 1]), dtype=bool)
        for b, _ in reduced[k]:
            mask[b] = True
        cleared[k - 1] = mask
    raw = {}
    for k in dims:
        pairs = list(reduced.get(k + 1, []))
        born = {b for b, _ in pairs}
        died = {s for _, s in reduced.get(k, [])}
        essential = [s for s in range(len(K.simplices[k])) if s not in born and s not in died]
        raw[k] = pairs + [(s, None) for s in essential]
    return raw


def _assemble(od: _Order, raw, gmin: int) -> PersistenceDiagram:
    pairs: dict[int, list[PersistencePair]] = {}
    simplex_pairs: dict[int, np.ndarray] = {}
    vals = od.fc.simplex_values
    for k, items in raw.items():
        arr = np.array([(b, -1 if s is None else s) for b, s in items], dtype=np.int64).reshape(-1, 2)
        simplex_pairs[k] = arr
        out = []
        for b, s in items:
            if s is not None and vals[k][b] == vals[k + 1][s]:
                continue
            out.append(_make_pair(od, k, int(b), None if s is None else int(s), gmin))
        pairs[k] = _sort_pairs(out)
    return PersistenceDiagram(pairs, simplex_pairs)


def betti_numbers(complex: SimplicialComplex, subset=None) -> list[int]:
    """Z2 Betti numbers of the complex, or of a face-closed subcomplex.

    ``subset`` maps dimension -> iterable of simplex ids.
    """
    K = complex
    if subset is None:
        ids = [np.arange(len(s)) for s in K.simplices]
    else:
        ids = [np.unique(np.asarray(list(subset.get(k, [])), dtype=np.int64)) for k in range(K.dim + 1)]
        for k in range(1, K.dim + 1):
            if len(ids[k]) and not np.isin(K.faces[k][ids[k]], ids[k - 1]).all():
                raise NotFaceClosedError(f"subset misses faces of some {k}-simplices")
    ranks = [0] * (K.dim + 2)
    for k in range(1, K.dim + 1):
        ranks[k] = gf2_rank([K.faces[k][s].tolist() for s in ids[k]])
    return [len(ids[k]) - ranks[k] - ranks[k + 1] for k in range(K.dim + 1)]


def gf2_rank(columns) -> int:
    """Rank over Z2 of a sparse matrix given as a list of row-index columns."""
    pivots: dict[int, set[int]] = {}
    rank = 0
    for c in columns:
        col = set()
        for r in c:
            col ^= {r}
        while col:
            low = max(col)
            other = pivots.get(low)
            if other is None:
                pivots[low] = col
                rank += 1
                break
            col ^= other
    return rank


def cycle_representative(fc: FilteredComplex, pair: PersistencePair) -> "CycleRep":
    """The canonical cycle created by ``pair.birth_simplex``.

    It is the birth simplex plus the unique combination of earlier
    k-simplices that kill lower-dimensional classes (the minimum spanning
    acycle), read off the reduction matrix of the birth column.
    """
    k = pair.dim
    if k < 1:
        raise UnsupportedDimensionError("representatives exist for dimension >= 1 only")
    od = _Order(fc)
    target = pair.birth_simplex
    faces = od.K.faces[k]
    pos_lower = od.pos[k - 1]
    pivots: dict[int, tuple[set[int], set[int]]] = {}
    for sid in od.order[k].tolist():
        col = {int(pos_lower[f]) for f in faces[sid]}
        chain = {sid}
        while col:
            low = max(col)
            other = pivots.get(low)
            if other is None:
                break
            col ^= other[0]
            chain ^= other[1]
        if sid == target:
            if col:
                raise ValueError("birth simplex does not create a cycle")
            return CycleRep(k, frozenset(chain), pair)
        if col:
            pivots[max(col)] = (col, chain)
    raise ValueError("birth simplex not found in the complex")


@dataclass(frozen=True)
class CycleRep:
    dim: int
    simplices: frozenset
    pair: PersistencePair

    def boundary(self, complex: SimplicialComplex) -> set[int]:
        out: set[int] = set()
        for s in self.simplices:
            for f in complex.faces[self.dim][s]:
                out ^= {int(f)}
        return out


# ---------------------------------------------------------------------------
# brute-force oracle

ORACLE_LIMIT = 200


def _rank_bits(vectors: list[int]) -> int:
    basis: dict[int, int] = {}
    for v in vectors:
        while v:
            top = v.bit_length() - 1
            if top in basis:
                v ^= basis[top]
            else:
                basis[top] = v
                break
    return len(basis)


def oracle_persistence(fc: FilteredComplex) -> PersistenceDiagram:
    """Diagram by inclusion-exclusion over persistent Betti numbers.

    For thresholds t_1 > ... > t_m (distinct simplex values) and K_i the
    superlevel complex {value >= t_i}, the persistent Betti number

        beta_k(i, j) = dim Z_k(K_i) - dim(B_k(K_j) & Z_k(K_i))

    is evaluated with plain rank computations, and the multiplicity of a
    pair born at t_i and dying at t_j is the usual second difference.
    """
    K = fc.complex
    total = sum(K.counts())
    if total > ORACLE_LIMIT:
        raise TooLargeForOracleError(f"{total} simplices exceed the oracle limit {ORACLE_LIMIT}")
    if total == 0 or K.n_vertices == 0:
        return PersistenceDiagram({})
    vals = fc.simplex_values
    levels = sorted({float(v) for arr in vals for v in arr}, reverse=True)
    m = len(levels)
    members = [[np.flatnonzero(vals[k] >= t) for k in range(K.dim + 1)] for t in levels]
    gmin = float(fc.vertex_values.min())

    def bnd(k: int, sid: int) -> int:
        bits = 0
        for f in K.faces[k][sid]:
            bits |= 1 << int(f)
        return bits

    def beta(k: int, i: int, j: int) -> int:
        # i, j are 1-based threshold indices, 0 = empty complex
        if i == 0:
            return 0
        Ki = members[i - 1]
        n_k = len(Ki[k])
        rank_dk = _rank_bits([bnd(k, s) for s in Ki[k]]) if k >= 1 else 0
        z = n_k - rank_dk
        if k + 1 > K.dim:
            return z
        Kj = members[j - 1]
        cols = [bnd(k + 1, s) for s in Kj[k + 1]]
        inside = 0
        for s in Ki[k]:
            inside |= 1 << int(s)
        outside_cols = [c & ~inside for c in cols]
        return z - (_rank_bits(cols) - _rank_bits(outside_cols))

    pairs: dict[int, list[PersistencePair]] = {}
    for k in range(K.dim + 1):
        out = []
        cache: dict[tuple[int, int], int] = {}

        def b(i, j):
            if (i, j) not in cache:
                cache[i, j] = beta(k, i, j)
            return cache[i, j]

        for i in range(1, m + 1):
            for j in range(i + 1, m + 1):
                mu = b(i, j - 1) - b(i - 1, j - 1) - b(i, j) + b(i - 1, j)
                out += [PersistencePair(k, levels[i - 1], levels[j - 1], False, -1, -1, -1, -1)] * mu
            mu_inf = b(i, m) - b(i - 1, m)
            out += [PersistencePair(k, levels[i - 1], gmin, True, -1, -1, -1, -1)] * mu_inf
        pairs[k] = _sort_pairs(out)
    return PersistenceDiagram(pairs)
