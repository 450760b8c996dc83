"""Incremental 2D Delaunay triangulation.

Points are inserted one at a time (triangle split, edge split, or hull
extension) and the triangulation is repaired with Lawson edge flips. The
in-circle predicate is exact and perturbed symbolically, so cocircular
configurations such as grid cells resolve to a single triangulation that
does not depend on insertion order.
"""
from __future__ import annotations

import numpy as np

from .errors import DegenerateInputError
from .geometry import incircle_sos, orient2d


class _Triangulation:
    def __init__(self, pts: list[tuple[float, float]]):
        self.pts = pts
        self.tris: list[tuple[int, int, int] | None] = []
        # directed edge (u, v) -> id of the CCW triangle containing u->v
        self.edge_tri: dict[tuple[int, int], int] = {}
        self.last = 0
        self._walk_turn = 0

    def add(self, a: int, b: int, c: int) -> int:
        t = len(self.tris)
        self.tris.append((a, b, c))
        for e in ((a, b), (b, c), (c, a)):
            self.edge_tri[e] = t
        self.last = t
        return t

    def remove(self, t: int) -> None:
        a, b, c = self.tris[t]
        for e in ((a, b), (b, c), (c, a)):
            if self.edge_tri.get(e) == t:
                del self.edge_tri[e]
        self.tris[t] = None

    def locate(self, p: int) -> tuple[str, int, object]:
        """Walk towards p. Returns (kind, triangle, extra).

        kind is 'inside', 'edge' (extra = directed edge), 'vertex' or 'outside'.
        """
        P = self.pts[p]
        t = self.last
        if self.tris[t] is None:
            t = next(i for i in range(len(self.tris) - 1, -1, -1) if self.tris[i] is not None)
        for _ in range(4 * len(self.tris) + 16):
            a, b, c = self.tris[t]
            edges = ((a, b), (b, c), (c, a))
            self._walk_turn = (self._walk_turn + 1) % 3
            moved = False
            zeros = []
            for k in range(3):
                u, v = edges[(k + self._walk_turn) % 3]
                s = orient2d(self.pts[u], self.pts[v], P)
                if s < 0:
                    nxt = self.edge_tri.get((v, u))
                    if nxt is None:
                        return "outside", t, None
                    t = nxt
                    moved = True
                    break
                if s == 0:
                    zeros.append((u, v))
            if moved:
                continue
            if len(zeros) >= 2:
                return "vertex", t, None
            if zeros:
                return "edge", t, zeros[0]
            return "inside", t, None
        return self._locate_brute(p)

    def _locate_brute(self, p: int):
        P = self.pts[p]
        for t, tri in enumerate(self.tris):
            if tri is None:
                continue
            signs = [orient2d(self.pts[u], self.pts[v], P)
                     for u, v in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0]))]
            if min(signs) >= 0:
                zeros = [e for e, s in zip(((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])), signs) if s == 0]
                if len(zeros) >= 2:
                    return "vertex", t, None
                return ("edge", t, zeros[0]) if zeros else ("inside", t, None)
        return "outside", -1, None

    def legalize(self, stack: list[tuple[int, int, int]]) -> None:
        """Flip edges (u, v) of triangles (u, v, p) until locally Delaunay."""
        while stack:
            u, v, p = stack.pop()
            t = self.edge_tri.get((u, v))
            if t is None or self.tris[t] is None or p not in self.tris[t]:
                continue
            other = self.edge_tri.get((v, u))
            if other is None:
                continue
            q = next(w for w in self.tris[other] if w != u and w != v)
            if incircle_sos(self.pts, u, v, p, q) <= 0:
                continue
            self.remove(t)
            self.remove(other)
            self.add(u, q, p)
            self.add(q, v, p)
            stack.append((u, q, p))
            stack.append((q, v, p))

    def insert(self, p: int) -> bool:
        kind, t, extra = self.locate(p)
        if kind == "vertex":
            return False
        stack: list[tuple[int, int, int]] = []
        if kind == "inside":
            a, b, c = self.tris[t]
            self.remove(t)
            for u, v in ((a, b), (b, c), (c, a)):
                self.add(u, v, p)
                stack.append((u, v, p))
        elif kind == "edge":
            u, v = extra
            w = next(x for x in self.tris[t] if x != u and x != v)
            other = self.edge_tri.get((v, u))
            self.remove(t)
            self.add(v, w, p)
            self.add(w, u, p)
            stack += [(v, w, p), (w, u, p)]
            if other is not None:
                z = next(x for x in self.tris[other] if x != u and x != v)
                self.remove(other)
                self.add(u, z, p)
                self.add(z, v, p)
                stack += [(u, z, p), (z, v, p)]
        else:
            P = self.pts[p]
            hull = [e for e in self.edge_tri if (e[1], e[0]) not in self.edge_tri]
            visible = [(u, v) for u, v in hull if orient2d(self.pts[u], self.pts[v], P) < 0]
            if not visible:
                return False
            for u, v in visible:
                self.add(v, u, p)
                stack.append((v, u, p))
        self.legalize(stack)
        return True


def delaunay_2d(points, order=None) -> np.ndarray:
    """Triangles (k, 3) of the perturbed Delaunay triangulation, CCW vertex order.

    ``order`` optionally fixes the insertion sequence; the result does not
    depend on it. Exact duplicate points are skipped (they appear in no
    triangle).
    """
    arr = np.asarray(points, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2 or len(arr) < 3:
        raise DegenerateInputError("need at least three 2D points")
    pts = [(float(x), float(y)) for x, y in arr]
    n = len(pts)
    order = list(range(n)) if order is None else [int(i) for i in order]
    first = order[0]
    second = next((i for i in order if pts[i] != pts[first]), None)
    if second is None:
        raise DegenerateInputError("all points coincide")
    third = next((i for i in order if orient2d(pts[first], pts[second], pts[i]) != 0), None)
    if third is None:
        raise DegenerateInputError("all points are collinear")

    tri = _Triangulation(pts)
    if orient2d(pts[first], pts[second], pts[third]) > 0:
        tri.add(first, second, third)
    else:
        tri.add(first, third, second)
    seed = {first, second, third}
    for p in order:
        if p not in seed:
            tri.insert(p)
    return np.array([t for t in tri.tris if t is not None], dtype=np.int64)
