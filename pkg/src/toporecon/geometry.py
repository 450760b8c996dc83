"""Geometric predicates and distance kernels.

Orientation and in-circle signs are evaluated in floating point first and
recomputed exactly with rationals when the float result is inside its error
bound. In-circle ties are broken by simulation of simplicity on the lifted
coordinate, prioritizing the highest vertex index.
"""
from __future__ import annotations

from fractions import Fraction

import numpy as np

_ORIENT_EPS = 1e-14
_INCIRCLE_EPS = 1e-12


def _sign(v) -> int:
    return (v > 0) - (v < 0)


def orient2d(a, b, c) -> int:
    """+1 if a, b, c turn counter-clockwise, -1 if clockwise, 0 if collinear."""
    acx, acy = a[0] - c[0], a[1] - c[1]
    bcx, bcy = b[0] - c[0], b[1] - c[1]
    left, right = acx * bcy, acy * bcx
    det = left - right
    if abs(det) > _ORIENT_EPS * (abs(left) + abs(right)):
        return _sign(det)
    fa = [Fraction(v) for v in a[:2]]
    fb = [Fraction(v) for v in b[:2]]
    fc = [Fraction(v) for v in c[:2]]
    return _sign((fa[0] - fc[0]) * (fb[1] - fc[1]) - (fa[1] - fc[1]) * (fb[0] - fc[0]))


def _incircle_exact(a, b, c, d) -> int:
    fa, fb, fc, fd = ([Fraction(v) for v in p[:2]] for p in (a, b, c, d))
    rows = []
    for p in (fa, fb, fc):
        x, y = p[0] - fd[0], p[1] - fd[1]
        rows.append((x, y, x * x + y * y))
    (ax, ay, az), (bx, by, bz), (cx, cy, cz) = rows
    det = az * (bx * cy - by * cx) - bz * (ax * cy - ay * cx) + cz * (ax * by - ay * bx)
    return _sign(det)


def incircle(a, b, c, d) -> int:
    """For counter-clockwise (a, b, c): +1 if d is strictly inside the circumcircle."""
    ax, ay = a[0] - d[0], a[1] - d[1]
    bx, by = b[0] - d[0], b[1] - d[1]
    cx, cy = c[0] - d[0], c[1] - d[1]
    az, bz, cz = ax * ax + ay * ay, bx * bx + by * by, cx * cx + cy * cy
    t1, t2, t3 = az * (bx * cy - by * cx), bz * (ax * cy - ay * cx), cz * (ax * by - ay * bx)
    det = t1 - t2 + t3
    perm = (
        az * (abs(bx * cy) + abs(by * cx))
        + bz * (abs(ax * cy) + abs(ay * cx))
        + cz * (abs(ax * by) + abs(ay * bx))
    )
    if abs(det) > _INCIRCLE_EPS * perm:
        return _sign(det)
    return _incircle_exact(a, b, c, d)


def incircle_sos(pts, ia: int, ib: int, ic: int, id_: int) -> int:
    """Perturbed in-circle test on vertex indices; never returns 0.

    Lifting each vertex i by an infinitesimal eps_i (larger for higher index)
    turns exact ties into the sign of the first non-vanishing cofactor.
    """
    a, b, c, d = pts[ia], pts[ib], pts[ic], pts[id_]
    s = incircle(a, b, c, d)
    if s:
        return s
    # d(det)/d(eps_i) for the lifted coordinate of each vertex
    coeffs = {
        ia: lambda: orient2d(d, b, c),
        ib: lambda: orient2d(d, c, a),
        ic: lambda: orient2d(d, a, b),
        id_: lambda: -orient2d(a, b, c),
    }
    for idx in sorted(coeffs, reverse=True):
        s = coeffs[idx]()
        if s:
            return s
    raise AssertionError("in-circle perturbation failed: four collinear points")


def segments_intersect(p1, p2, q1, q2, eps: float = 1e-12) -> bool:
    """Proper or touching intersection of closed segments p1p2 and q1q2."""
    p1, p2, q1, q2 = (np.asarray(v, dtype=float) for v in (p1, p2, q1, q2))

    def orient(a, b, c):
        v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        return 0 if abs(v) <= eps else (1 if v > 0 else -1)

    def on_segment(a, b, c):
        return (min(a[0], b[0]) - eps <= c[0] <= max(a[0], b[0]) + eps
                and min(a[1], b[1]) - eps <= c[1] <= max(a[1], b[1]) + eps)

    o1, o2 = orient(p1, p2, q1), orient(p1, p2, q2)
    o3, o4 = orient(q1, q2, p1), orient(q1, q2, p2)
    if o1 * o2 < 0 and o3 * o4 < 0:
        return True
    if o1 == 0 and on_segment(p1, p2, q1):
        return True
    if o2 == 0 and on_segment(p1, p2, q2):
        return True
    if o3 == 0 and on_segment(q1, q2, p1):
        return True
    if o4 == 0 and on_segment(q1, q2, p2):
        return True
    return False


def _segment_triangle_intersect(p, q, a, b, c, eps: float) -> bool:
    """Closed segment pq against closed triangle abc in 3D."""
    n = np.cross(b - a, c - a)
    nn = np.linalg.norm(n)
    if nn <= eps:
        return False
    n = n / nn
    dp, dq = float(n @ (p - a)), float(n @ (q - a))
    if (dp > eps and dq > eps) or (dp < -eps and dq < -eps):
        return False
    if abs(dp) <= eps and abs(dq) <= eps:
        # coplanar: project to the dominant plane
        axis = int(np.argmax(np.abs(n)))
        keep = [i for i in range(3) if i != axis]
        p2, q2 = p[keep], q[keep]
        a2, b2, c2 = a[keep], b[keep], c[keep]
        if _point_in_triangle_2d(p2, a2, b2, c2, eps) or _point_in_triangle_2d(q2, a2, b2, c2, eps):
            return True
        return any(segments_intersect(p2, q2, u, v, eps) for u, v in ((a2, b2), (b2, c2), (c2, a2)))
    t = dp / (dp - dq)
    x = p + t * (q - p)
    return _point_in_triangle_3d(x, a, b, c, n, eps)


def _point_in_triangle_2d(x, a, b, c, eps: float) -> bool:
    def cross(u, v, w):
        return (v[0] - u[0]) * (w[1] - u[1]) - (v[1] - u[1]) * (w[0] - u[0])

    d1, d2, d3 = cross(a, b, x), cross(b, c, x), cross(c, a, x)
    neg = d1 < -eps or d2 < -eps or d3 < -eps
    pos = d1 > eps or d2 > eps or d3 > eps
    return not (neg and pos)


def _point_in_triangle_3d(x, a, b, c, n, eps: float) -> bool:
    for u, v in ((a, b), (b, c), (c, a)):
        if float(n @ np.cross(v - u, x - u)) < -eps:
            return False
    return True


def triangles_intersect(t1, t2, eps: float = 1e-12) -> bool:
    """Closed-triangle intersection test in 3D (any contact counts)."""
    a, b, c = (np.asarray(v, dtype=float) for v in t1)
    d, e, f = (np.asarray(v, dtype=float) for v in t2)
    for p, q in ((a, b), (b, c), (c, a)):
        if _segment_triangle_intersect(p, q, d, e, f, eps):
            return True
    for p, q in ((d, e), (e, f), (f, d)):
        if _segment_triangle_intersect(p, q, a, b, c, eps):
            return True
    return False


def point_segment_distance(points: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distance from each row of ``points`` to every segment (a[j], b[j]); shape (n, m)."""
    ab = b - a
    ap = points[:, None, :] - a[None, :, :]
    denom = np.einsum("mi,mi->m", ab, ab)
    t = np.einsum("nmi,mi->nm", ap, ab) / np.where(denom > 0, denom, 1.0)
    t = np.clip(t, 0.0, 1.0)
    closest = a[None, :, :] + t[:, :, None] * ab[None, :, :]
    return np.linalg.norm(points[:, None, :] - closest, axis=-1)


def point_triangle_distance(points: np.ndarray, a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Exact Euclidean distance from each point to each triangle; shape (n, m).

    Voronoi-region classification; later assignments take precedence.
    """
    p = points[:, None, :]
    a, b, c = a[None], b[None], c[None]
    ab, ac = b - a, c - a
    ap = p - a
    d1 = (ab * ap).sum(-1)
    d2 = (ac * ap).sum(-1)
    bp = p - b
    d3 = (ab * bp).sum(-1)
    d4 = (ac * bp).sum(-1)
    cp = p - c
    d5 = (ab * cp).sum(-1)
    d6 = (ac * cp).sum(-1)

    va = d3 * d6 - d5 * d4
    vb = d5 * d2 - d1 * d6
    vc = d1 * d4 - d3 * d2

    with np.errstate(divide="ignore", invalid="ignore"):
        denom = va + vb + vc
        v_in = vb / denom
        w_in = vc / denom
        closest = a + v_in[..., None] * ab + w_in[..., None] * ac

        # edge regions
        v_ab = d1 / (d1 - d3)
        w_ac = d2 / (d2 - d6)
        w_bc = (d4 - d3) / ((d4 - d3) + (d5 - d6))

    shape = d1.shape
    out = closest.copy()
    cond_bc = (va <= 0) & ((d4 - d3) >= 0) & ((d5 - d6) >= 0)
    out = np.where(cond_bc[..., None], b + w_bc[..., None] * (c - b), out)
    cond_ac = (vb <= 0) & (d2 >= 0) & (d6 <= 0)
    out = np.where(cond_ac[..., None], a + w_ac[..., None] * ac, out)
    cond_c = (d6 >= 0) & (d5 <= d6)
    out = np.where(cond_c[..., None], np.broadcast_to(c, out.shape), out)
    cond_ab = (vc <= 0) & (d1 >= 0) & (d3 <= 0)
    out = np.where(cond_ab[..., None], a + v_ab[..., None] * ab, out)
    cond_b = (d3 >= 0) & (d4 <= d3)
    out = np.where(cond_b[..., None], np.broadcast_to(b, out.shape), out)
    cond_a = (d1 <= 0) & (d2 <= 0)
    out = np.where(cond_a[..., None], np.broadcast_to(a, out.shape), out)
    assert out.shape[:2] == shape
    return np.linalg.norm(p - out, axis=-1)
