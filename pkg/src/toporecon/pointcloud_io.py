"""Point scan ingestion and normalization.

Clouds are read from ASCII XYZ or ASCII PLY files and mapped into the unit
box with a uniform scale so that grid resolutions and learning rates do not
depend on the units of the scan.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DegenerateCloudError,
    DimensionError,
    EmptyCloudError,
    ParseError,
)


@dataclass(frozen=True)
class Transform:
    """Uniform scale plus translation mapping normalized to original coordinates.

    ``original = (normalized - 0.5) * length + center``
    """

    length: float = 1.0
    center: tuple[float, ...] = ()

    def to_original(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        center = np.asarray(self.center, dtype=float) if self.center else 0.5
        return (points - 0.5) * self.length + center

    def to_normalized(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        center = np.asarray(self.center, dtype=float) if self.center else 0.5
        return (points - center) / self.length + 0.5

    def compose(self, inner: "Transform") -> "Transform":
        # self: stage-2 -> stage-1 coordinates, inner: stage-1 -> original
        center = inner.to_original(np.asarray(self.center, dtype=float))
        return Transform(self.length * inner.length, tuple(float(v) for v in center))


@dataclass(frozen=True)
class PointCloud:
    points: np.ndarray
    scale: Transform = field(default_factory=Transform)
    avg_spacing: float = 0.0

    @property
    def dim(self) -> int:
        return int(self.points.shape[1])

    def __len__(self) -> int:
        return int(self.points.shape[0])

    @classmethod
    def from_points(cls, points, scale: Transform | None = None) -> "PointCloud":
        pts = _validated_array(points)
        return cls(pts, scale or Transform(), average_spacing(pts))


def _validated_array(points) -> np.ndarray:
    pts = np.array(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] == 0:
        raise EmptyCloudError("point cloud is empty")
    if pts.shape[1] not in (2, 3):
        raise DimensionError(f"unsupported dimension {pts.shape[1]}; expected 2 or 3")
    if not np.all(np.isfinite(pts)):
        raise ParseError("point cloud contains NaN or infinite coordinates")
    pts.setflags(write=False)
    return pts


def nearest_neighbor_distances(points: np.ndarray, chunk: int = 1024) -> np.ndarray:
    """Brute-force nearest-neighbor distance of every point (O(n^2))."""
    pts = np.asarray(points, dtype=float)
    n = len(pts)
    out = np.empty(n)
    for start in range(0, n, chunk):
        block = pts[start:start + chunk]
        d2 = ((block[:, None, :] - pts[None, :, :]) ** 2).sum(-1)
        rows = np.arange(len(block))
        d2[rows, rows + start] = np.inf
        out[start:start + chunk] = np.sqrt(d2.min(axis=1))
    return out


def average_spacing(points: np.ndarray) -> float:
    if len(points) < 2:
        return 0.0
    return float(nearest_neighbor_distances(points).mean())


def normalize(cloud: PointCloud) -> PointCloud:
    """Map the cloud into [0,1]^d, longest bounding-box side to length 1, centered."""
    pts = cloud.points
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    length = float((hi - lo).max())
    if len(pts) < 2 or length <= 0.0:
        raise DegenerateCloudError("all points coincide; cannot normalize")
    center = (lo + hi) / 2.0
    step = Transform(length, tuple(float(c) for c in center))
    normalized = np.clip(step.to_normalized(pts), 0.0, 1.0)
    normalized.setflags(write=False)
    return PointCloud(normalized, step.compose(cloud.scale), average_spacing(normalized))


def _check_count(pts: np.ndarray, path) -> None:
    if len(pts) < pts.shape[1] + 1:
        raise EmptyCloudError(
            f"{path}: need at least {pts.shape[1] + 1} points, found {len(pts)}"
        )


def _parse_floats(tokens: list[str], path, lineno: int) -> list[float]:
    try:
        values = [float(t) for t in tokens]
    except ValueError as exc:
        raise ParseError(f"{path}:{lineno}: cannot parse {' '.join(tokens)!r}") from exc
    if not all(math.isfinite(v) for v in values):
        raise ParseError(f"{path}:{lineno}: non-finite coordinate")
    return values


def _read_xyz(path: Path) -> np.ndarray:
    rows: list[list[float]] = []
    width = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            tokens = line.split()
            if len(tokens) not in (2, 3):
                raise DimensionError(f"{path}:{lineno}: expected 2 or 3 columns, got {len(tokens)}")
            if width is None:
                width = len(tokens)
            elif len(tokens) != width:
                raise DimensionError(f"{path}:{lineno}: mixed dimensions ({width} vs {len(tokens)})")
            rows.append(_parse_floats(tokens, path, lineno))
    if not rows:
        raise EmptyCloudError(f"{path}: no points")
    return np.array(rows)


def _read_ply(path: Path) -> np.ndarray:
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0].strip() != "ply":
        raise ParseError(f"{path}: missing 'ply' magic")
    elements: list[tuple[str, int, list[str]]] = []
    body_start = None
    for i, line in enumerate(lines[1:], 1):
        tokens = line.split()
        if not tokens or tokens[0] in ("comment", "obj_info"):
            continue
        if tokens[0] == "format":
            if len(tokens) < 3 or tokens[1] != "ascii":
                raise ParseError(f"{path}: only ASCII PLY is supported")
        elif tokens[0] == "element":
            try:
                elements.append((tokens[1], int(tokens[2]), []))
            except (IndexError, ValueError) as exc:
                raise ParseError(f"{path}:{i + 1}: bad element line") from exc
        elif tokens[0] == "property":
            if not elements:
                raise ParseError(f"{path}:{i + 1}: property before element")
            elements[-1][2].append(tokens[-1])
        elif tokens[0] == "end_header":
            body_start = i + 1
            break
        else:
            raise ParseError(f"{path}:{i + 1}: unexpected header line {line!r}")
    if body_start is None:
        raise ParseError(f"{path}: missing end_header")

    cursor = body_start
    for name, count, props in elements:
        if name != "vertex":
            cursor += count
            continue
        if "x" not in props or "y" not in props:
            raise ParseError(f"{path}: vertex element lacks x/y properties")
        cols = [props.index("x"), props.index("y")]
        if "z" in props:
            cols.append(props.index("z"))
        rows = []
        for lineno in range(cursor, cursor + count):
            if lineno >= len(lines):
                raise ParseError(f"{path}: truncated vertex list")
            tokens = lines[lineno].split()
            if len(tokens) < len(props):
                raise ParseError(f"{path}:{lineno + 1}: expected {len(props)} values")
            rows.append(_parse_floats([tokens[c] for c in cols], path, lineno + 1))
        if not rows:
            raise EmptyCloudError(f"{path}: no vertices")
        return np.array(rows)
    raise ParseError(f"{path}: no vertex element")


def load_pointcloud(path, format: str | None = None) -> PointCloud:
    """Read an ASCII XYZ or PLY scan in its original coordinates."""
    path = Path(path)
    fmt = (format or path.suffix.lstrip(".") or "xyz").lower()
    if fmt not in ("xyz", "ply"):
        raise ParseError(f"{path}: unsupported format {fmt!r}")
    if not path.exists():
        raise FileNotFoundError(f"point cloud not found: {path}")
    pts = _read_ply(path) if fmt == "ply" else _read_xyz(path)
    _check_count(pts, path)
    return PointCloud.from_points(pts)


def save_xyz(path, points: np.ndarray) -> None:
    with open(path, "w") as fh:
        for row in np.asarray(points, dtype=float):
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")
