"""Synthetic point clouds and ready-made experiment configurations."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .topo_opt import LossSpec, LossTerm, OptimizerConfig


def dual_circle(n: int, seed: int = 0, waist: float = 7.0) -> np.ndarray:
    """Outer arcs of two overlapping unit circles: a peanut with a narrow waist.

    ``waist`` is the gap between the two crossing points in units of the
    nominal sample spacing, so the shape stays equally ambiguous at every n.
    Reading the waist as open gives one hole, closing it gives two.
    """
    rng = np.random.default_rng(seed)
    h = 4.0 * np.pi / n
    half_gap = min(0.5 * waist * h, 0.9)
    c = np.sqrt(1.0 - half_gap ** 2)
    t0 = np.arccos(c)
    m = n // 2
    pts = []
    for side in (-1.0, 1.0):
        k = m if side < 0 else n - m
        theta = np.linspace(t0, 2.0 * np.pi - t0, k) + rng.normal(0.0, 0.1 * h, k)
        radius = 1.0 + rng.normal(0.0, 0.05 * h, k)
        pts.append(np.c_[side * (c - radius * np.cos(theta)), radius * np.sin(theta)])
    return np.vstack(pts)


def sparse_ring(n: int = 40, seed: int = 0, noise: float = 0.08) -> np.ndarray:
    """A unit circle sampled at random angles with radial noise."""
    rng = np.random.default_rng(seed)
    theta = np.sort(rng.uniform(0.0, 2.0 * np.pi, n))
    radius = 1.0 + rng.normal(0.0, noise, n)
    return np.c_[radius * np.cos(theta), radius * np.sin(theta)]


def sphere(n: int = 500, seed: int = 0, noise: float = 0.0) -> np.ndarray:
    """Near-uniform points on the unit sphere (Fibonacci lattice, random twist)."""
    rng = np.random.default_rng(seed)
    i = np.arange(n) + 0.5
    z = 1.0 - 2.0 * i / n
    phi = np.pi * (1.0 + 5 ** 0.5) * i + rng.uniform(0.0, 2.0 * np.pi)
    r = np.sqrt(1.0 - z ** 2)
    pts = np.c_[r * np.cos(phi), r * np.sin(phi), z]
    if noise:
        pts *= (1.0 + rng.normal(0.0, noise, n))[:, None]
    return pts


def torus(n: int = 300, seed: int = 0, major: float = 1.0, minor: float = 0.5) -> np.ndarray:
    """Near-uniform points on a torus of revolution about the z axis.

    A golden-ratio lattice: the tube angle follows the inverse CDF of the
    area element, the ring angle advances by the golden angle. The seed sets
    a random rotation of the lattice.
    """
    rng = np.random.default_rng(seed)
    q = (np.arange(n) + 0.5) / n
    # area density of the tube angle v is proportional to major + minor cos v
    grid = np.linspace(0.0, 2.0 * np.pi, 4097)
    cdf = (major * grid + minor * np.sin(grid)) / (2.0 * np.pi * major)
    v = np.interp(q, cdf, grid)
    u = 2.0 * np.pi * ((np.arange(n) * (5 ** 0.5 - 1) / 2) % 1.0) + rng.uniform(0.0, 2.0 * np.pi)
    ring = major + minor * np.cos(v)
    return np.c_[ring * np.cos(u), ring * np.sin(u), minor * np.sin(v)]


@dataclass
class Preset:
    name: str
    dim: int
    n_points: int
    make_cloud: Callable[[int, int], np.ndarray]
    loss: LossSpec
    truth: list[int]  # Betti numbers of the true shape
    base_res: int
    extra: int
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    description: str = ""

    def cloud(self, seed: int = 0, n: int | None = None) -> np.ndarray:
        return self.make_cloud(self.n_points if n is None else n, seed)

    def resized(self, n: int) -> "Preset":
        """Same experiment at a different point count (2D presets rescale the grid)."""
        base, extra = self.base_res, self.extra
        if self.dim == 2:
            base, extra = grid_for(n)
        return Preset(self.name, self.dim, n, self.make_cloud, self.loss, list(self.truth),
                      base, extra, self.optimizer, self.description)


def grid_for(n: int) -> tuple[int, int]:
    """2D base grid and sample count keeping fine cells below the Gaussian width."""
    base = 32 if n <= 250 else (48 if n <= 600 else 64)
    return base, 3 * n


VOID_WEIGHT = 20.0


def _gap(dim: int, keep: int, truth: list[int]) -> LossSpec:
    terms = [LossTerm(dim, keep, -1.0), LossTerm(dim, keep + 1, 1.0)]
    return LossSpec(terms, {k: v for k, v in enumerate(truth)})


def _build() -> dict[str, Preset]:
    presets = {}
    base, extra = grid_for(500)
    presets["dual_circle_1hole"] = Preset(
        "dual_circle_1hole", 2, 500, dual_circle, _gap(1, 1, [1, 1]), [1, 1], base, extra,
        OptimizerConfig(learning_rate=0.05, max_iters=300),
        "two merged circles read as a single hole",
    )
    presets["dual_circle_2holes"] = Preset(
        "dual_circle_2holes", 2, 500, dual_circle, _gap(1, 2, [2, 2]), [2, 2], base, extra,
        OptimizerConfig(learning_rate=0.05, max_iters=300),
        "the same cloud read as two adjacent circles",
    )
    presets["sparse_ring"] = Preset(
        "sparse_ring", 2, 40, sparse_ring, _gap(1, 1, [1, 1]), [1, 1], 32, 256,
        OptimizerConfig(learning_rate=0.05, max_iters=300),
        "a noisy, sparsely sampled circle",
    )
    presets["sphere_void"] = Preset(
        "sphere_void", 3, 500, sphere, _gap(2, 1, [1, 0, 1]), [1, 0, 1], 20, 2000,
        OptimizerConfig(learning_rate=0.05, max_iters=150),
        "a sphere sample reconstructed with a single void",
    )
    # PD(1) lifetimes are an order of magnitude above PD(2) ones; the void
    # terms get a matching weight so both gaps shape the step
    loops = _gap(1, 2, [1, 2, 1])
    void = [LossTerm(2, 1, -VOID_WEIGHT), LossTerm(2, 2, VOID_WEIGHT)]
    presets["torus_2loops"] = Preset(
        "torus_2loops", 3, 300, torus, LossSpec(loops.terms + void, loops.target_counts), [1, 2, 1], 20, 2000,
        OptimizerConfig(learning_rate=0.05, max_iters=150),
        "a torus sample reconstructed with two independent loops",
    )
    return presets


PRESETS = _build()


def get_preset(name: str) -> Preset:
    try:
        return PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {', '.join(sorted(PRESETS))}") from None
