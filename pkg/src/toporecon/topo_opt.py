"""Topological losses on persistence diagrams and their gradient descent.

A loss is a signed sum of squared lifetimes picked out by rank in the
sorted diagram. Its gradient reaches the Gaussian factors only through the
birth and death vertices of the selected pairs.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .complex import FilteredComplex, SimplicialComplex, attach_filtration
from .errors import DivergenceError, ParseError, SingularCovarianceError
from .field import GaussianParams, eval_field_grad, init_params, project_spd
from .persistence import PersistenceDiagram, PersistencePair, compute_persistence
from .pointcloud_io import PointCloud

log = logging.getLogger(__name__)

DOMINANCE_GAMMA = 0.1
MAX_LR_HALVINGS = 5


@dataclass(frozen=True)
class LossTerm:
    dim: int
    index: int  # 1-based rank in the sorted diagram
    weight: float


@dataclass
class LossSpec:
    terms: list[LossTerm]
    target_counts: dict[int, int] = field(default_factory=dict)

    def __post_init__(self):
        if not self.terms:
            raise ValueError("a loss needs at least one term")
        for t in self.terms:
            if t.index < 1:
                raise ValueError(f"term index must be >= 1, got {t.index}")
            if t.dim < 0:
                raise ValueError(f"term dimension must be >= 0, got {t.dim}")
            if not math.isfinite(t.weight) or t.weight == 0.0:
                raise ValueError(f"term weight must be finite and nonzero, got {t.weight}")

    @property
    def dims(self) -> list[int]:
        return sorted({t.dim for t in self.terms})

    def scaled(self, factor: float) -> "LossSpec":
        terms = [LossTerm(t.dim, t.index, t.weight * factor) for t in self.terms]
        return LossSpec(terms, dict(self.target_counts))

    @classmethod
    def gap(cls, dim: int, n_features: int, target_counts: dict[int, int] | None = None) -> "LossSpec":
        """Grow the ``n_features``-th lifetime and shrink the next one."""
        terms = [LossTerm(dim, n_features, -1.0), LossTerm(dim, n_features + 1, 1.0)]
        counts = dict(target_counts) if target_counts else {dim: n_features}
        return cls(terms, counts)

    @classmethod
    def from_dict(cls, data: dict) -> "LossSpec":
        try:
            terms = [LossTerm(int(t["dim"]), int(t["index"]), float(t["weight"])) for t in data["terms"]]
            counts = {int(k): int(v) for k, v in data.get("target_counts", {}).items()}
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"malformed loss spec: {exc}") from exc
        return cls(terms, counts)

    @classmethod
    def from_json(cls, text: str) -> "LossSpec":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"loss spec is not valid JSON: {exc}") from exc
        return cls.from_dict(data)

    @classmethod
    def load(cls, path) -> "LossSpec":
        path = Path(path)
        if not path.is_file():
            raise FileNotFoundError(f"loss spec not found: {path}")
        return cls.from_json(path.read_text())

    def to_dict(self) -> dict:
        return {
            "terms": [{"dim": t.dim, "index": t.index, "weight": t.weight} for t in self.terms],
            "target_counts": {str(k): v for k, v in sorted(self.target_counts.items())},
        }


@dataclass
class OptimizerConfig:
    learning_rate: float = 0.02
    max_iters: int = 500
    plateau_tol: float = 1e-7
    plateau_window: int = 25
    rng_seed: int = 0
    settle_iters: int = 10  # stop once target counts held this long (0 disables)

    def __post_init__(self):
        if not self.learning_rate >= 0.0:
            raise ValueError("learning_rate must be non-negative")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.plateau_window < 1:
            raise ValueError("plateau_window must be >= 1")
        if self.settle_iters < 0:
            raise ValueError("settle_iters must be >= 0")


@dataclass
class LossValue:
    value: float
    active: list[tuple[LossTerm, PersistencePair]]
    inactive: list[LossTerm]


def evaluate_terms(diagram: PersistenceDiagram, spec: LossSpec) -> LossValue:
    total = 0.0
    active, inactive = [], []
    for t in spec.terms:
        pairs = diagram[t.dim]
        if t.index > len(pairs):
            inactive.append(t)
            continue
        p = pairs[t.index - 1]
        total += t.weight * (p.death - p.birth) ** 2
        active.append((t, p))
    return LossValue(total, active, inactive)


def eval_loss(diagram: PersistenceDiagram, spec: LossSpec) -> float:
    """Weighted sum of squared lifetimes; terms past the end of a diagram add 0."""
    return evaluate_terms(diagram, spec).value


def loss_gradient(fc: FilteredComplex, diagram: PersistenceDiagram, spec: LossSpec,
                  cloud: PointCloud, params: GaussianParams) -> np.ndarray:
    """dE/d alpha_p for every point, shape (n, d, d)."""
    grad = np.zeros_like(params.alphas, dtype=float)
    # collect the scalar weight attached to every vertex first, so each
    # vertex costs a single field-gradient evaluation
    coeff: dict[int, float] = {}
    for t, p in evaluate_terms(diagram, spec).active:
        g = 2.0 * t.weight * (p.death - p.birth)
        coeff[p.birth_vertex] = coeff.get(p.birth_vertex, 0.0) - g
        coeff[p.death_vertex] = coeff.get(p.death_vertex, 0.0) + g
    for v in sorted(coeff):
        c = coeff[v]
        if c == 0.0:
            continue
        grad += c * eval_field_grad(fc.complex.vertices[v], cloud, params).grads
    return grad


def dominant_pairs(diagram: PersistenceDiagram, dim: int, gamma: float = DOMINANCE_GAMMA) -> list[PersistencePair]:
    """Pairs whose lifetime exceeds gamma times the largest one in ``dim``."""
    pairs = diagram[dim]
    if not pairs:
        return []
    top = pairs[0].lifetime
    return [p for p in pairs if p.lifetime > gamma * top]


def dominant_counts(diagram: PersistenceDiagram, dims, gamma: float = DOMINANCE_GAMMA) -> dict[int, int]:
    return {k: len(dominant_pairs(diagram, k, gamma)) for k in dims}


def target_dims(spec: LossSpec, d: int) -> list[int]:
    """Dimensions whose dominant-pair count is compared with the target.

    Only the output dimension d-1 is read off the diagram. Lower
    dimensions of a likelihood field also carry classes of the sampled
    sheet itself (one PD(0) class per local maximum, small tunnels between
    samples in 3D), so their targets are checked on the extracted mesh.
    """
    return [d - 1] if (d - 1) in spec.target_counts else []


@dataclass
class TraceRow:
    iteration: int
    loss: float
    learning_rate: float
    n_active: int
    lifetimes: tuple[float, ...]
    on_target: bool = False


@dataclass
class OptimizeResult:
    params: GaussianParams
    trace: list[TraceRow]
    diagram: PersistenceDiagram
    fc: FilteredComplex
    best_iteration: int
    converged: bool = False

    @property
    def losses(self) -> list[float]:
        return [r.loss for r in self.trace]


def _step(params: GaussianParams, grad: np.ndarray, lr: float, scale: float) -> GaussianParams:
    """Normalized descent step: the most affected factor moves by lr * scale."""
    norms = np.sqrt((grad ** 2).sum(axis=(1, 2)))
    peak = float(norms.max()) if len(norms) else 0.0
    if lr == 0.0 or peak == 0.0:
        return params.copy()
    return project_spd(GaussianParams(params.alphas - (lr * scale / peak) * grad))


def optimize(cloud: PointCloud, complex: SimplicialComplex, spec: LossSpec,
             cfg: OptimizerConfig | None = None, params: GaussianParams | None = None,
             callback=None) -> OptimizeResult:
    """Gradient descent on the Gaussian factors, returning the best iterate."""
    cfg = cfg or OptimizerConfig()
    params = init_params(cloud) if params is None else params.copy()
    scale = float(np.abs(init_params(cloud).alphas[0]).max())
    checked = target_dims(spec, complex.dim)
    dims = sorted(set(spec.dims) | set(checked))
    lr = cfg.learning_rate
    halvings = 0

    def evaluate(p: GaussianParams):
        fc = attach_filtration(complex, cloud, p)
        dg = compute_persistence(fc, dims=dims, check=False)
        return fc, dg, evaluate_terms(dg, spec)

    def on_target(dg: PersistenceDiagram) -> bool:
        if not checked:
            return False
        counts = dominant_counts(dg, checked)
        return all(counts[k] == spec.target_counts[k] for k in checked)

    fc, dg, lv = evaluate(params)
    if not math.isfinite(lv.value):
        raise DivergenceError("loss is not finite at the initial parameters")
    # best iterate: on-target iterates beat off-target ones, then lower loss wins
    best = None
    trace: list[TraceRow] = []
    it = 0
    settled = 0
    while True:
        hit = on_target(dg)
        settled = settled + 1 if hit else 0
        lifetimes = tuple(p.lifetime for _, p in lv.active)
        trace.append(TraceRow(it, lv.value, lr, len(lv.active), lifetimes, hit))
        if callback is not None:
            callback(it, lv.value, dg)
        if best is None or (hit, -lv.value) > (best[0], -best[1]):
            best = (hit, lv.value, params, dg, fc, it)
        if it >= cfg.max_iters:
            break
        if cfg.settle_iters and settled >= cfg.settle_iters:
            log.info("target counts held for %d iterations, stopping at %d", settled, it)
            break
        if it >= cfg.plateau_window:
            past = min(r.loss for r in trace[: -cfg.plateau_window])
            now = min(r.loss for r in trace)
            if past - now < cfg.plateau_tol * max(1.0, abs(past)):
                log.info("plateau reached after %d iterations", it)
                break
        grad = loss_gradient(fc, dg, spec, cloud, params)
        candidate = _step(params, grad, lr, scale)
        try:
            fc_c, dg_c, lv_c = evaluate(candidate)
            finite = math.isfinite(lv_c.value)
        except (SingularCovarianceError, FloatingPointError):
            finite = False
        if not finite:
            halvings += 1
            if halvings > MAX_LR_HALVINGS:
                raise DivergenceError(f"loss diverged after {MAX_LR_HALVINGS} learning-rate halvings")
            lr *= 0.5
            log.warning("non-finite loss at iteration %d, learning rate halved to %g", it + 1, lr)
            _, _, params, dg, fc, _ = best
            lv = evaluate_terms(dg, spec)
            it += 1
            continue
        params, fc, dg, lv = candidate, fc_c, dg_c, lv_c
        it += 1
    hit, _, params, dg, fc, best_it = best
    return OptimizeResult(params, trace, dg, fc, best_it, hit)
