"""Gaussian-mixture likelihood field and its derivatives.

The field is ``f(x) = sum_p G(x; p, a_p^T a_p)`` with

    G(x; mu, S) = sqrt((2 pi)^-d |S|^-1) * exp(-(x - mu)^T S^-1 (x - mu))

Note the exponent carries no 1/2 factor. Each covariance is parameterized by
a d x d factor ``a_p`` so that every update keeps ``S = a^T a`` symmetric.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateCloudError, SingularCovarianceError
from .pointcloud_io import PointCloud

DET_FLOOR = 1e-30
SPD_NUDGE = 1e-6


@dataclass
class GaussianParams:
    alphas: np.ndarray  # (n, d, d)

    @property
    def dim(self) -> int:
        return int(self.alphas.shape[-1])

    def __len__(self) -> int:
        return int(self.alphas.shape[0])

    def covariances(self) -> np.ndarray:
        return np.einsum("pki,pkj->pij", self.alphas, self.alphas)

    def copy(self) -> "GaussianParams":
        return GaussianParams(self.alphas.copy())


@dataclass
class FieldValueGrad:
    value: float
    grads: np.ndarray  # (n, d, d): d f(x) / d alpha_p


def gaussian(x, mu, sigma) -> float:
    x = np.asarray(x, dtype=float)
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    d = len(x)
    det = float(np.linalg.det(sigma))
    if not det > DET_FLOOR:
        raise SingularCovarianceError(f"covariance determinant {det:.3g} below {DET_FLOOR}")
    r = x - mu
    quad = float(r @ np.linalg.solve(sigma, r))
    return math.sqrt((2.0 * math.pi) ** (-d) / det) * math.exp(-quad)


class _Prepared:
    """Per-point quantities shared by value and gradient evaluation."""

    def __init__(self, cloud: PointCloud, params: GaussianParams):
        alphas = np.asarray(params.alphas, dtype=float)
        if alphas.shape != (len(cloud), cloud.dim, cloud.dim):
            raise ValueError(
                f"params shape {alphas.shape} does not match cloud ({len(cloud)}, {cloud.dim})"
            )
        d = cloud.dim
        det_alpha = np.linalg.det(alphas)
        det_sigma = det_alpha ** 2
        bad = np.flatnonzero(~(det_sigma > DET_FLOOR))
        if len(bad):
            raise SingularCovarianceError(
                f"covariance of point {int(bad[0])} has determinant {det_sigma[bad[0]]:.3g}"
            )
        self.centers = cloud.points
        self.alphas = alphas
        self.alpha_inv = np.linalg.inv(alphas)
        # B = alpha^-T so that r^T S^-1 r = |B r|^2
        self.whiten = np.transpose(self.alpha_inv, (0, 2, 1))
        self.norm = np.sqrt((2.0 * np.pi) ** (-d) / det_sigma)

    def terms(self, xs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Per-(x, p) Gaussian values and whitened offsets for a block of xs."""
        r = xs[:, None, :] - self.centers[None, :, :]
        y = np.einsum("pij,vpj->vpi", self.whiten, r)
        g = self.norm[None, :] * np.exp(-np.einsum("vpi,vpi->vp", y, y))
        return g, y


def eval_field_many(xs, cloud: PointCloud, params: GaussianParams, chunk: int = 256) -> np.ndarray:
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    prep = _Prepared(cloud, params)
    out = np.empty(len(xs))
    for start in range(0, len(xs), chunk):
        g, _ = prep.terms(xs[start:start + chunk])
        out[start:start + chunk] = g.sum(axis=1)
    return out


def eval_field(x, cloud: PointCloud, params: GaussianParams) -> float:
    return float(eval_field_many(np.asarray(x, dtype=float)[None, :], cloud, params)[0])


def eval_field_grad(x, cloud: PointCloud, params: GaussianParams) -> FieldValueGrad:
    """Field value at x and its derivative with respect to every factor a_p.

    With r = x - p, S = a^T a and B = a^-T:
        dG/da = G * (-B + 2 (B r)(S^-1 r)^T)
    """
    prep = _Prepared(cloud, params)
    x = np.asarray(x, dtype=float)
    g, y = prep.terms(x[None, :])
    g, y = g[0], y[0]
    s_inv_r = np.einsum("pij,pj->pi", prep.alpha_inv, y)
    grads = g[:, None, None] * (-prep.whiten + 2.0 * y[:, :, None] * s_inv_r[:, None, :])
    return FieldValueGrad(float(g.sum()), grads)


def isotropic_scale(radius: float) -> float:
    """Factor s (a = s I) whose radial slope |dG/dr| peaks at ``radius``.

    |dG/dr| is proportional to r exp(-r^2 / s^2), stationary at r = s / sqrt(2).
    """
    return math.sqrt(2.0) * radius


def init_params(cloud: PointCloud) -> GaussianParams:
    if len(cloud) < 2 or not cloud.avg_spacing > 0.0:
        raise DegenerateCloudError("initialization needs at least two distinct points")
    s = isotropic_scale(cloud.avg_spacing)
    alphas = np.tile(np.eye(cloud.dim) * s, (len(cloud), 1, 1))
    return GaussianParams(alphas)


def project_spd(params: GaussianParams) -> GaussianParams:
    """Nudge factors whose covariance determinant fell below the floor."""
    alphas = params.alphas.copy()
    det_sigma = np.linalg.det(alphas) ** 2
    bad = ~(det_sigma > DET_FLOOR)
    if bad.any():
        alphas[bad] += SPD_NUDGE * np.eye(params.dim)
    return GaussianParams(alphas)
