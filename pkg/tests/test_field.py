import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import minimize_scalar

from toporecon.errors import DegenerateCloudError, SingularCovarianceError
from toporecon.field import (
    GaussianParams,
    eval_field,
    eval_field_grad,
    eval_field_many,
    gaussian,
    init_params,
    isotropic_scale,
    project_spd,
)
from toporecon.pointcloud_io import PointCloud, normalize

from conftest import cloud_of


def gaussian_oracle(x, mu, sigma):
    """Scalar-arithmetic version of the density with the exp(-r^T S^-1 r) exponent."""
    d = len(x)
    if d == 2:
        (a, b), (c, e) = sigma
        det = a * e - b * c
        inv = [[e / det, -b / det], [-c / det, a / det]]
    else:
        inv = np.linalg.inv(sigma).tolist()
        det = float(np.linalg.det(sigma))
    r = [x[i] - mu[i] for i in range(d)]
    q = sum(r[i] * inv[i][j] * r[j] for i in range(d) for j in range(d))
    return math.sqrt((2 * math.pi) ** (-d) / det) * math.exp(-q)


def random_config(rng, d, n=5):
    pts = rng.uniform(size=(n, d))
    alphas = rng.normal(scale=0.1, size=(n, d, d)) + 0.3 * np.eye(d)
    x = pts[rng.integers(n)] + rng.normal(scale=0.2, size=d)
    return cloud_of(pts), GaussianParams(alphas), x


def fd_grad(x, cloud, params, h=1e-5):
    out = np.zeros_like(params.alphas)
    for idx in np.ndindex(*params.alphas.shape):
        up, dn = params.alphas.copy(), params.alphas.copy()
        up[idx] += h
        dn[idx] -= h
        out[idx] = (eval_field(x, cloud, GaussianParams(up)) - eval_field(x, cloud, GaussianParams(dn))) / (2 * h)
    return out


def max_rel_err(a, b):
    return float(np.abs(a - b).max() / max(np.abs(b).max(), 1e-300))


def test_gaussian_identity_3d():
    assert gaussian(np.zeros(3), np.zeros(3), np.eye(3)) == pytest.approx((2 * np.pi) ** -1.5, rel=1e-12)
    assert gaussian(np.zeros(3), np.zeros(3), np.eye(3)) == pytest.approx(0.06349, abs=1e-5)


def test_gaussian_diag_2d():
    sigma = np.diag([4.0, 1.0])
    value = gaussian(np.zeros(2), np.zeros(2), sigma)
    assert value == pytest.approx(gaussian_oracle([0, 0], [0, 0], sigma.tolist()), rel=1e-14)
    assert value == pytest.approx(0.07958, abs=1e-5)


def test_gaussian_singular():
    with pytest.raises(SingularCovarianceError):
        gaussian(np.zeros(2), np.zeros(2), np.zeros((2, 2)))


def test_field_single_point():
    cloud = cloud_of([[0.3, 0.4]])
    assert eval_field([0.3, 0.4], cloud, GaussianParams(np.eye(2)[None])) == pytest.approx(1 / (2 * np.pi))


def test_field_symmetric_pair():
    cloud = cloud_of([[-1.0, 0.0], [1.0, 0.0]])
    params = GaussianParams(np.tile(np.eye(2), (2, 1, 1)))
    one = eval_field([0.0, 0.0], cloud_of([[1.0, 0.0]]), GaussianParams(np.eye(2)[None]))
    assert eval_field([0.0, 0.0], cloud, params) == pytest.approx(2 * one, rel=1e-14)


def test_field_matches_term_sum(rng):
    cloud, params, x = random_config(rng, 2)
    sigmas = params.covariances()
    want = sum(gaussian_oracle(x, p, s.tolist()) for p, s in zip(cloud.points, sigmas))
    assert eval_field(x, cloud, params) == pytest.approx(want, rel=1e-12)


def test_field_many_matches_single(rng):
    cloud, params, _ = random_config(rng, 3, n=7)
    xs = rng.uniform(size=(600, 3))
    many = eval_field_many(xs, cloud, params, chunk=64)
    np.testing.assert_allclose(many, [eval_field(x, cloud, params) for x in xs], rtol=1e-13)


def test_grad_at_center():
    alpha = np.array([[0.7, 0.1], [-0.2, 0.5]])
    cloud = cloud_of([[0.2, 0.2]])
    params = GaussianParams(alpha[None])
    res = eval_field_grad([0.2, 0.2], cloud, params)
    np.testing.assert_allclose(res.grads[0], -res.value * np.linalg.inv(alpha).T, rtol=1e-12)
    assert max_rel_err(res.grads, fd_grad([0.2, 0.2], cloud, params)) < 1e-4


@pytest.mark.parametrize("d", [2, 3])
def test_grad_matches_fd(d, rng):
    for _ in range(10):
        cloud, params, x = random_config(rng, d)
        res = eval_field_grad(x, cloud, params)
        assert res.value == pytest.approx(eval_field(x, cloud, params), rel=1e-13)
        assert max_rel_err(res.grads, fd_grad(x, cloud, params)) < 1e-4


def test_grad_axis_symmetry():
    cloud = cloud_of([[0.0, 0.0, 0.0]])
    params = GaussianParams((0.8 * np.eye(3))[None])
    g = eval_field_grad([0.5, 0.0, 0.0], cloud, params).grads[0]
    # swapping axes 1 and 2 leaves the gradient unchanged
    perm = [0, 2, 1]
    np.testing.assert_allclose(g[np.ix_(perm, perm)], g, atol=1e-15)


def test_init_peak_location():
    # avg_spacing = 1: the radial slope |dG/dr| of the chosen isotropic Gaussian peaks at r = 1
    cloud = cloud_of([[0.0, 0.0], [1.0, 0.0], [0.0, 3.0], [0.0, 4.0]])
    assert cloud.avg_spacing == pytest.approx(1.0)
    alpha = init_params(cloud).alphas
    s2 = (alpha[0].T @ alpha[0])[0, 0]
    np.testing.assert_allclose(alpha[0].T @ alpha[0], s2 * np.eye(2))
    assert np.all(alpha == alpha[0])

    def neg_slope(r):
        # -log |dG/dr|, with dG/dr = -(2 r / s^2) G for the exponent exp(-r^2 / s^2)
        g = gaussian(np.array([r, 0.0]), np.zeros(2), s2 * np.eye(2))
        return -math.log(2 * r / s2 * g)

    grid = np.linspace(0.01, 5.0, 5000)
    coarse = grid[np.argmin([neg_slope(r) for r in grid])]
    peak = minimize_scalar(neg_slope, bracket=(coarse - 0.01, coarse, coarse + 0.01), tol=1e-10).x
    assert peak == pytest.approx(1.0, abs=1e-6)
    assert s2 == pytest.approx(isotropic_scale(1.0) ** 2, rel=1e-12)


def test_init_scale_invariant_after_normalize(rng):
    pts = rng.uniform(size=(30, 2))
    a = init_params(normalize(PointCloud.from_points(pts))).alphas
    b = init_params(normalize(PointCloud.from_points(2.0 * pts))).alphas
    np.testing.assert_allclose(a, b, rtol=1e-12)


def test_init_two_points_equal():
    alphas = init_params(cloud_of([[0.0, 0.0], [1.0, 1.0]])).alphas
    np.testing.assert_array_equal(alphas[0], alphas[1])


def test_init_degenerate():
    with pytest.raises(DegenerateCloudError):
        init_params(cloud_of([[0.0, 0.0]]))


def test_project_spd_nudges_singular():
    params = GaussianParams(np.stack([np.zeros((2, 2)), np.eye(2)]))
    fixed = project_spd(params)
    assert np.linalg.det(fixed.alphas[0]) ** 2 > 0
    np.testing.assert_array_equal(fixed.alphas[1], np.eye(2))


configs = st.tuples(st.integers(0, 10_000), st.sampled_from([2, 3]))


@settings(max_examples=30, deadline=None)
@given(configs)
def test_center_is_maximum(cfg):
    seed, d = cfg
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(d, d)) + 2 * np.eye(d)
    sigma = a.T @ a
    mu = rng.normal(size=d)
    x = mu + rng.normal(size=d)
    assert gaussian(x, mu, sigma) <= gaussian(mu, mu, sigma)


@settings(max_examples=30, deadline=None)
@given(configs)
def test_permutation_invariance(cfg):
    seed, d = cfg
    rng = np.random.default_rng(seed)
    cloud, params, x = random_config(rng, d, n=6)
    perm = rng.permutation(6)
    shuffled = eval_field(x, cloud_of(cloud.points[perm]), GaussianParams(params.alphas[perm]))
    assert shuffled == pytest.approx(eval_field(x, cloud, params), rel=1e-12)


@settings(max_examples=20, deadline=None)
@given(configs)
def test_hessian_finite(cfg):
    seed, d = cfg
    rng = np.random.default_rng(seed)
    cloud, params, x = random_config(rng, d)
    h = 1e-4
    for i in range(d):
        e = np.eye(d)[i] * h
        second = (eval_field(x + e, cloud, params) - 2 * eval_field(x, cloud, params)
                  + eval_field(x - e, cloud, params)) / h ** 2
        assert np.isfinite(second)
