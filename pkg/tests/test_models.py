import math

import numpy as np
import pytest

from caopt import (
    Dataset,
    DiscreteMeasure,
    ModelSpec,
    loss,
    mean_gradient,
    per_sample_gradient,
    recombine,
)
from caopt.errors import DimensionMismatch
from caopt.models import logistic_curvature_bound


def random_instance(seed, n=40, d=3, family="logistic"):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, d))
    if family == "logistic":
        y = (rng.random(n) < 0.5).astype(float)
    else:
        y = rng.standard_normal(n)
    return Dataset(X, y), rng.standard_normal(d)


def finite_difference_gradient(model, theta, data, h=1e-6):
    g = np.empty_like(theta)
    for j in range(theta.size):
        e = np.zeros_like(theta)
        e[j] = h
        g[j] = (loss(model, theta + e, data) - loss(model, theta - e, data)) / (2 * h)
    return g


class TestLoss:
    def test_logistic_at_zero_is_log2(self):
        ds, _ = random_instance(0)
        model = ModelSpec("logistic")
        assert abs(loss(model, np.zeros(3), ds) - math.log(2)) < 1e-12

    def test_least_squares_perfect_fit(self):
        rng = np.random.default_rng(1)
        X = rng.standard_normal((20, 2))
        theta = np.array([0.5, -2.0])
        ds = Dataset(X, X @ theta)
        assert loss(ModelSpec("least_squares"), theta, ds) == 0.0

    def test_lasso_penalty_hand_value(self):
        ds = Dataset(np.array([[1.0], [2.0]]), np.array([1.0, 2.0]))
        model = ModelSpec("least_squares", l1_lambda=0.01)
        assert abs(loss(model, np.array([1.0]), ds) - 0.01) < 1e-15

    def test_weighted_loss_concentrated(self):
        ds, theta = random_instance(2, family="least_squares")
        model = ModelSpec("least_squares")
        mu = DiscreteMeasure(np.array([7]), np.array([1.0]))
        expected = float((ds.X[7] @ theta - ds.y[7]) ** 2)
        assert abs(loss(model, theta, ds, weights=mu) - expected) < 1e-12

    def test_logistic_convexity_midpoints(self):
        model = ModelSpec("logistic")
        for seed in range(10):
            ds, theta_a = random_instance(seed)
            theta_b = np.random.default_rng(seed + 100).standard_normal(3)
            mid = 0.5 * (theta_a + theta_b)
            assert loss(model, mid, ds) <= 0.5 * (
                loss(model, theta_a, ds) + loss(model, theta_b, ds)
            ) + 1e-12

    def test_stability_at_large_margins(self):
        X = np.array([[500.0], [-500.0]])
        ds = Dataset(X, np.array([1.0, 0.0]))
        model = ModelSpec("logistic")
        theta = np.array([1.0])
        assert math.isfinite(loss(model, theta, ds))
        assert np.all(np.isfinite(mean_gradient(model, theta, ds)))

    def test_dimension_mismatch(self):
        ds, _ = random_instance(0)
        with pytest.raises(DimensionMismatch):
            loss(ModelSpec("logistic"), np.zeros(5), ds)


class TestGradients:
    def test_least_squares_rows_formula(self):
        ds, theta = random_instance(3, family="least_squares")
        rows = per_sample_gradient(ModelSpec("least_squares"), theta, ds)
        expected = 2.0 * (ds.X @ theta - ds.y)[:, None] * ds.X
        np.testing.assert_allclose(rows, expected, rtol=0, atol=1e-14)

    def test_logistic_rows_at_zero(self):
        ds, _ = random_instance(4)
        rows = per_sample_gradient(ModelSpec("logistic"), np.zeros(3), ds)
        np.testing.assert_allclose(rows, (0.5 - ds.y)[:, None] * ds.X, atol=1e-15)

    def test_coords_restriction(self):
        ds, theta = random_instance(5)
        rows = per_sample_gradient(ModelSpec("logistic"), theta, ds, coords=[2, 0])
        full = per_sample_gradient(ModelSpec("logistic"), theta, ds)
        np.testing.assert_array_equal(rows, full[:, [2, 0]])

    @pytest.mark.parametrize("family", ["logistic", "least_squares"])
    def test_finite_difference_match(self, family):
        model = ModelSpec(family)
        for seed in range(10):
            ds, theta = random_instance(seed, family=family)
            g = mean_gradient(model, theta, ds)
            fd = finite_difference_gradient(model, theta, ds)
            np.testing.assert_allclose(g, fd, rtol=1e-6, atol=1e-7)

    def test_l1_subgradient_in_mean_gradient(self):
        ds, _ = random_instance(6, family="least_squares")
        model = ModelSpec("least_squares", l1_lambda=0.5)
        theta = np.array([1.0, -2.0, 0.0])
        base = mean_gradient(ModelSpec("least_squares"), theta, ds)
        g = mean_gradient(model, theta, ds)
        np.testing.assert_allclose(g - base, 0.5 * np.array([1.0, -1.0, 0.0]), atol=1e-15)

    def test_concentrated_weights_select_row(self):
        ds, theta = random_instance(7)
        model = ModelSpec("logistic")
        mu = DiscreteMeasure(np.array([3]), np.array([1.0]))
        row = per_sample_gradient(model, theta, ds)[3]
        np.testing.assert_allclose(mean_gradient(model, theta, ds, weights=mu), row, atol=1e-14)

    def test_recombined_weights_match_uniform_mean(self):
        # end-to-end consequence of the recombination postcondition
        model = ModelSpec("logistic")
        ds, theta = random_instance(8, n=200)
        F = per_sample_gradient(model, theta, ds)
        res = recombine(F, DiscreteMeasure.uniform(ds.n))
        g_reduced = mean_gradient(model, theta, ds, weights=res.measure)
        g_full = mean_gradient(model, theta, ds)
        np.testing.assert_allclose(g_reduced, g_full, rtol=0, atol=1e-9)


def test_curvature_bound_dominates_hessian():
    ds, _ = random_instance(9, n=300)
    c = logistic_curvature_bound(ds)
    from scipy.special import expit

    for seed in range(5):
        theta = np.random.default_rng(seed).standard_normal(3)
        p = expit(ds.X @ theta)
        H = (ds.X * (p * (1 - p))[:, None]).T @ ds.X / ds.n
        assert np.linalg.eigvalsh(H)[-1] <= c + 1e-12
