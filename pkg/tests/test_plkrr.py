from __future__ import annotations

import warnings

import numpy as np
import pytest
from conftest import make_data
from hypothesis import given
from hypothesis import strategies as st

from hetkrr import eigensystems as es
from hetkrr.eigensystems import EigenKernel
from hetkrr.plkrr import (DegreesOfFreedomError, PLDataset, RankDeficientError, aggregate,
                          boost_beta, fit_heterogeneous, fit_subpopulation, gram_parts, oracle_fit,
                          predict)

KERNELS = {
    "sobolev": EigenKernel.sobolev(2.0, (-1.0, 1.0)),
    "gaussian": EigenKernel.gaussian(1.0),
    "finite": EigenKernel.finite_rank(4, weights=(1.0, 0.5, 0.3, 0.2)),
}


def kkt_solve(data: PLDataset, kernel, lam):
    """Dense saddle-point system for the dual coefficients, beta and null coefficients."""
    g, t, _, _ = gram_parts(kernel, data.z)
    n, p = data.x.shape
    d = np.hstack([data.x, t])
    k = d.shape[1]
    top = np.hstack([g + n * lam * np.eye(n), d])
    bottom = np.hstack([d.T, np.zeros((k, k))])
    sol = np.linalg.solve(np.vstack([top, bottom]), np.concatenate([data.y, np.zeros(k)]))
    return sol[:n], sol[n:n + p], sol[n + p:]


def primal_ridge(data: PLDataset, kernel, lam, m):
    """Penalized least squares directly in eigen-coordinates (exact for finite expansions)."""
    n, p = data.x.shape
    phi = es.features(kernel, data.z, m)
    mu = es.eigenvalues(kernel, m)
    design = np.hstack([data.x, phi])
    pen = np.concatenate([np.zeros(p), np.where(np.isinf(mu), 0.0, 1.0 / mu)])
    lhs = design.T @ design / n + lam * np.diag(pen)
    sol = np.linalg.solve(lhs, design.T @ data.y / n)
    return sol[:p], sol[p:]


class TestSolver:
    @given(family=st.sampled_from(sorted(KERNELS)), n=st.integers(12, 120), p=st.integers(1, 3),
           log_lam=st.floats(-4, -1), seed=st.integers(0, 10_000))
    def test_matches_joint_kkt(self, family, n, p, log_lam, seed):
        kernel, lam = KERNELS[family], 10.0 ** log_lam
        data = make_data([n], p=p, seed=seed)
        fit = fit_subpopulation(data, kernel, lam)
        alpha, beta, null = kkt_solve(data, kernel, lam)
        assert np.max(np.abs(fit.beta_hat - beta)) < 1e-8
        assert np.max(np.abs(fit.dual_coeffs - alpha)) < 1e-8 * max(1.0, np.abs(alpha).max())
        np.testing.assert_allclose(fit.null_coeffs, null, atol=1e-8)

    def test_matches_primal_finite_rank(self):
        kernel = KERNELS["finite"]
        data = make_data([80], p=2, seed=4)
        fit = fit_subpopulation(data, kernel, 1e-3)
        beta, theta = primal_ridge(data, kernel, 1e-3, kernel.rank)
        np.testing.assert_allclose(fit.beta_hat, beta, atol=1e-10)
        np.testing.assert_allclose(fit.coef_modes, theta, atol=1e-10)

    def test_matches_primal_gaussian(self):
        kernel = KERNELS["gaussian"]
        data = make_data([60], p=1, seed=8)
        fit = fit_subpopulation(data, kernel, 1e-2)
        beta, theta = primal_ridge(data, kernel, 1e-2, len(fit.coef_modes))
        np.testing.assert_allclose(fit.beta_hat, beta, atol=1e-8)
        np.testing.assert_allclose(fit.coef_modes, theta, atol=1e-8)

    @pytest.mark.parametrize("family", sorted(KERNELS))
    def test_hat_trace_and_variance(self, family):
        kernel, lam = KERNELS[family], 3e-3
        data = make_data([40], p=2, seed=2)
        fit = fit_subpopulation(data, kernel, lam)
        # build the hat matrix column by column from unit responses
        cols = []
        for i in range(data.N):
            e = np.zeros(data.N)
            e[i] = 1.0
            f = fit_subpopulation(PLDataset(e, data.x, data.z, data.group), kernel, lam)
            cols.append(data.x @ f.beta_hat + f.f_hat(data.z))
        hat = np.column_stack(cols)
        assert fit.trace_hat == pytest.approx(np.trace(hat), abs=1e-8)
        resid = data.y - data.x @ fit.beta_hat - fit.f_hat(data.z)
        assert fit.sigma2_hat == pytest.approx(resid @ resid / (data.N - np.trace(hat)), rel=1e-9)

    @pytest.mark.parametrize("family", sorted(KERNELS))
    def test_residual_identity(self, family):
        kernel, lam = KERNELS[family], 1e-2
        data = make_data([50], p=1, seed=5)
        fit = fit_subpopulation(data, kernel, lam)
        resid = data.y - data.x @ fit.beta_hat - fit.f_hat(data.z)
        np.testing.assert_allclose(resid, data.N * lam * fit.dual_coeffs, atol=1e-10)

    def test_eigen_and_dual_forms_agree_off_sample(self):
        kernel = KERNELS["sobolev"]
        data = make_data([70], seed=6)
        fit = fit_subpopulation(data, kernel, 1e-4)
        z = np.linspace(-1, 1, 33)
        dual = es.gram(kernel, z, fit.anchors) @ fit.dual_coeffs + fit.null_coeffs[0]
        np.testing.assert_allclose(fit.f_hat(z), dual, atol=1e-10)

    def test_rkhs_norm_matches_dual_form(self):
        kernel = KERNELS["gaussian"]
        data = make_data([40], seed=3)
        fit = fit_subpopulation(data, kernel, 1e-2)
        g = es.gram(kernel, data.z, data.z)
        assert fit.rkhs_norm2() == pytest.approx(fit.dual_coeffs @ g @ fit.dual_coeffs, rel=1e-8)

    def test_rank_deficient(self):
        data = make_data([30], p=2, seed=1)
        x = data.x.copy()
        x[:, 1] = 2 * x[:, 0]
        with pytest.raises(RankDeficientError):
            fit_subpopulation(PLDataset(data.y, x, data.z, data.group), KERNELS["gaussian"], 1e-2)

    def test_constant_x_collides_with_sobolev_intercept(self):
        data = make_data([30], seed=1)
        x = np.ones((30, 1))
        with pytest.raises(RankDeficientError):
            fit_subpopulation(PLDataset(data.y, x, data.z, data.group), KERNELS["sobolev"], 1e-2)

    def test_small_dof_warns(self):
        data = make_data([4], seed=0)
        with pytest.warns(RuntimeWarning, match="sigma2_hat undefined"):
            fit = fit_subpopulation(data, KERNELS["sobolev"], 1e-12)
        assert np.isnan(fit.sigma2_hat)

    def test_degrees_of_freedom_error_type(self):
        assert issubclass(DegreesOfFreedomError, ValueError)

    def test_bad_inputs(self):
        data = make_data([3], p=2)
        with pytest.raises(ValueError):
            fit_subpopulation(data, KERNELS["gaussian"], 1e-2)
        with pytest.raises(ValueError):
            fit_subpopulation(make_data([20]), KERNELS["gaussian"], 0.0)


class TestDataset:
    def test_group_ids_positive(self):
        with pytest.raises(ValueError):
            PLDataset([1.0, 2.0], [[0.0], [1.0]], [0.1, 0.2], [0, 1])

    def test_shapes(self):
        d = PLDataset([1.0, 2.0, 3.0], [0.0, 1.0, 2.0], [0.1, 0.2, 0.3], [1, 1, 2])
        assert d.p == 1 and d.N == 3 and d.s == 2 and d.sizes == {1: 2, 2: 1}
        with pytest.raises(ValueError):
            PLDataset([1.0, 2.0], [[0.0], [1.0]], [0.1], [1, 1])

    def test_subset_unknown(self):
        with pytest.raises(KeyError):
            make_data([10]).subset(3)


class TestAggregation:
    def test_equal_weights_average(self):
        kernel = KERNELS["sobolev"]
        data = make_data([40, 50, 60], seed=9)
        model = fit_heterogeneous(data, kernel, 1e-3)
        z = np.linspace(-1, 1, 9)
        mean = np.mean([f.f_hat(z) for f in model.sub_fits], axis=0)
        np.testing.assert_allclose(model.f_bar(z), mean, atol=1e-12)

    def test_by_size_weights(self):
        kernel = KERNELS["gaussian"]
        data = make_data([20, 60], seed=9)
        model = fit_heterogeneous(data, kernel, 1e-2, weighting="by_size")
        np.testing.assert_allclose(model.weights, [0.25, 0.75])
        z = np.linspace(-1, 1, 5)
        ref = 0.25 * model.sub_fit(1).f_hat(z) + 0.75 * model.sub_fit(2).f_hat(z)
        np.testing.assert_allclose(model.f_bar(z), ref, atol=1e-12)

    @given(perm=st.permutations([0, 1, 2, 3]))
    def test_order_independent(self, perm):
        kernel = KERNELS["finite"]
        data = make_data([15, 16, 17, 18], seed=1)
        fits = [fit_subpopulation(data.subset(j), kernel, 1e-2) for j in (1, 2, 3, 4)]
        a = aggregate(fits)
        b = aggregate([fits[i] for i in perm])
        assert np.array_equal(a.coef_modes, b.coef_modes)
        assert a.sigma2_bar == b.sigma2_bar

    def test_mismatched_lambda(self):
        kernel = KERNELS["finite"]
        data = make_data([15, 15], seed=1)
        f1 = fit_subpopulation(data.subset(1), kernel, 1e-2)
        f2 = fit_subpopulation(data.subset(2), kernel, 1e-3)
        with pytest.raises(ValueError):
            aggregate([f1, f2])

    def test_unknown_weighting(self):
        data = make_data([15], seed=1)
        with pytest.raises(ValueError):
            aggregate([fit_subpopulation(data, KERNELS["finite"], 1e-2)], "median")

    def test_boost_is_least_squares(self):
        kernel = KERNELS["sobolev"]
        data = make_data([50, 50, 50], p=2, seed=11)
        model = fit_heterogeneous(data, kernel, 1e-4)
        for j in model.groups:
            sub = data.subset(j)
            ref, *_ = np.linalg.lstsq(sub.x, sub.y - model.f_bar(sub.z), rcond=None)
            np.testing.assert_allclose(model.beta_check[j], ref, atol=1e-10)

    def test_boost_rank_deficient(self):
        sub = PLDataset(np.ones(5), np.zeros((5, 1)), np.zeros(5), np.ones(5, dtype=int))
        with pytest.raises(RankDeficientError):
            boost_beta(sub, lambda z: np.zeros_like(z))

    def test_workers_bitwise_identical(self):
        kernel = KERNELS["sobolev"]
        data = make_data([30] * 6, seed=12)
        a = fit_heterogeneous(data, kernel, 1e-4, workers=1)
        b = fit_heterogeneous(data, kernel, 1e-4, workers=4)
        assert np.array_equal(a.coef_modes, b.coef_modes)
        assert all(np.array_equal(a.beta_check[j], b.beta_check[j]) for j in a.groups)

    def test_single_group_beta_bar(self):
        data = make_data([40], seed=13)
        model = fit_heterogeneous(data, KERNELS["gaussian"], 1e-2)
        assert np.array_equal(model.beta_bar(), model.sub_fit(1).beta_hat)

    def test_sigma_excludes_nan_groups(self):
        kernel = KERNELS["sobolev"]
        data = make_data([4, 200], seed=1)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            model = fit_heterogeneous(data, kernel, 1e-8, boosted=False)
        assert model.sigma2_bar == model.sub_fit(2).sigma2_hat

    def test_predict(self):
        data = make_data([40, 40], seed=14)
        model = fit_heterogeneous(data, KERNELS["sobolev"], 1e-4)
        x0, z0 = np.array([0.5]), 0.2
        raw = predict(model, 2, x0, z0)
        assert raw == pytest.approx(0.5 * model.sub_fit(2).beta_hat[0] + model.f_bar([z0])[0])
        assert predict(model, 2, x0, z0, boosted=True) == pytest.approx(
            0.5 * model.beta_check[2][0] + model.f_bar([z0])[0])
        with pytest.raises(KeyError):
            model.sub_fit(9)


class TestOracle:
    def test_known_betas_equal_pooled_fit(self):
        kernel = KERNELS["gaussian"]
        data = make_data([30, 30], seed=15)
        betas = {1: np.array([1.0]), 2: np.array([2.0])}
        orc = oracle_fit(data, kernel, 1e-2, betas)
        offset = data.x[:, 0] * np.where(data.group == 1, 1.0, 2.0)
        g = es.gram(kernel, data.z, data.z)
        alpha = np.linalg.solve(g + data.N * 1e-2 * np.eye(data.N), data.y - offset)
        np.testing.assert_allclose(orc(data.z), g @ alpha, atol=1e-10)

    def test_missing_group(self):
        data = make_data([30, 30], seed=15)
        with pytest.raises(KeyError):
            oracle_fit(data, KERNELS["gaussian"], 1e-2, {1: np.array([1.0])})
