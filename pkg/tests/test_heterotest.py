from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from conftest import make_data
from hetkrr import heterotest as ht
from hetkrr import simharness as sh
from hetkrr.asymptotics import AsymptoticQuantities
from hetkrr.heterotest import PairwiseTestSpec, SimulTestSpec
from hetkrr.plkrr import PLDataset, RankDeficientError, fit_heterogeneous

SOB = sh.sobolev_kernel()
DGP_Q = AsymptoticQuantities([[sh.OMEGA]], [[sh.SIGMA_XX]], np.zeros((1, 3)))


def fitted(n_per_group, betas=None, seed=0, lam=1e-3):
    data = make_data(n_per_group, betas=betas, seed=seed)
    return data, fit_heterogeneous(data, SOB, lam)


class TestPairwiseSpec:
    def test_validation(self):
        with pytest.raises(ValueError):
            PairwiseTestSpec((1, 1))
        with pytest.raises(ValueError):
            PairwiseTestSpec((1, 2), alpha=1.0)
        with pytest.raises(ValueError):
            PairwiseTestSpec((1, 2), contrast=[[1.0, 1.0], [2.0, 2.0]])
        with pytest.raises(ValueError):
            PairwiseTestSpec((1, 2), contrast=[[1.0, 0.0]]).contrast_for(3)


class TestWald:
    def test_identical_groups_give_zero(self):
        data = make_data([80], seed=3)
        twin = PLDataset(np.concatenate([data.y, data.y]), np.vstack([data.x, data.x]),
                         np.concatenate([data.z, data.z]), np.repeat([1, 2], 80))
        model = fit_heterogeneous(twin, SOB, 1e-3)
        rep = ht.wald_pairwise(model, PairwiseTestSpec((1, 2)), DGP_Q)
        assert rep.statistic == 0.0 and not rep.reject

    def test_scalar_region_formula(self):
        _, model = fitted([100, 100], betas=[[1.0], [1.2]])
        s2 = 0.09
        rep = ht.wald_pairwise(model, PairwiseTestSpec((1, 2)), DGP_Q, sigma2=s2)
        diff = model.sub_fit(1).beta_hat[0] - model.sub_fit(2).beta_hat[0]
        thresh = math.sqrt(2 * s2) * math.sqrt(1 / sh.OMEGA) * stats.norm.ppf(0.975) / math.sqrt(100)
        assert rep.reject == (abs(diff) > thresh)
        assert rep.details["acceptance_half_width"] == pytest.approx(thresh, rel=1e-12)
        assert rep.rule == "psi1:chi2_ellipsoid"
        assert rep.critical_value == pytest.approx(stats.norm.ppf(0.975) ** 2)

    def test_unequal_sizes_use_harmonic_n(self):
        _, model = fitted([60, 140])
        rep = ht.wald_pairwise(model, PairwiseTestSpec((1, 2)), DGP_Q, sigma2=0.09)
        assert rep.details["n"] == pytest.approx(2 / (1 / 60 + 1 / 140))
        assert rep.details["harmonic_n"]

    def test_boosted_rule_label(self):
        _, model = fitted([100, 100])
        rep = ht.wald_pairwise(model, PairwiseTestSpec((1, 2), estimator="boosted"), DGP_Q)
        assert rep.rule.startswith("psi2")

    def test_bad_sigma(self):
        _, model = fitted([50, 50])
        with pytest.raises(ValueError):
            ht.wald_pairwise(model, PairwiseTestSpec((1, 2)), DGP_Q, sigma2=-1.0)

    def test_multivariate_contrast(self):
        data = make_data([120, 120], p=2, seed=4, betas=[[1.0, 2.0], [1.0, 2.0]])
        model = fit_heterogeneous(data, SOB, 1e-3)
        q = AsymptoticQuantities(np.eye(2), np.eye(2) * 1.1, np.zeros((2, 3)))
        rep = ht.wald_pairwise(model, PairwiseTestSpec((1, 2)), q, sigma2=0.09)
        assert rep.critical_value == pytest.approx(stats.chi2.ppf(0.95, 2))
        assert rep.contributions.shape == (2,)

    def test_psi2_interval_strictly_shorter(self):
        w1 = ht.acceptance_half_width(DGP_Q, "raw", 1.0, 256)
        w2 = ht.acceptance_half_width(DGP_Q, "boosted", 1.0, 256)
        assert w2 < w1
        assert w2 / w1 == pytest.approx(math.sqrt(0.5), rel=1e-12)


class TestPowerCurve:
    spec1 = PairwiseTestSpec((1, 2))
    spec2 = PairwiseTestSpec((1, 2), estimator="boosted")

    def test_size(self):
        assert ht.power_curve(self.spec1, DGP_Q, 256, [0.0])[0][1] == pytest.approx(0.05, abs=1e-12)

    def test_large_shift(self):
        assert ht.power_curve(self.spec1, DGP_Q, 256, [50.0])[0][1] == pytest.approx(1.0)

    def test_sigma_star_ratio(self):
        # Psi2 at shift d matches Psi1 at shift d / 0.7071
        d = 0.1
        p2 = ht.power_curve(self.spec2, DGP_Q, 256, [d])[0][1]
        p1 = ht.power_curve(self.spec1, DGP_Q, 256, [d / math.sqrt(0.5)])[0][1]
        assert p1 == pytest.approx(p2, rel=1e-12)

    @given(st.floats(0.0, 3.0), st.integers(10, 5000))
    def test_psi2_dominates(self, d, n):
        p1 = ht.power_curve(self.spec1, DGP_Q, n, [d])[0][1]
        p2 = ht.power_curve(self.spec2, DGP_Q, n, [d])[0][1]
        assert p2 >= p1 - 1e-12

    def test_multirow_rejected(self):
        q = AsymptoticQuantities(np.eye(2), np.eye(2), np.zeros((2, 3)))
        with pytest.raises(ValueError):
            ht.power_curve(PairwiseTestSpec((1, 2)), q, 100, [0.1])


class TestSimulSpec:
    def test_bootstrap_reps(self):
        with pytest.raises(ValueError):
            SimulTestSpec((1,), {1: [0.0]}, bootstrap_reps=50)
        with pytest.raises(ValueError):
            SimulTestSpec((1,), {1: [0.0]}, alpha=0.001, bootstrap_reps=1000)

    def test_needs_nulls(self):
        with pytest.raises(ValueError):
            SimulTestSpec((1, 2))
        with pytest.raises(ValueError):
            SimulTestSpec((1,), adjacent_diff=True)


class TestBootstrap:
    def setup_method(self):
        self.data, self.model = fitted([100] * 4, betas=[[1.0]] * 4, seed=11)
        self.nulls = {j: [1.0] for j in range(1, 5)}

    def test_deterministic(self):
        spec = SimulTestSpec((1, 2, 3, 4), self.nulls, bootstrap_reps=200)
        a = ht.bootstrap_simultaneous(self.model, self.data, spec, seed=5)
        b = ht.bootstrap_simultaneous(self.model, self.data, spec, seed=5)
        assert np.array_equal(a.draws, b.draws) and a.critical_value == b.critical_value

    def test_critical_value_monotone_in_alpha(self):
        crits = [ht.bootstrap_simultaneous(self.model, self.data,
                                           SimulTestSpec((1, 2, 3, 4), self.nulls, alpha=a,
                                                         bootstrap_reps=400), seed=1).critical_value
                 for a in (0.01, 0.05, 0.1, 0.2)]
        assert all(x >= y for x, y in zip(crits, crits[1:]))

    def test_report_shape(self):
        spec = SimulTestSpec((1, 2, 3, 4), self.nulls, bootstrap_reps=100)
        rep = ht.bootstrap_simultaneous(self.model, self.data, spec, seed=2)
        assert rep.draws.shape == (100,)
        assert rep.details["d"] == 4

    def test_constant_draws(self):
        assert ht.bootstrap_quantile(np.full(100, 2.5), 0.05) == 2.5

    def test_quantile_order_statistic(self):
        draws = np.arange(1.0, 101.0)
        assert ht.bootstrap_quantile(draws[::-1], 0.05) == 95.0
        assert ht.bootstrap_quantile(draws, 0.1) == 90.0

    def test_scalar_oracle_agreement(self):
        data, model = fitted([400], betas=[[1.0]], seed=8)
        spec = SimulTestSpec((1,), {1: [1.0]}, bootstrap_reps=20000)
        rep = ht.bootstrap_simultaneous(model, data, spec, sigma2=0.09, seed=3)
        oracle = ht.scalar_oracle_quantile(data.x, 0.09)
        assert rep.critical_value == pytest.approx(oracle, rel=0.03)

    def test_two_sided_and_adjacent(self):
        one = ht.bootstrap_simultaneous(self.model, self.data,
                                        SimulTestSpec((1, 2, 3, 4), self.nulls), seed=4)
        two = ht.bootstrap_simultaneous(self.model, self.data,
                                        SimulTestSpec((1, 2, 3, 4), self.nulls, two_sided=True), seed=4)
        assert two.critical_value > one.critical_value
        assert two.rule == "two_sided_max_abs" and one.rule == "one_sided_max"
        adj = ht.bootstrap_simultaneous(self.model, self.data,
                                        SimulTestSpec((1, 2, 3, 4), adjacent_diff=True), seed=4)
        assert adj.rule.startswith("adjacent_diff")
        assert adj.contributions.shape[0] == 3
        b = self.model.beta_check
        expected = math.sqrt(100) * (b[1] - b[2])
        assert adj.contributions[0] == pytest.approx(expected)

    def test_unknown_group(self):
        with pytest.raises(KeyError):
            ht.bootstrap_simultaneous(self.model, self.data,
                                      SimulTestSpec((1, 9), {1: [1.0], 9: [1.0]}))

    def test_singular_sigma_hat(self):
        data = make_data([60, 60], seed=2)
        x = data.x.copy()
        x[:60] = 0.0
        bad = PLDataset(data.y, x, data.z, data.group)
        model = fit_heterogeneous(data, SOB, 1e-3)
        with pytest.raises(RankDeficientError):
            ht.bootstrap_simultaneous(model, bad, SimulTestSpec((1, 2), {1: [1.0], 2: [2.0]}))

    def test_write_draws(self, tmp_path):
        rep = ht.bootstrap_simultaneous(self.model, self.data,
                                        SimulTestSpec((1, 2), {1: [1.0], 2: [1.0]}, bootstrap_reps=100))
        path = tmp_path / "draws.csv"
        rep.write_draws(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "b,draw" and len(lines) == 101
