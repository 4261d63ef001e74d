import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.special import ndtr, ndtri, owens_t

from qspec import (
    CoefficientCurve,
    CopulaCovTable,
    DegenerateCorrelationError,
    QuantileLevel,
    ReplicationError,
    StationaryFamilyModel,
    TriangularArrayModel,
    array_cov_table,
    array_cross_cov,
    bvn_cdf,
    gaussian_copula_indicator_cov,
    geometric_budget,
    indicator_cov_array,
    indicator_cov_mc,
    indicator_cov_stationary,
    simulate_ensemble,
    stationary_cov_table,
    summability_scan,
)
from qspec.copula import array_lag_indices

TWO_PI = 2.0 * math.pi


def bvn_owen_oracle(h, k, rho):
    """Independent reference: Owen (1956) T-function identity (h, k != 0)."""
    if h == 0.0 and k == 0.0:
        return 0.25 + math.asin(rho) / TWO_PI
    assert h != 0.0 and k != 0.0
    denom = math.sqrt(1.0 - rho * rho)
    ah = (k - rho * h) / (h * denom)
    ak = (h - rho * k) / (k * denom)
    delta = 0.0 if h * k > 0 else 0.5
    return 0.5 * (ndtr(h) + ndtr(k)) - float(owens_t(h, ah)) - float(owens_t(k, ak)) - delta


class TestQuantileLevel:
    @pytest.mark.parametrize("tau", [0.01, 0.25, 0.5, 0.99])
    def test_valid(self, tau):
        assert QuantileLevel(tau) == tau

    @pytest.mark.parametrize("tau", [0.0, 1.0, -0.1, 1.3])
    def test_endpoints_rejected(self, tau):
        with pytest.raises(ValueError):
            QuantileLevel(tau)

    @pytest.mark.parametrize("tau", [0.005, 0.995])
    def test_extremes_rejected(self, tau):
        with pytest.raises(ValueError):
            QuantileLevel(tau)


class TestBvnCdf:
    def test_independence_quadrant(self):
        assert bvn_cdf(0.0, 0.0, 0.0) == pytest.approx(0.25, abs=1e-15)

    def test_orthant_identity_at_half(self):
        # P(Z1<=0, Z2<=0) = 1/4 + asin(rho)/(2 pi) = 1/3 at rho = 0.5
        assert abs(bvn_cdf(0.0, 0.0, 0.5) - 1.0 / 3.0) < 1e-10

    @pytest.mark.parametrize("y,rho", [(1.3, 0.6), (-0.7, -0.9), (0.0, 0.25)])
    def test_marginal_limit(self, y, rho):
        assert abs(bvn_cdf(8.0, y, rho) - ndtr(y)) < 1e-10

    def test_against_owen_oracle(self):
        rng = np.random.default_rng(123)
        for rho in (-0.99, -0.9, -0.5, -0.1, 0.1, 0.3, 0.7, 0.925, 0.99):
            for _ in range(25):
                x, y = rng.uniform(-4, 4, size=2)
                assert abs(bvn_cdf(x, y, rho) - bvn_owen_oracle(x, y, rho)) < 1e-10

    def test_monte_carlo_cross_check(self):
        # 10^7 draws at the orthant example
        rng = np.random.default_rng(99)
        n = 10**7
        z1 = rng.standard_normal(n)
        z2 = 0.5 * z1 + math.sqrt(1 - 0.25) * rng.standard_normal(n)
        hits = ((z1 <= 0) & (z2 <= 0)).mean()
        se = math.sqrt(hits * (1 - hits) / n)
        assert abs(bvn_cdf(0.0, 0.0, 0.5) - hits) < 3 * se

    def test_broadcasts(self):
        x = np.array([-1.0, 0.0, 2.0])
        out = bvn_cdf(x, 0.5, 0.3)
        assert out.shape == (3,)
        for xi, oi in zip(x, out):
            assert oi == pytest.approx(bvn_cdf(float(xi), 0.5, 0.3), abs=1e-15)

    @pytest.mark.parametrize("rho", [1.0, -1.0, 1.5])
    def test_degenerate_correlation_rejected(self, rho):
        with pytest.raises(DegenerateCorrelationError):
            bvn_cdf(0.0, 0.0, rho)

    def test_monotone_in_rho(self):
        # indicator covariance is nondecreasing in rho for fixed taus
        for t1, t2 in [(0.5, 0.5), (0.25, 0.75), (0.1, 0.9), (0.9, 0.25)]:
            vals = [
                gaussian_copula_indicator_cov(r, t1, t2)
                for r in np.arange(-0.9, 0.91, 0.2)
            ]
            assert all(b >= a - 1e-13 for a, b in zip(vals, vals[1:]))


class TestStationaryKernel:
    def test_lag_zero_min_rule(self):
        fam = StationaryFamilyModel(u=0.5, a=0.37)
        assert indicator_cov_stationary(fam, 0, 0.3, 0.7) == pytest.approx(0.09, abs=1e-15)
        assert indicator_cov_stationary(fam, 0, 0.5, 0.5) == pytest.approx(0.25, abs=1e-15)

    def test_iid_any_lag_zero(self):
        fam = StationaryFamilyModel(u=0.5, a=0.0)
        for h in (1, 2, -5):
            assert abs(indicator_cov_stationary(fam, h, 0.25, 0.8)) < 1e-14

    def test_median_lag_one_orthant_value(self):
        fam = StationaryFamilyModel(u=0.5, a=0.5)
        got = indicator_cov_stationary(fam, 1, 0.5, 0.5)
        assert abs(got - 1.0 / 12.0) < 1e-10  # asin(0.5)/(2 pi)

    def test_time_reversal_symmetry(self):
        # gamma_h(tau1, tau2) == gamma_{-h}(tau2, tau1), strict stationarity
        fam = StationaryFamilyModel(u=0.3, a=-0.6)
        for h in (0, 1, 3, 7):
            for t1, t2 in [(0.2, 0.9), (0.5, 0.25), (0.75, 0.75)]:
                assert indicator_cov_stationary(fam, h, t1, t2) == pytest.approx(
                    indicator_cov_stationary(fam, -h, t2, t1), abs=1e-12
                )

    def test_range(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            fam = StationaryFamilyModel(u=0.5, a=rng.uniform(-0.95, 0.95))
            v = indicator_cov_stationary(
                fam, rng.integers(0, 10), rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.95)
            )
            assert -0.25 <= v <= 0.25


class TestArrayKernel:
    def test_floor_semantics(self):
        assert array_lag_indices(512, 0) == (512, 512)
        assert array_lag_indices(512, 2) == (513, 511)
        assert array_lag_indices(512, 3) == (513, 510)
        assert array_lag_indices(512, -3) == (510, 513)

    def test_lag_zero_bernoulli_variance(self, tv_model_1024):
        assert indicator_cov_array(tv_model_1024, 512, 0, 0.5, 0.5) == pytest.approx(0.25)
        # continuity of the marginals: min(tau1, tau2) - tau1 tau2 at lag 0
        assert indicator_cov_array(tv_model_1024, 512, 0, 0.3, 0.7) == pytest.approx(
            0.09, abs=1e-10
        )

    def test_iid_array_independence(self, iid_model):
        for s in (1, 2, -4):
            assert abs(indicator_cov_array(iid_model, 512, s, 0.4, 0.6)) < 1e-14

    def test_orthant_identity_from_exact_correlation(self, tv_model_1024):
        i1, i2 = array_lag_indices(512, 2)
        rho = array_cross_cov(tv_model_1024, i1, i2) / (
            tv_model_1024.marginal_sd(i1) * tv_model_1024.marginal_sd(i2)
        )
        expected = math.asin(rho) / TWO_PI
        got = indicator_cov_array(tv_model_1024, 512, 2, 0.5, 0.5)
        assert abs(got - expected) < 1e-10

    def test_monte_carlo_million_paths(self, tv_model_1024):
        # brute-force confirmation of the lag-2 median value over 10^6 paths
        i1, i2 = array_lag_indices(512, 2)
        ens = simulate_ensemble(tv_model_1024, 10**6, 31, t_start=i2, t_stop=i1)
        mc = indicator_cov_mc(ens, 512, 2, 0.5, 0.5)
        exact = indicator_cov_array(tv_model_1024, 512, 2, 0.5, 0.5)
        assert abs(mc.estimate - exact) < 3.0 * mc.se


class TestMonteCarloKernel:
    def test_iid_near_zero(self, iid_model):
        ens = simulate_ensemble(iid_model, 5000, 11, t_start=499, t_stop=501)
        mc = indicator_cov_mc(ens, 500, 1, 0.5, 0.5)
        assert abs(mc.estimate) < 3.0 * mc.se

    def test_constant_median_lag_one(self, const_model):
        ens = simulate_ensemble(const_model, 50000, 17, t_start=499, t_stop=501)
        mc = indicator_cov_mc(ens, 500, 1, 0.5, 0.5)
        assert abs(mc.estimate - 1.0 / 12.0) < 3.0 * mc.se

    def test_agreement_with_exact_kernel(self, tv_model_1024):
        rng = np.random.default_rng(314)
        ens = simulate_ensemble(tv_model_1024, 20000, 9)
        for _ in range(5):
            t0 = int(rng.integers(100, 900))
            s = int(rng.integers(-6, 7))
            t1 = float(rng.uniform(0.2, 0.8))
            t2 = float(rng.uniform(0.2, 0.8))
            mc = indicator_cov_mc(ens, t0, s, t1, t2)
            exact = indicator_cov_array(tv_model_1024, t0, s, t1, t2)
            assert abs(mc.estimate - exact) < 3.0 * mc.se

    def test_rank_mode_flagged(self, const_model):
        ens = simulate_ensemble(const_model, 2000, 3, t_start=499, t_stop=501)
        mc = indicator_cov_mc(ens, 500, 1, 0.5, 0.5, mode="rank")
        assert mc.mode == "rank"
        exact = indicator_cov_array(const_model, 500, 1, 0.5, 0.5)
        assert abs(mc.estimate - exact) < 4.0 * mc.se

    def test_too_few_replicates_refused(self, const_model):
        ens = simulate_ensemble(const_model, 999, 3, t_start=499, t_stop=501)
        with pytest.raises(ReplicationError):
            indicator_cov_mc(ens, 500, 1, 0.5, 0.5)


class TestTables:
    def test_stationary_table_lag0_diag(self, tv_model_1024):
        fam = tv_model_1024.family_at(0.5)
        table = stationary_cov_table(fam, 5, [(0.3, 0.3), (0.5, 0.5)])
        assert table.gamma(0, 0) == pytest.approx(0.3 * 0.7, abs=1e-10)
        assert table.gamma(0, 1) == pytest.approx(0.25, abs=1e-10)

    def test_values_in_range(self, tv_model_1024):
        table = array_cov_table(tv_model_1024, 512, 10, [(0.25, 0.75), (0.5, 0.5)])
        assert np.all(table.values >= -0.25) and np.all(table.values <= 0.25)

    def test_csv_round_trip(self, tv_model_1024):
        table = array_cov_table(tv_model_1024, 512, 6, [(0.25, 0.75), (0.5, 0.5)])
        text = table.to_csv()
        assert text.splitlines()[0] == "kind,u_or_t0,T,lag,tau1,tau2,gamma"
        back = CopulaCovTable.from_csv(text)
        assert back.kind == table.kind
        assert back.T == table.T
        assert np.array_equal(back.lags, table.lags)
        assert back.tau_pairs == table.tau_pairs
        assert np.array_equal(back.values, table.values)


class TestSummability:
    def test_iid_budget_is_lag_zero(self, iid_model):
        fam = iid_model.family_at(0.5)
        table = stationary_cov_table(fam, 10, [(0.5, 0.5)])
        budget = summability_scan(table)
        assert budget.K == pytest.approx(0.25, abs=1e-13)
        assert budget.H_used == 10

    def test_constant_below_conservative_bound(self, const_model):
        fam = const_model.family_at(0.5)
        table = stationary_cov_table(fam, 40, [(0.5, 0.5)])
        budget = summability_scan(table, sup_abs=0.5)
        # conservative geometric bound: 1/4 + 2 sum_h 0.5^h = 1.25
        assert budget.K < 0.25 + 2.0 * sum(0.5**h for h in range(1, 41))
        assert budget.K < 1.25
        assert budget.per_lag_certified

    def test_budget_monotone_in_H(self, tv_model_1024):
        fam = tv_model_1024.family_at(0.5)
        ks = [
            summability_scan(stationary_cov_table(fam, H, [(0.25, 0.75)])).K
            for H in (1, 5, 10, 20, 40)
        ]
        assert all(b >= a for a, b in zip(ks, ks[1:]))

    def test_geometric_budget_values(self):
        assert geometric_budget(0.0) == 0.25
        # sup_abs = 0.5: envelope below 1/4 from lag 2 on
        expected = 0.25 + 2 * 0.25 + 2 * 0.25 / 0.5
        assert geometric_budget(0.5, "stationary") == pytest.approx(expected)
        assert geometric_budget(0.7, "array") > geometric_budget(0.7, "stationary")
