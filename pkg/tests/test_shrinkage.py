import math

import numpy as np
import pytest

from hdportfolio import (
    GAMMA_INF,
    FrontierStats,
    EstimatedStats,
    IntensityDecomposition,
    ModelParams,
    NegativeVariance,
    OmegaAlpha,
    OmegaVariant,
    PortfolioWeights,
    ScenarioConfig,
    ZeroDenominator,
    ZeroDirection,
    bfgse_weights,
    build_model,
    estimated_intensity,
    estimated_stats,
    eu_weights,
    frontier_stats,
    gmv_intensity_variance,
    intensity_variance,
    limiting_intensity,
    omega_alpha,
    oracle_intensity,
    plugin_eu_weights,
    sample_moments,
    sample_returns,
    sensitivity_vectors,
)
from .conftest import random_spd


def null_consistent_target(model: ModelParams) -> PortfolioWeights:
    return PortfolioWeights(eu_weights(model).w)


def stats_from_frontier(fr: FrontierStats, c: float) -> EstimatedStats:
    """Population values dressed up as estimates (c_n = c)."""
    return EstimatedStats(r_gmv_hat=fr.r_gmv, v_gmv_hat=fr.v_gmv * (1 - c),
                          v_c_hat=fr.v_gmv, s_hat=(fr.s + c) / (1 - c),
                          s_c_hat=fr.s, r_b_hat=fr.r_b, v_b_hat=fr.v_b, c_n=c)


class TestOracleIntensity:
    def test_orthogonal_direction_gives_zero(self, rng):
        p = 6
        sigma = np.eye(p)
        mu = rng.normal(0, 0.2, p)
        gamma = 3.0
        b = PortfolioWeights.equally_weighted(p)
        grad = mu - gamma * sigma @ b.w
        v = rng.standard_normal(p)
        v -= v.sum() / p  # keep the direction budget-neutral
        v -= grad * (v @ grad) / (grad @ grad)
        v += grad * 0  # v orthogonal to grad, sums to ~0
        v -= np.ones(p) * v.sum() / p
        # re-orthogonalize after the sum fix
        v -= grad * (v @ grad) / (grad @ grad)
        w_hat = PortfolioWeights(b.w + 1e-3 * v / np.linalg.norm(v) +
                                 np.ones(p) * (1 - (b.w + 1e-3 * v / np.linalg.norm(v)).sum()) / p)
        delta = w_hat.w - b.w
        expected = float(delta @ grad) / (gamma * float(delta @ sigma @ delta))
        got = oracle_intensity(ModelParams(mu, sigma, gamma), w_hat, b)
        assert np.isclose(got, expected, atol=1e-12)

    def test_scaling_check(self, rng):
        # doubling (mu, sigma) doubles numerator and denominator separately,
        # leaving the intensity unchanged
        p = 5
        sigma = random_spd(p, rng)
        mu = rng.normal(0, 0.2, p)
        gamma = 4.0
        b = PortfolioWeights.equally_weighted(p)
        w_hat = PortfolioWeights(b.w + np.array([0.1, -0.05, 0.0, -0.03, -0.02]))
        a1 = oracle_intensity(ModelParams(mu, sigma, gamma), w_hat, b)
        a2 = oracle_intensity(ModelParams(2 * mu, 2 * sigma, gamma), w_hat, b)
        assert np.isclose(a1, a2, rtol=1e-12)
        delta = w_hat.w - b.w
        num1 = delta @ (mu - gamma * sigma @ b.w)
        num2 = delta @ (2 * mu - gamma * 2 * sigma @ b.w)
        assert np.isclose(num2, 2 * num1, rtol=1e-12)

    def test_matches_direct_evaluation(self, rng):
        cfg = ScenarioConfig(p=50, c=0.2, replications=100, seed=14)
        model = build_model(cfg)
        x = sample_returns(model, 250, rng)
        w_hat = plugin_eu_weights(sample_moments(x), model.gamma)
        b = PortfolioWeights.equally_weighted(50)
        delta = w_hat.w - b.w
        direct = (delta @ (model.mu - model.gamma * model.sigma @ b.w)) \
            / (model.gamma * (delta @ model.sigma @ delta))
        assert np.isclose(oracle_intensity(model, w_hat, b), direct, atol=1e-12)

    def test_zero_direction(self, small_model, equal_target):
        with pytest.raises(ZeroDirection):
            oracle_intensity(small_model, PortfolioWeights(equal_target.w), equal_target)

    def test_tracks_limiting_intensity(self):
        # the oracle intensity converges to the deterministic limit
        cfg = ScenarioConfig(p=100, c=0.3, replications=100, seed=6)
        model = build_model(cfg)
        b = PortfolioWeights.equally_weighted(cfg.p)
        target = limiting_intensity(frontier_stats(model, b), model.gamma, cfg.c_n).alpha
        rng = np.random.default_rng(60)
        vals = []
        for _ in range(200):
            x = sample_returns(model, cfg.n, rng)
            w_hat = plugin_eu_weights(sample_moments(x), model.gamma)
            vals.append(oracle_intensity(model, w_hat, b))
        err = abs(np.mean(vals) - target)
        se = np.std(vals, ddof=1) / math.sqrt(len(vals))
        assert err < max(5 * se, 0.02)

    def test_classical_limit_is_one(self):
        # with p fixed and n large the sample weights are nearly exact and
        # the optimal combination puts all weight on them
        cfg = ScenarioConfig(p=10, c=0.01, replications=100, seed=15)
        model = build_model(cfg)
        b = PortfolioWeights.equally_weighted(10)
        rng = np.random.default_rng(16)
        vals = []
        for _ in range(50):
            x = sample_returns(model, 5000, rng)
            w_hat = plugin_eu_weights(sample_moments(x), model.gamma)
            vals.append(oracle_intensity(model, w_hat, b))
        assert abs(np.mean(vals) - 1.0) < 0.05


class TestLimitingIntensity:
    def test_null_configuration_zero_numerator(self, small_model):
        w0 = null_consistent_target(small_model)
        fr = frontier_stats(small_model, w0)
        for c in (0.1, 0.3, 0.8):
            decomp = limiting_intensity(fr, small_model.gamma, c)
            assert abs(decomp.a_num) < 1e-12
            assert abs(decomp.alpha) < 1e-12

    def test_null_configuration_degenerate_at_zero_c(self, small_model):
        # with the target equal to the optimal weights and no dimension
        # penalty there is no shrinkage direction left: the denominator
        # vanishes identically and is refused
        w0 = null_consistent_target(small_model)
        fr = frontier_stats(small_model, w0)
        with pytest.raises(ZeroDenominator):
            limiting_intensity(fr, small_model.gamma, 0.0)

    def test_gmv_equal_variance_zero(self):
        fr = FrontierStats(r_gmv=0.1, v_gmv=2.0, s=0.5, r_b=0.2, v_b=2.0)
        for c in (0.2, 0.5, 0.9):
            assert limiting_intensity(fr, GAMMA_INF, c).alpha == 0.0

    def test_gmv_arithmetic(self):
        # unit minimum variance, doubled target variance, c = 1/2
        fr = FrontierStats(r_gmv=0.0, v_gmv=1.0, s=0.0, r_b=0.0, v_b=2.0)
        assert np.isclose(limiting_intensity(fr, GAMMA_INF, 0.5).alpha, 0.5)

    def test_gmv_matches_general_limit(self, small_model, equal_target):
        # the closed-form branch equals the large-gamma limit of the
        # general ratio
        fr = frontier_stats(small_model, equal_target)
        closed = limiting_intensity(fr, GAMMA_INF, 0.4).alpha
        numeric = limiting_intensity(fr, 1e9, 0.4).alpha
        assert np.isclose(closed, numeric, rtol=1e-6)

    def test_classical_limit_is_one(self, small_model, equal_target):
        fr = frontier_stats(small_model, equal_target)
        assert np.isclose(limiting_intensity(fr, small_model.gamma, 0.0).alpha, 1.0,
                          rtol=1e-12)

    def test_zero_denominator_raises(self):
        with pytest.raises(ZeroDenominator):
            IntensityDecomposition(a_num=1.0, b_den=0.0)


class TestEstimatedIntensity:
    def test_population_inputs_reproduce_limit(self, small_model, equal_target):
        fr = frontier_stats(small_model, equal_target)
        for c in (0.0, 0.25, 0.6):
            est = stats_from_frontier(fr, c)
            a = estimated_intensity(est, small_model.gamma, c)
            b = limiting_intensity(fr, small_model.gamma, c)
            assert a.a_num == b.a_num
            assert a.b_den == b.b_den

    def test_null_configuration_exact_zero(self, small_model):
        w0 = null_consistent_target(small_model)
        fr = frontier_stats(small_model, w0)
        est = stats_from_frontier(fr, 0.3)
        assert abs(estimated_intensity(est, small_model.gamma, 0.3).a_num) < 1e-14

    def test_converges_with_rate(self):
        # root-mean-square error halves when n quadruples (slope -1/2)
        p = 64
        cfg = ScenarioConfig(p=p, c=0.5, replications=100, seed=71)
        model = build_model(cfg)
        b = PortfolioWeights.equally_weighted(p)
        fr = frontier_stats(model, b)
        rng = np.random.default_rng(72)
        sizes = [2 * p, 4 * p, 8 * p]
        rmse = []
        for n in sizes:
            errs = []
            target = limiting_intensity(fr, model.gamma, p / n).alpha
            for _ in range(150):
                x = sample_returns(model, n, rng)
                est = estimated_stats(sample_moments(x), b)
                errs.append(estimated_intensity(est, model.gamma).alpha - target)
            rmse.append(float(np.sqrt(np.mean(np.square(errs)))))
        slope = np.polyfit(np.log(sizes), np.log(rmse), 1)[0]
        assert -0.8 < slope < -0.2


class TestBfgseWeights:
    def test_endpoints(self, small_model, equal_target, rng):
        x = sample_returns(small_model, 40, rng)
        w_hat = plugin_eu_weights(sample_moments(x), small_model.gamma)
        assert np.array_equal(bfgse_weights(w_hat, equal_target, 0.0).w, equal_target.w)
        assert np.array_equal(bfgse_weights(w_hat, equal_target, 1.0).w, w_hat.w)

    def test_midpoint(self):
        a = PortfolioWeights(np.array([1.0, 0.0]))
        b = PortfolioWeights(np.array([0.0, 1.0]))
        assert np.allclose(bfgse_weights(a, b, 0.5).w, [0.5, 0.5])

    def test_sum_preserved_outside_unit_interval(self, small_model, equal_target, rng):
        x = sample_returns(small_model, 40, rng)
        w_hat = plugin_eu_weights(sample_moments(x), small_model.gamma)
        w = bfgse_weights(w_hat, equal_target, 1.7)
        assert abs(w.w.sum() - 1.0) < 1e-10


class TestSensitivityVectors:
    def test_null_gradient_at_zero_ratio(self):
        decomp = IntensityDecomposition(a_num=0.0, b_den=2.0)
        sens = sensitivity_vectors(decomp, gamma=5.0, c_n=0.3)
        assert np.array_equal(sens.d, sens.d0)

    def test_classical_null_values(self):
        decomp = IntensityDecomposition(a_num=0.0, b_den=1.0)
        sens = sensitivity_vectors(decomp, gamma=2.0, c_n=0.0)
        assert np.allclose(sens.d0, [2.0, -2.0, 0.5, -2.0, 2.0])
        # generic gamma check of the pattern (2, -g, 1/g, -2, g)
        sens5 = sensitivity_vectors(decomp, gamma=5.0, c_n=0.0)
        assert np.allclose(sens5.d0, [2.0, -5.0, 0.2, -2.0, 5.0])

    def test_hand_worked_entries(self):
        decomp = IntensityDecomposition(a_num=0.0, b_den=1.0)
        sens = sensitivity_vectors(decomp, gamma=5.0, c_n=0.3)
        expected = [1 + 1 / 0.7, -5.0, 0.2 / 0.7, -1 - 1 / 0.7, 5.0]
        assert np.allclose(sens.d0, expected)

    def test_finite_difference_gradient(self, small_model, equal_target):
        # d matches numerical differentiation of the ratio in the five stats
        fr = frontier_stats(small_model, equal_target)
        gamma, c = small_model.gamma, 0.35
        base = np.array([fr.r_gmv, fr.v_gmv, fr.s, fr.r_b, fr.v_b])

        def ratio(v):
            fs = FrontierStats(r_gmv=v[0], v_gmv=v[1], s=v[2], r_b=v[3], v_b=v[4])
            d = limiting_intensity(fs, gamma, c)
            return d.a_num / d.b_den

        decomp = limiting_intensity(fr, gamma, c)
        sens = sensitivity_vectors(decomp, gamma, c)
        eps = 1e-6
        for i in range(5):
            up, dn = base.copy(), base.copy()
            up[i] += eps
            dn[i] -= eps
            fd = (ratio(up) - ratio(dn)) / (2 * eps)
            # d is the gradient of A - (A/B) B, i.e. B * dalpha
            assert np.isclose(sens.d[i], fd * decomp.b_den, rtol=5e-5, atol=1e-8)

    def test_requires_finite_gamma(self):
        decomp = IntensityDecomposition(a_num=0.0, b_den=1.0)
        with pytest.raises(ValueError):
            sensitivity_vectors(decomp, GAMMA_INF, 0.3)


class TestOmegaAlpha:
    def test_zero_pattern_all_variants(self, small_model, equal_target, rng):
        fr = frontier_stats(small_model, equal_target)
        x = sample_returns(small_model, 60, rng)
        est = estimated_stats(sample_moments(x), equal_target)
        mats = [
            omega_alpha(fr, 0.3, OmegaVariant.POPULATION).omega,
            omega_alpha(est, est.c_n, OmegaVariant.HAT).omega,
            omega_alpha(est, est.c_n, OmegaVariant.TILDE, gamma=5.0).omega,
        ]
        for om in mats:
            assert np.array_equal(om, om.T)
            for i, j in ((0, 1), (0, 2), (1, 2), (1, 3), (3, 4)):
                assert om[i, j] == 0.0

    def test_degenerate_entry_vanishes(self):
        # zero concentration, zero slope, matched returns: the slope-error
        # variance entry collapses to zero
        fr = FrontierStats(r_gmv=0.1, v_gmv=1.0, s=0.0, r_b=0.1, v_b=1.0)
        om = omega_alpha(fr, 0.0, OmegaVariant.POPULATION).omega
        assert om[2, 2] == 0.0

    def test_tilde_requires_gamma(self, small_model, equal_target, rng):
        x = sample_returns(small_model, 60, rng)
        est = estimated_stats(sample_moments(x), equal_target)
        with pytest.raises(ValueError):
            omega_alpha(est, est.c_n, OmegaVariant.TILDE)

    def test_variant_type_checks(self, small_model, equal_target):
        fr = frontier_stats(small_model, equal_target)
        with pytest.raises(TypeError):
            omega_alpha(fr, 0.3, OmegaVariant.HAT)


class TestIntensityVariance:
    def test_zero_matrix(self):
        decomp = IntensityDecomposition(a_num=0.0, b_den=2.0)
        sens = sensitivity_vectors(decomp, 5.0, 0.2)
        om = OmegaAlpha(np.zeros((5, 5)), OmegaVariant.POPULATION)
        assert intensity_variance(decomp, sens, om) == 0.0

    def test_basis_vector(self):
        from hdportfolio import SensitivityVector
        decomp = IntensityDecomposition(a_num=0.0, b_den=2.0)
        e1 = np.array([1.0, 0, 0, 0, 0])
        sens = SensitivityVector(d=e1, d0=e1, c_n=0.0, gamma=5.0)
        om = np.zeros((5, 5))
        om[0, 0] = 9.0
        assert intensity_variance(decomp, sens, OmegaAlpha(om, OmegaVariant.POPULATION)) \
            == pytest.approx(9.0 / 4.0)

    def test_negative_variance_raises(self):
        decomp = IntensityDecomposition(a_num=0.0, b_den=1.0)
        sens = sensitivity_vectors(decomp, 5.0, 0.0)
        om = -np.eye(5)
        with pytest.raises(NegativeVariance):
            intensity_variance(decomp, sens, OmegaAlpha(om, OmegaVariant.POPULATION))


class TestGmvVariance:
    def test_requires_explicit_reading(self, small_model, equal_target):
        fr = frontier_stats(small_model, equal_target)
        with pytest.raises(TypeError):
            gmv_intensity_variance(fr, 0.3)  # denominator is keyword-only
        with pytest.raises(ValueError):
            gmv_intensity_variance(fr, 0.3, denominator="nope")

    def test_readings_coincide_when_quantities_match(self):
        # if r_b numerically equals the excess variance ratio the readings agree
        fr = FrontierStats(r_gmv=0.0, v_gmv=1.0, s=0.0, r_b=1.5, v_b=2.5)
        a = gmv_intensity_variance(fr, 0.4, denominator="variance_ratio")
        b = gmv_intensity_variance(fr, 0.4, denominator="mean_return")
        assert np.isclose(a, b)

    def test_variance_ratio_reading_matches_general_limit(self, small_model, equal_target):
        # the general asymptotic variance evaluated at huge risk aversion
        # converges to the closed form with the variance-ratio denominator
        fr = frontier_stats(small_model, equal_target)
        c = 0.45
        gamma = 1e7
        decomp = limiting_intensity(fr, gamma, c)
        sens = sensitivity_vectors(decomp, gamma, c)
        om = omega_alpha(fr, c, OmegaVariant.POPULATION)
        general = intensity_variance(decomp, sens, om)
        closed = gmv_intensity_variance(fr, c, denominator="variance_ratio")
        assert np.isclose(general, closed, rtol=1e-5)


class TestEndToEndImprovement:
    def test_shrunk_weights_dominate_plugin_utility(self):
        # the point of the whole pipeline: at a substantial concentration
        # the data-driven combination recovers most of the utility the raw
        # plug-in weights throw away
        cfg = ScenarioConfig(p=100, c=0.5, replications=100, seed=55)
        model = build_model(cfg)
        b = PortfolioWeights.equally_weighted(cfg.p)
        gamma = model.gamma

        def utility(w):
            return float(w @ model.mu - 0.5 * gamma * w @ model.sigma @ w)

        truth = utility(eu_weights(model).w)
        rng = np.random.default_rng(56)
        u_plug, u_shrunk = [], []
        for _ in range(150):
            x = sample_returns(model, cfg.n, rng)
            m = sample_moments(x)
            w_hat = plugin_eu_weights(m, gamma)
            est = estimated_stats(m, b)
            alpha = estimated_intensity(est, gamma).alpha
            w_s = bfgse_weights(w_hat, b, alpha)
            u_plug.append(utility(w_hat.w))
            u_shrunk.append(utility(w_s.w))
        wins = np.mean(np.array(u_shrunk) > np.array(u_plug))
        assert wins >= 0.95
        assert np.mean(u_shrunk) > np.mean(u_plug)
        assert truth >= np.mean(u_shrunk)  # oracle stays on top
