import math

import numpy as np
import pytest

from garchxtest.model import (
    Dataset,
    ParameterError,
    ParamSpace,
    ThetaPoint,
    TrueConfig,
    c_hat,
    dh_dpsi,
    h_path,
    neg_loglik,
    simulate_dgp,
    simulate_paths,
    tau_vector,
)


def brute_force_h(theta, data):
    """Closed-form h_t = zeta + beta1*sum_i pi^i y^2 + beta2*sum_i pi^i x^2,
    evaluated by direct O(n^2) summation; independent of the recursion code."""
    w, v = data.lagged_squares()
    n = data.n
    out = np.empty(n)
    for t in range(1, n + 1):
        sy = sum(theta.pi**i * w[t - 1 - i] for i in range(t))
        sx = sum(theta.pi**i * v[t - 1 - i] for i in range(t))
        out[t - 1] = theta.zeta + theta.beta1 * sy + theta.beta2 * sx
    return out


class TestParameterDomains:
    def test_theta_rejects_negative_beta(self):
        with pytest.raises(ParameterError):
            ThetaPoint(-0.1, 0.0, 1.0, 0.0)

    def test_theta_rejects_pi_one(self):
        with pytest.raises(ParameterError):
            ThetaPoint(0.0, 0.0, 1.0, 1.0)

    def test_space_rejects_bad_zeta_interval(self):
        with pytest.raises(ParameterError):
            ParamSpace(zeta_min=2.0, zeta_max=1.0)

    def test_config_rejects_unit_root_covariate(self):
        with pytest.raises(ParameterError):
            TrueConfig(ThetaPoint(0.0, 0.0, 1.0, 0.0), varphi=1.0)

    def test_config_rejects_bad_kappa(self):
        with pytest.raises(ParameterError):
            TrueConfig(ThetaPoint(0.0, 0.0, 1.0, 0.0), kappa=1.5)


class TestSimulateDgp:
    def test_unit_variance_when_betas_zero(self):
        # y_t = z_t exactly, so the sample variance estimates 1
        cfg = TrueConfig(ThetaPoint(0.0, 0.0, 1.0, 0.3), varphi=0.0, kappa=0.0)
        data = simulate_dgp(cfg, 100_000, seed=11)
        var = data.y.var()
        se = math.sqrt(2.0 / data.n)  # var of the sample variance of iid N(0,1)
        assert abs(var - 1.0) < 3.0 * se

    def test_ar1_covariate_variance(self):
        # stationary AR(1) variance 1/(1-phi^2); oracle = replicated sample moments
        cfg = TrueConfig(ThetaPoint(0.0, 0.0, 1.0, 0.0), varphi=0.5, kappa=0.0)
        target = 1.0 / (1.0 - 0.25)
        vars_ = [simulate_dgp(cfg, 20_000, seed=900 + r).x.var() for r in range(30)]
        mean = np.mean(vars_)
        se = np.std(vars_, ddof=1) / math.sqrt(len(vars_))
        assert abs(mean - target) < 3.0 * se

    def test_innovation_correlation(self):
        cfg = TrueConfig(ThetaPoint(0.0, 0.0, 1.0, 0.0), varphi=0.0, kappa=0.99)
        rng = np.random.default_rng(5)
        z, _, x = simulate_paths(cfg, 50_000, 1, rng)
        eps = x[0]  # with phi = 0, x_t equals its innovation
        corr = np.corrcoef(z[0], eps)[0, 1]
        assert abs(corr - 0.99) < 0.005

    def test_deterministic_given_seed(self, null_dgp):
        a = simulate_dgp(null_dgp, 200, seed=42)
        b = simulate_dgp(null_dgp, 200, seed=42)
        assert np.array_equal(a.y, b.y) and np.array_equal(a.x, b.x)
        assert (a.y0, a.x0) == (b.y0, b.x0)

    def test_invalid_sizes_raise(self, null_dgp):
        with pytest.raises(ParameterError):
            simulate_dgp(null_dgp, 0)
        with pytest.raises(ParameterError):
            simulate_dgp(null_dgp, 10, burn_in=-1)


class TestHPath:
    def test_constant_when_betas_zero(self, small_data):
        theta = ThetaPoint(0.0, 0.0, 1.7, 0.4)
        assert np.all(h_path(theta, small_data) == 1.7)

    def test_worked_first_step(self):
        # zeta=1, pi=0.5, beta1=0.2, beta2=0.1, y0^2=4, x0^2=1 -> h_1 = 1.9
        data = Dataset(y=np.array([0.3]), x=np.array([0.1]), y0=2.0, x0=1.0)
        theta = ThetaPoint(0.2, 0.1, 1.0, 0.5)
        assert h_path(theta, data)[0] == pytest.approx(1.9, abs=1e-14)

    def test_recursion_matches_closed_form(self, small_data):
        theta = ThetaPoint(0.25, 0.1, 0.8, 0.6)
        h = h_path(theta, small_data)
        ref = brute_force_h(theta, small_data)
        assert np.max(np.abs(h - ref) / ref) < 1e-12

    def test_recursion_matches_closed_form_over_random_space(self, small_data):
        rng = np.random.default_rng(3)
        space = ParamSpace()
        for _ in range(100):
            theta = ThetaPoint(
                rng.uniform(0, space.beta1_max),
                rng.uniform(0, space.beta2_max),
                rng.uniform(space.zeta_min, space.zeta_max),
                rng.uniform(0, space.pi_max),
            )
            h = h_path(theta, small_data)
            ref = brute_force_h(theta, small_data)
            assert np.max(np.abs(h - ref) / ref) < 1e-12

    def test_lower_bound_zeta(self, small_data):
        theta = ThetaPoint(0.4, 0.3, 0.05, 0.9)
        assert np.all(h_path(theta, small_data) >= 0.05)


class TestNegLoglik:
    def test_closed_form_at_beta_zero(self, small_data):
        zeta = 1.3
        q = neg_loglik(ThetaPoint(0.0, 0.0, zeta, 0.5), small_data)
        expected = (
            0.5 * math.log(2.0 * math.pi)
            + 0.5 * math.log(zeta)
            + float(np.mean(small_data.y**2)) / (2.0 * zeta)
        )
        assert q == pytest.approx(expected, abs=1e-14)

    def test_invariant_to_pi_at_beta_zero(self, small_data):
        vals = [neg_loglik(ThetaPoint(0.0, 0.0, 1.1, pi), small_data) for pi in np.arange(0, 0.9, 0.07)]
        assert max(vals) == min(vals)

    def test_truth_beats_perturbation_on_average(self, garch_dgp):
        at_truth, perturbed = [], []
        bumped = ThetaPoint(0.3, 0.0, 1.5, 0.2)
        for r in range(100):
            data = simulate_dgp(garch_dgp, 2_000, seed=3_000 + r)
            at_truth.append(neg_loglik(garch_dgp.theta, data))
            perturbed.append(neg_loglik(bumped, data))
        assert np.mean(at_truth) < np.mean(perturbed)


class TestScoreDirections:
    def test_dh_dpsi_at_pi_zero(self, small_data):
        rows = dh_dpsi(0.0, small_data)
        w, v = small_data.lagged_squares()
        assert np.array_equal(rows[:, 0], w)
        assert np.array_equal(rows[:, 1], v)
        assert np.all(rows[:, 2] == 1.0)

    def test_geometric_limit_for_constant_series(self):
        n = 400
        data = Dataset(y=np.ones(n), x=np.ones(n), y0=1.0, x0=1.0)
        rows = dh_dpsi(0.9, data, trunc=n)
        assert rows[-1, 0] == pytest.approx(10.0, abs=1e-8)
        assert rows[-1, 1] == pytest.approx(10.0, abs=1e-8)

    def test_truncation_window(self):
        data = Dataset(y=np.ones(6), x=np.ones(6), y0=1.0, x0=1.0)
        rows = dh_dpsi(0.5, data, trunc=2)
        # three terms at most: 1 + 0.5 + 0.25
        assert rows[-1, 0] == pytest.approx(1.75, abs=1e-14)
        assert rows[0, 0] == pytest.approx(1.0, abs=1e-14)

    def test_tau_fourth_component_lag_two(self, small_data):
        w, v = small_data.lagged_squares()
        tau1 = tau_vector(np.array([1.0, 0.0]), 0.0, small_data)
        tau2 = tau_vector(np.array([0.0, 1.0]), 0.0, small_data)
        # only the i = 1 term survives at pi = 0
        assert tau1[0, 3] == 0.0
        assert np.array_equal(tau1[1:, 3], w[:-1])
        assert np.array_equal(tau2[1:, 3], v[:-1])

    def test_tau_first_three_match_dh(self, small_data):
        tau = tau_vector(np.array([1.0, 0.0]), 0.35, small_data)
        assert np.array_equal(tau[:, :3], dh_dpsi(0.35, small_data))

    def test_tau_requires_unit_direction(self, small_data):
        with pytest.raises(ParameterError):
            tau_vector(np.array([1.0, 1.0]), 0.2, small_data)


class TestCHat:
    def test_converges_to_one_for_gaussian(self, garch_dgp):
        vals = [
            c_hat(garch_dgp.theta, simulate_dgp(garch_dgp, 20_000, seed=50 + r))
            for r in range(20)
        ]
        mean = np.mean(vals)
        se = np.std(vals, ddof=1) / math.sqrt(len(vals))
        assert abs(mean - 1.0) < 3.0 * se

    def test_degenerate_zero_series(self):
        data = Dataset(y=np.zeros(50), x=np.ones(50), y0=0.0, x0=1.0)
        assert c_hat(ThetaPoint(0.0, 0.0, 1.0, 0.0), data, "ratio") == 0.5

    def test_variants_agree_at_root_n_rate(self, garch_dgp):
        # ratio - alt = 1 - mean(y^2/h), which is N(0, 2/n) at the truth
        n = 10_000
        data = simulate_dgp(garch_dgp, n, seed=77)
        diff = c_hat(garch_dgp.theta, data, "ratio") - c_hat(garch_dgp.theta, data, "alt")
        assert abs(diff) < 3.0 * math.sqrt(2.0 / n)

    def test_unknown_variant(self, small_data):
        with pytest.raises(ValueError):
            c_hat(ThetaPoint(0.0, 0.0, 1.0, 0.0), small_data, "bogus")


class TestDatasetIO:
    def test_csv_round_trip(self, tmp_path, small_data):
        path = tmp_path / "d.csv"
        small_data.to_csv(path)
        back = Dataset.from_csv(path)
        assert np.array_equal(back.y, small_data.y)
        assert np.array_equal(back.x, small_data.x)
        assert back.y0 == small_data.y0 and back.x0 == small_data.x0

    def test_csv_header_check(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b,c\n0,1,2\n1,1,2\n")
        with pytest.raises(ParameterError):
            Dataset.from_csv(path)

    def test_length_mismatch_rejected(self):
        with pytest.raises(ParameterError):
            Dataset(y=np.ones(3), x=np.ones(4))
