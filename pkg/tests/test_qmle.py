import math

import numpy as np
import pytest

from garchxtest.model import (
    Dataset,
    ParamSpace,
    ThetaPoint,
    TrueConfig,
    neg_loglik,
    simulate_dgp,
)
from garchxtest.qmle import (
    FitError,
    fit_bundle,
    fit_profile,
    lr_dagger_stat,
    lr_stat,
    pi_grid_default,
)

GRID = pi_grid_default(0.9, 0.1)

# regression fixture: statistic values on the seed-123 null dataset (n = 500,
# beta = 0, varphi = 0.5, kappa = 0), computed once with the dense 0.01 grid
FIXTURE_SEED = 123
FIXTURE_LR_DAGGER = 1.1777746933681075
FIXTURE_LR = 0.9566532538198591


@pytest.fixture(scope="module")
def fixture_data():
    dgp = TrueConfig(ThetaPoint(0.0, 0.0, 1.0, 0.2), varphi=0.5, kappa=0.0)
    return simulate_dgp(dgp, 500, seed=FIXTURE_SEED)


class TestRestrictedClosedForm:
    def test_zeta_is_clipped_mean_square(self, space):
        rng = np.random.default_rng(8)
        y = rng.standard_normal(400)
        y *= math.sqrt(1.3 / np.mean(y**2))  # force mean(y^2) = 1.3
        data = Dataset(y=y, x=rng.standard_normal(400))
        fit = fit_profile(data, space, "both_betas_zero", GRID)
        assert fit.theta_hat.zeta == pytest.approx(1.3, abs=1e-12)
        assert fit.theta_hat.beta1 == 0.0 and fit.theta_hat.beta2 == 0.0
        assert fit.pi_hat == 1.0 and fit.flat_pi

    def test_zeta_clipping_at_bounds(self, space):
        data = Dataset(y=np.full(50, 0.01), x=np.ones(50))
        fit = fit_profile(data, space, "both_betas_zero", GRID)
        assert fit.theta_hat.zeta == space.zeta_min


class TestProfileFit:
    def test_consistency_under_strong_identification(self, space):
        # interior coordinates: mean estimate within 3 empirical standard
        # errors of truth; the boundary coordinate beta2 = 0 has a half-normal
        # limit, so only its root-n rate is asserted
        n = 10_000
        dgp = TrueConfig(ThetaPoint(0.3, 0.0, 1.0, 0.2), varphi=0.5, kappa=0.0)
        ests = []
        for r in range(50):
            data = simulate_dgp(dgp, n, seed=5_000 + r)
            fit = fit_profile(data, space, "none", GRID)
            ests.append([fit.theta_hat.beta1, fit.theta_hat.beta2, fit.theta_hat.zeta, fit.pi_hat])
        ests = np.array(ests)
        for k, target in [(0, 0.3), (2, 1.0), (3, 0.2)]:
            se = ests[:, k].std(ddof=1) / math.sqrt(len(ests))
            assert abs(ests[:, k].mean() - target) <= 3.0 * se + 1e-12, f"coordinate {k}"
        assert ests[:, 1].mean() <= 2.0 / math.sqrt(n)

    def test_estimates_respect_box(self, space, garch_data):
        for restriction in ("none", "beta2_zero"):
            fit = fit_profile(garch_data, space, restriction, GRID)
            th = fit.theta_hat
            assert 0.0 <= th.beta1 <= space.beta1_max
            assert 0.0 <= th.beta2 <= space.beta2_max
            assert space.zeta_min <= th.zeta <= space.zeta_max

    def test_grid_refinement_never_hurts(self, space, garch_data):
        coarse = fit_profile(garch_data, space, "none", pi_grid_default(0.9, 0.2))
        fine = fit_profile(garch_data, space, "none", pi_grid_default(0.9, 0.1))
        assert fine.qn_value <= coarse.qn_value + 1e-12

    def test_flat_profile_for_constant_y(self, space):
        rng = np.random.default_rng(4)
        data = Dataset(y=np.full(300, 1.2), x=rng.standard_normal(300), y0=1.2, x0=0.3)
        fit = fit_profile(data, space, "none", GRID)
        assert fit.flat_pi
        assert fit.pi_hat == 1.0
        assert fit.theta_hat.beta1 == 0.0 and fit.theta_hat.beta2 == 0.0

    def test_profile_table_matches_qn(self, space, small_data):
        fit = fit_profile(small_data, space, "none", GRID)
        assert fit.qn_value == fit.qc_profile.min()
        g = int(fit.qc_profile.argmin())
        psi = fit.psi_profile[g]
        theta = ThetaPoint(psi[0], psi[1], psi[2], float(fit.pi_grid[g]))
        assert neg_loglik(theta, small_data) == pytest.approx(fit.qn_value, abs=1e-12)

    def test_invalid_grid_rejected(self, space, small_data):
        with pytest.raises(ValueError):
            fit_profile(small_data, space, "none", np.array([0.0, 0.95]))
        with pytest.raises(ValueError):
            fit_profile(small_data, space, "none", np.array([]))

    def test_unknown_restriction(self, space, small_data):
        with pytest.raises(ValueError):
            fit_profile(small_data, space, "beta1_zero", GRID)


class TestNesting:
    def test_chain_on_simulated_datasets(self, space):
        dgp = TrueConfig(ThetaPoint(0.1, 0.05, 1.0, 0.3), varphi=0.5, kappa=0.3)
        for r in range(20):
            data = simulate_dgp(dgp, 300, seed=9_000 + r)
            b = fit_bundle(data, space, GRID)
            assert b.both_zero.qn_value >= b.beta2_zero.qn_value - 1e-10
            assert b.beta2_zero.qn_value >= b.full.qn_value - 1e-10

    def test_statistics_nonnegative_many_datasets(self, space):
        dgp = TrueConfig(ThetaPoint(0.05, 0.0, 1.0, 0.2), varphi=0.3, kappa=0.0)
        coarse = pi_grid_default(0.9, 0.3)
        for r in range(500):
            data = simulate_dgp(dgp, 100, seed=20_000 + r)
            b = fit_bundle(data, space, coarse)
            assert b.lr >= 0.0 and b.lr_dagger >= 0.0


class TestStatistics:
    def test_constant_y_gives_zero_dagger(self, space):
        rng = np.random.default_rng(12)
        data = Dataset(y=np.full(300, 2.0), x=rng.standard_normal(300), y0=2.0, x0=0.1)
        assert lr_dagger_stat(data, space, GRID) == 0.0

    def test_zero_covariate_gives_zero_lr(self, space):
        rng = np.random.default_rng(13)
        dgp = TrueConfig(ThetaPoint(0.2, 0.0, 1.0, 0.2))
        base = simulate_dgp(dgp, 300, seed=44)
        data = Dataset(y=base.y, x=np.zeros(300), y0=base.y0, x0=0.0)
        assert lr_stat(data, space, GRID) == 0.0

    def test_fixture_value_frozen(self, space, fixture_data):
        dense = pi_grid_default(0.9, 0.01)
        assert lr_dagger_stat(fixture_data, space, dense) == FIXTURE_LR_DAGGER
        assert lr_stat(fixture_data, space, dense) == FIXTURE_LR

    def test_power_under_large_arch_effect(self, space):
        # first-step test at the 1% data-driven quantile rejects nearly always
        from garchxtest.critvals import CritConfig, cv_lr_dagger

        dgp = TrueConfig(ThetaPoint(0.3, 0.0, 1.0, 0.2), varphi=0.5, kappa=0.0)
        cfg = CritConfig(alpha=0.01, j_draws=1_000, seed=5)
        hits = 0
        n_seeds = 100
        for r in range(n_seeds):
            data = simulate_dgp(dgp, 10_000, seed=60_000 + r)
            b = fit_bundle(data, space, GRID)
            hits += int(b.lr_dagger > cv_lr_dagger(data, b.both_zero, cfg))
        assert hits >= 95
