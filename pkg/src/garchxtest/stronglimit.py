"""Strong-identification limit experiment and the chi-bar-square closed forms.

When the ARCH coefficient is bounded away from zero in the sqrt(n) scale, the
full reparametrized estimator is asymptotically a Gaussian vector projected
onto a shifted orthant in the metric of the 4x4 information matrix J.  The
rejection probability of the covariate test at the max(0,Z)^2 critical value
then has a closed chi-bar-square form driven by a single correlation rho
extracted from J^{-1}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.stats import chi2, norm

from .cones import Cone, Fixed, Free, HalfLine, solve_cone_qp_batch
from .model import ParameterError, TrueConfig
from .weaklimit import LocalizationPoint, McConfig, _as_seedseq, _lag_blocks

# coordinate order of J is (beta1, beta2, zeta, pi)
_IDX_BETA2 = 1
_IDX_PI = 3
_SEL_BETA_PI = [0, 1, 3]


def max_z_sq_quantile(alpha: float) -> float:
    """1-alpha quantile of max(0, Z)^2 for standard normal Z."""
    if not (0.0 < alpha < 0.5):
        raise ParameterError("alpha must lie in (0, 0.5)")
    return float(norm.ppf(1.0 - alpha) ** 2)


@dataclass
class JMatrix:
    """Information matrix of the reparametrized score at gamma0, direction omega0."""

    values: np.ndarray  # (4, 4)
    gamma0: TrueConfig
    omega0: np.ndarray
    mc_meta: McConfig

    def save(self, path) -> None:
        th = self.gamma0.theta
        np.savez_compressed(
            path,
            values=self.values,
            theta=[th.beta1, th.beta2, th.zeta, th.pi],
            law=[self.gamma0.varphi, self.gamma0.kappa],
            omega0=self.omega0,
            mc=[self.mc_meta.n_blocks, self.mc_meta.trunc, self.mc_meta.seed],
        )

    @classmethod
    def load(cls, path) -> "JMatrix":
        from .model import ThetaPoint

        d = np.load(path)
        gamma0 = TrueConfig(
            theta=ThetaPoint(*[float(v) for v in d["theta"]]),
            varphi=float(d["law"][0]),
            kappa=float(d["law"][1]),
        )
        mc = McConfig(int(d["mc"][0]), int(d["mc"][1]), int(d["mc"][2]))
        return cls(values=d["values"], gamma0=gamma0, omega0=d["omega0"], mc_meta=mc)


_BLOCK_CHUNK = 16_384


def build_J(
    gamma0: TrueConfig, omega0=(1.0, 0.0), mc_cfg: McConfig = McConfig()
) -> JMatrix:
    """Monte Carlo average of the outer score product over simulated blocks.

    Each block contributes tau(omega0, pi0) / h_inf(theta0) with lag sums
    truncated at ``mc_cfg.trunc``; J is the average of the outer products
    divided by 2.  At pi0 = 0 this reduces to the two-lag expression
    (y_{t-1}^2, x_{t-1}^2, 1, y_{t-2}^2)' / (zeta0 + beta1*y_{t-1}^2).
    """
    omega0 = np.asarray(omega0, dtype=float)
    if omega0.shape != (2,) or not math.isclose(float(omega0 @ omega0), 1.0, rel_tol=1e-8):
        raise ParameterError("omega0 must be a unit 2-vector")
    if np.any(omega0 < 0.0):
        raise ParameterError("omega0 must be componentwise nonnegative")
    th = gamma0.theta
    pi0 = th.pi
    trunc = mc_cfg.trunc
    powers = pi0 ** np.arange(trunc + 1)
    idx = np.arange(1.0, trunc + 1)
    slope_coef = idx * pi0 ** (idx - 1.0)

    rng = np.random.default_rng(mc_cfg.seed)
    acc = np.zeros((4, 4))
    done = 0
    while done < mc_cfg.n_blocks:
        m = min(_BLOCK_CHUNK, mc_cfg.n_blocks - done)
        _, ysq, xsq = _lag_blocks(gamma0, m, trunc + 1, 100, rng)
        sy = ysq @ powers
        sx = xsq @ powers
        mixed = omega0[0] * ysq + omega0[1] * xsq
        slope = mixed[:, 1:] @ slope_coef
        h = th.zeta + th.beta1 * sy + th.beta2 * sx
        tau = np.stack([sy, sx, np.ones(m), slope], axis=1) / h[:, None]
        acc += tau.T @ tau
        done += m
    J = acc / (2.0 * mc_cfg.n_blocks)
    if np.linalg.cond(J) > 1e12:
        raise np.linalg.LinAlgError(
            f"estimated J is numerically singular (cond={np.linalg.cond(J):.3g})"
        )
    return JMatrix(values=J, gamma0=gamma0, omega0=omega0, mc_meta=mc_cfg)


def rho_of_J(J: JMatrix | np.ndarray) -> float:
    """Correlation-type scalar from the (beta2, pi) block of J^{-1}."""
    values = J.values if isinstance(J, JMatrix) else np.asarray(J, dtype=float)
    Jinv = np.linalg.inv(values)
    return float(
        Jinv[_IDX_BETA2, _IDX_PI]
        / math.sqrt(Jinv[_IDX_BETA2, _IDX_BETA2] * Jinv[_IDX_PI, _IDX_PI])
    )


def q_of_rho(rho: float) -> float:
    """Arcsine mixture weight q = arcsin(rho) / (2 pi)."""
    if not -1.0 <= rho <= 1.0:
        raise ParameterError("rho must lie in [-1, 1]")
    return math.asin(rho) / (2.0 * math.pi)


def chibar_cdf(x: float, rho: float) -> float:
    """CDF of the chi-bar-square mixture with weights (1/2 - q, 1/2, q)."""
    q = q_of_rho(rho)
    if x < 0.0:
        return 0.0
    return (0.5 - q) + 0.5 * chi2.cdf(x, 1) + q * chi2.cdf(x, 2)


def chibar_rp(rho: float, alpha: float) -> float:
    """Asymptotic rejection probability of the max(0,Z)^2-based test at p = 0.

    For rho < 0 the p = 0 probability falls below the level and the supremum
    over p is attained at p = infinity, so alpha is returned.
    """
    if not (0.0 < alpha < 0.5):
        raise ParameterError("alpha must lie in (0, 0.5)")
    if rho < 0.0:
        return alpha
    cv = max_z_sq_quantile(alpha)
    return 1.0 - chibar_cdf(cv, rho)


def chibar_quantile(rho: float, alpha: float) -> float:
    """1-alpha quantile of the chi-bar-square mixture, by root finding."""
    if rho < 0.0:
        raise ParameterError("chibar_quantile requires rho >= 0")
    if not (0.0 < alpha < 0.5):
        raise ParameterError("alpha must lie in (0, 0.5)")
    target = 1.0 - alpha
    return float(brentq(lambda x: chibar_cdf(x, rho) - target, 0.0, 200.0, xtol=1e-12))


def _cov_sqrt(cov: np.ndarray) -> np.ndarray:
    """Symmetric square root with tiny negative eigenvalues clipped to zero."""
    vals, vecs = np.linalg.eigh(cov)
    if vals.min() < -1e-10 * max(1.0, vals.max()):
        raise np.linalg.LinAlgError("covariance is not positive semidefinite")
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.T


def _strong_cones(loc: LocalizationPoint) -> tuple[Cone, Cone]:
    """Full and restricted parameter cones for the strong-regime projection."""
    if loc.p is None:
        raise ParameterError("strong-regime localization requires p")
    if not np.isfinite(loc.b2):
        raise ParameterError("the restricted cone pins coordinate 2 at -b2; b2 must be finite")

    def bound(v: float):
        return Free() if np.isinf(v) else HalfLine(-float(v))

    full = Cone((bound(loc.b1), bound(loc.b2), Free(), bound(loc.p)))
    restricted = Cone(
        (bound(loc.b1), Fixed(-float(loc.b2)), Free(), bound(loc.p))
    )
    return full, restricted


@dataclass
class StrongDraws:
    """Per-draw strong-regime limit realizations."""

    lam_hat: np.ndarray  # (draws, 4)
    lr: np.ndarray

    def __len__(self) -> int:
        return self.lr.size

    def to_csv(self, path) -> None:
        import csv

        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["draw", "lam1", "lam2", "lam3", "lam4", "lr"])
            for j in range(len(self)):
                writer.writerow([j] + [repr(float(v)) for v in self.lam_hat[j]] + [repr(float(self.lr[j]))])


def lr_infty_draws(
    loc: LocalizationPoint, J: JMatrix, c0: float, draws: int, seed=0
) -> StrongDraws:
    """Simulate the strong-regime limit law of the covariate LR statistic.

    Each draw projects Z ~ N(0, c0 J^{-1}) onto the full and restricted cones
    in the metric J and takes the difference of the weighted quadratic forms of
    the (beta1, beta2, pi) coordinates.
    """
    Jv = J.values if isinstance(J, JMatrix) else np.asarray(J, dtype=float)
    full, restricted = _strong_cones(loc)
    Jinv = np.linalg.inv(Jv)
    root = _cov_sqrt(c0 * Jinv)
    rng = np.random.default_rng(_as_seedseq(seed))
    Z = rng.standard_normal((draws, 4)) @ root.T
    lam, _ = solve_cone_qp_batch(Jv, Z, full)
    lam_r, _ = solve_cone_qp_batch(Jv, Z, restricted)
    W = np.linalg.inv(c0 * Jinv[np.ix_(_SEL_BETA_PI, _SEL_BETA_PI)])
    sel = lam[:, _SEL_BETA_PI]
    sel_r = lam_r[:, _SEL_BETA_PI]
    lr = np.einsum("mi,ij,mj->m", sel, W, sel) - np.einsum("mi,ij,mj->m", sel_r, W, sel_r)
    return StrongDraws(lam_hat=lam, lr=lr)
