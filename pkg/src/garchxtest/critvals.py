"""Critical values: closed-form, data-driven simulated, and plug-in least favorable.

The data-driven quantiles re-run the weak-regime limit simulation with every
unknown replaced by an estimate from the null fit: the Gaussian process is
drawn by multiplying observed regressor sums with standard-normal multipliers,
and the kernels use the same truncation (all available lags) as those sums.
One multiplier tensor per dataset is shared across the whole (pi0, b1) grid,
so the least-favorable maximum is a maximum over coupled quantiles.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .model import Dataset, ParameterError, c_hat, geometric_sums, h_path, slope_sums
from .qmle import FitBundle, FitResult
from .stronglimit import chibar_quantile, max_z_sq_quantile, rho_of_J


def _default_b1_grid() -> np.ndarray:
    return np.array(
        [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 5.0, 6.0, 8.0, 10.0, 12.0]
    )


@dataclass(frozen=True)
class CritConfig:
    """Grids, draw count, level, and seed for the simulated critical values."""

    alpha: float = 0.05
    j_draws: int = 10_000
    pi_grid: np.ndarray = field(default_factory=lambda: np.round(np.arange(0.0, 0.91, 0.1), 10))
    pi0_grid: np.ndarray = field(default_factory=lambda: np.round(np.arange(0.0, 0.81, 0.1), 10))
    b1_grid: np.ndarray = field(default_factory=_default_b1_grid)
    seed: int = 0

    def __post_init__(self) -> None:
        if not (0.0 < self.alpha < 0.5):
            raise ParameterError("alpha must lie in (0, 0.5)")
        for name in ("pi_grid", "pi0_grid", "b1_grid"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.size == 0:
                raise ParameterError(f"{name} must be nonempty")
            object.__setattr__(self, name, arr)
        if np.any(self.b1_grid < 0.0):
            raise ParameterError("b1 values must be nonnegative")


def cv_maxz(alpha: float) -> float:
    """Closed-form 1-alpha quantile of max(0, Z)^2."""
    return max_z_sq_quantile(alpha)


def admissible_pb(pi0_grid: np.ndarray, b1_grid: np.ndarray, n: int) -> list[tuple[float, float]]:
    """Localization cells (pi0, b1) satisfying the fourth-moment-style constraint
    3*(b1/sqrt(n))^2 + pi0^2 + 2*(b1/sqrt(n))*pi0 < 1 (strict)."""
    out = []
    for pi0 in pi0_grid:
        for b1 in b1_grid:
            beta1n = b1 / np.sqrt(n)
            if 3.0 * beta1n**2 + pi0**2 + 2.0 * beta1n * pi0 < 1.0:
                out.append((float(pi0), float(b1)))
    return out


def _orthant_forms(
    z1: np.ndarray, z2: np.ndarray, S: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Projected quadratic forms for the two beta-block cones, closed form.

    For centers (z1, z2) and PD metric S returns (lam' S lam) at the
    projections onto [0,inf)^2 and onto [0,inf) x {0}.  This is the 2x2 case
    analysis of the generic active-set enumeration, fused for the hot loop.
    """
    s11, s12, s22 = S[0, 0], S[0, 1], S[1, 1]
    det = s11 * s22 - s12 * s12
    qz = s11 * z1 * z1 + 2.0 * s12 * z1 * z2 + s22 * z2 * z2
    val_pin1 = z1 * z1 * det / s22   # coordinate 1 at zero, 2 free
    val_pin2 = z2 * z2 * det / s11   # coordinate 2 at zero, 1 free
    lam2_pin1 = z2 + (s12 / s22) * z1
    lam1_pin2 = z1 + (s12 / s11) * z2
    cand1 = np.where(lam2_pin1 >= 0.0, val_pin1, np.inf)
    cand2 = np.where(lam1_pin2 >= 0.0, val_pin2, np.inf)
    minq_full = np.where(
        (z1 >= 0.0) & (z2 >= 0.0),
        0.0,
        np.minimum(np.minimum(cand1, cand2), qz),
    )
    minq_restr = np.minimum(cand2, qz)
    return qz - minq_full, qz - minq_restr


class _EstimatedLimit:
    """Estimated weak-regime limit objects for one dataset and null fit.

    Holds the data-driven kernels H-tilde and K-tilde on the grids, the
    multiplier draw tensor, and the compiled cone projections; quantile
    computations for any localization (pi0, b1) then reuse all of it.
    """

    def __init__(self, data: Dataset, fit_dagger: FitResult, cfg: CritConfig):
        if fit_dagger.restriction != "both_betas_zero":
            raise ParameterError("cv computations require the beta1 = beta2 = 0 fit")
        self.cfg = cfg
        self.n = data.n
        self.zeta = fit_dagger.theta_hat.zeta
        self.c = c_hat(fit_dagger.theta_hat, data, "ratio")
        self.pi_grid = np.asarray(cfg.pi_grid, dtype=float)
        self.eval_points = np.unique(np.concatenate([self.pi_grid, cfg.pi0_grid]))

        w, v = data.lagged_squares()
        n = data.n
        n_eval = self.eval_points.size
        sy = np.empty((n, n_eval))
        sx = np.empty((n, n_eval))
        for a, pi in enumerate(self.eval_points):
            sy[:, a] = geometric_sums(w, float(pi))
            sx[:, a] = geometric_sums(v, float(pi))
        self._em_yx = sy.T @ sx / n
        self._em_xx = sx.T @ sx / n
        self._em_x = sx.mean(axis=0)

        gidx = np.searchsorted(self.eval_points, self.pi_grid)
        self.H_tab = np.stack([self._h_tilde(int(a)) for a in gidx])
        self._H_inv = np.stack([np.linalg.inv(H) for H in self.H_tab])
        self.W_tab = np.stack(
            [np.linalg.inv(self.c * Hi[:2, :2]) for Hi in self._H_inv]
        )

        # multiplier draw tensor A = -H^{-1} G-tilde, shaped (J, n_grid, 3)
        base = np.empty((n, 3 * self.pi_grid.size))
        for g, a in enumerate(gidx):
            base[:, 3 * g] = sy[:, a]
            base[:, 3 * g + 1] = sx[:, a]
            base[:, 3 * g + 2] = 1.0
        scale = np.sqrt(self.c / 2.0) / (self.zeta * np.sqrt(n))
        root = np.random.SeedSequence(cfg.seed)
        children = root.spawn(cfg.j_draws)
        J = cfg.j_draws
        G = np.empty((J, self.pi_grid.size, 3))
        chunk = max(1, (1 << 22) // n)
        for j0 in range(0, J, chunk):
            j1 = min(j0 + chunk, J)
            M = np.empty((j1 - j0, n))
            for j in range(j0, j1):
                M[j - j0] = np.random.default_rng(children[j]).standard_normal(n)
            G[j0:j1] = (M @ base).reshape(-1, self.pi_grid.size, 3) * scale
        self.A = np.empty_like(G)
        for g in range(self.pi_grid.size):
            self.A[:, g, :] = -G[:, g, :] @ self._H_inv[g].T

        self._drift_cache: dict[float, np.ndarray] = {}

    def _eval_index(self, pi: float) -> int:
        i = int(np.searchsorted(self.eval_points, pi))
        if i >= self.eval_points.size or self.eval_points[i] != pi:
            raise KeyError(f"pi={pi} is not on the tabulated grids")
        return i

    def _h_tilde(self, a: int) -> np.ndarray:
        pi = float(self.eval_points[a])
        z = self.zeta
        a11 = 2.0 * self.c / (1.0 - pi * pi) + 1.0 / (1.0 - pi) ** 2
        return 0.5 * np.array(
            [
                [a11, self._em_yx[a, a] / z**2, 1.0 / (z * (1.0 - pi))],
                [self._em_yx[a, a] / z**2, self._em_xx[a, a] / z**2, self._em_x[a] / z**2],
                [1.0 / (z * (1.0 - pi)), self._em_x[a] / z**2, 1.0 / z**2],
            ]
        )

    def k_tilde(self, pi: float, pi0: float) -> np.ndarray:
        a = self._eval_index(pi)
        i0 = self._eval_index(pi0)
        z = self.zeta
        a11 = 2.0 * self.c / (1.0 - pi * pi0) + 1.0 / ((1.0 - pi) * (1.0 - pi0))
        return -0.5 * np.array(
            [
                [a11, self._em_yx[a, i0] / z**2],
                [self._em_yx[i0, a] / z**2, self._em_xx[a, i0] / z**2],
                [1.0 / (z * (1.0 - pi0)), self._em_x[i0] / z**2],
            ]
        )

    def _drift(self, pi0: float) -> np.ndarray:
        """H^{-1}(pi) K(pi, pi0) e1 per grid pi: the shift of Z per unit b1."""
        if pi0 not in self._drift_cache:
            rows = np.empty((self.pi_grid.size, 3))
            for g, pi in enumerate(self.pi_grid):
                rows[g] = self._H_inv[g] @ self.k_tilde(float(pi), pi0)[:, 0]
            self._drift_cache[pi0] = rows
        return self._drift_cache[pi0]

    def lr_draws_cells(
        self, cells: list[tuple[float, float]]
    ) -> tuple[np.ndarray, np.ndarray]:
        """Per-draw (LR-dagger, LR) for a batch of localizations (pi0, b1).

        Returns arrays of shape (n_cells, J).  All cells ride on the same
        multiplier tensor; for each grid pi one vectorized orthant projection
        covers every cell.  The beta-block quadratic forms come from the
        projection values via lambda' W lambda = (Z' S Z - min q) / c with
        S = c W, valid because both cones pass through the origin.
        """
        J = self.cfg.j_draws
        C = len(cells)
        n_grid = self.pi_grid.size
        shift = np.zeros((C, n_grid, 3))
        for ci, (pi0, b1) in enumerate(cells):
            if b1 != 0.0:
                shift[ci] = b1 * self._drift(pi0)
        tf_max = np.full((C, J), -np.inf)
        tr_max = np.full((C, J), -np.inf)
        for g in range(n_grid):
            Zb = self.A[None, :, g, :2] - shift[:, None, g, :2]
            z1 = Zb[..., 0].reshape(-1)
            z2 = Zb[..., 1].reshape(-1)
            tf, tr = _orthant_forms(z1, z2, self.c * self.W_tab[g])
            np.maximum(tf_max, (tf / self.c).reshape(C, J), out=tf_max)
            np.maximum(tr_max, (tr / self.c).reshape(C, J), out=tr_max)
        return tf_max, np.maximum(tf_max - tr_max, 0.0)

    def lr_draws(self, pi0: float, b1: float) -> tuple[np.ndarray, np.ndarray]:
        """Per-draw (LR-dagger, LR) under a single localization (pi0, (b1, 0))."""
        lr_dagger, lr = self.lr_draws_cells([(pi0, b1)])
        return lr_dagger[0], lr[0]

    def quantile(self, draws: np.ndarray) -> float:
        return float(np.quantile(draws, 1.0 - self.cfg.alpha, method="inverted_cdf"))


def cv_lr_dagger(data: Dataset, fit_dagger: FitResult, cfg: CritConfig) -> float:
    """Simulated 1-alpha quantile of the estimated first-step limit law (b = 0)."""
    sim = _EstimatedLimit(data, fit_dagger, cfg)
    lr_dagger, _ = sim.lr_draws(pi0=float(sim.eval_points[0]), b1=0.0)
    return sim.quantile(lr_dagger)


def cv_lr_finite_b(
    data: Dataset, fit_dagger: FitResult, pi0: float, b1: float, cfg: CritConfig
) -> float:
    """Simulated 1-alpha quantile of the estimated LR limit law at (pi0, b1)."""
    if b1 < 0.0:
        raise ParameterError("b1 must be nonnegative")
    sim = _EstimatedLimit(data, fit_dagger, cfg)
    _, lr = sim.lr_draws(pi0=pi0, b1=b1)
    return sim.quantile(lr)


def estimate_j(data: Dataset, fit0: FitResult) -> np.ndarray:
    """Sample analogue of the strong-regime information matrix at the null fit.

    Uses the beta2 = 0 fit's pi_hat in the lag sums (all available lags) and
    the fitted recursion variance path; coordinate order (beta1, beta2, zeta, pi).
    """
    if fit0.restriction != "beta2_zero":
        raise ParameterError("estimate_j requires the beta2 = 0 restricted fit")
    th = fit0.theta_hat
    w, v = data.lagged_squares()
    n = data.n
    tau = np.empty((n, 4))
    tau[:, 0] = geometric_sums(w, th.pi)
    tau[:, 1] = geometric_sums(v, th.pi)
    tau[:, 2] = 1.0
    tau[:, 3] = slope_sums(w, th.pi)
    h = h_path(th, data)
    A = tau / h[:, None]
    return A.T @ A / (2.0 * n)


def cv_lr_infty(data: Dataset, fit0: FitResult, alpha: float) -> float:
    """Strong-identification critical value: cv for rho-tilde < 0, otherwise the
    chi-bar-square quantile at the estimated correlation."""
    J = estimate_j(data, fit0)
    try:
        rho = rho_of_J(J)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(
            "estimated information matrix is singular; inspect the data for "
            "degenerate y or x series"
        ) from exc
    if rho < 0.0:
        return max_z_sq_quantile(alpha)
    return chibar_quantile(rho, alpha)


@dataclass
class PilfResult:
    """Plug-in least-favorable critical value and its components."""

    value: float
    finite_b_max: float
    finite_b_argmax: tuple[float, float]
    finite_b_table: dict[tuple[float, float], float]
    lr_infty: float | None
    cv: float | None
    rho_tilde: float | None
    beta1_positive: bool

    def __float__(self) -> float:
        return self.value

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "finite_b_max": self.finite_b_max,
            "finite_b_argmax": list(self.finite_b_argmax),
            "finite_b_table": [
                {"pi0": k[0], "b1": k[1], "cv": v} for k, v in self.finite_b_table.items()
            ],
            "lr_infty": self.lr_infty,
            "cv": self.cv,
            "rho_tilde": self.rho_tilde,
            "beta1_positive": self.beta1_positive,
        }


def cv_pilf(data: Dataset, fits: FitBundle, cfg: CritConfig) -> PilfResult:
    """Plug-in least favorable critical value for the covariate LR test.

    Maximizes the simulated finite-b quantiles over the admissible (pi0, b1)
    cells; when the fitted beta1 is strictly positive the strong-regime
    quantile and the closed-form cv join the maximum, otherwise only the
    finite-b scenario is considered.
    """
    sim = _EstimatedLimit(data, fits.both_zero, cfg)
    return _pilf_from_sim(sim, data, fits, cfg)[0]


def _pilf_from_sim(sim: _EstimatedLimit, data: Dataset, fits: FitBundle, cfg: CritConfig) -> PilfResult:
    cells = admissible_pb(cfg.pi0_grid, cfg.b1_grid, data.n)
    if not cells:
        raise ParameterError("no admissible (pi0, b1) cells; grids are misconfigured")
    # the b1 = 0 draws do not depend on pi0; evaluate each distinct problem once
    unique: list[tuple[float, float]] = []
    cell_to_unique: dict[tuple[float, float], int] = {}
    for pi0, b1 in cells:
        key = (float(cells[0][0]), 0.0) if b1 == 0.0 else (pi0, b1)
        if key not in cell_to_unique:
            cell_to_unique[key] = len(unique)
            unique.append(key)
        cell_to_unique[(pi0, b1)] = cell_to_unique[key]
    tf, lr = sim.lr_draws_cells(unique)
    quantiles = [sim.quantile(lr[u]) for u in range(len(unique))]
    zero_key = next((k for k in unique if k[1] == 0.0), None)
    lr_dagger_b0 = tf[cell_to_unique[zero_key]] if zero_key is not None else None
    table: dict[tuple[float, float], float] = {}
    best = -np.inf
    best_cell = cells[0]
    for pi0, b1 in cells:
        q = quantiles[cell_to_unique[(pi0, b1)]]
        table[(pi0, b1)] = q
        if q > best:
            best = q
            best_cell = (pi0, b1)
    beta1_positive = fits.full.theta_hat.beta1 > 0.0
    lr_infty = None
    cv = None
    rho = None
    value = best
    if beta1_positive:
        J = estimate_j(data, fits.beta2_zero)
        rho = rho_of_J(J)
        lr_infty = (
            max_z_sq_quantile(cfg.alpha) if rho < 0.0 else chibar_quantile(rho, cfg.alpha)
        )
        cv = max_z_sq_quantile(cfg.alpha)
        value = max(best, lr_infty, cv)
    result = PilfResult(
        value=value,
        finite_b_max=best,
        finite_b_argmax=best_cell,
        finite_b_table=table,
        lr_infty=lr_infty,
        cv=cv,
        rho_tilde=rho,
        beta1_positive=beta1_positive,
    )
    return result, lr_dagger_b0


def combined_critical_values(
    data: Dataset, fits: FitBundle, cfg: CritConfig
) -> tuple[float, PilfResult]:
    """First-step quantile and PI-LF report from one shared multiplier tensor.

    Equivalent to calling :func:`cv_lr_dagger` and :func:`cv_pilf` separately
    (they derive the same draws from cfg.seed) but builds the estimated limit
    objects once; the Monte Carlo harness calls this per replication.
    """
    sim = _EstimatedLimit(data, fits.both_zero, cfg)
    pilf, lr_dagger_b0 = _pilf_from_sim(sim, data, fits, cfg)
    if lr_dagger_b0 is None:
        lr_dagger_b0, _ = sim.lr_draws(pi0=float(sim.eval_points[0]), b1=0.0)
    return sim.quantile(lr_dagger_b0), pilf


def with_alpha(cfg: CritConfig, alpha: float) -> CritConfig:
    """Copy of cfg at a different level (procedures pass alpha explicitly)."""
    return replace(cfg, alpha=alpha)
