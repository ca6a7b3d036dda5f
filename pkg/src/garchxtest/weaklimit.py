"""Weak-identification limit experiment for the profile QMLE.

Under drifting sequences sqrt(n)*beta_n -> b with finite b, the estimator and
both LR statistics converge to functionals of a mean-zero Gaussian process
G(pi) with covariance kernel Omega(pi1, pi2), shifted by a drift matrix
K(pi, pi0) times b, and projected onto orthants in the metric
H(pi) = Omega(pi, pi)/c0.  This module tabulates the kernels by simulation,
draws the process by the multiplier method, and maps draws through the cone
projections to per-draw values of the estimator and of both statistics.

The same simulated regressor blocks feed Omega, H, and K, so the identities
H = Omega/c0, Omega(pi1, pi2) = Omega(pi2, pi1)', and K <= 0 hold exactly in
the tabulated objects, not just in the limit.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from .cones import Cone, Fixed, Free, HalfLine, solve_cone_qp_batch
from .model import ParameterError, TrueConfig, simulate_paths

FLAT_TOL = 1e-12


@dataclass(frozen=True)
class McConfig:
    """Simulation sizes for kernel tabulation: block count, lag truncation, seed."""

    n_blocks: int = 100_000
    trunc: int = 99
    seed: int = 0


@dataclass(frozen=True)
class LocalizationPoint:
    """Coordinates of one drifting-sequence limit experiment.

    Finite (b1, b2) indexes the weak regime.  With ||b|| infinite the
    direction ``omega0`` and the pi localization ``p`` select the strong
    regime experiment instead.
    """

    gamma0: TrueConfig
    b1: float
    b2: float = 0.0
    omega0: tuple[float, float] | None = None
    p: float | None = None

    def __post_init__(self) -> None:
        if self.b1 < 0 or self.b2 < 0:
            raise ParameterError("b1 and b2 must be nonnegative")
        if not self.is_weak and self.omega0 is None:
            raise ParameterError("omega0 is required when ||b|| is infinite")

    @property
    def is_weak(self) -> bool:
        return np.isfinite(self.b1) and np.isfinite(self.b2)

    @property
    def b(self) -> np.ndarray:
        return np.array([self.b1, self.b2])


def _lag_blocks(
    cfg: TrueConfig, n_blocks: int, n_lags: int, burn_in: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Simulate blocks and return (z^2, y^2, x^2) in lag order.

    Column i of each output is the squared value at lag i+1 relative to the
    block's reference date, i.e. the i-th term of the geometric sums.
    """
    z, y, x = simulate_paths(cfg, burn_in + n_lags, n_blocks, rng)
    sl = slice(None, None, -1)
    return z[:, burn_in:][:, sl] ** 2, y[:, burn_in:][:, sl] ** 2, x[:, burn_in:][:, sl] ** 2


@dataclass
class KernelSet:
    """Tabulated limit kernels for one gamma0 on a pi grid.

    ``eval_points`` is the grid augmented with gamma0's pi0; the moment tables
    are indexed by eval point so that Omega can be formed for any stored pair
    and K for any stored pi0.
    """

    gamma0: TrueConfig
    pi_grid: np.ndarray
    eval_points: np.ndarray
    c0: float
    H_tab: np.ndarray  # (n_grid, 3, 3)
    K_tab: np.ndarray  # (n_grid, 3, 2), drift columns (beta1, beta2) at gamma0's pi0
    mc_meta: McConfig
    m_zx: np.ndarray = field(repr=False)  # E[S_z(a) S_x(b)] over eval points
    m_xx: np.ndarray = field(repr=False)
    m_x: np.ndarray = field(repr=False)

    def _index(self, pi: float) -> int:
        i = int(np.searchsorted(self.eval_points, pi))
        if i >= self.eval_points.size or self.eval_points[i] != pi:
            raise KeyError(f"pi={pi} is not among the tabulated evaluation points")
        return i

    def omega_pair(self, pi1: float, pi2: float) -> np.ndarray:
        """Covariance kernel Omega(pi1, pi2) at stored evaluation points."""
        a, b = self._index(pi1), self._index(pi2)
        ea, eb = self.eval_points[a], self.eval_points[b]
        z = self.gamma0.theta.zeta
        ana = 2.0 * self.c0 / (1.0 - ea * eb) + 1.0 / ((1.0 - ea) * (1.0 - eb))
        return (self.c0 / 2.0) * np.array(
            [
                [ana, self.m_zx[a, b] / z, 1.0 / (z * (1.0 - ea))],
                [self.m_zx[b, a] / z, self.m_xx[a, b] / z**2, self.m_x[a] / z**2],
                [1.0 / (z * (1.0 - eb)), self.m_x[b] / z**2, 1.0 / z**2],
            ]
        )

    def k_for_pi0(self, pi0: float) -> np.ndarray:
        """Drift matrix K(pi, pi0) for every grid pi, as an (n_grid, 3, 2) array."""
        i0 = self._index(pi0)
        z = self.gamma0.theta.zeta
        out = np.empty((self.pi_grid.size, 3, 2))
        for g, pi in enumerate(self.pi_grid):
            a = self._index(pi)
            ana = 2.0 * self.c0 / (1.0 - pi * pi0) + 1.0 / ((1.0 - pi) * (1.0 - pi0))
            out[g] = -0.5 * np.array(
                [
                    [ana, self.m_zx[a, i0] / z],
                    [self.m_zx[i0, a] / z, self.m_xx[a, i0] / z**2],
                    [1.0 / (z * (1.0 - pi0)), self.m_x[i0] / z**2],
                ]
            )
        return out

    def save(self, path) -> None:
        th = self.gamma0.theta
        np.savez_compressed(
            path,
            theta=[th.beta1, th.beta2, th.zeta, th.pi],
            law=[self.gamma0.varphi, self.gamma0.kappa],
            pi_grid=self.pi_grid,
            eval_points=self.eval_points,
            c0=self.c0,
            H_tab=self.H_tab,
            K_tab=self.K_tab,
            mc=[self.mc_meta.n_blocks, self.mc_meta.trunc, self.mc_meta.seed],
            m_zx=self.m_zx,
            m_xx=self.m_xx,
            m_x=self.m_x,
        )

    @classmethod
    def load(cls, path) -> "KernelSet":
        from .model import ThetaPoint

        d = np.load(path)
        th = d["theta"]
        gamma0 = TrueConfig(
            theta=ThetaPoint(*[float(v) for v in th]),
            varphi=float(d["law"][0]),
            kappa=float(d["law"][1]),
        )
        mc = McConfig(int(d["mc"][0]), int(d["mc"][1]), int(d["mc"][2]))
        return cls(
            gamma0=gamma0,
            pi_grid=d["pi_grid"],
            eval_points=d["eval_points"],
            c0=float(d["c0"]),
            H_tab=d["H_tab"],
            K_tab=d["K_tab"],
            mc_meta=mc,
            m_zx=d["m_zx"],
            m_xx=d["m_xx"],
            m_x=d["m_x"],
        )


_BLOCK_CHUNK = 16_384


def build_kernels(
    gamma0: TrueConfig, pi_grid: np.ndarray, mc_cfg: McConfig = McConfig()
) -> KernelSet:
    """Tabulate H(pi) and K(pi, pi0) on the grid by block simulation.

    Entries that reduce to moments of the volatility innovation alone are
    computed in closed form; entries involving the covariate are averaged over
    ``mc_cfg.n_blocks`` simulated lag blocks.  gamma0 must have beta = 0 (the
    weak-regime baseline); c0 is 1 for the Gaussian innovations used here.
    """
    th = gamma0.theta
    if th.beta1 != 0.0 or th.beta2 != 0.0:
        raise ParameterError("weak-regime kernels require beta1 = beta2 = 0 in gamma0")
    if mc_cfg.n_blocks < 1_000:
        warnings.warn(
            f"n_blocks={mc_cfg.n_blocks} gives noisy kernel estimates", stacklevel=2
        )
    pi_grid = np.asarray(pi_grid, dtype=float)
    eval_points = np.unique(np.concatenate([pi_grid, [th.pi]]))
    n_eval = eval_points.size
    powers = np.power.outer(eval_points, np.arange(mc_cfg.trunc + 1)).T  # (L, E)

    rng = np.random.default_rng(mc_cfg.seed)
    sum_zx = np.zeros((n_eval, n_eval))
    sum_xx = np.zeros((n_eval, n_eval))
    sum_x = np.zeros(n_eval)
    done = 0
    while done < mc_cfg.n_blocks:
        m = min(_BLOCK_CHUNK, mc_cfg.n_blocks - done)
        zsq, _, xsq = _lag_blocks(gamma0, m, mc_cfg.trunc + 1, 100, rng)
        sz = zsq @ powers
        sx = xsq @ powers
        sum_zx += sz.T @ sx
        sum_xx += sx.T @ sx
        sum_x += sx.sum(axis=0)
        done += m
    c0 = 1.0
    ks = KernelSet(
        gamma0=gamma0,
        pi_grid=pi_grid,
        eval_points=eval_points,
        c0=c0,
        H_tab=np.empty((pi_grid.size, 3, 3)),
        K_tab=np.empty((pi_grid.size, 3, 2)),
        mc_meta=mc_cfg,
        m_zx=sum_zx / mc_cfg.n_blocks,
        m_xx=sum_xx / mc_cfg.n_blocks,
        m_x=sum_x / mc_cfg.n_blocks,
    )
    for g, pi in enumerate(pi_grid):
        ks.H_tab[g] = ks.omega_pair(pi, pi) / c0
    ks.K_tab = ks.k_for_pi0(th.pi)
    return ks


@dataclass(frozen=True)
class GPDraw:
    """One multiplier-method draw of the limit process on the grid."""

    index: int
    values: np.ndarray  # (n_grid, 3)


@dataclass
class GPDraws:
    """All draws, stored as one (J, n_grid, 3) array."""

    pi_grid: np.ndarray
    values: np.ndarray

    def __len__(self) -> int:
        return self.values.shape[0]

    def __getitem__(self, j: int) -> GPDraw:
        return GPDraw(j, self.values[j])

    def __iter__(self):
        return (self[j] for j in range(len(self)))


def _as_seedseq(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


def draw_gp(kernels: KernelSet, J: int, N: int, seed=0) -> GPDraws:
    """J multiplier-method draws of the limit process over the pi grid.

    One set of N regressor blocks is simulated per call; each draw then uses a
    fresh standard-normal multiplier vector from a stream derived from
    (seed, draw index), so draws are reproducible independently of chunking.
    """
    if J < 1 or N < 1:
        raise ValueError("J and N must be >= 1")
    root = _as_seedseq(seed)
    block_ss, mult_ss = root.spawn(2)
    rng = np.random.default_rng(block_ss)
    th = kernels.gamma0.theta
    trunc = kernels.mc_meta.trunc
    powers = np.power.outer(kernels.pi_grid, np.arange(trunc + 1)).T
    zsq, _, xsq = _lag_blocks(kernels.gamma0, N, trunc + 1, 100, rng)
    sz = zsq @ powers  # (N, G)
    sx = xsq @ powers
    n_grid = kernels.pi_grid.size
    R = np.empty((N, n_grid, 3))
    R[:, :, 0] = sz
    R[:, :, 1] = sx / th.zeta
    R[:, :, 2] = 1.0 / th.zeta
    Rf = R.reshape(N, 3 * n_grid)
    scale = np.sqrt(kernels.c0 / 2.0) / np.sqrt(N)

    child_seeds = mult_ss.spawn(J)
    values = np.empty((J, n_grid, 3))
    chunk = max(1, (1 << 23) // max(N, 1))
    for j0 in range(0, J, chunk):
        j1 = min(j0 + chunk, J)
        M = np.empty((j1 - j0, N))
        for j in range(j0, j1):
            M[j - j0] = np.random.default_rng(child_seeds[j]).standard_normal(N)
        values[j0:j1] = (M @ Rf).reshape(-1, n_grid, 3) * scale
    return GPDraws(pi_grid=kernels.pi_grid, values=values)


def _z_batch(
    g_values: np.ndarray, kernels: KernelSet, K_tab: np.ndarray, b: np.ndarray
) -> np.ndarray:
    """Z(pi) = -H(pi)^{-1} (G(pi) + K(pi, pi0) b) for a (J, G, 3) block of draws."""
    drift = K_tab @ b  # (G, 3)
    out = np.empty_like(g_values)
    for g in range(kernels.pi_grid.size):
        try:
            Hinv = np.linalg.inv(kernels.H_tab[g])
        except np.linalg.LinAlgError as exc:
            raise np.linalg.LinAlgError(
                f"H(pi) is singular at pi={kernels.pi_grid[g]}"
            ) from exc
        out[:, g, :] = -(g_values[:, g, :] + drift[g]) @ Hinv.T
    return out


def z_process(draw: GPDraw, kernels: KernelSet, pi0: float, b) -> np.ndarray:
    """Localized process Z(pi) = -H^{-1}(pi){G(pi) + K(pi, pi0) b} for one draw."""
    b = np.asarray(b, dtype=float)
    if b.shape != (2,) or not np.all(np.isfinite(b)):
        raise ParameterError("b must be a finite 2-vector")
    K_tab = kernels.k_for_pi0(pi0)
    return _z_batch(draw.values[None, :, :], kernels, K_tab, b)[0]


def semi_strong_criterion(kernels: KernelSet, omega0) -> np.ndarray:
    """Limit of the rescaled concentrated criterion when ||b|| is infinite.

    Returns -(1/2) * omega0' K(pi, pi0)' H(pi)^{-1} K(pi, pi0) omega0 per grid
    point.  Its minimizer over pi identifies pi0; uniqueness is a numerical
    observation here, checked in the tests, not a proven property.
    """
    omega0 = np.asarray(omega0, dtype=float)
    out = np.empty(kernels.pi_grid.size)
    for g in range(kernels.pi_grid.size):
        v = kernels.K_tab[g] @ omega0
        out[g] = -0.5 * float(v @ np.linalg.solve(kernels.H_tab[g], v))
    return out


_CONE_FULL = Cone((HalfLine(0.0), HalfLine(0.0), Free()))
_CONE_RESTRICTED = Cone((HalfLine(0.0), Fixed(0.0), Free()))
_CONE_DAGGER = Cone((Fixed(0.0), Fixed(0.0), Free()))


def _beta_weight(H: np.ndarray, c0: float) -> np.ndarray:
    """(c0 * S_beta H^{-1} S_beta')^{-1}: the LR weight on the beta block."""
    Hinv = np.linalg.inv(H)
    return np.linalg.inv(c0 * Hinv[:2, :2])


@dataclass
class LimitDraws:
    """Per-draw limit realizations: estimator coordinates and both statistics."""

    pi_grid: np.ndarray
    pi_hat: np.ndarray      # with the flat-profile convention pi_hat = 1
    lam_hat: np.ndarray     # (J, 3) minimizer at the selected pi
    lr_dagger: np.ndarray
    lr: np.ndarray

    def __len__(self) -> int:
        return self.pi_hat.size

    def to_csv(self, path) -> None:
        import csv

        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["draw", "pi_hat", "lr_dagger", "lr"])
            for j in range(len(self)):
                writer.writerow(
                    [j, repr(float(self.pi_hat[j])), repr(float(self.lr_dagger[j])), repr(float(self.lr[j]))]
                )


def limit_draws(
    loc: LocalizationPoint, kernels: KernelSet, J: int, N: int, seed=0
) -> LimitDraws:
    """Simulate the joint weak-regime limit law of (pi_hat, lambda_hat, LR-dagger, LR).

    Both statistics are computed from the same process path within each draw,
    preserving their joint distribution.  pi_hat maximizes the concentrated
    criterion lambda' H lambda over the grid (smallest maximizer on ties) and
    is reported as 1 when the criterion is flat across the grid.
    """
    if not loc.is_weak:
        raise ParameterError("limit_draws requires finite localization b")
    if loc.gamma0 != kernels.gamma0:
        raise ParameterError("localization gamma0 does not match the kernel set")
    gp = draw_gp(kernels, J, N, seed)
    Z = _z_batch(gp.values, kernels, kernels.K_tab, loc.b)

    n_grid = kernels.pi_grid.size
    t_full = np.empty((J, n_grid))
    t_restr = np.empty((J, n_grid))
    crit = np.empty((J, n_grid))
    lam_store = np.empty((J, n_grid, 3))
    for g in range(n_grid):
        H = kernels.H_tab[g]
        W = _beta_weight(H, kernels.c0)
        lam, _ = solve_cone_qp_batch(H, Z[:, g, :], _CONE_FULL)
        lam_r, _ = solve_cone_qp_batch(H, Z[:, g, :], _CONE_RESTRICTED)
        lam_store[:, g, :] = lam
        t_full[:, g] = np.einsum("mi,ij,mj->m", lam[:, :2], W, lam[:, :2])
        t_restr[:, g] = np.einsum("mi,ij,mj->m", lam_r[:, :2], W, lam_r[:, :2])
        crit[:, g] = np.einsum("mi,ij,mj->m", lam, H, lam)

    lr_dagger = t_full.max(axis=1)
    lr = np.maximum(lr_dagger - t_restr.max(axis=1), 0.0)
    g_sel = crit.argmax(axis=1)
    flat = (crit.max(axis=1) - crit.min(axis=1)) < FLAT_TOL
    pi_hat = np.where(flat, 1.0, kernels.pi_grid[g_sel])
    lam_hat = lam_store[np.arange(J), g_sel, :]
    return LimitDraws(
        pi_grid=kernels.pi_grid,
        pi_hat=pi_hat,
        lam_hat=lam_hat,
        lr_dagger=lr_dagger,
        lr=lr,
    )


@dataclass
class WeakRejection:
    """Asymptotic rejection probabilities of the two-step and one-step tests."""

    rp_ts: float
    rp_s: float
    lr_dagger_crit: float  # simulated 1-alpha quantile of the b=0 first-step law
    cv: float              # 1-alpha quantile of max(0, Z)^2
    alpha: float
    draws: int


def rp_weak(
    loc: LocalizationPoint,
    kernels: KernelSet,
    J: int,
    N: int,
    seed=0,
    alpha: float = 0.05,
) -> WeakRejection:
    """Rejection probabilities of TS and S at localization ``loc``.

    The first-step critical value is the empirical 1-alpha quantile of the
    b = 0 law simulated from the same kernels with an independently derived
    seed; rerunning with the same seed reproduces the result bit for bit.
    """
    if not (0.0 < alpha < 0.5):
        raise ParameterError("alpha must lie in (0, 0.5)")
    root = _as_seedseq(seed)
    seed_alt, seed_null = root.spawn(2)
    draws_alt = limit_draws(loc, kernels, J, N, seed_alt)
    null_loc = LocalizationPoint(gamma0=loc.gamma0, b1=0.0, b2=0.0)
    draws_null = limit_draws(null_loc, kernels, J, N, seed_null)
    crit = float(np.quantile(draws_null.lr_dagger, 1.0 - alpha, method="inverted_cdf"))
    cv = float(norm.ppf(1.0 - alpha) ** 2)
    reject_s = draws_alt.lr > cv
    reject_ts = (draws_alt.lr_dagger > crit) & reject_s
    return WeakRejection(
        rp_ts=float(reject_ts.mean()),
        rp_s=float(reject_s.mean()),
        lr_dagger_crit=crit,
        cv=cv,
        alpha=alpha,
        draws=J,
    )
