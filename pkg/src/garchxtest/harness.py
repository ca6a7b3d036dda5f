"""Monte Carlo drivers: rejection-frequency tables, size lower bounds, and
plot-ready density exports.

Replication r of column c draws all of its randomness from streams derived
from (master_seed, c, r), so results are bitwise independent of the worker
count and of scheduling; aggregation is by counts only.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .critvals import CritConfig, combined_critical_values, cv_maxz, with_alpha
from .model import Dataset, ParamSpace, ThetaPoint, TrueConfig, simulate_dgp
from .qmle import FitError, fit_bundle
from .stronglimit import build_J, chibar_rp, rho_of_J
from .weaklimit import (
    KernelSet,
    LocalizationPoint,
    McConfig,
    build_kernels,
    limit_draws,
    rp_weak,
)

PROCEDURES = ("lr_dagger", "ts", "s", "lrlf")


@dataclass(frozen=True)
class ExperimentConfig:
    """One Monte Carlo cell: a dgp, sample size, and critical-value settings."""

    dgp: TrueConfig
    n: int = 500
    reps: int = 500
    alpha: float = 0.05
    burn_in: int = 100
    space: ParamSpace = ParamSpace()
    crit: CritConfig = CritConfig(j_draws=2_000)
    master_seed: int = 0
    workers: int = 1

    def __post_init__(self) -> None:
        if self.reps < 1:
            raise ValueError("reps must be >= 1")


def table1_dgp(column: int) -> TrueConfig:
    """The dgp of one column of the paper-style rejection-frequency table."""
    if column in (1, 2, 3, 4, 5, 6, 7, 8, 9):
        beta1 = {1: 0.0, 4: 0.05, 7: 0.1}[1 + 3 * ((column - 1) // 3)]
        beta2 = {0: 0.0, 1: 0.05, 2: 0.1}[(column - 1) % 3]
        return TrueConfig(ThetaPoint(beta1, beta2, 1.0, 0.2), varphi=0.5, kappa=0.0)
    if column == 10:
        return TrueConfig(ThetaPoint(0.11, 0.0, 1.0, 0.64), varphi=0.5, kappa=0.0)
    if column == 11:
        return TrueConfig(ThetaPoint(0.3, 0.0, 1.0, 0.0), varphi=0.0, kappa=0.99)
    raise ValueError(f"table has columns 1..11, got {column}")


def table1_experiment(
    column: int,
    reps: int = 500,
    n: int = 500,
    master_seed: int = 0,
    workers: int = 1,
    j_draws: int = 2_000,
    alpha: float = 0.05,
) -> ExperimentConfig:
    """Desk-scale experiment configuration for one table column."""
    return ExperimentConfig(
        dgp=table1_dgp(column),
        n=n,
        reps=reps,
        alpha=alpha,
        crit=CritConfig(alpha=alpha, j_draws=j_draws),
        master_seed=master_seed,
        workers=workers,
    )


def _rep_seed_pair(master_seed: int, column_key: int, rep: int):
    root = np.random.SeedSequence((master_seed, column_key, rep))
    return root.spawn(2)


def run_one_rep(exp: ExperimentConfig, column_key: int, rep: int) -> dict | None:
    """Simulate one dataset and evaluate all four decisions; None on fit failure."""
    seed_data, seed_cv = _rep_seed_pair(exp.master_seed, column_key, rep)
    data = simulate_dgp(exp.dgp, exp.n, exp.burn_in, seed=seed_data)
    cfg = replace(
        with_alpha(exp.crit, exp.alpha),
        seed=int(seed_cv.generate_state(1, np.uint64)[0]),
    )
    try:
        fits = fit_bundle(data, exp.space, cfg.pi_grid)
        cv1, pilf = combined_critical_values(data, fits, cfg)
    except FitError:
        return None
    cv2 = cv_maxz(exp.alpha)
    first_step = fits.lr_dagger > cv1
    s_reject = fits.lr > cv2
    return {
        "lr_dagger": first_step,
        "ts": first_step and s_reject,
        "s": s_reject,
        "lrlf": fits.lr > pilf.value,
    }


def _rep_range(args) -> list[dict | None]:
    exp, column_key, reps = args
    return [run_one_rep(exp, column_key, r) for r in reps]


@dataclass
class ColumnResult:
    label: str
    completed: int
    failed: int
    counts: dict[str, int]

    def rate(self, proc: str) -> float:
        return self.counts[proc] / self.completed

    def se(self, proc: str) -> float:
        p = self.rate(proc)
        return math.sqrt(p * (1.0 - p) / self.completed)


@dataclass
class TableResult:
    columns: list[ColumnResult]
    manifest: dict = field(default_factory=dict)

    CSV_HEADER = "column,procedure,reject_pct,se_pct,completed,failed"

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.CSV_HEADER + "\n")
            for col in self.columns:
                for proc in PROCEDURES:
                    fh.write(
                        f"{col.label},{proc},{100.0 * col.rate(proc):.2f},"
                        f"{100.0 * col.se(proc):.2f},{col.completed},{col.failed}\n"
                    )

    def write_manifest(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.manifest, fh, indent=2)


def run_table(experiments: dict[str, ExperimentConfig]) -> TableResult:
    """Rejection frequencies for every configured column.

    Replications failing inside the optimizer are dropped and counted; the run
    aborts if more than 1% of a column's replications fail.
    """
    columns: list[ColumnResult] = []
    for key, (label, exp) in enumerate(experiments.items()):
        results: list[dict | None] = []
        if exp.workers > 1:
            chunk = max(1, exp.reps // (4 * exp.workers))
            tasks = [
                (exp, key, list(range(r0, min(r0 + chunk, exp.reps))))
                for r0 in range(0, exp.reps, chunk)
            ]
            with ProcessPoolExecutor(max_workers=exp.workers) as pool:
                for part in pool.map(_rep_range, tasks):
                    results.extend(part)
        else:
            results = [run_one_rep(exp, key, r) for r in range(exp.reps)]
        done = [r for r in results if r is not None]
        failed = exp.reps - len(done)
        if failed > 0.01 * exp.reps:
            raise RuntimeError(
                f"column {label}: {failed}/{exp.reps} replications failed; aborting"
            )
        counts = {proc: sum(int(r[proc]) for r in done) for proc in PROCEDURES}
        columns.append(ColumnResult(label, len(done), failed, counts))
    manifest = {
        "experiments": {
            label: {
                "dgp": {
                    "beta1": exp.dgp.theta.beta1,
                    "beta2": exp.dgp.theta.beta2,
                    "zeta": exp.dgp.theta.zeta,
                    "pi": exp.dgp.theta.pi,
                    "varphi": exp.dgp.varphi,
                    "kappa": exp.dgp.kappa,
                },
                "n": exp.n,
                "reps": exp.reps,
                "alpha": exp.alpha,
                "burn_in": exp.burn_in,
                "j_draws": exp.crit.j_draws,
                "pi_grid": exp.crit.pi_grid.tolist(),
                "pi0_grid": exp.crit.pi0_grid.tolist(),
                "b1_grid": exp.crit.b1_grid.tolist(),
                "master_seed": exp.master_seed,
                "workers": exp.workers,
            }
            for label, exp in experiments.items()
        },
        "versions": _versions(),
    }
    return TableResult(columns, manifest)


def _versions() -> dict:
    import scipy

    from . import __version__

    return {"garchxtest": __version__, "numpy": np.__version__, "scipy": scipy.__version__}


@dataclass
class BoundsReport:
    """Asymptotic-size lower bounds for the two-step and one-step procedures."""

    rp_ts_weak: float
    rp_s_weak: float
    rho: float
    rp_strong: float
    bound_ts: float
    bound_s: float
    settings: dict

    def to_dict(self) -> dict:
        return {
            "rp_ts_weak": self.rp_ts_weak,
            "rp_s_weak": self.rp_s_weak,
            "rho": self.rho,
            "rp_strong": self.rp_strong,
            "bound_ts": self.bound_ts,
            "bound_s": self.bound_s,
            "settings": self.settings,
        }


def run_bounds(
    alpha: float = 0.05,
    J: int = 10_000,
    N: int = 2_000,
    kernel_blocks: int = 100_000,
    j_blocks: int = 100_000,
    grid_step: float = 0.05,
    pi_max: float = 0.9,
    seed: int = 0,
) -> BoundsReport:
    """Evaluate the certified rejection-probability lower bounds.

    Weak-regime points: (b1 = 0) and (b1 = 2.5, pi0 = 0.64), both with
    zeta = 1, varphi = 0.5, kappa = 0.  Strong-regime point: beta1 = 0.3,
    pi = 0, varphi = 0, kappa = 0.99, evaluated in closed form through rho.
    """
    root = np.random.SeedSequence(seed)
    s_kern, s_ts, s_s, s_j = root.spawn(4)
    gamma0 = TrueConfig(ThetaPoint(0.0, 0.0, 1.0, 0.64), varphi=0.5, kappa=0.0)
    grid = np.round(np.arange(0.0, pi_max + grid_step / 2.0, grid_step), 10)
    kernels = build_kernels(
        gamma0, grid, McConfig(n_blocks=kernel_blocks, seed=int(s_kern.generate_state(1)[0]))
    )
    point_ts = LocalizationPoint(gamma0=gamma0, b1=2.5)
    point_s = LocalizationPoint(gamma0=gamma0, b1=0.0)
    rp_ts = rp_weak(point_ts, kernels, J, N, seed=s_ts, alpha=alpha).rp_ts
    rp_s = rp_weak(point_s, kernels, J, N, seed=s_s, alpha=alpha).rp_s

    strong_gamma0 = TrueConfig(ThetaPoint(0.3, 0.0, 1.0, 0.0), varphi=0.0, kappa=0.99)
    jmat = build_J(
        strong_gamma0,
        (1.0, 0.0),
        McConfig(n_blocks=j_blocks, seed=int(s_j.generate_state(1)[0])),
    )
    rho = rho_of_J(jmat)
    rp_strong = chibar_rp(rho, alpha)
    settings = {
        "alpha": alpha,
        "J": J,
        "N": N,
        "kernel_blocks": kernel_blocks,
        "j_blocks": j_blocks,
        "grid_step": grid_step,
        "pi_max": pi_max,
        "seed": seed,
    }
    return BoundsReport(
        rp_ts_weak=rp_ts,
        rp_s_weak=rp_s,
        rho=rho,
        rp_strong=rp_strong,
        bound_ts=max(rp_ts, rp_strong),
        bound_s=max(rp_s, rp_strong),
        settings=settings,
    )


DENSITY_TARGETS = ("pi_hat", "beta1", "beta2", "zeta", "lr_dagger", "lr")


@dataclass(frozen=True)
class DensityConfig:
    """Settings for the finite-sample vs asymptotic draw export."""

    b1: float = 0.0
    n: int = 500
    reps: int = 2_000
    J: int = 10_000
    N: int = 2_000
    kernel_blocks: int = 100_000
    pi_true: float = 0.2
    varphi: float = 0.5
    kappa: float = 0.0
    zeta: float = 1.0
    grid_step: float = 0.05
    space: ParamSpace = ParamSpace()
    master_seed: int = 0
    workers: int = 1
    targets: tuple[str, ...] = DENSITY_TARGETS


def _density_rep(args) -> dict | None:
    cfg, reps = args
    beta1 = cfg.b1 / math.sqrt(cfg.n)
    dgp = TrueConfig(
        ThetaPoint(beta1, 0.0, cfg.zeta, cfg.pi_true), varphi=cfg.varphi, kappa=cfg.kappa
    )
    grid = np.round(np.arange(0.0, cfg.space.pi_max + cfg.grid_step / 2.0, cfg.grid_step), 10)
    out = []
    for rep in reps:
        seed_data, _ = _rep_seed_pair(cfg.master_seed, 0, rep)
        data = simulate_dgp(dgp, cfg.n, 100, seed=seed_data)
        try:
            fits = fit_bundle(data, cfg.space, grid)
        except FitError:
            out.append(None)
            continue
        th = fits.full.theta_hat
        rn = math.sqrt(cfg.n)
        out.append(
            {
                "pi_hat": fits.full.pi_hat,
                "beta1": rn * th.beta1,
                "beta2": rn * th.beta2,
                "zeta": rn * (th.zeta - cfg.zeta),
                "lr_dagger": fits.lr_dagger,
                "lr": fits.lr,
            }
        )
    return out


@dataclass
class DensityExport:
    """Raw draw pairs per target plus the distribution-distance diagnostics."""

    finite: dict[str, np.ndarray]
    asymptotic: dict[str, np.ndarray]
    ks_distance: dict[str, float]
    failed_reps: int

    def to_csv_dir(self, out_dir) -> None:
        import csv
        import os

        os.makedirs(out_dir, exist_ok=True)
        for target in self.finite:
            path = os.path.join(out_dir, f"density_{target}.csv")
            fin = self.finite[target]
            asy = self.asymptotic[target]
            with open(path, "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["finite", "asymptotic"])
                for i in range(max(fin.size, asy.size)):
                    writer.writerow(
                        [
                            repr(float(fin[i])) if i < fin.size else "",
                            repr(float(asy[i])) if i < asy.size else "",
                        ]
                    )


def export_densities(cfg: DensityConfig) -> DensityExport:
    """Finite-sample and limit draws of the estimator and statistics.

    The finite-sample column simulates datasets at beta1 = b1/sqrt(n) and
    refits each; the asymptotic column reuses the weak-regime limit draws.
    Draws are raw (histogram-ready), not binned.
    """
    root = np.random.SeedSequence((cfg.master_seed, 1))
    s_kern, s_draws = root.spawn(2)
    gamma0 = TrueConfig(
        ThetaPoint(0.0, 0.0, cfg.zeta, cfg.pi_true), varphi=cfg.varphi, kappa=cfg.kappa
    )
    grid = np.round(np.arange(0.0, cfg.space.pi_max + cfg.grid_step / 2.0, cfg.grid_step), 10)
    kernels = build_kernels(
        gamma0, grid, McConfig(n_blocks=cfg.kernel_blocks, seed=int(s_kern.generate_state(1)[0]))
    )
    draws = limit_draws(
        LocalizationPoint(gamma0=gamma0, b1=cfg.b1), kernels, cfg.J, cfg.N, seed=s_draws
    )
    asymptotic = {
        "pi_hat": draws.pi_hat,
        "beta1": draws.lam_hat[:, 0],
        "beta2": draws.lam_hat[:, 1],
        "zeta": draws.lam_hat[:, 2],
        "lr_dagger": draws.lr_dagger,
        "lr": draws.lr,
    }

    rep_ids = list(range(cfg.reps))
    if cfg.workers > 1:
        chunk = max(1, cfg.reps // (4 * cfg.workers))
        tasks = [(cfg, rep_ids[r0 : r0 + chunk]) for r0 in range(0, cfg.reps, chunk)]
        rows: list[dict | None] = []
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            for part in pool.map(_density_rep, tasks):
                rows.extend(part)
    else:
        rows = _density_rep((cfg, rep_ids))
    done = [r for r in rows if r is not None]
    finite = {t: np.array([r[t] for r in done]) for t in DENSITY_TARGETS}

    from scipy.stats import ks_2samp

    ks = {
        t: float(ks_2samp(finite[t], asymptotic[t]).statistic)
        for t in DENSITY_TARGETS
        if finite[t].size and asymptotic[t].size
    }
    keep = set(cfg.targets)
    return DensityExport(
        finite={t: v for t, v in finite.items() if t in keep},
        asymptotic={t: v for t, v in asymptotic.items() if t in keep},
        ks_distance={t: v for t, v in ks.items() if t in keep},
        failed_reps=cfg.reps - len(done),
    )
