"""Tests of exogenous-covariate relevance in GARCH-X models.

Implements the quasi-likelihood estimation, cone-projected limit laws,
simulated and closed-form critical values, and Monte Carlo harnesses needed
to run and study the two-step, one-step, and least-favorable covariate tests
when the ARCH and GARCH parameters may sit on the boundary or be weakly
identified.
"""

__version__ = "0.1.0"

from .cones import Cone, Fixed, Free, HalfLine, QpSolution, grid_oracle, solve_cone_qp
from .critvals import (
    CritConfig,
    PilfResult,
    cv_lr_dagger,
    cv_lr_finite_b,
    cv_lr_infty,
    cv_maxz,
    cv_pilf,
)
from .harness import (
    BoundsReport,
    DensityConfig,
    ExperimentConfig,
    TableResult,
    export_densities,
    run_bounds,
    run_table,
    table1_dgp,
    table1_experiment,
)
from .model import (
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
    tau_vector,
)
from .procedures import test_lrlf, test_s, test_ts
from .qmle import FitBundle, FitError, FitResult, fit_bundle, fit_profile, lr_dagger_stat, lr_stat
from .stronglimit import (
    JMatrix,
    build_J,
    chibar_quantile,
    chibar_rp,
    lr_infty_draws,
    q_of_rho,
    rho_of_J,
)
from .weaklimit import (
    GPDraw,
    GPDraws,
    KernelSet,
    LimitDraws,
    LocalizationPoint,
    McConfig,
    build_kernels,
    draw_gp,
    limit_draws,
    rp_weak,
    z_process,
)

__all__ = [
    "Cone",
    "Fixed",
    "Free",
    "HalfLine",
    "QpSolution",
    "grid_oracle",
    "solve_cone_qp",
    "CritConfig",
    "PilfResult",
    "cv_lr_dagger",
    "cv_lr_finite_b",
    "cv_lr_infty",
    "cv_maxz",
    "cv_pilf",
    "BoundsReport",
    "DensityConfig",
    "ExperimentConfig",
    "TableResult",
    "export_densities",
    "run_bounds",
    "run_table",
    "table1_dgp",
    "table1_experiment",
    "Dataset",
    "ParameterError",
    "ParamSpace",
    "ThetaPoint",
    "TrueConfig",
    "c_hat",
    "dh_dpsi",
    "h_path",
    "neg_loglik",
    "simulate_dgp",
    "tau_vector",
    "test_lrlf",
    "test_s",
    "test_ts",
    "FitBundle",
    "FitError",
    "FitResult",
    "fit_bundle",
    "fit_profile",
    "lr_dagger_stat",
    "lr_stat",
    "JMatrix",
    "build_J",
    "chibar_quantile",
    "chibar_rp",
    "lr_infty_draws",
    "q_of_rho",
    "rho_of_J",
    "GPDraw",
    "GPDraws",
    "KernelSet",
    "LimitDraws",
    "LocalizationPoint",
    "McConfig",
    "build_kernels",
    "draw_gp",
    "limit_draws",
    "rp_weak",
    "z_process",
]
