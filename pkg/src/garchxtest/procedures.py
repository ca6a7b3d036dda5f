"""Decision procedures: two-step (TS), one-step (S), and LR with PI-LF critical value."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .critvals import CritConfig, PilfResult, cv_lr_dagger, cv_maxz, cv_pilf, with_alpha
from .model import Dataset, ParamSpace
from .qmle import FitBundle, fit_bundle


@dataclass
class TsResult:
    reject: bool
    lr_dagger: float
    lr: float
    cv1: float  # simulated first-step quantile
    cv2: float  # max(0, Z)^2 quantile
    alpha: float

    def to_dict(self) -> dict:
        return {
            "procedure": "ts",
            "reject": self.reject,
            "lr_dagger": self.lr_dagger,
            "lr": self.lr,
            "cv1": self.cv1,
            "cv2": self.cv2,
            "alpha": self.alpha,
        }


@dataclass
class SResult:
    reject: bool
    lr: float
    cv: float
    alpha: float

    def to_dict(self) -> dict:
        return {
            "procedure": "s",
            "reject": self.reject,
            "lr": self.lr,
            "cv": self.cv,
            "alpha": self.alpha,
        }


@dataclass
class LrLfResult:
    reject: bool
    lr: float
    cv_pilf: float
    components: PilfResult
    alpha: float

    def to_dict(self) -> dict:
        return {
            "procedure": "lrlf",
            "reject": self.reject,
            "lr": self.lr,
            "cv_pilf": self.cv_pilf,
            "components": self.components.to_dict(),
            "alpha": self.alpha,
        }


def test_ts(
    data: Dataset,
    space: ParamSpace,
    cfg: CritConfig,
    alpha: float = 0.05,
    fits: FitBundle | None = None,
) -> TsResult:
    """Two-step procedure: gate on the joint-nullity statistic, then compare
    the covariate statistic against the max(0, Z)^2 quantile."""
    cfg = with_alpha(cfg, alpha)
    if fits is None:
        fits = fit_bundle(data, space, cfg.pi_grid)
    cv1 = cv_lr_dagger(data, fits.both_zero, cfg)
    cv2 = cv_maxz(alpha)
    reject = (fits.lr_dagger > cv1) and (fits.lr > cv2)
    return TsResult(reject, fits.lr_dagger, fits.lr, cv1, cv2, alpha)


def test_s(
    data: Dataset,
    space: ParamSpace,
    cfg: CritConfig,
    alpha: float = 0.05,
    fits: FitBundle | None = None,
) -> SResult:
    """One-step procedure that presumes the ARCH coefficient is interior."""
    cfg = with_alpha(cfg, alpha)
    if fits is None:
        fits = fit_bundle(data, space, cfg.pi_grid)
    cv = cv_maxz(alpha)
    return SResult(fits.lr > cv, fits.lr, cv, alpha)


def test_lrlf(
    data: Dataset,
    space: ParamSpace,
    cfg: CritConfig,
    alpha: float = 0.05,
    fits: FitBundle | None = None,
) -> LrLfResult:
    """Covariate LR test with the plug-in least favorable critical value."""
    cfg = with_alpha(cfg, alpha)
    if fits is None:
        fits = fit_bundle(data, space, cfg.pi_grid)
    pilf = cv_pilf(data, fits, cfg)
    return LrLfResult(fits.lr > pilf.value, fits.lr, pilf.value, pilf, alpha)


def report_json(result, path) -> None:
    """Write a single-dataset test report."""
    with open(path, "w") as fh:
        json.dump(result.to_dict(), fh, indent=2, default=_json_default)


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)!r}")
