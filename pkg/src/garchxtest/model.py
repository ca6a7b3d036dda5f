"""GARCH-X(1,1) data generating process, quasi log-likelihood, and score pieces.

The model is ``y_t = sqrt(h_t) * z_t`` with conditional variance

    h_t = zeta*(1-pi) + beta1*y_{t-1}^2 + pi*h_{t-1} + beta2*x_{t-1}^2,
    h_0 = zeta,

where the covariate x follows an AR(1) with coefficient ``varphi`` and the
innovation pair (z, eps) is bivariate standard normal with correlation
``kappa``.  Unrolling the recursion gives the equivalent closed form

    h_t = zeta + beta1 * sum_i pi^i y_{t-i-1}^2 + beta2 * sum_i pi^i x_{t-i-1}^2,

which is what every derivative and kernel computation in this package is
built from.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter


class ParameterError(ValueError):
    """A parameter value lies outside its admissible domain."""


@dataclass(frozen=True)
class ParamSpace:
    """Box optimization space for theta = (beta1, beta2, zeta, pi)."""

    beta1_max: float = 1.0
    beta2_max: float = 1.0
    zeta_min: float = 0.05
    zeta_max: float = 20.0
    pi_max: float = 0.9

    def __post_init__(self) -> None:
        if not (0.0 < self.zeta_min < self.zeta_max < math.inf):
            raise ParameterError("require 0 < zeta_min < zeta_max < inf")
        if not (0.0 < self.pi_max < 1.0):
            raise ParameterError("require 0 < pi_max < 1")
        if self.beta1_max <= 0.0 or self.beta2_max <= 0.0:
            raise ParameterError("beta bounds must be positive")

    def contains(self, theta: "ThetaPoint") -> bool:
        return (
            0.0 <= theta.beta1 <= self.beta1_max
            and 0.0 <= theta.beta2 <= self.beta2_max
            and self.zeta_min <= theta.zeta <= self.zeta_max
            and 0.0 <= theta.pi <= self.pi_max
        )

    def clip_zeta(self, value: float) -> float:
        return min(max(value, self.zeta_min), self.zeta_max)


@dataclass(frozen=True)
class ThetaPoint:
    """Model parameter theta = (beta1, beta2, zeta, pi)."""

    beta1: float
    beta2: float
    zeta: float
    pi: float

    def __post_init__(self) -> None:
        if self.beta1 < 0.0 or self.beta2 < 0.0:
            raise ParameterError("beta1 and beta2 must be nonnegative")
        if self.zeta <= 0.0:
            raise ParameterError("zeta must be positive")
        if not (0.0 <= self.pi < 1.0):
            raise ParameterError("pi must lie in [0, 1)")

    @property
    def psi(self) -> np.ndarray:
        """The always-identified block (beta1, beta2, zeta)."""
        return np.array([self.beta1, self.beta2, self.zeta])


@dataclass(frozen=True)
class TrueConfig:
    """A data generating configuration: theta plus the covariate law.

    ``varphi`` is the AR(1) coefficient of x and ``kappa`` the correlation
    between the volatility innovation z_t and the covariate innovation eps_t.
    """

    theta: ThetaPoint
    varphi: float = 0.0
    kappa: float = 0.0

    def __post_init__(self) -> None:
        if not abs(self.varphi) < 1.0:
            raise ParameterError("varphi must satisfy |varphi| < 1")
        if not abs(self.kappa) <= 1.0:
            raise ParameterError("kappa must satisfy |kappa| <= 1")


@dataclass(frozen=True)
class Dataset:
    """Observed series y_1..y_n, x_1..x_n plus the presample pair (y_0, x_0)."""

    y: np.ndarray
    x: np.ndarray
    y0: float = 0.0
    x0: float = 0.0

    def __post_init__(self) -> None:
        y = np.asarray(self.y, dtype=float)
        x = np.asarray(self.x, dtype=float)
        if y.ndim != 1 or x.ndim != 1 or y.shape != x.shape or y.size < 1:
            raise ParameterError("y and x must be 1-d arrays of equal length >= 1")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "x", x)

    @property
    def n(self) -> int:
        return self.y.size

    def lagged_squares(self) -> tuple[np.ndarray, np.ndarray]:
        """Arrays (w, v) with w[k] = y_k^2, v[k] = x_k^2 for k = 0..n-1.

        Index k is the lag driver for time t = k + 1, so w[0] holds the
        presample square y_0^2.
        """
        w = np.empty(self.n)
        v = np.empty(self.n)
        w[0] = self.y0**2
        v[0] = self.x0**2
        w[1:] = self.y[:-1] ** 2
        v[1:] = self.x[:-1] ** 2
        return w, v

    def to_csv(self, path) -> None:
        """Write rows t=0..n with header ``t,y,x`` (row 0 is the presample)."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "y", "x"])
            writer.writerow([0, repr(float(self.y0)), repr(float(self.x0))])
            for t in range(self.n):
                writer.writerow([t + 1, repr(float(self.y[t])), repr(float(self.x[t]))])

    @classmethod
    def from_csv(cls, path) -> "Dataset":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if [c.strip() for c in header] != ["t", "y", "x"]:
                raise ParameterError(f"expected header 't,y,x', got {header!r}")
            rows = [(float(r[1]), float(r[2])) for r in reader]
        if len(rows) < 2:
            raise ParameterError("dataset needs a presample row and at least one observation")
        ys, xs = zip(*rows)
        return cls(y=np.array(ys[1:]), x=np.array(xs[1:]), y0=ys[0], x0=xs[0])


def simulate_paths(
    cfg: TrueConfig, n_steps: int, n_paths: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Simulate ``n_paths`` independent model paths from zero starts.

    Returns time-major arrays (z, y, x), each of shape (n_paths, n_steps).
    Starting values are y_0 = x_0 = 0 and h_0 = zeta.
    """
    th = cfg.theta
    z_out = np.empty((n_paths, n_steps))
    y_out = np.empty((n_paths, n_steps))
    x_out = np.empty((n_paths, n_steps))
    mix = math.sqrt(1.0 - cfg.kappa**2)
    x = np.zeros(n_paths)
    y = np.zeros(n_paths)
    h = np.full(n_paths, th.zeta)
    base = th.zeta * (1.0 - th.pi)
    for s in range(n_steps):
        u1 = rng.standard_normal(n_paths)
        u2 = rng.standard_normal(n_paths)
        z = u1
        eps = cfg.kappa * u1 + mix * u2
        h = base + th.beta1 * y**2 + th.pi * h + th.beta2 * x**2
        y = np.sqrt(h) * z
        x = cfg.varphi * x + eps
        z_out[:, s] = z
        y_out[:, s] = y
        x_out[:, s] = x
    return z_out, y_out, x_out


def simulate_dgp(cfg: TrueConfig, n: int, burn_in: int = 100, seed: int = 0) -> Dataset:
    """Draw one dataset of ``n`` observations after ``burn_in`` discarded steps.

    The presample pair (y_0, x_0) is the last burn-in value, so the returned
    dataset is exactly what a recursion started inside a longer realization
    would see.  Bit-reproducible for a given ``seed``.
    """
    if n < 1:
        raise ParameterError("n must be >= 1")
    if burn_in < 0:
        raise ParameterError("burn_in must be >= 0")
    rng = np.random.default_rng(seed)
    _, y, x = simulate_paths(cfg, burn_in + n + 1, 1, rng)
    y = y[0]
    x = x[0]
    return Dataset(y=y[burn_in + 1 :], x=x[burn_in + 1 :], y0=y[burn_in], x0=x[burn_in])


def geometric_sums(driver: np.ndarray, pi: float, trunc: int | None = None) -> np.ndarray:
    """S[k] = sum_{i=0}^{min(trunc, k)} pi^i * driver[k-i] for k = 0..len-1.

    With driver[k] = y_k^2 this is the lagged geometric sum entering h_{k+1},
    truncated to ``trunc`` lags (None means all available lags).
    """
    driver = np.asarray(driver, dtype=float)
    n = driver.size
    if trunc is None or trunc >= n - 1:
        return lfilter([1.0], [1.0, -pi], driver)
    kernel = pi ** np.arange(trunc + 1)
    return lfilter(kernel, [1.0], driver)


def slope_sums(driver: np.ndarray, pi: float, trunc: int | None = None) -> np.ndarray:
    """T[k] = sum_{i=1}^{min(trunc, k)} i * pi^(i-1) * driver[k-i].

    This is d/dpi of :func:`geometric_sums` and the fourth component of the
    reparametrized score direction.
    """
    driver = np.asarray(driver, dtype=float)
    n = driver.size
    if trunc is None or trunc >= n - 1:
        s = lfilter([1.0], [1.0, -pi], driver)
        out = np.empty(n)
        out[0] = 0.0
        out[1:] = lfilter([1.0], [1.0, -pi], s[:-1])
        return out
    idx = np.arange(trunc + 1, dtype=float)
    kernel = idx * pi ** np.maximum(idx - 1.0, 0.0)
    kernel[0] = 0.0
    return lfilter(kernel, [1.0], driver)


def h_path(theta: ThetaPoint, data: Dataset) -> np.ndarray:
    """Conditional variance path h_1..h_n of the recursion with h_0 = zeta.

    Evaluated through the unrolled form zeta + beta1*S_y + beta2*S_x, which is
    algebraically identical to the recursion and keeps h exactly equal to zeta
    (and exactly pi-invariant) when both betas vanish.
    """
    w, v = data.lagged_squares()
    h = theta.zeta + theta.beta1 * geometric_sums(w, theta.pi) + theta.beta2 * geometric_sums(
        v, theta.pi
    )
    return h


def neg_loglik(theta: ThetaPoint, data: Dataset) -> float:
    """Gaussian quasi negative log-likelihood Q_n, averaged over t = 1..n."""
    h = h_path(theta, data)
    if not np.all(np.isfinite(h)) or np.any(h <= 0.0):
        raise FloatingPointError("conditional variance path left the positive reals")
    val = 0.5 * math.log(2.0 * math.pi) + 0.5 * np.log(h) + data.y**2 / (2.0 * h)
    return float(val.mean())


def dh_dpsi(pi: float, data: Dataset, trunc: int | None = None) -> np.ndarray:
    """Score direction dh/d(beta1, beta2, zeta) as an (n, 3) array.

    Row t-1 holds (sum_i pi^i y_{t-i-1}^2, sum_i pi^i x_{t-i-1}^2, 1) with the
    sum window capped at min(trunc, t-1).
    """
    w, v = data.lagged_squares()
    out = np.empty((data.n, 3))
    out[:, 0] = geometric_sums(w, pi, trunc)
    out[:, 1] = geometric_sums(v, pi, trunc)
    out[:, 2] = 1.0
    return out


def tau_vector(
    omega: np.ndarray, pi: float, data: Dataset, trunc: int | None = None
) -> np.ndarray:
    """Rescaled full score direction (n, 4): dh/dpsi plus the pi-slope term.

    ``omega`` is the unit direction of beta; the fourth column is
    sum_i i*pi^(i-1) * (omega1*y^2 + omega2*x^2)_{t-i-1}.
    """
    omega = np.asarray(omega, dtype=float)
    if omega.shape != (2,) or not math.isclose(float(omega @ omega), 1.0, rel_tol=1e-8):
        raise ParameterError("omega must be a unit 2-vector")
    w, v = data.lagged_squares()
    out = np.empty((data.n, 4))
    out[:, :3] = dh_dpsi(pi, data, trunc)
    out[:, 3] = slope_sums(omega[0] * w + omega[1] * v, pi, trunc)
    return out


def c_hat(theta: ThetaPoint, data: Dataset, variant: str = "ratio") -> float:
    """Estimate c_0 = E(z^4 - 1)/2 from standardized residuals.

    ``ratio`` averages ((y^2/h - 1)^2)/2; ``alt`` uses (mean(y^4/h^2) - 1)/2.
    """
    h = h_path(theta, data)
    r = data.y**2 / h
    if variant == "ratio":
        return float(np.mean((r - 1.0) ** 2) / 2.0)
    if variant == "alt":
        return float((np.mean(r**2) - 1.0) / 2.0)
    raise ValueError(f"unknown c_hat variant {variant!r}")


def read_config_file(path) -> dict[str, str]:
    """Parse a flat ``key = value`` text file (``#`` starts a comment)."""
    out: dict[str, str] = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
            key, val = line.split("=", 1)
            out[key.strip()] = val.strip()
    return out


def config_from_mapping(values: dict[str, str]) -> TrueConfig:
    """Build a TrueConfig from string key-value pairs.

    Recognized keys: beta1, beta2, zeta, pi, varphi, kappa (all optional,
    defaulting to the null model beta1 = beta2 = 0, zeta = 1, pi = 0).
    """
    def get(key: str, default: float) -> float:
        return float(values.get(key, default))

    theta = ThetaPoint(
        beta1=get("beta1", 0.0), beta2=get("beta2", 0.0),
        zeta=get("zeta", 1.0), pi=get("pi", 0.0),
    )
    return TrueConfig(theta=theta, varphi=get("varphi", 0.0), kappa=get("kappa", 0.0))
