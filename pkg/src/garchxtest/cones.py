"""Exact minimization of (lam - Z)' H (lam - Z) over axis-aligned cones.

Every limit distribution in this package is the image of a Gaussian vector
under such a projection, with per-coordinate feasible sets that are either a
fixed point, a half-line [lower, inf), or the whole real line.  At dimension
<= 4 the global minimum is found exactly by enumerating the 2^k boundary
patterns of the k half-line coordinates and solving a small linear system for
each; ties are resolved toward the pattern with the fewest active constraints.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

_FEAS_TOL = 1e-9
_TIE_TOL = 1e-12


@dataclass(frozen=True)
class Fixed:
    value: float


@dataclass(frozen=True)
class HalfLine:
    lower: float


@dataclass(frozen=True)
class Free:
    pass


CoordSpec = Fixed | HalfLine | Free


@dataclass(frozen=True)
class Cone:
    """Product of per-coordinate feasible sets."""

    coords: tuple[CoordSpec, ...]

    def __post_init__(self) -> None:
        for c in self.coords:
            if isinstance(c, Fixed) and not np.isfinite(c.value):
                raise ValueError("Fixed coordinate values must be finite")
            if isinstance(c, HalfLine) and not np.isfinite(c.lower):
                raise ValueError("HalfLine lower bounds must be finite")

    @property
    def dim(self) -> int:
        return len(self.coords)

    @classmethod
    def from_lower_bounds(cls, lowers) -> "Cone":
        """Half-line coordinates with the given lower bounds; None means free,
        -inf is treated as free."""
        specs: list[CoordSpec] = []
        for lb in lowers:
            if lb is None or lb == -np.inf:
                specs.append(Free())
            else:
                specs.append(HalfLine(float(lb)))
        return cls(tuple(specs))

    def enlarge(self, i: int) -> "Cone":
        """Relax coordinate i one notch (Fixed -> HalfLine at the same value,
        HalfLine -> Free); used by the monotonicity tests."""
        spec = self.coords[i]
        new: CoordSpec
        if isinstance(spec, Fixed):
            new = HalfLine(spec.value)
        elif isinstance(spec, HalfLine):
            new = Free()
        else:
            new = spec
        return Cone(self.coords[:i] + (new,) + self.coords[i + 1 :])


@dataclass
class QpSolution:
    minimizer: np.ndarray
    value: float
    active_set: tuple[bool, ...]
    degenerate: bool = False


@dataclass(frozen=True)
class _Pattern:
    """One boundary pattern: which coordinates are pinned, and the linear maps
    that produce the candidate minimizer and its objective value from Z."""

    pinned: tuple[int, ...]
    free: tuple[int, ...]
    pinned_values: np.ndarray
    solve_map: np.ndarray  # lam_free = Z_free - solve_map @ (pinned_values - Z_pinned)
    schur: np.ndarray      # value = v' schur v with v = pinned_values - Z_pinned
    free_lowers: np.ndarray
    free_is_half: np.ndarray
    degenerate: bool


def _compile_patterns(H: np.ndarray, cone: Cone) -> list[_Pattern]:
    d = cone.dim
    if H.shape != (d, d):
        raise ValueError("H and cone dimensions disagree")
    fixed_idx = [i for i, c in enumerate(cone.coords) if isinstance(c, Fixed)]
    half_idx = [i for i, c in enumerate(cone.coords) if isinstance(c, HalfLine)]
    patterns: list[_Pattern] = []
    for k in range(len(half_idx) + 1):
        for active in combinations(half_idx, k):
            pinned = tuple(sorted(fixed_idx + list(active)))
            free = tuple(i for i in range(d) if i not in pinned)
            vals = np.array(
                [
                    cone.coords[i].value if isinstance(cone.coords[i], Fixed)
                    else cone.coords[i].lower
                    for i in pinned
                ]
            )
            Hff = H[np.ix_(free, free)]
            Hfp = H[np.ix_(free, pinned)]
            degenerate = False
            if free:
                try:
                    solve_map = np.linalg.solve(Hff, Hfp)
                except np.linalg.LinAlgError:
                    solve_map = np.linalg.pinv(Hff) @ Hfp
                    degenerate = True
            else:
                solve_map = np.zeros((0, len(pinned)))
            schur = H[np.ix_(pinned, pinned)] - Hfp.T @ solve_map
            free_lowers = np.array(
                [
                    cone.coords[i].lower if isinstance(cone.coords[i], HalfLine) else -np.inf
                    for i in free
                ]
            )
            patterns.append(
                _Pattern(
                    pinned=pinned,
                    free=free,
                    pinned_values=vals,
                    solve_map=solve_map,
                    schur=schur,
                    free_lowers=free_lowers,
                    free_is_half=np.isfinite(free_lowers),
                    degenerate=degenerate,
                )
            )
    # fewest active constraints first so that value ties keep the least-pinned pattern
    patterns.sort(key=lambda p: len(p.pinned))
    return patterns


def solve_cone_qp(H: np.ndarray, Z: np.ndarray, cone: Cone) -> QpSolution:
    """Global minimizer of (lam - Z)' H (lam - Z) over the cone.

    H must be symmetric positive semidefinite and positive definite on every
    free subspace that matters; if a candidate subsystem is singular the solve
    falls back to the pseudo-inverse and the solution is flagged degenerate.
    """
    H = np.asarray(H, dtype=float)
    Z = np.asarray(Z, dtype=float)
    scale = max(1.0, float(np.abs(Z).max(initial=0.0)))
    best: QpSolution | None = None
    for pat in _compile_patterns(H, cone):
        lam = np.empty(cone.dim)
        v = pat.pinned_values - Z[list(pat.pinned)]
        if pat.pinned:
            lam[list(pat.pinned)] = pat.pinned_values
        if pat.free:
            lam_free = Z[list(pat.free)] - pat.solve_map @ v
            if np.any(lam_free[pat.free_is_half] < pat.free_lowers[pat.free_is_half] - _FEAS_TOL * scale):
                continue
            lam[list(pat.free)] = np.maximum(lam_free, pat.free_lowers)
        value = float(v @ pat.schur @ v)
        if best is None or value < best.value - _TIE_TOL * max(1.0, abs(best.value)):
            active = tuple(i in pat.pinned for i in range(cone.dim))
            best = QpSolution(lam, value, active, degenerate=pat.degenerate)
    assert best is not None  # the all-pinned pattern is always feasible
    return best


class CompiledCone:
    """Boundary patterns of one (H, cone) pair, precompiled for batched solves.

    The draw loops project many Gaussian vectors against the same metric; the
    linear maps per pattern depend only on (H, cone), so they are factored out.
    """

    def __init__(self, H: np.ndarray, cone: Cone):
        self.dim = cone.dim
        self.patterns = _compile_patterns(np.asarray(H, dtype=float), cone)

    def solve(self, Z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Minimizers and values for a (m, d) batch of centers Z."""
        Z = np.asarray(Z, dtype=float)
        m, d = Z.shape
        n_pat = len(self.patterns)
        values = np.full((m, n_pat), np.inf)
        lams = np.empty((m, n_pat, d))
        for j, pat in enumerate(self.patterns):
            pin = list(pat.pinned)
            fre = list(pat.free)
            v = pat.pinned_values[None, :] - Z[:, pin]
            lam = np.empty((m, d))
            if pin:
                lam[:, pin] = pat.pinned_values
            feasible = np.ones(m, dtype=bool)
            if fre:
                lam_free = Z[:, fre] - v @ pat.solve_map.T
                if pat.free_is_half.any():
                    half = pat.free_is_half
                    lows = pat.free_lowers[half]
                    feasible = np.all(lam_free[:, half] >= lows - _FEAS_TOL, axis=1)
                    lam_free = np.maximum(lam_free, pat.free_lowers)
                lam[:, fre] = lam_free
            val = np.einsum("mp,pq,mq->m", v, pat.schur, v) if pin else np.zeros(m)
            values[:, j] = np.where(feasible, val, np.inf)
            lams[:, j, :] = lam
        pick = values.argmin(axis=1)
        return lams[np.arange(m), pick, :], values[np.arange(m), pick]

    def solve_values(self, Z: np.ndarray) -> np.ndarray:
        """Minimum objective values only; skips materializing the minimizers."""
        Z = np.asarray(Z, dtype=float)
        m = Z.shape[0]
        best = np.full(m, np.inf)
        for pat in self.patterns:
            pin = list(pat.pinned)
            if not pin:
                if pat.free_is_half.any():
                    half = np.flatnonzero(pat.free_is_half)
                    cols = [pat.free[i] for i in half]
                    feasible = np.all(
                        Z[:, cols] >= pat.free_lowers[half] - _FEAS_TOL, axis=1
                    )
                    best = np.where(feasible, 0.0, best)
                else:
                    best[:] = 0.0
                continue
            v = pat.pinned_values[None, :] - Z[:, pin]
            val = np.einsum("mp,pq,mq->m", v, pat.schur, v)
            if pat.free:
                lam_free = Z[:, list(pat.free)] - v @ pat.solve_map.T
                if pat.free_is_half.any():
                    half = pat.free_is_half
                    feasible = np.all(
                        lam_free[:, half] >= pat.free_lowers[half] - _FEAS_TOL, axis=1
                    )
                    val = np.where(feasible, val, np.inf)
            best = np.minimum(best, val)
        return best


def solve_cone_qp_batch(
    H: np.ndarray, Z: np.ndarray, cone: Cone
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized :func:`solve_cone_qp` for Z of shape (m, d) and shared H."""
    return CompiledCone(H, cone).solve(Z)


def grid_oracle(
    H: np.ndarray, Z: np.ndarray, cone: Cone, half_width: float, steps: int
) -> QpSolution:
    """Brute-force minimum of the quadratic over a lattice covering the cone.

    Each coordinate is discretized with ``steps`` points on the feasible part
    of [Z_i - half_width, Z_i + half_width]; intended as an independent test
    oracle, not for production use.
    """
    if steps < 10:
        raise ValueError("steps must be >= 10")
    H = np.asarray(H, dtype=float)
    Z = np.asarray(Z, dtype=float)
    axes = []
    for i, spec in enumerate(cone.coords):
        if isinstance(spec, Fixed):
            axes.append(np.array([spec.value]))
        elif isinstance(spec, HalfLine):
            lo = max(spec.lower, Z[i] - half_width)
            hi = max(spec.lower, Z[i] + half_width)
            axes.append(np.linspace(lo, hi, steps))
        else:
            axes.append(np.linspace(Z[i] - half_width, Z[i] + half_width, steps))
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    diff = pts - Z
    vals = np.einsum("mi,ij,mj->m", diff, H, diff)
    k = int(vals.argmin())
    lam = pts[k]
    active = tuple(
        isinstance(spec, Fixed)
        or (isinstance(spec, HalfLine) and lam[i] == spec.lower)
        for i, spec in enumerate(cone.coords)
    )
    return QpSolution(lam, float(vals[k]), active)


def kkt_residual(H: np.ndarray, Z: np.ndarray, cone: Cone, lam: np.ndarray) -> float:
    """Largest violation of the KKT conditions at lam (0 means exact).

    Checks feasibility, zero gradient on free/inactive coordinates, and
    nonnegative gradient at active lower bounds.
    """
    H = np.asarray(H, dtype=float)
    grad = 2.0 * H @ (np.asarray(lam, dtype=float) - np.asarray(Z, dtype=float))
    worst = 0.0
    for i, spec in enumerate(cone.coords):
        if isinstance(spec, Fixed):
            worst = max(worst, abs(lam[i] - spec.value))
        elif isinstance(spec, HalfLine):
            worst = max(worst, spec.lower - lam[i])
            if lam[i] > spec.lower + 1e-9:
                worst = max(worst, abs(grad[i]))
            else:
                worst = max(worst, -grad[i])
        else:
            worst = max(worst, abs(grad[i]))
    return float(worst)
