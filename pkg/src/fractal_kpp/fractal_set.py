r"""Symmetric Cantor prefractals, their coarse-grained mass and staircase.

The fractal time set is the attractor of the two-map iterated function system

.. math::

    w_0(t) = r t, \qquad w_1(t) = (1 - r) + r t, \qquad r = 2^{-1/\alpha},

so that :math:`2 r^\alpha = 1` and the Hausdorff dimension equals
:math:`\alpha`.  A generation-``n`` prefractal keeps the :math:`2^n` closed
intervals of length :math:`r^n` obtained after ``n`` subdivisions.  Each
retained interval carries the mass :math:`2^{-n}/\Gamma(\alpha + 1)`, spread
uniformly along it, which makes the staircase piecewise linear and flat on
every removed gap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ResourceError

MAX_GENERATION = 40
#: interval arrays beyond this size are refused (16 bytes per interval)
MAX_STORED_INTERVALS = 2**22
ENDPOINT_TOL = 1e-12


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not (0.0 < alpha <= 1.0) or not math.isfinite(alpha):
        raise DomainError(f"alpha must lie in (0, 1], got {alpha!r}")
    return alpha


@dataclass(frozen=True)
class CantorPrefractal:
    """Finite-generation approximation of the symmetric Cantor set :math:`C^\\alpha`."""

    alpha: float
    ratio: float
    generation: int
    #: shape ``(m, 2)`` array of closed, sorted, disjoint intervals in [0, 1]
    intervals: np.ndarray = field(repr=False, compare=False)
    support: tuple[float, float] = (0.0, 1.0)

    @property
    def total_mass(self) -> float:
        """:math:`S(1) = 1/\\Gamma(\\alpha + 1)`."""
        return 1.0 / math.gamma(self.alpha + 1.0)

    @property
    def n_intervals(self) -> int:
        return self.intervals.shape[0]

    @property
    def interval_length(self) -> float:
        return float(self.intervals[0, 1] - self.intervals[0, 0])

    @property
    def interval_mass(self) -> float:
        return self.total_mass / self.n_intervals

    @property
    def density(self) -> float:
        """Mass per unit length inside retained intervals (slope of the staircase)."""
        return self.interval_mass / self.interval_length

    def gaps(self) -> np.ndarray:
        """Maximal removed open intervals, shape ``(m - 1, 2)``."""
        iv = self.intervals
        return np.column_stack([iv[:-1, 1], iv[1:, 0]])

    def __contains__(self, t: float) -> bool:
        return bool(indicator(self, t))


def build_prefractal(alpha: float, generation: int = 5) -> CantorPrefractal:
    """Build the generation-``generation`` prefractal of dimension ``alpha``.

    For ``alpha == 1`` the set is the whole interval [0, 1] whatever the
    generation, stored as a single interval.
    """
    alpha = _check_alpha(alpha)
    if int(generation) != generation or generation < 0:
        raise DomainError(f"generation must be a non-negative integer, got {generation!r}")
    generation = int(generation)
    if generation > MAX_GENERATION:
        raise ResourceError(f"generation {generation} exceeds the limit {MAX_GENERATION}")

    ratio = 2.0 ** (-1.0 / alpha)
    if alpha == 1.0:
        intervals = np.array([[0.0, 1.0]])
        return CantorPrefractal(alpha, ratio, generation, _readonly(intervals))
    if 2**generation > MAX_STORED_INTERVALS:
        raise ResourceError(
            f"generation {generation} needs 2**{generation} intervals; "
            f"at most {MAX_STORED_INTERVALS} can be stored"
        )

    # left endpoint = sum_k d_k (1 - r) r^k, with d_0 the most significant binary digit
    lefts = np.zeros(1)
    for k in range(generation):
        shift = (1.0 - ratio) * ratio**k
        lefts = np.concatenate([lefts, lefts + shift])
    lefts = np.sort(lefts)
    length = ratio**generation
    intervals = np.column_stack([lefts, lefts + length])
    # pin the outermost endpoint exactly
    intervals[-1, 1] = 1.0
    return CantorPrefractal(alpha, ratio, generation, _readonly(intervals))


def _check_time(t, lo: float = 0.0, hi: float = 1.0) -> np.ndarray:
    arr = np.asarray(t, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr < lo - ENDPOINT_TOL) or np.any(arr > hi + ENDPOINT_TOL):
        raise DomainError(f"time outside [{lo}, {hi}]: {t!r}")
    return np.clip(arr, lo, hi)


def indicator(fset: CantorPrefractal, t):
    """Characteristic function of the prefractal; closed intervals, endpoints included.

    Returns an ``int`` for scalar input and an integer array otherwise.
    """
    tt = _check_time(t)
    iv = fset.intervals
    j = np.searchsorted(iv[:, 0], tt + ENDPOINT_TOL, side="right") - 1
    j = np.clip(j, 0, iv.shape[0] - 1)
    inside = (tt >= iv[j, 0] - ENDPOINT_TOL) & (tt <= iv[j, 1] + ENDPOINT_TOL)
    out = inside.astype(int)
    return int(out) if out.ndim == 0 else out


def _mass_from_zero(fset: CantorPrefractal, t: np.ndarray) -> np.ndarray:
    """Mass of [0, t] from the interval list (cumulative over whole intervals)."""
    iv = fset.intervals
    j = np.searchsorted(iv[:, 0], t, side="right") - 1
    j = np.clip(j, 0, iv.shape[0] - 1)
    partial = np.clip(t - iv[j, 0], 0.0, iv[j, 1] - iv[j, 0])
    return j * fset.interval_mass + partial * fset.density


def coarse_grained_mass(fset: CantorPrefractal, a: float, b: float, delta: float = 1e-5) -> float:
    r"""Coarse-grained mass :math:`\gamma^\alpha_\delta(F, a, b)` of the prefractal.

    The partition is gap-aligned: cell boundaries sit on every interval
    endpoint, so gap cells have zero flag and each retained interval of length
    :math:`r^n` contributes :math:`r^{n\alpha}/\Gamma(\alpha+1)`.  Refining the
    retained cells below ``delta`` shares that mass in proportion to length,
    so the result does not depend on ``delta`` once the partition is
    admissible.
    """
    if not delta > 0:
        raise DomainError(f"delta must be positive, got {delta!r}")
    a_, b_ = _check_time([a, b])
    if a_ > b_:
        raise DomainError(f"need a <= b, got a={a!r}, b={b!r}")
    if a_ == b_:
        return 0.0
    iv = fset.intervals
    overlap = np.clip(np.minimum(iv[:, 1], b_) - np.maximum(iv[:, 0], a_), 0.0, None)
    return float(np.sum(overlap) * fset.density)


def hierarchy_mass(fset: CantorPrefractal, exponent: float, generation: int) -> float:
    """Gap-aligned mass of the generation-``generation`` cover using a trial exponent."""
    exponent = _check_alpha(exponent)
    return 2.0**generation * fset.ratio ** (generation * exponent) / math.gamma(exponent + 1.0)


@dataclass(frozen=True)
class StaircaseFunction:
    """Evaluator of the integral staircase :math:`S^\\alpha_F(t)` with base point 0."""

    prefractal: CantorPrefractal
    normalization: float
    mode: str = "recursive"

    @property
    def total(self) -> float:
        return self.normalization

    def eval(self, t):
        tt = _check_time(t)
        if self.mode == "recursive":
            out = _recursive_staircase(
                np.atleast_1d(tt), self.prefractal.ratio, self.prefractal.generation, self.normalization
            )
        else:
            out = _mass_from_zero(self.prefractal, np.atleast_1d(tt))
        return float(out[0]) if tt.ndim == 0 else out.reshape(tt.shape)

    __call__ = eval

    def inverse(self, tau):
        """Smallest time with ``S(t) = tau``; a flat maps to the left edge of its gap."""
        tau_arr = np.asarray(tau, dtype=float)
        if np.any(tau_arr < -ENDPOINT_TOL) or np.any(tau_arr > self.total * (1 + 1e-12) + ENDPOINT_TOL):
            raise DomainError(f"staircase value outside [0, {self.total}]: {tau!r}")
        fset = self.prefractal
        m = fset.interval_mass
        tv = np.clip(np.atleast_1d(tau_arr), 0.0, self.total)
        j = np.clip(np.ceil(tv / m) - 1, 0, fset.n_intervals - 1).astype(int)
        t = fset.intervals[j, 0] + (tv - j * m) / fset.density
        t = np.minimum(t, fset.intervals[j, 1])
        return float(t[0]) if tau_arr.ndim == 0 else t.reshape(tau_arr.shape)


def _recursive_staircase(t: np.ndarray, r: float, depth: int, s1: float) -> np.ndarray:
    # self-similar recursion: S = S1/2 * S_hat(t/r) on the left copy, S1/2 on the
    # central gap, S1/2 + S1/2 * S_hat(...) on the right copy; linear at depth 0
    acc = np.zeros_like(t)
    x = t.astype(float).copy()
    active = np.ones(t.shape, dtype=bool)
    scale = s1
    for _ in range(depth):
        left = active & (x <= r)
        right = active & ~left & (x >= 1.0 - r)
        gap = active & ~left & ~right
        acc[gap] += 0.5 * scale
        acc[right] += 0.5 * scale
        active &= ~gap
        x = np.where(left, x / r, np.where(right, (x - (1.0 - r)) / r, x))
        scale *= 0.5
    acc[active] += scale * np.clip(x[active], 0.0, 1.0)
    return acc


def staircase(fset: CantorPrefractal, mode: str = "recursive") -> StaircaseFunction:
    if mode not in ("recursive", "tabulated"):
        raise DomainError(f"unknown staircase mode {mode!r}")
    return StaircaseFunction(fset, fset.total_mass, mode)


@dataclass(frozen=True)
class DimensionEstimate:
    value: float
    #: set when the estimate is degenerate (no generations to compare, or no bounded trial)
    warning: bool
    masses: dict = field(default_factory=dict, compare=False)


def estimate_dimension(fset: CantorPrefractal, alphas) -> DimensionEstimate:
    """Smallest trial exponent whose gap-aligned masses stay bounded across generations.

    A trial exponent is accepted when the mass of every generation
    ``0..fset.generation`` stays below ``2 / Gamma(exponent + 1)``; below the
    true dimension the masses grow like ``(2 r^exponent)^n``.
    """
    trials = [float(a) for a in alphas]
    if not trials:
        raise DomainError("need at least one trial exponent")
    for a in trials:
        _check_alpha(a)
    if any(b <= a for a, b in zip(trials, trials[1:])):
        raise DomainError("trial exponents must be strictly increasing")

    masses = {a: [hierarchy_mass(fset, a, n) for n in range(fset.generation + 1)] for a in trials}
    if fset.generation == 0:
        return DimensionEstimate(trials[0], True, masses)
    for a in trials:
        if max(masses[a]) <= 2.0 / math.gamma(a + 1.0):
            return DimensionEstimate(a, False, masses)
    return DimensionEstimate(float("nan"), True, masses)
