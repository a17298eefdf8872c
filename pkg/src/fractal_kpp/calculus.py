r"""Discrete :math:`F^\alpha` differentiation, integration and ODE solving.

Everything here works on a :class:`FractalGrid`, i.e. sample times together
with the staircase :math:`S^\alpha_F` and the indicator :math:`\chi_F` at those
times.  Integrals are Riemann-Stieltjes trapezoid sums in :math:`S` and
derivatives are difference quotients in :math:`S`, so on the continuum
(``alpha = 1``) they reduce to the ordinary rules.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import AlignmentError, DegenerateStencilError, DivergenceError, DomainError
from .fractal_set import CantorPrefractal, StaircaseFunction, indicator, staircase

#: increments of S below this are treated as flats
STAIRCASE_EPS = 1e-12


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class FractalGrid:
    """Sample times with the staircase and indicator evaluated on them."""

    times: np.ndarray
    staircase_values: np.ndarray
    indicator_values: np.ndarray
    stair: StaircaseFunction | None = field(default=None, repr=False)

    def __post_init__(self):
        t, s, c = self.times, self.staircase_values, self.indicator_values
        if not (len(t) == len(s) == len(c)):
            raise AlignmentError("times, staircase and indicator arrays differ in length")
        if len(t) < 2:
            raise DomainError("a fractal grid needs at least two samples")
        if np.any(np.diff(t) <= 0):
            raise DomainError("grid times must be strictly increasing")
        if np.any(np.diff(s) < 0):
            raise DomainError("staircase values must be non-decreasing")

    def __len__(self) -> int:
        return len(self.times)

    @property
    def total(self) -> float:
        return float(self.staircase_values[-1])

    def index_of(self, t: float) -> int:
        """Index of a grid time (nearest sample, must match within 1e-12)."""
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > 1e-12:
            raise DomainError(f"time {t!r} is not a grid node")
        return i

    def preimage(self, tau):
        """Time at which the staircase reaches ``tau``; flats map to their left edge."""
        if self.stair is not None:
            return self.stair.inverse(tau)
        s = self.staircase_values
        tau = np.asarray(tau, dtype=float)
        j = np.clip(np.searchsorted(s, tau, side="left"), 1, len(s) - 1)
        s0, s1 = s[j - 1], s[j]
        w = np.where(s1 > s0, (tau - s0) / np.where(s1 > s0, s1 - s0, 1.0), 0.0)
        return self.times[j - 1] + w * (self.times[j] - self.times[j - 1])

    @classmethod
    def from_times(cls, stair: StaircaseFunction, times) -> "FractalGrid":
        t = np.asarray(times, dtype=float)
        s = np.atleast_1d(stair.eval(t)).astype(float)
        s = _snap_flats(s)
        chi = np.atleast_1d(indicator(stair.prefractal, t)).astype(float)
        return cls(_frozen(t), _frozen(s), _frozen(chi), stair)

    @classmethod
    def build(
        cls,
        fset: CantorPrefractal,
        dt: float = 1e-4,
        n_tau: int = 20_000,
        extra_times: Sequence[float] = (),
    ) -> "FractalGrid":
        """Default grid for a prefractal.

        Every interval endpoint is a node.  Inside retained intervals the nodes
        are equispaced with spacing at most ``dt`` in ``t`` and at most
        ``S(1)/n_tau`` in ``S``; removed gaps are sampled with spacing at most
        ``dt``.
        """
        if dt <= 0 or n_tau < 1:
            raise DomainError("dt must be positive and n_tau at least 1")
        stair = staircase(fset)
        dtau = fset.total_mass / n_tau
        pieces = []
        iv = fset.intervals
        length = iv[:, 1] - iv[:, 0]
        m_iv = np.maximum(1, np.ceil(np.maximum(length / dt, length * fset.density / dtau) - 1e-9)).astype(int)
        for (p, q), m in zip(iv, m_iv):
            pieces.append(np.linspace(p, q, m + 1))
        for g1, g2 in fset.gaps():
            m = max(1, int(math.ceil((g2 - g1) / dt - 1e-9)))
            if m > 1:
                pieces.append(np.linspace(g1, g2, m + 1)[1:-1])
        if len(extra_times):
            pieces.append(np.asarray(extra_times, dtype=float))
        t = np.unique(np.concatenate(pieces))
        # merge nodes closer than the endpoint tolerance
        keep = np.concatenate([[True], np.diff(t) > 1e-13])
        t = t[keep]
        t[0], t[-1] = 0.0, 1.0
        return cls.from_times(stair, t)


def _snap_flats(s: np.ndarray) -> np.ndarray:
    s = np.maximum.accumulate(np.asarray(s, dtype=float))
    out = s.copy()
    for i in np.nonzero(np.diff(s) < STAIRCASE_EPS)[0]:
        out[i + 1] = out[i]
    return out


@dataclass(frozen=True, eq=False)
class SampledFunction:
    """Real samples aligned with a grid."""

    grid: FractalGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape[0] != len(self.grid):
            raise AlignmentError("sample count does not match the grid")
        if not np.all(np.isfinite(v)):
            raise DomainError("sampled values must be finite")
        object.__setattr__(self, "values", _frozen(v))

    @classmethod
    def of(cls, grid: FractalGrid, fn: Callable[[np.ndarray], np.ndarray]) -> "SampledFunction":
        """Sample ``fn(t)`` on the grid times."""
        return cls(grid, np.asarray(fn(grid.times), dtype=float))

    @classmethod
    def of_staircase(cls, grid: FractalGrid, fn: Callable[[np.ndarray], np.ndarray]) -> "SampledFunction":
        """Sample the composition ``fn(S(t))``."""
        return cls(grid, np.asarray(fn(grid.staircase_values), dtype=float))


def _stencil(s: np.ndarray, eps: float = STAIRCASE_EPS) -> tuple[np.ndarray, np.ndarray]:
    """Nearest neighbours (left, right) whose staircase value differs by more than eps.

    Missing neighbours are flagged with -1 / len(s).
    """
    right = np.searchsorted(s, s + eps, side="right")
    left = np.searchsorted(s, s - eps, side="left") - 1
    return left, right


def falpha_derivative(f: SampledFunction, i: int) -> float:
    r"""Discrete :math:`D^\alpha_F f` at grid index ``i``.

    Zero off the set; otherwise the difference quotient in :math:`S` between the
    nearest neighbours on each side whose staircase value differs, one-sided
    when only one such neighbour exists.
    """
    g = f.grid
    n = len(g)
    if not -n <= i < n:
        raise DomainError(f"grid index {i} out of range")
    i %= n
    if g.indicator_values[i] == 0:
        return 0.0
    return float(falpha_derivative_all(f, np.array([i]))[0])


def falpha_derivative_all(f: SampledFunction, indices=None) -> np.ndarray:
    """Vectorised :func:`falpha_derivative` over every grid index (or the given ones).

    Interior points use the symmetric quotient; where only one side has a
    staircase increment the quotient is the second-order one-sided formula
    through the next two distinct staircase values (first order when only one
    exists).
    """
    g = f.grid
    n = len(g)
    s, v, chi = g.staircase_values, f.values, g.indicator_values
    left, right = _stencil(s)
    idx = np.arange(n) if indices is None else np.asarray(indices)
    out = np.zeros((idx.size,) + v.shape[1:])

    def col(a):
        return a.reshape((-1,) + (1,) * (v.ndim - 1))

    on = chi[idx] != 0
    lo, hi = left[idx], right[idx]
    bad = on & (lo < 0) & (hi >= n)
    if np.any(bad):
        raise DegenerateStencilError(f"no neighbour with a staircase increment at index {int(idx[bad][0])}")
    both = on & (lo >= 0) & (hi < n)
    out[both] = (v[hi[both]] - v[lo[both]]) / col(s[hi[both]] - s[lo[both]])
    for side in ("right", "left"):
        sel = on & ((lo < 0) if side == "right" else (hi >= n))
        if not np.any(sel):
            continue
        i0 = idx[sel]
        j1 = hi[sel] if side == "right" else lo[sel]
        j2 = right[j1] if side == "right" else left[j1]
        ok = (j2 >= 0) & (j2 < n)
        j2 = np.where(ok, j2, j1)
        h1, h2 = col(s[j1] - s[i0]), col(s[j2] - s[i0])
        d1 = (v[j1] - v[i0]) / h1
        with np.errstate(divide="ignore", invalid="ignore"):
            # derivative at s[i0] of the quadratic through the three samples
            quad = d1 + (d1 - (v[j2] - v[i0]) / h2) * h1 / (h2 - h1)
        out[sel] = np.where(col(ok), quad, d1)
    return out


def _cumulative(grid: FractalGrid, values: np.ndarray) -> np.ndarray:
    ds = np.diff(grid.staircase_values)
    cells = 0.5 * (values[1:] + values[:-1]) * ds
    return np.concatenate([[0.0], np.cumsum(cells)])


def _cumulative_at(grid: FractalGrid, values: np.ndarray, cum: np.ndarray, x: float) -> float:
    t = grid.times
    if not (t[0] - 1e-12 <= x <= t[-1] + 1e-12):
        raise DomainError(f"integration limit {x!r} outside the grid span [{t[0]}, {t[-1]}]")
    k = int(np.clip(np.searchsorted(t, x, side="right") - 1, 0, len(t) - 2))
    if x <= t[k] + 1e-15:
        return float(cum[k])
    s = grid.staircase_values
    w = (x - t[k]) / (t[k + 1] - t[k])
    fx = values[k] + w * (values[k + 1] - values[k])
    sx = s[k] + w * (s[k + 1] - s[k])
    return float(cum[k] + 0.5 * (values[k] + fx) * (sx - s[k]))


def falpha_integral(f: SampledFunction, a: float, b: float) -> float:
    r"""Riemann-Stieltjes trapezoid approximation of :math:`\int_a^b f\, d^\alpha_F t`."""
    cum = _cumulative(f.grid, f.values)
    return _cumulative_at(f.grid, f.values, cum, b) - _cumulative_at(f.grid, f.values, cum, a)


def cumulative_integral(f: SampledFunction, a: float | None = None) -> SampledFunction:
    """``G(t_i) = falpha_integral(f, a, t_i)`` for every grid time (``a`` defaults to the first node)."""
    cum = _cumulative(f.grid, f.values)
    if a is not None:
        cum = cum - _cumulative_at(f.grid, f.values, cum, a)
    return SampledFunction(f.grid, cum)


def cumulative_values(grid: FractalGrid, values: np.ndarray) -> np.ndarray:
    """Cumulative trapezoid-in-S integral from the first node; columns are integrated independently."""
    values = np.asarray(values, dtype=float)
    ds = np.diff(grid.staircase_values)
    ds = ds.reshape((-1,) + (1,) * (values.ndim - 1))
    cells = 0.5 * (values[1:] + values[:-1]) * ds
    return np.concatenate([np.zeros((1,) + values.shape[1:]), np.cumsum(cells, axis=0)])


RHS = Callable[[np.ndarray, float], np.ndarray]


def fractal_ode_solve(
    rhs: RHS,
    y0,
    grid: FractalGrid,
    method: str = "rk4",
    positive: Sequence[int] = (),
    floor: float = 1e-12,
) -> np.ndarray:
    r"""Solve :math:`D^\alpha_{F,t} y = \chi_F(t) f(y, t)` on the grid.

    ``rk4`` integrates :math:`dY/d\tau = f(Y, t(\tau))` in the staircase time
    :math:`\tau = S(t)` with one classical Runge-Kutta step per grid cell and
    returns :math:`Y(S(t_i))`; cells lying on a flat leave the state
    untouched.  ``euler`` is the explicit first-order fractal scheme
    ``y[k+1] = y[k] + (S[k+1] - S[k]) f(y[k], t[k])``.

    Components listed in ``positive`` are switched to logarithmic variables as
    soon as a step would take them below ``floor``.

    Returns an array of shape ``(len(grid), len(y0))``.
    """
    if method not in ("rk4", "euler"):
        raise DomainError(f"unknown method {method!r}")
    y = np.array(y0, dtype=float).ravel()
    if not np.all(np.isfinite(y)):
        raise DomainError("initial state must be finite")
    t, s = grid.times, grid.staircase_values
    n = len(grid)
    out = np.empty((n, y.size))
    out[0] = y
    h_all = np.diff(s)
    pos = np.zeros(y.size, dtype=bool)
    pos[list(positive)] = True
    logmask = np.zeros(y.size, dtype=bool)

    if method == "rk4":
        active = np.nonzero(h_all > 0)[0]
        t_mid = np.array(t[:-1], dtype=float)
        if active.size:
            t_mid[active] = grid.preimage(s[active] + 0.5 * h_all[active])

    def step(yk, k, mask):
        h = h_all[k]
        if not mask.any():
            if method == "euler":
                return yk + h * rhs(yk, t[k])
            k1 = rhs(yk, t[k])
            k2 = rhs(yk + 0.5 * h * k1, t_mid[k])
            k3 = rhs(yk + 0.5 * h * k2, t_mid[k])
            k4 = rhs(yk + h * k3, t[k + 1])
            return yk + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

        def g(z, tt):
            yy = z.copy()
            yy[mask] = np.exp(z[mask])
            d = rhs(yy, tt)
            d = np.array(d, dtype=float)
            d[mask] = d[mask] / yy[mask]
            return d

        z = yk.copy()
        z[mask] = np.log(yk[mask])
        if method == "euler":
            z = z + h * g(z, t[k])
        else:
            k1 = g(z, t[k])
            k2 = g(z + 0.5 * h * k1, t_mid[k])
            k3 = g(z + 0.5 * h * k2, t_mid[k])
            k4 = g(z + h * k3, t[k + 1])
            z = z + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        res = z.copy()
        res[mask] = np.exp(z[mask])
        return res

    for k in range(n - 1):
        if h_all[k] == 0.0:
            out[k + 1] = y
            continue
        y_new = step(y, k, logmask)
        if pos.any():
            low = pos & ~logmask & ~(y_new >= floor)
            if low.any():
                logmask = logmask | low
                y_new = step(y, k, logmask)
        if not np.all(np.isfinite(y_new)):
            raise DivergenceError(f"non-finite state at t={t[k + 1]:.6g}", time=float(t[k + 1]))
        y = y_new
        out[k + 1] = y
    return out
