r"""Direct solver of the nonlocal Fisher-KPP equation in fractal time.

With :math:`u(x, t) = U(x, S(t))` the fractal equation becomes

.. math::

    \partial_\tau U = \varepsilon U_{xx} + a U - \varkappa U (b * U), \qquad \tau \in [0, S(1)],

which is marched with explicit Euler or Heun steps on a uniform spatial grid
with homogeneous Dirichlet boundaries.  Fields at physical times are read off
at :math:`\tau = S(t)`, so every time in a removed gap shares the value of the
gap's left edge.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import AlignmentError, ConfigError, DivergenceError, DomainError
from .fractal_set import CantorPrefractal, staircase
from .flees import ModelParams
from .spatial import KernelConvolution, SpatialGrid, laplacian

STABILITY_LIMIT = 0.25


@dataclass(frozen=True)
class PdeConfig:
    grid: SpatialGrid
    tau_steps: int
    params: ModelParams
    prefractal: CantorPrefractal
    scheme: str = "euler"
    convolution: str = "direct"
    laplacian_order: int = 4

    def __post_init__(self):
        errors = []
        if int(self.tau_steps) != self.tau_steps or self.tau_steps < 1:
            errors.append(f"tau_steps must be a positive integer, got {self.tau_steps!r}")
        if self.scheme not in ("euler", "heun"):
            errors.append(f"scheme must be 'euler' or 'heun', got {self.scheme!r}")
        if self.convolution not in ("direct", "fft"):
            errors.append(f"convolution must be 'direct' or 'fft', got {self.convolution!r}")
        if self.laplacian_order not in (2, 4):
            errors.append(f"laplacian_order must be 2 or 4, got {self.laplacian_order!r}")
        if not errors and self.courant > STABILITY_LIMIT:
            errors.append(
                f"eps*dtau/dx^2 = {self.courant:.4g} exceeds {STABILITY_LIMIT}; increase tau_steps"
            )
        if errors:
            raise ConfigError(errors)

    @property
    def tau_final(self) -> float:
        return self.prefractal.total_mass

    @property
    def dtau(self) -> float:
        return self.tau_final / self.tau_steps

    @property
    def courant(self) -> float:
        return self.params.epsilon * self.dtau / self.grid.dx**2

    @classmethod
    def stable(cls, grid: SpatialGrid, params: ModelParams, prefractal: CantorPrefractal,
               courant: float = 0.2, **kw) -> "PdeConfig":
        """Smallest step count meeting the given ``eps*dtau/dx^2`` target."""
        tau = prefractal.total_mass
        steps = max(1, math.ceil(params.epsilon * tau / (courant * grid.dx**2)))
        return cls(grid, steps, params, prefractal, **kw)


@dataclass(frozen=True, eq=False)
class DirectSolution:
    grid: SpatialGrid
    times: np.ndarray
    taus: np.ndarray
    fields: np.ndarray  # (n_times, n_x)
    mass_history: np.ndarray = field(repr=False)  # (tau_steps + 1,) total mass per step

    def at(self, t: float) -> np.ndarray:
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > 1e-12:
            raise DomainError(f"time {t!r} was not requested")
        return self.fields[i]


def solve_direct(config: PdeConfig, initial: np.ndarray, times=(1.0,), check_decay: bool = True) -> DirectSolution:
    """March the time-changed equation and sample it at the requested physical times.

    The marching lands exactly on every requested ``tau = S(t)`` by splitting
    the step that would overshoot it.
    """
    p, g = config.params, config.grid
    u = np.array(initial, dtype=float)
    if u.shape != (int(g.points),):
        raise AlignmentError("initial field does not match the spatial grid")
    peak = np.max(np.abs(u))
    if check_decay and peak > 0 and max(abs(u[0]), abs(u[-1])) > 1e-8 * peak:
        raise DomainError("initial field does not decay at the domain boundary")
    times = np.asarray(times, dtype=float)
    stair = staircase(config.prefractal)
    taus = np.atleast_1d(stair.eval(times)).astype(float)
    order = np.argsort(taus, kind="stable")

    conv = KernelConvolution(g, p.kernel, method=config.convolution)
    eps, a, kap, dx = p.epsilon, p.a_const, p.kappa, g.dx

    def rhs(v):
        out = eps * laplacian(v, dx, config.laplacian_order) + a * v - kap * v * conv(v)
        out[0] = out[-1] = 0.0
        return out

    def step(v, h):
        k1 = rhs(v)
        if config.scheme == "euler":
            return v + h * k1
        k2 = rhs(v + h * k1)
        return v + 0.5 * h * (k1 + k2)

    u[0] = u[-1] = 0.0
    out = np.empty((len(times), u.size))
    masses = [g.integrate(u)]
    tau, k = 0.0, 0
    dtau = config.dtau
    for j in order:
        target = taus[j]
        while tau < target - 1e-14:
            n_next = min((k + 1) * dtau, config.tau_final)
            if n_next <= target + 1e-14:
                u = step(u, n_next - tau)
                tau, k = n_next, k + 1
                masses.append(g.integrate(u))
            else:
                u = step(u, target - tau)
                tau = target
            if not np.all(np.isfinite(u)):
                t_bad = float(stair.inverse(min(tau, stair.total)))
                raise DivergenceError(f"direct solver diverged at tau={tau:.6g}", t_bad)
        out[j] = u
    return DirectSolution(g, times, taus, out, np.array(masses))


@dataclass(frozen=True)
class ErrorReport:
    times: np.ndarray
    l2: np.ndarray
    linf: np.ndarray
    l2_rel: np.ndarray
    linf_rel: np.ndarray

    def rows(self):
        for row in zip(self.times, self.l2, self.linf, self.l2_rel, self.linf_rel):
            yield tuple(float(v) for v in row)


def compare(grid: SpatialGrid, asymptotic, direct, times, direct_grid: SpatialGrid | None = None) -> ErrorReport:
    """L2 and Linf errors per time, absolute and relative to the direct field."""
    if direct_grid is not None:
        grid.check_same(direct_grid)
    A = np.atleast_2d(np.asarray(asymptotic, dtype=float))
    D = np.atleast_2d(np.asarray(direct, dtype=float))
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if A.shape != D.shape or A.shape[1] != int(grid.points) or A.shape[0] != times.size:
        raise AlignmentError(f"field arrays differ in shape: {A.shape} vs {D.shape}")
    diff = A - D
    l2 = np.sqrt(grid.integrate(diff * diff))
    linf = np.max(np.abs(diff), axis=1)
    nd2 = np.sqrt(grid.integrate(D * D))
    ndi = np.max(np.abs(D), axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        l2_rel = np.where(nd2 > 0, l2 / nd2, np.where(l2 > 0, np.inf, 0.0))
        linf_rel = np.where(ndi > 0, linf / ndi, np.where(linf > 0, np.inf, 0.0))
    return ErrorReport(times, l2, linf, l2_rel, linf_rel)
