r"""Second-order moment dynamics of interacting Gaussian quasiparticles.

For ``K`` quasiparticles with mass :math:`\mu_s`, centre :math:`x_s` and
central second moment :math:`\alpha^{(2)}_s` the system reads, per unit of
staircase time,

.. math::

    \dot\mu_s &= \mu_s\Big[a_0 + \tfrac12\big(a_2 - \varkappa\sum_{\bar s} b_{2,0}\mu_{\bar s}\big)\alpha^{(2)}_s
        - \varkappa\sum_{\bar s}\mu_{\bar s}\big(b_{0,0} + \tfrac12 b_{0,2}\alpha^{(2)}_{\bar s}\big)\Big], \\
    \dot x_s &= \alpha^{(2)}_s\big(a_1 - \varkappa\sum_{\bar s}\mu_{\bar s} b_{1,0}\big), \\
    \dot\alpha^{(2)}_s &= 2\varepsilon,

where :math:`b_{k,l}` are mixed derivatives of the influence kernel at
:math:`(x_s, x_{\bar s})`.  The fractal-time version is obtained by the time
change :math:`\tau = S^\alpha_F(t)`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import hermite

from .calculus import FractalGrid, SampledFunction, fractal_ode_solve
from .errors import DomainError, EvaluationError
from .fractal_set import CantorPrefractal

CLOSURE_MODES = ("strict", "paper")


@dataclass(frozen=True)
class ModelParams:
    """Fisher-KPP coefficients and Gaussian initial data of every quasiparticle."""

    epsilon: float
    kappa: float
    a_const: float
    b0: float
    xi: float
    N: tuple[float, ...]
    sigma: tuple[float, ...]
    x0: tuple[float, ...]

    def __post_init__(self):
        for name in ("N", "sigma", "x0"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        problems = []
        if not self.epsilon > 0:
            problems.append(f"epsilon must be positive, got {self.epsilon!r}")
        if not self.kappa >= 0:
            problems.append(f"kappa must be non-negative, got {self.kappa!r}")
        if not self.xi > 0:
            problems.append(f"xi must be positive, got {self.xi!r}")
        if not (len(self.N) == len(self.sigma) == len(self.x0)) or len(self.N) < 1:
            problems.append("N, sigma and x0 need the same length K >= 1")
        if any(not s > 0 for s in self.sigma):
            problems.append("every sigma must be positive")
        if problems:
            raise DomainError("; ".join(problems))

    @property
    def K(self) -> int:
        return len(self.N)

    @classmethod
    def example(cls, **overrides) -> "ModelParams":
        """The two-quasiparticle example parameter set."""
        values = dict(
            epsilon=0.02, kappa=1.0, a_const=0.5, b0=1.0, xi=2.0,
            N=(1.0, 2.0), sigma=(1.0, 1.5), x0=(-1.0, 1.0),
        )
        values.update(overrides)
        return cls(**values)

    def kernel(self, dx):
        """Influence function ``b(x - y)``."""
        return self.b0 * np.exp(-np.square(dx) / self.xi**2)

    def initial_mass(self) -> np.ndarray:
        return np.array(self.N) * np.array(self.sigma) * math.sqrt(2.0 * math.pi)

    def initial_state(self) -> "MomentState":
        return MomentState(
            self.initial_mass(), np.array(self.x0), self.epsilon * np.square(self.sigma)
        )


@dataclass(frozen=True, eq=False)
class MomentState:
    mu: np.ndarray
    x: np.ndarray
    alpha2: np.ndarray

    def __post_init__(self):
        for name in ("mu", "x", "alpha2"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if not (self.mu.shape == self.x.shape == self.alpha2.shape):
            raise DomainError("mu, x and alpha2 must have the same length")

    def check(self):
        if np.any(self.mu < 0) or np.any(self.alpha2 < 0):
            raise DomainError("masses and second moments must be non-negative")
        return self

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.mu, self.x, self.alpha2])

    @classmethod
    def from_vector(cls, y, K: int) -> "MomentState":
        y = np.asarray(y, dtype=float)
        return cls(y[:K], y[K:2 * K], y[2 * K:3 * K])


def gaussian_derivative(params: ModelParams, dx, order: int):
    """``d^order/d(dx)^order`` of ``b0 exp(-dx^2/xi^2)`` via Hermite polynomials."""
    u = np.asarray(dx, dtype=float) / params.xi
    coef = np.zeros(order + 1)
    coef[order] = 1.0
    return params.b0 * (-1.0 / params.xi) ** order * hermite.hermval(u, coef) * np.exp(-u * u)


@dataclass(frozen=True, eq=False)
class KernelDerivatives:
    """Mixed kernel derivatives ``b[k, l][s, sbar]`` and ``a[k][s]`` for ``k + l <= 4``."""

    b: dict
    a: np.ndarray  # shape (5, K)

    def bkl(self, k: int, l: int) -> np.ndarray:
        return self.b[(k, l)]


def kernel_derivatives(params: ModelParams, x) -> KernelDerivatives:
    r"""Closed-form :math:`\partial_x^k\partial_y^l b(x - y)` at every pair of centres."""
    x = np.asarray(x, dtype=float)
    dx = x[:, None] - x[None, :]
    by_order = {n: gaussian_derivative(params, dx, n) for n in range(5)}
    b = {}
    for k in range(5):
        for l in range(5 - k):
            # d/dy of b(x - y) flips the sign once per derivative
            b[(k, l)] = (-1.0) ** l * by_order[k + l]
    a = np.zeros((5, x.size))
    a[0] = params.a_const
    return KernelDerivatives(b, a)


def _strict_rhs(params: ModelParams, mu, x, al2):
    kap = params.kappa
    dx = x[:, None] - x[None, :]
    u2 = dx * dx / params.xi**2
    e = params.b0 * np.exp(-u2)
    b10 = -2.0 * dx / params.xi**2 * e
    b20 = (4.0 * u2 - 2.0) / params.xi**2 * e  # equals b02
    a0 = params.a_const
    dmu = mu * (
        a0
        - 0.5 * kap * (b20 @ mu) * al2
        - kap * (e @ mu + 0.5 * (b20 @ (mu * al2)))
    )
    dx_ = al2 * (-kap * (b10 @ mu))
    return dmu, dx_


def _paper_rhs(params: ModelParams, mu, x, al2):
    if mu.size != 2:
        raise DomainError("the paper closure is only defined for two quasiparticles")
    kap, xi, b0 = params.kappa, params.xi, params.b0
    d = x[0] - x[1]
    bd = b0 * math.exp(-d * d / xi**2)
    m1, m2 = mu
    a1, a2 = al2
    pair2 = (2.0 * d * d / xi**4 - 1.0 / xi**2) * bd * (a1 + a2)
    pair4 = (3.0 / xi**4 - 12.0 * d * d / xi**6 + 4.0 * d**4 / xi**8) * bd * a1 * a2
    # self terms carry b0 explicitly
    inner1 = b0 * m1 + m2 * bd - 2.0 * b0 * m1 * a1 / xi**2 + m2 * pair2 - 3.0 * b0 * m1 * a1 / xi**4 + pair4 * m2
    inner2 = b0 * m2 + m1 * bd - 2.0 * b0 * m2 * a2 / xi**2 + m1 * pair2 - 3.0 * b0 * m2 * a2 / xi**4 + pair4 * m1
    a = params.a_const
    dmu = np.array([a * m1 - kap * m1 * inner1, a * m2 - kap * m2 * inner2])
    drift = kap / (2.0 * xi**2) * d * bd
    dxx = np.array([drift * m2 * a1, -drift * m1 * a2])
    return dmu, dxx


def flees_rhs(state: MomentState, t: float, params: ModelParams, closure_mode: str = "strict") -> MomentState:
    """Derivative of the moment state per unit of staircase time (the indicator factor stripped)."""
    if closure_mode not in CLOSURE_MODES:
        raise DomainError(f"closure_mode must be one of {CLOSURE_MODES}, got {closure_mode!r}")
    fn = _strict_rhs if closure_mode == "strict" else _paper_rhs
    with np.errstate(invalid="ignore", over="ignore"):
        dmu, dx = fn(params, state.mu, state.x, state.alpha2)
    dal = np.full(state.mu.shape, 2.0 * params.epsilon)
    for name, val in (("mass", dmu), ("centre", dx)):
        if not np.all(np.isfinite(val)):
            raise EvaluationError(f"non-finite {name} derivative at t={t!r}")
    return MomentState(dmu, dx, dal)


def make_vector_rhs(params: ModelParams, closure_mode: str = "strict"):
    """Flat-vector right-hand side ``f(y, t)`` with ``y = [mu, x, alpha2]``."""
    if closure_mode not in CLOSURE_MODES:
        raise DomainError(f"closure_mode must be one of {CLOSURE_MODES}, got {closure_mode!r}")
    K = params.K
    fn = _strict_rhs if closure_mode == "strict" else _paper_rhs
    dal = np.full(K, 2.0 * params.epsilon)

    def rhs(y, t):
        dmu, dx = fn(params, y[:K], y[K:2 * K], y[2 * K:])
        return np.concatenate([dmu, dx, dal])

    return rhs


@dataclass(frozen=True, eq=False)
class MomentTrajectory:
    grid: FractalGrid
    mu: np.ndarray  # (n_times, K)
    x: np.ndarray
    alpha2: np.ndarray
    params: ModelParams
    closure_mode: str = "strict"

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    @property
    def staircase_values(self) -> np.ndarray:
        return self.grid.staircase_values

    def state(self, i: int) -> MomentState:
        return MomentState(self.mu[i], self.x[i], self.alpha2[i])

    def index_of(self, t: float) -> int:
        return self.grid.index_of(t)

    def second_moment_defect(self) -> float:
        """``max |alpha2_s(t) - 2 eps S(t) - alpha2_s(0)|`` over the whole run."""
        s = self.grid.staircase_values[:, None]
        expected = 2.0 * self.params.epsilon * s + self.alpha2[0][None, :]
        return float(np.max(np.abs(self.alpha2 - expected)))


def solve_flees(
    params: ModelParams,
    prefractal: CantorPrefractal | None = None,
    closure_mode: str = "strict",
    grid: FractalGrid | None = None,
    method: str = "rk4",
) -> MomentTrajectory:
    """Integrate the moment system from the Gaussian initial data over fractal time."""
    if grid is None:
        if prefractal is None:
            raise DomainError("need a prefractal or a grid")
        grid = FractalGrid.build(prefractal)
    y0 = params.initial_state().check().as_vector()
    K = params.K
    ys = fractal_ode_solve(
        make_vector_rhs(params, closure_mode), y0, grid, method=method, positive=range(K)
    )
    return MomentTrajectory(grid, ys[:, :K], ys[:, K:2 * K], ys[:, 2 * K:], params, closure_mode)


def r_function(trajectory: MomentTrajectory, s: int) -> SampledFunction:
    r"""Phase increment :math:`\Delta R_s(t) = \varepsilon \ln(\mu_s(t)/\mu_s(0))`."""
    mu = trajectory.mu[:, s]
    if np.any(mu <= 0):
        raise DomainError(f"mass of quasiparticle {s} is not positive along the trajectory")
    return SampledFunction(trajectory.grid, trajectory.params.epsilon * np.log(mu / mu[0]))
