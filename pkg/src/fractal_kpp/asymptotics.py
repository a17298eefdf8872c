r"""Quasiparticle asymptotic solution built from the moment trajectory.

Each quasiparticle is approximated by

.. math::

    u_s \approx v^{(0)}_s + \sqrt{\varepsilon}\, v^{(1)}_s + \varepsilon\, v^{(2)}_s,

where :math:`v^{(0)}_s` is the Gaussian initial packet propagated by the
staircase-time heat kernel (weighted by the mass ratio
:math:`\mu_s(t)/\mu_s(0)`) and the corrections are Duhamel integrals over
fractal time.  With :math:`X = x - x_s(0)`, :math:`\Sigma_s = 2S + \sigma_s^2`
and the drift :math:`d_s = x_s - x_s(0)`, the corrections are polynomials in
:math:`X` times the packet, so every time integral is a prefix sum computed
once per trajectory.

Two formula sets are available:

``"consistent"`` (default)
    Obtained by carrying out the Gaussian convolutions in the Duhamel
    integrals exactly.  The zeroth-order packet carries the amplitude factor
    :math:`\sigma_s/\sqrt{\Sigma_s}` so that its mass equals :math:`\mu_s(t)`.
``"legacy"``
    Packet amplitude without :math:`\sigma_s/\sqrt{\Sigma_s}`, linear
    instead of quadratic :math:`X` in the first double integral,
    :math:`\Sigma(\tau_2)` instead of :math:`\Sigma(\tau_2)^2` in the
    :math:`k_2` integral, and no :math:`-2\varepsilon\sigma_s^2 S(\tau_2)`
    term.  These forms do not solve the linear correction equations and are
    kept only for comparison.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .calculus import FractalGrid, SampledFunction, cumulative_values, falpha_derivative_all
from .errors import AlignmentError, DeltaRegimeError, DomainError, ResolutionError
from .flees import ModelParams, MomentTrajectory, kernel_derivatives, r_function
from .fractal_set import CantorPrefractal, staircase
from .spatial import KernelConvolution, SpatialGrid, laplacian

FORMULAS = ("consistent", "legacy")


@dataclass(frozen=True, eq=False)
class SigmaFunction:
    """Per-particle widths ``Sigma_s(t) = 2 S(t) + sigma_s^2`` on the trajectory grid."""

    grid: FractalGrid
    values: np.ndarray  # (n_times, K)

    @classmethod
    def of(cls, trajectory: MomentTrajectory) -> "SigmaFunction":
        s = trajectory.grid.staircase_values[:, None]
        return cls(trajectory.grid, 2.0 * s + np.square(trajectory.params.sigma)[None, :])


@dataclass(frozen=True, eq=False)
class SolutionField:
    grid: SpatialGrid
    time: float
    epsilon: float
    v0: np.ndarray  # (K, n_x)
    v1: np.ndarray
    v2: np.ndarray
    u: np.ndarray = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "u", self.particles.sum(axis=0))

    @property
    def K(self) -> int:
        return self.v0.shape[0]

    @property
    def particles(self) -> np.ndarray:
        """``u_s = v0_s + sqrt(eps) v1_s + eps v2_s`` for every particle, shape (K, n_x)."""
        e = self.epsilon
        return self.v0 + math.sqrt(e) * self.v1 + e * self.v2

    def particle(self, s: int) -> np.ndarray:
        return self.particles[s]


class QuasiparticleSolution:
    """Prefix-sum tables of one moment trajectory, shared by every field evaluation."""

    def __init__(self, trajectory: MomentTrajectory, formulas: str = "consistent"):
        if formulas not in FORMULAS:
            raise DomainError(f"formulas must be one of {FORMULAS}, got {formulas!r}")
        self.trajectory = trajectory
        self.params = trajectory.params
        self.formulas = formulas
        self.sigma = SigmaFunction.of(trajectory)
        self._tables = [self._build(s) for s in range(self.params.K)]

    def _kcoefficients(self):
        tr, p = self.trajectory, self.params
        n, K = tr.mu.shape
        k1 = np.empty((n, K))
        k2 = np.empty((n, K))
        dx = tr.x[:, :, None] - tr.x[:, None, :]
        # kernel derivatives of b(x - y) at every pair (vectorised over time)
        b10 = kernel_derivatives_pairwise(p, dx, 1, 0)
        b20 = kernel_derivatives_pairwise(p, dx, 2, 0)
        a1, a2 = 0.0, 0.0  # constant growth rate
        k1[:] = a1 - p.kappa * np.einsum("nij,nj->ni", b10, tr.mu)
        k2[:] = 0.5 * a2 - 0.5 * p.kappa * np.einsum("nij,nj->ni", b20, tr.mu)
        return k1, k2

    def _build(self, s: int) -> dict:
        tr, p = self.trajectory, self.params
        g = tr.grid
        if not hasattr(self, "_k"):
            self._k = self._kcoefficients()
        k1, k2 = self._k[0][:, s], self._k[1][:, s]
        S = g.staircase_values
        sig = self.sigma.values[:, s]
        d = tr.x[:, s] - tr.x[0, s]
        al2 = tr.alpha2[:, s]
        eps = p.epsilon

        def C(v):
            return cumulative_values(g, v)

        I = C(k1 * sig)
        J = C(k1 * d)
        t = {"I": I, "J": J}
        if self.formulas == "consistent":
            Q1, Q2, Q3, Q4, Q5 = C(k1 * sig * I), C(k1 * sig * J), C(k1 * d * I), C(k1 * I), C(k1 * d * J)
            B1, B2, B3, B5 = C(k2 * sig**2), C(k2 * sig * d), C(k2 * sig), C(k2 * (d * d - al2))
            t["c2"] = Q1 + B1
            t["c1"] = -sig * (Q2 + Q3) - 2.0 * sig * B2
            t["c0"] = sig * (eps * sig * Q4 - eps * Q1 + sig * Q5) + eps * sig * (sig * B3 - B1) + sig**2 * B5
        else:
            Q1, Q2, Q3, Q4, Q5 = C(k1 * sig * I), C(k1 * sig * J), C(k1 * d * I), C(k1 * I), C(k1 * d * J)
            L = C(k1 * S)
            Q6 = C(k1 * S * L)
            B2, B3 = C(k2 * sig * d), C(k2 * sig)
            Ba, Bs, Bd = C(k2 * al2), C(k2 * S * sig), C(k2 * d * d)
            t["c2"] = B3
            t["c1"] = Q1 - sig * (Q2 + Q3) - 2.0 * sig * B2
            t["c0"] = sig * (2.0 * eps * S * Q4 - 4.0 * eps * Q6 + sig * Q5) + sig * (
                -sig * Ba + 2.0 * eps * S * B3 - 2.0 * eps * Bs + sig * Bd
            )
        t["mass_ratio"] = np.exp(r_function(tr, s).values / eps)
        return t

    # -- field components -------------------------------------------------
    def _index(self, t: float) -> int:
        return self.trajectory.grid.index_of(t)

    def packet(self, s: int, x: np.ndarray, i: int) -> np.ndarray:
        """Legacy zeroth-order form ``eps^-1/2 N_s exp(dR/eps) exp(-X^2 / (2 eps Sigma))``."""
        p = self.params
        sig = self.sigma.values[i, s]
        X = x - p.x0[s]
        return p.N[s] / math.sqrt(p.epsilon) * self._tables[s]["mass_ratio"][i] * np.exp(
            -X * X / (2.0 * p.epsilon * sig)
        )

    def v0(self, s: int, x: np.ndarray, t: float) -> np.ndarray:
        i = self._index(t)
        g0 = self.packet(s, x, i)
        if self.formulas == "legacy":
            return g0
        return self.params.sigma[s] / math.sqrt(self.sigma.values[i, s]) * g0

    def v1(self, s: int, x: np.ndarray, t: float) -> np.ndarray:
        i = self._index(t)
        p, tab = self.params, self._tables[s]
        sig = self.sigma.values[i, s]
        X = x - p.x0[s]
        pref = p.sigma[s] / (math.sqrt(p.epsilon) * sig**1.5)
        return pref * self.packet(s, x, i) * (tab["I"][i] * X - sig * tab["J"][i])

    def v2(self, s: int, x: np.ndarray, t: float) -> np.ndarray:
        i = self._index(t)
        p, tab = self.params, self._tables[s]
        sig = self.sigma.values[i, s]
        X = x - p.x0[s]
        pref = p.sigma[s] / (p.epsilon * sig**2.5)
        poly = tab["c2"][i] * X * X + tab["c1"][i] * X + tab["c0"][i]
        return pref * self.packet(s, x, i) * poly

    def field(self, grid: SpatialGrid, t: float) -> SolutionField:
        x = grid.x
        K = self.params.K
        v0 = np.array([self.v0(s, x, t) for s in range(K)])
        v1 = np.array([self.v1(s, x, t) for s in range(K)])
        v2 = np.array([self.v2(s, x, t) for s in range(K)])
        return SolutionField(grid, float(t), self.params.epsilon, v0, v1, v2)


def kernel_derivatives_pairwise(params: ModelParams, dx: np.ndarray, k: int, l: int) -> np.ndarray:
    """``b_{k,l}`` for an array of separations ``x_s - x_sbar`` (any shape)."""
    from .flees import gaussian_derivative

    return (-1.0) ** l * gaussian_derivative(params, dx, k + l)


# -- module-level operations -------------------------------------------------

def green_function(x, y, t: float, t0: float, trajectory: MomentTrajectory, s: int):
    """Staircase-time heat kernel times the mass ratio ``mu_s(t)/mu_s(t0)``."""
    if t < t0:
        raise DomainError("the Green function needs t >= t0")
    g = trajectory.grid
    i, i0 = g.index_of(t), g.index_of(t0)
    ds = g.staircase_values[i] - g.staircase_values[i0]
    if ds <= 0:
        raise DeltaRegimeError("S(t) == S(t0): the Green function is the identity map")
    eps = trajectory.params.epsilon
    ratio = trajectory.mu[i, s] / trajectory.mu[i0, s]
    diff = np.asarray(x) - np.asarray(y)
    return ratio / (2.0 * math.sqrt(math.pi * eps * ds)) * np.exp(-diff * diff / (4.0 * eps * ds))


def propagate(values: np.ndarray, grid: SpatialGrid, t: float, t0: float,
              trajectory: MomentTrajectory, s: int) -> np.ndarray:
    """Apply the Green function to samples on ``grid`` by trapezoid quadrature in ``y``."""
    try:
        kern = green_function(grid.x[:, None], grid.x[None, :], t, t0, trajectory, s)
    except DeltaRegimeError:
        i, i0 = trajectory.grid.index_of(t), trajectory.grid.index_of(t0)
        return np.asarray(values) * (trajectory.mu[i, s] / trajectory.mu[i0, s])
    return kern @ (np.asarray(values) * grid.weights)


def initial_packet(params: ModelParams, s: int, x: np.ndarray) -> np.ndarray:
    """Gaussian initial condition ``phi_s``."""
    X = np.asarray(x) - params.x0[s]
    return params.N[s] / math.sqrt(params.epsilon) * np.exp(-X * X / (2.0 * params.epsilon * params.sigma[s] ** 2))


def v0(params, trajectory, s, grid: SpatialGrid, t, formulas="consistent"):
    return QuasiparticleSolution(trajectory, formulas).v0(s, grid.x, t)


def v1(params, trajectory, s, grid: SpatialGrid, t, formulas="consistent"):
    return QuasiparticleSolution(trajectory, formulas).v1(s, grid.x, t)


def v2(params, trajectory, s, grid: SpatialGrid, t, formulas="consistent"):
    return QuasiparticleSolution(trajectory, formulas).v2(s, grid.x, t)


def assemble(params, trajectory: MomentTrajectory, grid: SpatialGrid, t: float,
             formulas: str = "consistent", solution: QuasiparticleSolution | None = None) -> SolutionField:
    """Assemble ``u = sum_s (v0_s + sqrt(eps) v1_s + eps v2_s)`` at a trajectory grid time."""
    if trajectory.params != params:
        raise AlignmentError("parameters do not match the trajectory")
    sol = solution if solution is not None else QuasiparticleSolution(trajectory, formulas)
    return sol.field(grid, t)


def field_moments(field: SolutionField, s: int | None = None, values: np.ndarray | None = None):
    """Mass, centre and central second moment of ``u_s`` (or of ``u`` when ``s`` is None).

    The centre is the first moment divided by the mass and the second moment is
    taken about that centre.
    """
    u = values if values is not None else (field.u if s is None else field.particle(s))
    peak = np.max(np.abs(u))
    if peak > 0 and max(abs(u[0]), abs(u[-1])) > 1e-12 * peak:
        raise ResolutionError("field does not decay at the domain boundary; enlarge the domain")
    g = field.grid
    mu = float(g.integrate(u))
    xc = float(g.integrate(g.x * u) / mu)
    a2 = float(g.integrate((g.x - xc) ** 2 * u) / mu)
    return mu, xc, a2


def residual(params: ModelParams, prefractal: CantorPrefractal, fields: Sequence[SolutionField], s: int,
             convolution: str = "fft") -> np.ndarray:
    r"""Relative :math:`L^2` residual of the quasiparticle equation for ``u_s`` at each field time.

    The fractal time derivative uses the nearest-increment stencil over the
    supplied times, ``u_xx`` uses fourth-order central differences and the
    nonlocal term is a trapezoid convolution with the total field.  Entries at
    times off the set, where the equation reduces to a vanishing derivative,
    hold ``|D u_s| / |u_s|``.
    """
    if len(fields) < 3:
        raise DomainError("the residual needs at least three time samples")
    grid = fields[0].grid
    for f in fields:
        grid.check_same(f.grid)
    eps = params.epsilon
    if grid.dx > math.sqrt(eps) * min(params.sigma) / 8.0:
        raise ResolutionError(f"spacing {grid.dx:.3g} does not resolve the packet width")
    times = np.array([f.time for f in fields])
    stair = staircase(prefractal)
    tgrid = FractalGrid.from_times(stair, times)
    U = np.array([f.particle(s) for f in fields])
    dU = falpha_derivative_all(SampledFunction(tgrid, U))
    chi = tgrid.indicator_values
    n = len(times)
    conv = KernelConvolution(grid, params.kernel, method=convolution)
    out = np.empty(n)
    for i in range(n):
        u_s = U[i]
        total = fields[i].u
        rhs = eps * laplacian(u_s, grid.dx, order=4) + params.a_const * u_s - params.kappa * u_s * conv(total)
        res = -dU[i] + chi[i] * rhs
        # the 4th-order stencil leaves two boundary nodes undefined
        res[:2] = res[-2:] = 0.0
        out[i] = math.sqrt(grid.integrate(res * res) / grid.integrate(u_s * u_s))
    return out


def residual_at(solution: QuasiparticleSolution, prefractal: CantorPrefractal, grid: SpatialGrid,
                t: float, s: int, convolution: str = "fft") -> float:
    """Residual at a trajectory grid time using its two neighbouring grid times."""
    g = solution.trajectory.grid
    i = g.index_of(t)
    lo = min(max(i - 1, 0), len(g) - 3)
    idx = [lo, lo + 1, lo + 2]
    fields = [solution.field(grid, g.times[j]) for j in idx]
    res = residual(solution.params, prefractal, fields, s, convolution)
    return float(res[idx.index(i)])
