import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fractal_kpp.calculus import (
    FractalGrid,
    SampledFunction,
    cumulative_integral,
    falpha_derivative,
    falpha_derivative_all,
    falpha_integral,
    fractal_ode_solve,
)
from fractal_kpp.errors import AlignmentError, DegenerateStencilError, DivergenceError, DomainError
from fractal_kpp.fractal_set import build_prefractal, staircase

from conftest import CANTOR


@pytest.fixture(scope="module", params=[0.5, CANTOR, 1.0], ids=["a0.5", "cantor", "a1"])
def grid(request):
    return FractalGrid.build(build_prefractal(request.param, 5))


class TestGrid:
    def test_invariants(self, grid):
        assert grid.staircase_values[0] == 0.0
        assert np.all(np.diff(grid.times) > 0)
        assert np.all(np.diff(grid.staircase_values) >= 0)
        assert grid.total == pytest.approx(grid.stair.total, abs=1e-13)

    def test_endpoints_are_nodes(self):
        F = build_prefractal(CANTOR, 5)
        g = FractalGrid.build(F)
        for edge in F.intervals.ravel():
            assert np.min(np.abs(g.times - edge)) < 1e-13

    def test_flats_exact(self):
        F = build_prefractal(CANTOR, 5)
        g = FractalGrid.build(F)
        off = g.indicator_values == 0
        ds = np.diff(g.staircase_values)
        # every cell touching an off-set node lies on a flat
        assert np.all(ds[off[:-1]] == 0.0)

    def test_validation(self):
        stair = staircase(build_prefractal(1.0, 0))
        with pytest.raises(DomainError):
            FractalGrid.from_times(stair, [0.0, 0.5, 0.5, 1.0])
        with pytest.raises(DomainError):
            FractalGrid.from_times(stair, [0.0])
        g = FractalGrid.from_times(stair, [0.0, 0.5, 1.0])
        with pytest.raises(AlignmentError):
            SampledFunction(g, [1.0, 2.0])
        with pytest.raises(DomainError):
            SampledFunction(g, [1.0, np.nan, 2.0])
        with pytest.raises(DomainError):
            g.index_of(0.25)


class TestDerivative:
    def test_constant(self, grid):
        f = SampledFunction(grid, np.full(len(grid), 2.5))
        assert np.all(falpha_derivative_all(f) == 0.0)

    def test_staircase_gives_indicator(self, grid):
        f = SampledFunction(grid, grid.staircase_values.copy())
        d = falpha_derivative_all(f)
        assert np.max(np.abs(d - grid.indicator_values)) <= 1e-8

    def test_pointwise_matches_vectorised(self, grid):
        f = SampledFunction.of_staircase(grid, np.sin)
        d = falpha_derivative_all(f)
        for i in (0, 1, len(grid) // 3, len(grid) // 2, -1):
            assert falpha_derivative(f, i) == d[i]

    def test_square_continuum(self):
        g = FractalGrid.build(build_prefractal(1.0, 0))
        d = falpha_derivative_all(SampledFunction.of(g, np.square))
        np.testing.assert_allclose(d[1:-1], 2 * g.times[1:-1], atol=1e-12)

    def test_zero_off_set(self):
        g = FractalGrid.build(build_prefractal(CANTOR, 5))
        d = falpha_derivative_all(SampledFunction.of(g, np.cos))
        assert np.all(d[g.indicator_values == 0] == 0.0)

    def test_degenerate_stencil(self):
        F = build_prefractal(CANTOR, 1)
        g = FractalGrid.from_times(staircase(F), [1 / 3, 0.5])
        with pytest.raises(DegenerateStencilError):
            falpha_derivative(SampledFunction(g, [1.0, 2.0]), 0)

    def test_leibniz(self, grid):
        f = SampledFunction.of_staircase(grid, lambda s: 1 + s**2)
        h = SampledFunction.of_staircase(grid, np.exp)
        fh = SampledFunction(grid, f.values * h.values)
        on = grid.indicator_values == 1
        lhs = falpha_derivative_all(fh)
        rhs = falpha_derivative_all(f) * h.values + f.values * falpha_derivative_all(h)
        assert np.max(np.abs(lhs - rhs)[on]) <= 1e-6


class TestIntegral:
    def test_indicator(self, grid):
        chi = SampledFunction(grid, grid.indicator_values.copy())
        S = grid.stair
        for a, b in ((0.0, 1.0), (0.1, 0.45), (0.3, 0.95)):
            assert falpha_integral(chi, a, b) == pytest.approx(S(b) - S(a), abs=1e-9)
        np.testing.assert_allclose(cumulative_integral(chi).values, grid.staircase_values, atol=1e-12)

    def test_zero(self, grid):
        z = SampledFunction(grid, np.zeros(len(grid)))
        assert falpha_integral(z, 0.2, 0.7) == 0.0
        assert np.all(cumulative_integral(z).values == 0.0)

    def test_continuum_unit(self):
        g = FractalGrid.build(build_prefractal(1.0, 0))
        G = cumulative_integral(SampledFunction(g, np.ones(len(g))), a=0.25)
        np.testing.assert_allclose(G.values, g.times - 0.25, atol=1e-9)

    @settings(max_examples=30, deadline=None)
    @given(a=st.floats(0, 1), b=st.floats(0, 1))
    def test_antisymmetry(self, a, b):
        g = FractalGrid.build(build_prefractal(CANTOR, 5), dt=1e-3, n_tau=2000)
        f = SampledFunction.of(g, np.cos)
        assert falpha_integral(f, a, b) == -falpha_integral(f, b, a)

    def test_fundamental_theorem(self, grid):
        f = SampledFunction.of_staircase(grid, lambda s: s**3 - 2 * s + np.sin(s))
        h = SampledFunction(grid, falpha_derivative_all(f))
        G = cumulative_integral(h)
        assert np.max(np.abs(G.values - (f.values - f.values[0]))) <= 1e-6

    def test_integration_by_parts(self, grid):
        f = SampledFunction.of_staircase(grid, lambda s: s**2 + 1)
        h = SampledFunction.of_staircase(grid, lambda s: 3 * s - s**3)
        df = SampledFunction(grid, falpha_derivative_all(f))
        dh = SampledFunction(grid, falpha_derivative_all(h))
        a, b = 0.0, 1.0
        lhs = falpha_integral(SampledFunction(grid, f.values * dh.values), a, b)
        rhs = f.values[-1] * h.values[-1] - f.values[0] * h.values[0] - falpha_integral(
            SampledFunction(grid, df.values * h.values), a, b)
        assert lhs == pytest.approx(rhs, abs=1e-6)

    def test_limits_outside_grid(self, grid):
        with pytest.raises(DomainError):
            falpha_integral(SampledFunction.of(grid, np.cos), -0.5, 0.5)


class TestOde:
    def test_second_moment_law(self, grid):
        eps = 0.02
        y = fractal_ode_solve(lambda y, t: np.array([2 * eps]), [eps], grid)
        assert np.max(np.abs(y[:, 0] - (2 * eps * grid.staircase_values + eps))) <= 1e-12

    def test_zero_rhs(self, grid):
        y = fractal_ode_solve(lambda y, t: np.zeros(2), [1.0, -3.0], grid)
        assert np.all(y == [1.0, -3.0])

    def test_exponential_continuum(self):
        g = FractalGrid.build(build_prefractal(1.0, 0))
        y = fractal_ode_solve(lambda y, t: 0.7 * y, [2.0], g)
        assert y[-1, 0] == pytest.approx(2.0 * math.exp(0.7), abs=1e-8)

    def test_fractal_exponential(self, grid):
        y = fractal_ode_solve(lambda y, t: -1.3 * y, [1.0], grid)
        np.testing.assert_allclose(y[:, 0], np.exp(-1.3 * grid.staircase_values), rtol=1e-12)

    def test_explicit_time_dependence_uses_preimage(self):
        F = build_prefractal(CANTOR, 5)
        g = FractalGrid.build(F)
        # dY/dtau = t(tau); on the set t(tau) is the inverse staircase
        y = fractal_ode_solve(lambda y, t: np.array([t]), [0.0], g)
        fine = FractalGrid.build(F, dt=2.5e-5, n_tau=80_000)
        y_fine = fractal_ode_solve(lambda y, t: np.array([t]), [0.0], fine)
        assert y[-1, 0] == pytest.approx(y_fine[-1, 0], abs=1e-9)

    def test_euler_converges_first_order(self):
        F = build_prefractal(CANTOR, 5)
        rhs = lambda y, t: np.array([-y[0] ** 2])  # noqa: E731
        gaps = []
        for n_tau in (2000, 4000):
            g = FractalGrid.build(F, dt=1e-3, n_tau=n_tau)
            e = fractal_ode_solve(rhs, [1.0], g, method="euler")[-1, 0]
            r = fractal_ode_solve(rhs, [1.0], g, method="rk4")[-1, 0]
            gaps.append(abs(e - r))
        assert gaps[0] / gaps[1] == pytest.approx(2.0, rel=0.3)

    def test_positivity_switch(self):
        g = FractalGrid.build(build_prefractal(1.0, 0), n_tau=200, dt=5e-3)
        y = fractal_ode_solve(lambda y, t: -60.0 * y, [1.0], g, positive=[0])
        assert np.all(y[:, 0] > 0)
        assert y[-1, 0] == pytest.approx(math.exp(-60.0), rel=1e-3)

    def test_divergence(self):
        g = FractalGrid.build(build_prefractal(1.0, 0), n_tau=100, dt=1e-2)
        with pytest.raises(DivergenceError) as info, np.errstate(over="ignore", invalid="ignore"):
            fractal_ode_solve(lambda y, t: y**2 * 1e3, [10.0], g)
        assert info.value.time is not None

    def test_bad_input(self, grid):
        with pytest.raises(DomainError):
            fractal_ode_solve(lambda y, t: y, [np.inf], grid)
        with pytest.raises(DomainError):
            fractal_ode_solve(lambda y, t: y, [1.0], grid, method="rk45")
