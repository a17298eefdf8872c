import math

import numpy as np
import pytest

from fractal_kpp.asymptotics import QuasiparticleSolution, initial_packet
from fractal_kpp.errors import AlignmentError, ConfigError, DivergenceError, DomainError
from fractal_kpp.flees import ModelParams, solve_flees
from fractal_kpp.fractal_set import build_prefractal, staircase
from fractal_kpp.reference import PdeConfig, compare, solve_direct
from fractal_kpp.spatial import KernelConvolution, SpatialGrid

from conftest import CANTOR
from oracles import heat_gaussian, logistic

CONTINUUM = build_prefractal(1.0, 0)


def packets(p, g):
    return sum(initial_packet(p, s, g.x) for s in range(p.K))


class TestConfig:
    def test_stability_bound(self, example_params):
        g = SpatialGrid(-8, 8, 2048)
        with pytest.raises(ConfigError):
            PdeConfig(g, 10, example_params, CONTINUUM)
        cfg = PdeConfig.stable(g, example_params, CONTINUUM)
        assert cfg.courant <= 0.25

    def test_aggregated_errors(self, example_params):
        with pytest.raises(ConfigError) as info:
            PdeConfig(SpatialGrid(), 0, example_params, CONTINUUM, scheme="rk9", convolution="magic")
        assert len(info.value.errors) == 3


class TestSolve:
    def test_heat_equation(self):
        p = ModelParams(0.02, 0.0, 0.0, 1.0, 2.0, (1.0,), (0.8,), (0.2,))
        g = SpatialGrid(-5, 5, 1001)
        F = build_prefractal(CANTOR, 5)
        cfg = PdeConfig.stable(g, p, F, scheme="heun")
        out = solve_direct(cfg, packets(p, g), (0.5, 1.0))
        S = staircase(F)
        for t, u in zip(out.times, out.fields):
            exact = heat_gaussian(g.x, 0.2, p.epsilon * 0.64, p.initial_mass()[0], p.epsilon, S(t))
            assert np.max(np.abs(u - exact)) <= 1e-5 * np.max(exact)

    def test_gap_times_share_fields(self):
        p = ModelParams(0.02, 1.0, 0.5, 1.0, 2.0, (1.0,), (0.8,), (0.0,))
        g = SpatialGrid(-5, 5, 513)
        cfg = PdeConfig.stable(g, p, build_prefractal(CANTOR, 5), convolution="fft")
        out = solve_direct(cfg, packets(p, g), (0.4, 0.5, 0.6))
        np.testing.assert_array_equal(out.fields[0], out.fields[1])
        np.testing.assert_array_equal(out.fields[0], out.fields[2])

    @pytest.mark.parametrize("scheme", ["euler", "heun"])
    def test_logistic_oracle(self, scheme):
        a, kap, b0 = 0.5, 1.0, 1.0
        p = ModelParams(1e-12, kap, a, b0, 1e6, (1.0,), (1.0,), (0.0,))
        g = SpatialGrid(-1, 1, 65)
        u0 = np.full(g.points, 0.3)
        cfg = PdeConfig(g, 4000, p, CONTINUUM, scheme=scheme)
        out = solve_direct(cfg, u0, (1.0,), check_decay=False)
        # Dirichlet nodes are zero, so the convolution sees the interior measure
        W = (g.x_max - g.x_min) - g.dx
        expected = logistic(1.0, 0.3, a, kap, b0, W)
        tol = 1e-4 if scheme == "euler" else 1e-8
        assert np.max(np.abs(out.fields[0][2:-2] - expected)) <= tol

    def test_mean_field_limit(self):
        # a very wide kernel makes the nonlocal term proportional to the total mass
        p = ModelParams(0.02, 1.0, 0.5, 1.0, 1e4, (1.0, 2.0), (1.0, 1.5), (-1.0, 1.0))
        g = SpatialGrid(-8, 8, 1024)
        out = solve_direct(PdeConfig.stable(g, p, CONTINUUM, convolution="fft", scheme="heun"), packets(p, g), (1.0,))
        M0 = float(g.integrate(packets(p, g)))
        expected = logistic(1.0, M0, 0.5, 1.0, 1.0, 1.0)
        assert g.integrate(out.fields[0]) == pytest.approx(expected, rel=0.01)

    def test_refinement_gate(self, example_params):
        fields = []
        for n in (1025, 2049):
            g = SpatialGrid(-8, 8, n)
            cfg = PdeConfig.stable(g, example_params, CONTINUUM, convolution="fft", scheme="heun")
            fields.append(solve_direct(cfg, packets(example_params, g)).fields[0])
        coarse, fine = fields
        assert np.max(np.abs(coarse - fine[::2])) / np.max(np.abs(fine)) <= 1e-4

    def test_direct_and_fft_agree(self, example_params):
        g = SpatialGrid(-8, 8, 512)
        F = build_prefractal(0.5, 5)
        a = solve_direct(PdeConfig.stable(g, example_params, F, convolution="direct"), packets(example_params, g))
        b = solve_direct(PdeConfig.stable(g, example_params, F, convolution="fft"), packets(example_params, g))
        np.testing.assert_allclose(a.fields, b.fields, atol=1e-10 * np.max(np.abs(a.fields)))

    def test_divergence(self):
        p = ModelParams(0.02, 0.0, 1e30, 1.0, 2.0, (1.0,), (1.0,), (0.0,))
        g = SpatialGrid(-6, 6, 128)
        with pytest.raises(DivergenceError) as info, np.errstate(over="ignore", invalid="ignore"):
            solve_direct(PdeConfig.stable(g, p, build_prefractal(0.5, 4)), packets(p, g))
        assert 0.0 <= info.value.time <= 1.0

    def test_input_checks(self, example_params):
        g = SpatialGrid(-8, 8, 256)
        cfg = PdeConfig.stable(g, example_params, CONTINUUM)
        with pytest.raises(AlignmentError):
            solve_direct(cfg, np.zeros(100))
        with pytest.raises(DomainError):
            solve_direct(cfg, np.ones(256))


class TestConvolution:
    def test_even_input_gives_even_output(self, example_params):
        g = SpatialGrid(-6, 6, 1201)
        u = np.exp(-(g.x**2)) * (1 + g.x**2)
        for method in ("direct", "fft"):
            out = KernelConvolution(g, example_params.kernel, method)(u)
            assert np.max(np.abs(out - out[::-1])) <= 1e-12 * np.max(out)


class TestCompare:
    def test_identical(self):
        g = SpatialGrid(-1, 1, 64)
        u = np.exp(-g.x**2)
        rep = compare(g, [u], [u], [1.0])
        assert rep.l2[0] == 0 and rep.linf[0] == 0 and rep.l2_rel[0] == 0

    def test_mismatch(self):
        g = SpatialGrid(-1, 1, 64)
        with pytest.raises(AlignmentError):
            compare(g, np.zeros((1, 64)), np.zeros((1, 63)), [1.0])
        with pytest.raises(AlignmentError):
            compare(g, np.zeros((1, 64)), np.zeros((1, 64)), [1.0], direct_grid=SpatialGrid(-1, 1, 65))

    def test_linear_case_at_floor(self):
        p = ModelParams.example(kappa=0.0)
        g = SpatialGrid(-8, 8, 2049)
        sol = QuasiparticleSolution(solve_flees(p, CONTINUUM))
        direct = solve_direct(PdeConfig.stable(g, p, CONTINUUM, convolution="fft", scheme="heun"), packets(p, g))
        rep = compare(g, [sol.field(g, 1.0).u], direct.fields, [1.0])
        assert rep.l2_rel[0] <= 1e-5 and rep.linf_rel[0] <= 1e-5

    def test_fractal_linear_case(self):
        p = ModelParams.example(kappa=0.0)
        F = build_prefractal(CANTOR, 5)
        g = SpatialGrid(-8, 8, 2049)
        sol = QuasiparticleSolution(solve_flees(p, F))
        direct = solve_direct(PdeConfig.stable(g, p, F, convolution="fft", scheme="heun"), packets(p, g))
        rep = compare(g, [sol.field(g, 1.0).u], direct.fields, [1.0])
        assert rep.l2_rel[0] <= 1e-5
