"""Variable-coefficient pressure solver and Leray projection."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oddflow.elliptic import leray_project, solve_variable_poisson
from oddflow.grid import (
    Grid,
    ScalarField,
    VectorField,
    divergence,
    gradient,
    dealias,
    l2_norm,
    max_abs,
    mean,
    perp_gradient,
    random_band_limited,
    random_solenoidal,
)

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def manufactured(n=64):
    """a = 2 + cos x cos y, exact pressure sin(x + y), F = -a grad(exact)."""
    g = Grid(n)
    a = ScalarField(g, 2.0 + np.cos(g.mesh_x) * np.cos(g.mesh_y))
    exact = ScalarField(g, np.sin(g.mesh_x + g.mesh_y))
    grad = gradient(exact)
    F = VectorField(-1.0 * a * grad.x, -1.0 * a * grad.y)
    return g, a, exact, F


def residual_norm(a, F, pressure):
    """|div(a grad Pi) + div F| via the solver's discretization."""
    grad = gradient(pressure)
    flux = dealias(VectorField(a * grad.x, a * grad.y))
    return l2_norm(divergence(flux) + divergence(dealias(F)))


class TestPoissonSolve:
    def test_constant_coefficient_is_one_preconditioner_hit(self):
        g = Grid(32)
        a = ScalarField(g, 2.0 * np.ones((g.n, g.n)))
        exact = ScalarField(g, np.sin(g.mesh_x) * np.cos(2 * g.mesh_y))
        grad = gradient(exact)
        F = VectorField(-1.0 * a * grad.x, -1.0 * a * grad.y)
        res = solve_variable_poisson(a, F)
        assert max_abs(res.pressure - exact) < 1e-12
        assert res.iterations <= 2

    def test_manufactured_solution(self):
        g, a, exact, F = manufactured()
        res = solve_variable_poisson(a, F, tol=1e-10, max_iter=200)
        assert max_abs(res.pressure - exact) < 1e-8
        assert res.iterations <= 200
        assert res.residual <= 1e-10
        # certify against an independently computed residual
        rel = residual_norm(a, F, res.pressure) / l2_norm(divergence(dealias(F)))
        assert rel <= 1.1e-10

    def test_mean_zero(self):
        g, a, exact, F = manufactured(32)
        res = solve_variable_poisson(a, F)
        assert abs(mean(res.pressure)) < 1e-13

    def test_zero_forcing(self):
        g = Grid(32)
        a = ScalarField(g, np.ones((g.n, g.n)))
        F = VectorField.from_arrays(g, np.zeros((g.n, g.n)), np.zeros((g.n, g.n)))
        res = solve_variable_poisson(a, F)
        assert max_abs(res.pressure) == 0.0
        assert res.iterations == 0

    def test_gradient_free_forcing(self):
        # a perp-gradient has zero divergence: nothing to solve for
        g = Grid(32)
        a = ScalarField(g, 1.0 + 0.3 * np.cos(g.mesh_x))
        F = perp_gradient(ScalarField(g, np.sin(g.mesh_x) * np.sin(g.mesh_y)))
        res = solve_variable_poisson(a, F)
        assert max_abs(res.pressure) < 1e-11

    def test_warm_start_reduces_iterations(self):
        g, a, exact, F = manufactured()
        cold = solve_variable_poisson(a, F)
        bump = ScalarField(g, 1e-3 * np.sin(2 * g.mesh_x))
        F2 = VectorField(F.x + bump, F.y)
        warm = solve_variable_poisson(a, F2, initial_guess=cold.pressure)
        cold2 = solve_variable_poisson(a, F2)
        assert warm.iterations < cold2.iterations

    def test_nonpositive_coefficient_rejected(self):
        g = Grid(32)
        a = ScalarField(g, np.cos(g.mesh_x))  # changes sign
        F = VectorField.from_arrays(g, np.sin(g.mesh_y), np.zeros((g.n, g.n)))
        with pytest.raises(ValueError, match="strictly positive"):
            solve_variable_poisson(a, F)

    @settings(max_examples=15, deadline=None)
    @given(seeds)
    def test_energy_bound_random_problems(self, seed):
        rng = np.random.default_rng(seed)
        g = Grid(32)
        a = ScalarField(
            g, 1.0 + 0.5 * random_band_limited(g, rng, kmax=4, rms=0.5).values**2
        )
        F = VectorField(
            random_band_limited(g, rng, kmax=8),
            random_band_limited(g, rng, kmax=8),
        )
        res = solve_variable_poisson(a, F)
        a_min = a.values.min()
        lhs = a_min * l2_norm(gradient(res.pressure))
        rhs = l2_norm(dealias(F))
        assert lhs <= rhs * (1.0 + 1e-8) + 1e-12

    @settings(max_examples=15, deadline=None)
    @given(seeds)
    def test_residual_contract_random_problems(self, seed):
        rng = np.random.default_rng(seed)
        g = Grid(32)
        a = ScalarField(g, 1.5 + random_band_limited(g, rng, kmax=3, rms=0.3).values)
        if a.values.min() <= 0.05:
            return
        F = VectorField(
            random_band_limited(g, rng, kmax=8),
            random_band_limited(g, rng, kmax=8),
        )
        res = solve_variable_poisson(a, F, tol=1e-10)
        rel = residual_norm(a, F, res.pressure) / l2_norm(divergence(dealias(F)))
        assert rel <= 1.1e-10


class TestLerayProjection:
    @settings(max_examples=25, deadline=None)
    @given(seeds)
    def test_divergence_removed(self, seed):
        g = Grid(32)
        rng = np.random.default_rng(seed)
        v = VectorField(random_band_limited(g, rng), random_band_limited(g, rng))
        assert max_abs(divergence(leray_project(v))) < 1e-11

    @settings(max_examples=25, deadline=None)
    @given(seeds)
    def test_idempotent(self, seed):
        g = Grid(32)
        rng = np.random.default_rng(seed)
        v = VectorField(random_band_limited(g, rng), random_band_limited(g, rng))
        once = leray_project(v)
        twice = leray_project(once)
        diff = max(max_abs(twice.x - once.x), max_abs(twice.y - once.y))
        assert diff < 1e-11

    def test_splits_gradient_from_stream(self):
        g = Grid(64)
        s = ScalarField(g, np.sin(g.mesh_x) * np.cos(g.mesh_y))
        psi = ScalarField(g, np.cos(2 * g.mesh_x) * np.sin(g.mesh_y))
        sol = perp_gradient(psi)
        v = VectorField(gradient(s).x + sol.x, gradient(s).y + sol.y)
        p = leray_project(v)
        assert max_abs(p.x - sol.x) < 1e-11
        assert max_abs(p.y - sol.y) < 1e-11

    def test_mean_flow_untouched(self):
        g = Grid(32)
        v = VectorField.from_arrays(
            g, 0.7 * np.ones((g.n, g.n)), -0.2 * np.ones((g.n, g.n))
        )
        p = leray_project(v)
        assert mean(p.x) == pytest.approx(0.7, abs=1e-14)
        assert mean(p.y) == pytest.approx(-0.2, abs=1e-14)
