from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, strategies as st
from numpy.polynomial import Polynomial

from krylab.calculus import PolyJet, hess_c, random_ball_points
from krylab.solver import (ConvergenceError, RadialProblem, SolverError, grid_admissibility, grid_error,
                           grid_norms, radial_ma_residual, radial_norms, solve_grid2, solve_radial)

seeds = st.integers(0, 2**32 - 1)


def _power_oracle(n, m):
    """Hand-integrated solution for ``g = t^m``: ``(t phi')^n = n t^(n+m) / (n+m)``."""
    k = (n / (n + m)) ** (1 / n)
    e = m / n
    return (lambda t: -k * (1 - t ** (e + 1)) / (e + 1)), (lambda t: k * t**e)


class TestRadialExactness:
    @pytest.mark.parametrize("n", [1, 2, 3, 4])
    def test_constant_profile(self, n, rng):
        sol = solve_radial(RadialProblem(n, 1.0))
        z = random_ball_points(n, 200, rng)
        assert np.abs(sol(z) - (np.sum(np.abs(z) ** 2, axis=1) - 1)).max() < 1e-12

    def test_zero_profile(self):
        sol = solve_radial(RadialProblem(2, 0.0))
        t = np.linspace(0, 1, 11)
        assert np.abs(sol.value(t)).max() == 0 and np.abs(sol.slope(t)).max() == 0

    def test_boundary_constant(self):
        sol = solve_radial(RadialProblem(2, (0.0, 1.0), c=0.7))
        assert sol.value(np.array([1.0]))[0] == pytest.approx(0.7, abs=1e-15)

    @pytest.mark.parametrize("n,m", [(2, 1), (2, 2), (2, 4), (3, 2), (1, 3)])
    def test_power_profile_against_antiderivative(self, n, m):
        sol = solve_radial(RadialProblem(n, Polynomial([0.0] * m + [1.0])))
        phi, dphi = _power_oracle(n, m)
        t = np.linspace(0, 1, 501)
        assert np.abs(sol.value(t) - phi(t)).max() < 1e-10
        assert np.abs(sol.slope(t) - dphi(t)).max() < 1e-12

    @pytest.mark.parametrize("m", [1, 2, 4])
    def test_ma_residual(self, m, rng):
        sol = solve_radial(RadialProblem(2, Polynomial([0.0] * m + [1.0])))
        assert radial_ma_residual(sol, random_ball_points(2, 500, rng)) < 1e-9

    def test_complex_hessian_against_exact_jet(self, rng):
        # g = t^2, n = 2: phi = (t^2 - 1) / (2 sqrt 2), a polynomial in |z|^2
        sol = solve_radial(RadialProblem(2, (0.0, 0.0, 1.0)))
        t = PolyJet.norm_squared(2)
        u = (t * t - 1.0) * (1 / (2 * np.sqrt(2)))
        for z in random_ball_points(2, 10, rng):
            assert np.abs(sol.complex_hessian(z)[0] - hess_c(u, z)).max() < 1e-12

    def test_fault_injection_detected(self, rng):
        sol = solve_radial(RadialProblem(2, (0.0, 0.0, 1.0)))
        z = random_ball_points(2, 500, rng)
        clean = radial_ma_residual(sol, z)
        sol.second_offset = 0.1
        # det = phi'(phi' + t (phi'' + 0.1)) moves by 0.1 t phi', of order 0.05 on the ball
        assert radial_ma_residual(sol, z) > 0.02 > 1e6 * clean

    def test_derivatives_against_finite_differences(self):
        sol = solve_radial(RadialProblem(3, (0.2, 1.0, 0.0, 2.0), eps=0.01))
        t = np.linspace(0.05, 0.95, 19)
        h = 1e-4
        d = sol.derivatives(t, 3)
        assert np.abs(d[1] - (sol.value(t + h) - sol.value(t - h)) / (2 * h)).max() < 1e-7
        assert np.abs(d[2] - (sol.slope(t + h) - sol.slope(t - h)) / (2 * h)).max() < 1e-7
        d2p = sol.derivatives(t + h, 2)[2]
        d2m = sol.derivatives(t - h, 2)[2]
        assert np.abs(d[3] - (d2p - d2m) / (2 * h)).max() < 1e-6

    def test_rejects_negative_rhs(self):
        with pytest.raises(SolverError):
            RadialProblem(2, (-1.0, 0.5))
        with pytest.raises(SolverError):
            RadialProblem(2, 1.0, eps=-1e-3)


def _random_nonneg_profile(rng):
    return Polynomial(np.abs(rng.standard_normal(int(rng.integers(1, 5)))))


class TestRadialProperties:
    @given(seeds)
    def test_comparison_principle(self, seed):
        rng = np.random.default_rng(seed)
        g1 = _random_nonneg_profile(rng)
        g2 = g1 + _random_nonneg_profile(rng)
        n = int(rng.integers(1, 4))
        u1 = solve_radial(RadialProblem(n, g1), panels=400)
        u2 = solve_radial(RadialProblem(n, g2), panels=400)
        t = np.linspace(0, 1, 101)
        assert np.all(u1.value(t) >= u2.value(t) - 1e-12)

    @given(seeds)
    def test_eps_monotonicity(self, seed):
        rng = np.random.default_rng(seed)
        g = _random_nonneg_profile(rng)
        t = np.linspace(0, 1, 101)
        vals = [solve_radial(RadialProblem(2, g, eps=e), panels=400).value(t) for e in (0.0, 1e-3, 1e-1)]
        assert np.all(vals[0] >= vals[1] - 1e-12) and np.all(vals[1] >= vals[2] - 1e-12)

    @given(seeds)
    def test_admissible_and_residual(self, seed):
        rng = np.random.default_rng(seed)
        sol = solve_radial(RadialProblem(2, _random_nonneg_profile(rng), eps=1e-3), panels=400)
        z = random_ball_points(2, 50, rng)
        assert np.all(sol.slope(np.sum(np.abs(z) ** 2, axis=1)) >= 0)
        assert radial_ma_residual(sol, z) < 1e-9 * max(1.0, float(np.max(sol.problem.rhs(np.linspace(0, 1, 11)))))


class TestNorms:
    def test_quadratic(self):
        rep = radial_norms(solve_radial(RadialProblem(3, 1.0)))
        assert rep.grad_sup == pytest.approx(2.0, abs=1e-12)
        assert rep.M == pytest.approx(2.0, abs=1e-12)
        assert all(v == pytest.approx(2.0, abs=1e-12) for v in rep.hess_sup.values())

    def test_power_profile_finite_and_monotone(self):
        rep = radial_norms(solve_radial(RadialProblem(2, (0.0, 0.0, 1.0), eps=1e-3)), deltas=(0.0, 0.1, 0.2, 0.4))
        vals = [rep.hess_sup[d] for d in (0.0, 0.1, 0.2, 0.4)]
        assert all(np.isfinite(vals)) and all(np.diff(vals) <= 0)
        assert rep.grad_sup > 0 and rep.M > 0


class TestGrid:
    def test_constant_profile_is_exact(self):
        f = solve_grid2(1.0, N=9)
        sol = solve_radial(RadialProblem(2, 1.0))
        assert f.converged and grid_error(f, sol) < 1e-10
        assert grid_admissibility(f) == pytest.approx(1.0, abs=1e-8)

    def test_pluriharmonic_boundary_data(self):
        eps = 1e-4
        f = solve_grid2(0.0, eps=eps, boundary=lambda p: p[:, 2], N=9)
        z1, z2 = f.complex_points()
        inside = f.interior
        exact = z2.real + np.sqrt(eps) * (np.abs(z1) ** 2 + np.abs(z2) ** 2 - 1)
        assert np.abs(f.values[inside] - exact[inside]).max() < 1e-8
        assert np.abs(f.values[inside] - z2.real[inside]).max() <= np.sqrt(eps)

    def test_refinement_reduces_error(self):
        g = (0.1, 0.0, 1.0)
        sol = solve_radial(RadialProblem(2, g))
        errors = [grid_error(solve_grid2(g, N=N), sol) for N in (9, 13)]
        assert errors[1] < errors[0] < 0.1

    def test_norms_and_rows(self):
        f = solve_grid2(1.0, N=9)
        norms = grid_norms(f, deltas=(0.3,))
        # second differences of |z|^2 - 1 along an axis are exactly 2
        assert norms[0.3] == pytest.approx(2.0, abs=1e-8)
        rows = f.to_rows()
        assert len(rows) == 9**4 and set(rows[0]) == {"x1", "y1", "x2", "y2", "u", "interior"}

    def test_size_limits(self):
        with pytest.raises(SolverError):
            solve_grid2(1.0, N=23)

    def test_non_convergence_reports_partial_field(self):
        with pytest.raises(ConvergenceError) as info:
            solve_grid2((0.1, 0.0, 1.0), N=9, max_policy=1, tol=1e-14)
        assert info.value.partial is not None and not info.value.partial.converged
