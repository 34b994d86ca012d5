from __future__ import annotations

import numpy as np
import pytest

from krylab.calculus import PolyJet, compose_holomorphic, field_deriv
from krylab.fields import AffineSkewHermitianField, standard_fields
from krylab.geometry import adapted_coordinates, make_domain
from krylab.profile import (PROFILE_RADII, _boundary_points, _second_field_derivative, boundary_profile,
                            pluriharmonic_quadratic)
from krylab.solver import RadialProblem, solve_radial


@pytest.fixture(scope="module")
def ball():
    return make_domain("ball", 2)


@pytest.fixture(scope="module")
def chart(ball):
    return adapted_coordinates(ball, np.array([0.0, 1.0]))


def test_pluriharmonic_term_keeps_complex_hessian():
    h = pluriharmonic_quadratic(3, 0.7)
    for i in range(3):
        for j in range(3):
            assert not h.dz(i).dzb(j).terms
    assert h(np.array([1.0, 0.0, 2.0])) == pytest.approx(1.4)


def test_second_field_derivative_matches_exact_jets(chart):
    # g = 1 gives u = |z|^2 - 1, a polynomial; pull it back and differentiate twice along the field
    sol = solve_radial(RadialProblem(2, 1.0))
    h = pluriharmonic_quadratic(2, 0.5)
    u = compose_holomorphic(PolyJet.norm_squared(2) - 1.0 + h, chart.to_ambient)
    u.real = True
    extra = compose_holomorphic(h, chart.to_ambient)
    w = np.array([[0.05 + 0.02j, -0.1j], [0.0, 0.03], [-0.08, 0.01 + 0.04j]])
    for xi in standard_fields(2):
        c = xi.coeffs()
        exact = field_deriv(field_deriv(u, c), c)
        got = _second_field_derivative(sol, chart, xi, w, extra)
        assert np.abs(got - np.real(exact(w))).max() < 1e-12


def test_quadratic_solution_has_flat_profile(ball):
    # the standard fields generate unitary motions, so w vanishes for a radial u
    fit = boundary_profile(solve_radial(RadialProblem(2, 1.0)), ball, 0)
    assert fit.C1 < 1e-8 and fit.C2 < 1e-6 and fit.C4 < 1e-6 and not fit.flagged


def test_harmonic_term_gives_order_one_constants(ball):
    sol = solve_radial(RadialProblem(2, 1.0))
    fit = boundary_profile(sol, ball, 0, harmonic=pluriharmonic_quadratic(2, 0.5))
    assert 0.1 < fit.C1 < 10 and np.isfinite(fit.C2) and 0 < fit.C4 < 10
    assert fit.M == pytest.approx(2.0, abs=1e-12)


def test_fit_constants_are_minimal(ball, chart):
    sol = solve_radial(RadialProblem(2, (0.0, 0.0, 1.0), eps=1e-3))
    h = pluriharmonic_quadratic(2, 0.5)
    fit = boundary_profile(sol, ball, 1, harmonic=h)
    assert fit.per_radius.shape == (len(PROFILE_RADII),)
    # C1 is the least constant on the small-radius half: shrinking it breaks the bound somewhere
    small = np.array(PROFILE_RADII) <= np.median(PROFILE_RADII)
    assert fit.C1 == pytest.approx(max(0.0, fit.per_radius[small].max()), rel=1e-12)


@pytest.mark.parametrize("field_index", [0, 1, 2])
def test_stable_across_eps(ball, field_index):
    h = pluriharmonic_quadratic(2, 0.5)
    fits = [boundary_profile(solve_radial(RadialProblem(2, (0.0, 0.0, 1.0), eps=e)), ball, field_index, harmonic=h)
            for e in (1e-1, 1e-3, 1e-6)]
    for name in ("C1", "C2", "C4"):
        vals = np.array([getattr(f, name) for f in fits])
        assert (vals.max() - vals.min()) <= 0.2 * vals.max()


def test_non_tangential_control_is_flagged(ball):
    # expected behaviour for a random non-tangential field: constants blow up as the radius shrinks
    rng = np.random.default_rng(3)
    a = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    Z = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    control = AffineSkewHermitianField(a, (Z - Z.conj().T) / 2, "control")
    sol = solve_radial(RadialProblem(2, (0.0, 0.0, 1.0), eps=1e-3))
    fit = boundary_profile(sol, ball, field_=control, harmonic=pluriharmonic_quadratic(2, 0.5))
    assert fit.flagged


def test_boundary_points_lie_on_sphere(ball, chart):
    pts = _boundary_points(chart, np.array([[0.1, 0.05, -0.02], [0.0, 0.0, 0.3]]))
    z = chart(pts)
    assert np.abs(np.sum(np.abs(z) ** 2, axis=1) - 1).max() < 1e-13
