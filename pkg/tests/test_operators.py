from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, strategies as st

from krylab.calculus import PolyJet, random_admissible, random_ball_points
from krylab.operators import (AdmissibilityError, ConeTag, HessianOperator, SingularLinearizationError,
                              cone_member, finite_difference_grad, holomorphic_map, ma_holo_check,
                              normalized_linearization, op_eval, op_grad, op_second_form, pair,
                              random_cone_matrix, random_hermitian, random_unitary, sigma_k)

seeds = st.integers(0, 2**32 - 1)
MA2 = HessianOperator.monge_ampere(2)


def _operators(n):
    ops = [HessianOperator.monge_ampere(n)] + [HessianOperator.sigma_root(n, k) for k in range(1, n + 1)]
    return ops


def _brute_sigma(lam, k):
    from itertools import combinations
    return sum(np.prod(c) for c in combinations(lam, k))


class TestSigma:
    @pytest.mark.parametrize("lam,k,value", [((1, 1, 1), 2, 3), ((1, 2, 3), 3, 6), ((1, 2, 3), 2, 11)])
    def test_examples(self, lam, k, value):
        assert sigma_k(lam, k) == value

    @given(seeds)
    def test_matches_brute_force(self, seed):
        rng = np.random.default_rng(seed)
        lam = rng.standard_normal(int(rng.integers(1, 6)))
        for k in range(lam.size + 1):
            assert sigma_k(lam, k) == pytest.approx(_brute_sigma(lam, k) if k else 1.0, abs=1e-12)

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            sigma_k((1.0, 2.0), 3)


class TestCones:
    @pytest.mark.parametrize("lam,k,inside", [((1, 1), 2, True), ((-1, 3), 2, False), ((-1, 3), 1, True)])
    def test_examples(self, lam, k, inside):
        assert cone_member(np.array(lam, float), ConeTag(k, 2)) is inside

    @given(seeds)
    def test_nesting(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 5))
        lam = rng.standard_normal(n) + 0.5
        member = [cone_member(lam, ConeTag(k, n)) for k in range(1, n + 1)]
        # Gamma_n inside Gamma_k inside Gamma_1
        for k in range(1, n):
            assert member[k] <= member[k - 1]

    def test_matrix_uses_eigenvalues(self, rng):
        U = random_unitary(2, rng)
        H = U @ np.diag([-1.0, 3.0]) @ U.conj().T
        assert cone_member(H, ConeTag(1, 2)) and not cone_member(H, ConeTag(2, 2))

    def test_tag_range(self):
        with pytest.raises(ValueError):
            ConeTag(3, 2)


class TestEval:
    def test_identity(self):
        assert op_eval(HessianOperator.monge_ampere(3), np.eye(3)) == pytest.approx(1.0, abs=1e-15)

    def test_diagonal(self):
        assert op_eval(HessianOperator.monge_ampere(3), np.diag([1.0, 2.0, 3.0])) == pytest.approx(6 ** (1 / 3), rel=1e-15)

    @given(seeds)
    def test_unitary_invariance(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 4))
        for F in _operators(n):
            H = random_cone_matrix(F, rng)
            B = random_unitary(n, rng)
            assert abs(op_eval(F, B.conj().T @ H @ B) - op_eval(F, H)) < 1e-12 * max(1.0, op_eval(F, H))

    @given(seeds)
    def test_homogeneity_and_monotonicity(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 4))
        t = float(rng.uniform(0.1, 10))
        for F in _operators(n):
            H = random_cone_matrix(F, rng)
            assert op_eval(F, t * H) == pytest.approx(t * op_eval(F, H), rel=1e-12)
            Z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
            P = Z @ Z.conj().T
            assert op_eval(F, H + P) >= op_eval(F, H) - 1e-12

    def test_outside_cone_rejected(self):
        with pytest.raises(AdmissibilityError):
            op_eval(MA2, np.diag([-1.0, 3.0]))

    def test_improved_monotonicity_along_rays(self):
        F = HessianOperator.sigma_root(3, 2)
        vals = [F.f(np.array([0.5, 1.0, 1.0 + R])) for R in (0, 1, 10, 100, 1e4)]
        assert np.all(np.diff(vals) > 0) and vals[-1] > 50


class TestGradient:
    def test_ma_identity(self):
        assert np.allclose(op_grad(MA2, np.eye(2)), np.eye(2) / 2, atol=1e-15)

    def test_sigma_one_is_identity(self, rng):
        F = HessianOperator.sigma_root(3, 1)
        assert np.allclose(op_grad(F, random_cone_matrix(F, rng)), np.eye(3), atol=1e-13)

    def test_ma_diagonal_against_finite_differences(self):
        H = np.diag([1.0, 4.0]).astype(complex)
        G = op_grad(MA2, H)
        assert np.abs(G - finite_difference_grad(MA2, H)).max() < 1e-7
        # frozen: det^(1/2) = 2, so F = (2/2) diag(1, 1/4)
        assert np.allclose(G, np.diag([1.0, 0.25]), atol=1e-15)

    @given(seeds)
    def test_matches_finite_differences(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 4))
        for F in _operators(n):
            H = random_cone_matrix(F, rng)
            G = op_grad(F, H)
            assert np.abs(G - finite_difference_grad(F, H)).max() < 1e-7 * max(1.0, np.abs(G).max())
            # ellipticity: positive definite Hermitian pairing matrix
            assert np.linalg.eigvalsh((G + G.conj().T) / 2).min() > 0

    @given(seeds)
    def test_pairing_reproduces_directional_derivative(self, seed):
        rng = np.random.default_rng(seed)
        F = HessianOperator.sigma_root(3, 2)
        H = random_cone_matrix(F, rng)
        V = random_hermitian(3, rng)
        h = 1e-6
        fd = (op_eval(F, H + h * V) - op_eval(F, H - h * V)) / (2 * h)
        assert pair(op_grad(F, H), V).real == pytest.approx(fd, abs=1e-7)

    def test_boundary_raises(self):
        with pytest.raises(SingularLinearizationError):
            op_grad(MA2, np.diag([0.0, 1.0]))


class TestSecondForm:
    def test_linear_operator_has_no_curvature(self, rng):
        F = HessianOperator.sigma_root(2, 1)
        assert op_second_form(F, random_cone_matrix(F, rng), random_hermitian(2, rng)) == 0

    def test_along_ray(self):
        assert abs(op_second_form(MA2, np.eye(2), np.eye(2))) < 1e-15

    def test_diag_against_second_difference(self):
        V = np.diag([1.0, -1.0])
        exact = op_second_form(MA2, np.eye(2), V)
        h = 1e-4
        fd = (op_eval(MA2, np.eye(2) + h * V) - 2 * op_eval(MA2, np.eye(2)) + op_eval(MA2, np.eye(2) - h * V)) / h**2
        # sqrt(1 - t^2) has second derivative -1 at 0
        assert exact == pytest.approx(-1.0, abs=1e-14)
        assert abs(exact - fd) < 1e-6

    @given(seeds)
    def test_concave_and_matches_second_difference(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 4))
        h = 1e-4
        for F in _operators(n):
            H = random_cone_matrix(F, rng, shift=1.0)
            V = random_hermitian(n, rng, 0.3)
            exact = op_second_form(F, H, V)
            fd = (op_eval(F, H + h * V) - 2 * op_eval(F, H) + op_eval(F, H - h * V)) / h**2
            assert exact <= 1e-9
            assert abs(exact - fd) < 1e-5 * max(1.0, abs(exact))

    def test_collided_eigenvalues(self, rng):
        F = HessianOperator.sigma_root(3, 2)
        V = random_hermitian(3, rng)
        h = 1e-4
        H = np.diag([2.0, 2.0, 2.0])
        fd = (op_eval(F, H + h * V) - 2 * op_eval(F, H) + op_eval(F, H - h * V)) / h**2
        assert abs(op_second_form(F, H, V) - fd) < 1e-5


class TestNormalizedLinearization:
    def test_identity(self):
        assert np.allclose(normalized_linearization(MA2, np.eye(2)), np.eye(2) / 2, atol=1e-15)

    def test_diag_and_dual_cone(self, rng):
        a = normalized_linearization(MA2, np.diag([1.0, 4.0]))
        assert np.allclose(a, np.diag([4.0, 1.0]) / 5, atol=1e-15)
        for _ in range(100):
            B = random_cone_matrix(MA2, rng)
            assert np.trace(a @ B).real > 0

    @given(seeds)
    def test_trace_one_and_bounded(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 4))
        for F in _operators(n):
            a = normalized_linearization(F, random_cone_matrix(F, rng))
            eig = np.linalg.eigvalsh((a + a.conj().T) / 2)
            assert abs(np.trace(a).real - 1) < 1e-14
            assert eig.min() > 0 and eig.max() <= 1 + 1e-14


class TestHolomorphicInvariance:
    def test_identity_map(self, rng):
        u = random_admissible(2, rng)
        assert ma_holo_check(u, holomorphic_map(2, np.eye(2)), np.array([0.1, 0.2j])) < 1e-14

    def test_rotation_of_norm_squared(self, rng):
        U = random_unitary(2, rng)
        assert ma_holo_check(PolyJet.norm_squared(2), holomorphic_map(2, U), np.array([0.3, -0.1j])) < 1e-14

    @given(seeds)
    def test_quadratic_shear(self, seed):
        rng = np.random.default_rng(seed)
        u = random_admissible(2, rng)
        G = holomorphic_map(2, np.eye(2), {(1, 0, 0): 1.0})
        w = random_ball_points(2, 1, rng, 0.3)[0]
        assert ma_holo_check(u, G, w) < 1e-9
