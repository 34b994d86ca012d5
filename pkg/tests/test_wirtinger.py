from __future__ import annotations

import numpy as np
from hypothesis import given, strategies as st

from conftest import fd_wirtinger
from krylab.calculus import random_ball_points, random_real_poly
from krylab.wirtinger import Jet2, sum_jets

seeds = st.integers(0, 2**32 - 1)


@given(seeds)
def test_product_matches_polynomial_product(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 4))
    u, v = random_real_poly(n, 2, rng), random_real_poly(n, 2, rng)
    z = random_ball_points(n, 5, rng)
    lhs = Jet2.from_poly(u, z, n) * Jet2.from_poly(v, z, n)
    rhs = Jet2.from_poly(u * v, z, n)
    for a, b in ((lhs.val, rhs.val), (lhs.grad, rhs.grad), (lhs.hess, rhs.hess)):
        assert np.abs(a - b).max() < 1e-12 * max(1.0, np.abs(b).max())


@given(seeds)
def test_conjugate_and_abs2(seed):
    rng = np.random.default_rng(seed)
    n = 2
    u = random_real_poly(n, 2, rng) + random_real_poly(n, 2, rng) * 1j
    z = random_ball_points(n, 4, rng)
    J = Jet2.from_poly(u, z, n)
    direct = Jet2.from_poly(u * u.conj(), z, n)
    assert np.abs(J.abs2().hess - direct.hess).max() < 1e-12 * max(1.0, np.abs(direct.hess).max())
    assert np.abs(J.conj().val - np.conj(J.val)).max() == 0


@given(seeds)
def test_scalar_maps_against_finite_differences(seed):
    rng = np.random.default_rng(seed)
    m = 3
    Z = random_ball_points(m, 1, rng, 0.8)[0]
    zs = [Jet2.variable(m, k, Z[None, k]) for k in range(m)]
    t = sum_jets([zk.abs2() for zk in zs]) + 1.0
    jet = t.power(0.3) * (zs[0] * zs[1].conj()).real_part() / (zs[2].abs2() + 2.0) + t.sqrt().reciprocal()

    def f(W):
        tt = np.sum(np.abs(W) ** 2) + 1.0
        return tt**0.3 * np.real(W[0] * np.conj(W[1])) / (abs(W[2]) ** 2 + 2.0) + tt**-0.5

    g, H = fd_wirtinger(f, Z)
    assert np.abs(jet.holo_grad()[0] - g).max() < 1e-8
    assert np.abs(jet.mixed_hessian()[0] - H).max() < 1e-6


def test_hessian_symmetry_of_lifted_polynomial(rng):
    u = random_real_poly(2, 3, rng)
    J = Jet2.from_poly(u, random_ball_points(2, 3, rng), 5, offset=1)
    assert np.abs(J.hess - np.swapaxes(J.hess, 1, 2)).max() == 0
    # slots outside the polynomial's block stay empty
    assert np.abs(J.grad[:, [0, 3, 4, 5, 8, 9]]).max() == 0
