from __future__ import annotations

import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("krylab", max_examples=40, deadline=None)
settings.load_profile("krylab")


@pytest.fixture
def rng():
    return np.random.default_rng(20240615)


def fd_first(f, z, d, h=1e-5):
    """Central difference of ``t -> f(z + t d)`` at 0 (real ``t``)."""
    return (f(z + h * d) - f(z - h * d)) / (2 * h)


def fd_second(f, z, d, h=1e-4):
    return (f(z + h * d) - 2 * f(z) + f(z - h * d)) / h**2


def fd_cross(f, z, d1, d2, h=1e-4):
    return (f(z + h * d1 + h * d2) - f(z + h * d1 - h * d2)
            - f(z - h * d1 + h * d2) + f(z - h * d1 - h * d2)) / (4 * h * h)


def fd_wirtinger(f, Z, h=1e-4):
    """Holomorphic gradient and mixed Hessian ``f_{I Jbar}`` of a scalar function on ``C^m``."""
    m = Z.size
    E = np.eye(m)

    def d1(d):
        return (f(Z + h * d) - f(Z - h * d)) / (2 * h)

    def d2(a, b):
        return (f(Z + h * a + h * b) - f(Z + h * a - h * b) - f(Z - h * a + h * b) + f(Z - h * a - h * b)) / (4 * h * h)

    grad = np.array([(d1(E[i]) - 1j * d1(1j * E[i])) / 2 for i in range(m)])
    H = np.zeros((m, m), complex)
    for i in range(m):
        for j in range(m):
            xx, yy = d2(E[i], E[j]), d2(1j * E[i], 1j * E[j])
            xy, yx = d2(E[i], 1j * E[j]), d2(1j * E[i], E[j])
            H[i, j] = (xx + yy + 1j * (xy - yx)) / 4
    return grad, H


def fd_wirtinger_richardson(f, Z, h=1e-4):
    """:func:`fd_wirtinger` with one Richardson step, for functions with large third derivatives."""
    g1, H1 = fd_wirtinger(f, Z, h)
    g2, H2 = fd_wirtinger(f, Z, h / 2)
    return (4 * g2 - g1) / 3, (4 * H2 - H1) / 3
