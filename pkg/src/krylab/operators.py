"""Hessian operators on Hermitian matrices: the cones Gamma_k and f = sigma_k^(1/k), det^(1/n).

Gradient convention: ``F^{i jbar}`` is the entrywise derivative
``dF/dH[i, j]``, so the directional derivative along ``V`` is
``sum_ij F[i, j] * V[i, j]`` (see :func:`pair`).  For Monge-Ampere this gives
``F = det(H)^(1/n) / n * (H^-1)^T``.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

from .calculus import PolyJet, compose_holomorphic, hess_c

INTERIOR_TOL = 1e-10


class AdmissibilityError(ValueError):
    """Matrix eigenvalues fall outside the closed cone."""


class SingularLinearizationError(ValueError):
    """Matrix sits on the cone boundary where the linearization degenerates."""


def sigma_k(lam, k):
    """Elementary symmetric polynomial of degree ``k`` (``sigma_0 = 1``)."""
    lam = np.asarray(lam, dtype=float)
    n = lam.shape[-1]
    if not 0 <= k <= n:
        raise ValueError(f"k={k} out of range for n={n}")
    e = np.zeros(lam.shape[:-1] + (k + 1,))
    e[..., 0] = 1.0
    for i in range(n):
        for j in range(min(i + 1, k), 0, -1):
            e[..., j] = e[..., j] + lam[..., i] * e[..., j - 1]
    return e[..., k]


def _sigma_without(lam, k, drop):
    keep = np.delete(np.asarray(lam, dtype=float), drop)
    if k < 0 or k > keep.size:
        return 0.0
    return float(sigma_k(keep, k))


def _eigen(H):
    H = np.asarray(H, dtype=complex)
    return np.linalg.eigh((H + H.conj().T) / 2)


@dataclass(frozen=True)
class ConeTag:
    k: int
    n: int

    def __post_init__(self):
        if not 1 <= self.k <= self.n:
            raise ValueError(f"cone index k={self.k} must lie in 1..{self.n}")


def cone_member(x, tag, tol=0.0):
    """Whether ``sigma_j > tol`` for ``j <= k``; ``x`` is an eigenvalue vector or Hermitian matrix."""
    x = np.asarray(x)
    lam = _eigen(x)[0] if x.ndim == 2 else x.astype(float)
    if lam.shape[-1] != tag.n:
        raise ValueError("dimension mismatch between vector and cone tag")
    return all(sigma_k(lam, j) > tol for j in range(1, tag.k + 1))


def is_interior(lam, k):
    n = len(lam)
    return all(sigma_k(lam, j) / comb(n, j) > INTERIOR_TOL for j in range(1, k + 1))


@dataclass(frozen=True)
class HessianOperator:
    """``kind`` is ``"sigma"`` (f = sigma_k^(1/k)) or ``"ma"`` (det^(1/n))."""

    kind: str
    n: int
    k: int = 0

    def __post_init__(self):
        if self.kind not in ("sigma", "ma"):
            raise ValueError(f"unknown operator kind {self.kind!r}")
        if self.kind == "ma":
            object.__setattr__(self, "k", self.n)
        if not 1 <= self.k <= self.n:
            raise ValueError(f"k={self.k} out of range for n={self.n}")

    @classmethod
    def monge_ampere(cls, n):
        return cls("ma", n, n)

    @classmethod
    def sigma_root(cls, n, k):
        return cls("sigma", n, k)

    @property
    def cone(self):
        return ConeTag(self.k, self.n)

    def f(self, lam):
        """Value on an eigenvalue vector."""
        s = sigma_k(lam, self.k)
        return np.maximum(s, 0.0) ** (1.0 / self.k)

    def df(self, lam):
        """``df/dlambda_i``."""
        lam = np.asarray(lam, dtype=float)
        s = float(sigma_k(lam, self.k))
        ds = np.array([_sigma_without(lam, self.k - 1, i) for i in range(lam.size)])
        return (1.0 / self.k) * s ** (1.0 / self.k - 1) * ds

    def __str__(self):
        return "det^(1/n)" if self.kind == "ma" else f"sigma_{self.k}^(1/{self.k})"


def pair(F, V):
    """``sum_ij F^{i jbar} V_{i jbar}`` in the entrywise convention."""
    return np.sum(np.asarray(F) * np.asarray(V))


def op_eval(F, H):
    lam = _eigen(H)[0]
    if lam.size != F.n:
        raise ValueError("matrix dimension does not match operator")
    if not cone_member(lam, F.cone, tol=-1e-12):
        raise AdmissibilityError(f"eigenvalues {lam} are outside the closed cone Gamma_{F.k}")
    if F.kind == "ma":
        return float(np.prod(np.maximum(lam, 0.0)) ** (1.0 / F.n))
    return float(F.f(lam))


def _require_interior(F, lam):
    if not is_interior(lam, F.k):
        raise SingularLinearizationError(f"eigenvalues {lam} lie on the boundary of Gamma_{F.k}")


def op_grad(F, H):
    """Matrix ``F^{i jbar}`` with ``dF(H)[V] = pair(F^{..}, V)``."""
    H = np.asarray(H, dtype=complex)
    lam, U = _eigen(H)
    _require_interior(F, lam)
    if F.kind == "ma":
        val = np.prod(lam) ** (1.0 / F.n)
        return (val / F.n) * np.linalg.inv(H).T
    M = (U * F.df(lam)) @ U.conj().T
    return M.T


def _sigma_second(lam, k, Vt):
    """Second derivative of ``t -> sigma_k(lambda(H + tV))`` with ``Vt = U^* V U``.

    The divided difference of ``d sigma_k / d lambda`` between two eigenvalues
    is exactly ``-sigma_{k-2}`` of the remaining ones, so colliding
    eigenvalues need no special handling.
    """
    n = lam.size
    d = np.real(np.diag(Vt))
    total = 0.0
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            s2 = _sigma_without_pair(lam, k - 2, i, j)
            total += s2 * d[i] * d[j]
            total -= s2 * abs(Vt[i, j]) ** 2
    return total


def _sigma_without_pair(lam, k, i, j):
    keep = np.delete(lam, [i, j])
    if k < 0 or k > keep.size:
        return 0.0
    return float(sigma_k(keep, k))


def op_second_form(F, H, V):
    """``d^2/dt^2 F(H + tV)`` at ``t = 0`` (the quadratic form ``F^{ij,pq} V_ij V_pq``)."""
    H = np.asarray(H, dtype=complex)
    V = np.asarray(V, dtype=complex)
    lam, U = _eigen(H)
    _require_interior(F, lam)
    if F.kind == "ma":
        Hinv = np.linalg.inv(H)
        val = np.prod(lam) ** (1.0 / F.n)
        X = Hinv @ V
        t1 = np.trace(X).real
        t2 = np.trace(X @ X).real
        return float(val * (t1**2 / F.n**2 - t2 / F.n))
    k = F.k
    Vt = U.conj().T @ V @ U
    s = float(sigma_k(lam, k))
    ds = sum(_sigma_without(lam, k - 1, i) * Vt[i, i].real for i in range(lam.size))
    d2s = _sigma_second(lam, k, Vt)
    p = 1.0 / k
    return float(p * s ** (p - 1) * d2s + p * (p - 1) * s ** (p - 2) * ds**2)


def normalized_linearization(F, H):
    """``a^{i jbar} = F^{i jbar} / sum_l F^{l lbar}``; trace one."""
    G = op_grad(F, H)
    return G / np.trace(G).real


def ma_holo_check(u, G, w):
    """Residual of ``det^(1/n) D^2(u o G) = det^(1/n)(D^2 u)(G) |det G'|^(2/n)`` at ``w``.

    ``G`` is a list of holomorphic PolyJets.  Both sides use exact jets.
    """
    n = u.n
    w = np.asarray(w, dtype=complex)
    comp = compose_holomorphic(u, G)
    lhs = np.linalg.det(hess_c(comp, w)).real
    Gw = np.array([g(w) for g in G], dtype=complex)
    J = np.array([[G[k].dz(l)(w) for l in range(n)] for k in range(n)], dtype=complex)
    rhs_inner = np.linalg.det(hess_c(u, Gw)).real
    lhs_root = np.sign(lhs) * abs(lhs) ** (1.0 / n)
    rhs_root = np.sign(rhs_inner) * abs(rhs_inner) ** (1.0 / n) * abs(np.linalg.det(J)) ** (2.0 / n)
    return float(abs(lhs_root - rhs_root))


def finite_difference_grad(F, H, h=1e-6):
    """Entrywise central-difference gradient of ``op_eval`` (oracle)."""
    H = np.asarray(H, dtype=complex)
    n = H.shape[0]
    out = np.zeros((n, n), dtype=complex)
    for i in range(n):
        for j in range(n):
            # Hermitian perturbation along E_ij + E_ji (real) and i(E_ij - E_ji)
            E = np.zeros((n, n), complex)
            E[i, j] += 1
            E[j, i] += 1
            dre = (op_eval(F, H + h * E) - op_eval(F, H - h * E)) / (2 * h)
            if i == j:
                out[i, i] = dre / 2
                continue
            E = np.zeros((n, n), complex)
            E[i, j] += 1j
            E[j, i] -= 1j
            dim = (op_eval(F, H + h * E) - op_eval(F, H - h * E)) / (2 * h)
            # dre = F_ij + F_ji, dim = i (F_ij - F_ji)
            out[i, j] = (dre - 1j * dim) / 2
    return out


def random_unitary(n, rng):
    Z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    Q, R = np.linalg.qr(Z)
    return Q * (np.diag(R) / np.abs(np.diag(R)))


def random_hermitian(n, rng, scale=1.0):
    Z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return scale * (Z + Z.conj().T) / 2


def random_cone_matrix(F, rng, shift=0.5):
    """Random Hermitian matrix with eigenvalues strictly inside ``Gamma_k``."""
    n = F.n
    while True:
        lam = rng.standard_normal(n) + shift * n
        if is_interior(lam, F.k):
            U = random_unitary(n, rng)
            return (U * lam) @ U.conj().T


def holomorphic_map(n, linear, quadratic=None):
    """Polynomial holomorphic map ``w -> linear @ w + quadratic terms``.

    ``quadratic`` maps ``(k, i, j)`` to the coefficient of ``w_i w_j`` in component ``k``.
    """
    linear = np.asarray(linear, dtype=complex)
    zs = [PolyJet.coordinate(n, i) for i in range(n)]
    comps = []
    for k in range(n):
        c = PolyJet(n)
        for i in range(n):
            if linear[k, i] != 0:
                c = c + zs[i] * linear[k, i]
        comps.append(c)
    for (k, i, j), c in (quadratic or {}).items():
        comps[k] = comps[k] + zs[i] * zs[j] * c
    return comps
