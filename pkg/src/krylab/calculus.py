"""Exact polynomial calculus in n complex variables.

A :class:`PolyJet` stores a polynomial in ``(z, conj(z))`` as a map from
bidegree multi-indices ``(p, q)`` to complex coefficients, so the monomial
``(p, q)`` is ``prod z**p * conj(z)**q``.  Wirtinger derivatives act on the
coefficients exactly, which keeps every identity check at round-off level.
"""

from __future__ import annotations

import itertools
from collections import defaultdict
from functools import cached_property

import numpy as np


class DimensionError(ValueError):
    pass


def _zero_index(n):
    return (0,) * n


class PolyJet:
    """Polynomial in ``z`` and ``conj(z)`` with exact differentiation.

    Parameters
    ----------
    n : int
        Number of complex variables.
    terms : dict
        Maps ``(p, q)`` (two length-``n`` tuples of exponents) to complex
        coefficients.  Zero coefficients are dropped.
    real : bool
        Marks the polynomial as real valued.  The flag is propagated by the
        arithmetic below; :meth:`is_conjugate_symmetric` checks it.
    """

    def __init__(self, n, terms=None, real=False):
        self.n = int(n)
        clean = {}
        for (p, q), c in (terms or {}).items():
            p, q = tuple(int(v) for v in p), tuple(int(v) for v in q)
            if len(p) != self.n or len(q) != self.n:
                raise DimensionError(f"multi-index length differs from n={self.n}")
            if c != 0:
                clean[(p, q)] = complex(c)
        self.terms = clean
        self.real = bool(real)

    @classmethod
    def _trusted(cls, n, terms, real):
        """Skip validation for term dicts produced by the arithmetic below."""
        out = cls.__new__(cls)
        out.n = n
        out.terms = {k: complex(c) for k, c in terms.items() if c != 0}
        out.real = bool(real)
        return out

    # construction helpers -------------------------------------------------

    @classmethod
    def constant(cls, n, c, real=None):
        z0 = _zero_index(n)
        if real is None:
            real = complex(c).imag == 0
        return cls(n, {(z0, z0): c}, real=real)

    @classmethod
    def coordinate(cls, n, j, conjugate=False):
        e = tuple(int(i == j) for i in range(n))
        z0 = _zero_index(n)
        key = (z0, e) if conjugate else (e, z0)
        return cls(n, {key: 1.0})

    @classmethod
    def norm_squared(cls, n):
        """``|z|^2``."""
        terms = {}
        for j in range(n):
            e = tuple(int(i == j) for i in range(n))
            terms[(e, e)] = 1.0
        return cls(n, terms, real=True)

    @classmethod
    def real_part(cls, jet):
        out = (jet + jet.conj()) * 0.5
        out.real = True
        return out

    # algebra -------------------------------------------------------------

    def _check(self, other):
        if isinstance(other, PolyJet) and other.n != self.n:
            raise DimensionError(f"dimension mismatch: {self.n} vs {other.n}")

    def _lift(self, other):
        if isinstance(other, PolyJet):
            self._check(other)
            return other
        return PolyJet.constant(self.n, other)

    def __add__(self, other):
        other = self._lift(other)
        out = defaultdict(complex, self.terms)
        for k, c in other.terms.items():
            out[k] += c
        return PolyJet._trusted(self.n, out, self.real and other.real)

    __radd__ = __add__

    def __neg__(self):
        return PolyJet._trusted(self.n, {k: -c for k, c in self.terms.items()}, self.real)

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        if not isinstance(other, PolyJet):
            c = complex(other)
            real = self.real and c.imag == 0
            return PolyJet._trusted(self.n, {k: v * c for k, v in self.terms.items()}, real)
        self._check(other)
        out = defaultdict(complex)
        for (p1, q1), c1 in self.terms.items():
            for (p2, q2), c2 in other.terms.items():
                key = (tuple(a + b for a, b in zip(p1, p2)),
                       tuple(a + b for a, b in zip(q1, q2)))
                out[key] += c1 * c2
        return PolyJet._trusted(self.n, out, self.real and other.real)

    __rmul__ = __mul__

    def __pow__(self, k):
        out = PolyJet.constant(self.n, 1.0)
        for _ in range(int(k)):
            out = out * self
        return out

    def conj(self):
        return PolyJet._trusted(self.n, {(q, p): np.conj(c) for (p, q), c in self.terms.items()},
                                self.real)

    # structure -----------------------------------------------------------

    @property
    def degree(self):
        if not self.terms:
            return -1
        return max(sum(p) + sum(q) for p, q in self.terms)

    def is_holomorphic(self):
        return all(sum(q) == 0 for _, q in self.terms)

    def is_conjugate_symmetric(self, tol=0.0):
        for (p, q), c in self.terms.items():
            if abs(self.terms.get((q, p), 0.0) - np.conj(c)) > tol * max(1.0, abs(c)):
                return False
        return True

    def coefficient(self, p, q):
        return self.terms.get((tuple(p), tuple(q)), 0.0)

    def max_abs_diff(self, other):
        self._check(other)
        keys = set(self.terms) | set(other.terms)
        return max((abs(self.terms.get(k, 0) - other.terms.get(k, 0)) for k in keys),
                   default=0.0)

    # differentiation -----------------------------------------------------

    @cached_property
    def _deriv_cache(self):
        return {}

    def dz(self, j):
        """Wirtinger derivative in ``z_j``."""
        return self._derivative(j, conjugate=False)

    def dzb(self, j):
        """Wirtinger derivative in ``conj(z_j)``."""
        return self._derivative(j, conjugate=True)

    def _derivative(self, j, conjugate):
        if not 0 <= j < self.n:
            raise DimensionError(f"variable index {j} out of range for n={self.n}")
        key = (j, conjugate)
        cache = self._deriv_cache
        if key not in cache:
            out = {}
            for (p, q), c in self.terms.items():
                e = q if conjugate else p
                if e[j] == 0:
                    continue
                lowered = e[:j] + (e[j] - 1,) + e[j + 1:]
                new = (p, lowered) if conjugate else (lowered, q)
                out[new] = c * e[j]
            cache[key] = PolyJet(self.n, out)
        return cache[key]

    def derivative(self, holo=(), anti=()):
        """Iterated derivative: ``d/dz_i`` for i in ``holo``, ``d/dzbar_j`` for j in ``anti``."""
        out = self
        for i in holo:
            out = out.dz(i)
        for j in anti:
            out = out.dzb(j)
        return out

    def dx(self, j):
        """Real partial derivative in ``x_j = Re z_j``."""
        out = self.dz(j) + self.dzb(j)
        out.real = self.real
        return out

    def dy(self, j):
        """Real partial derivative in ``y_j = Im z_j``."""
        out = (self.dz(j) - self.dzb(j)) * 1j
        out.real = self.real
        return out

    # evaluation ----------------------------------------------------------

    @cached_property
    def _arrays(self):
        if not self.terms:
            return (np.zeros((0, self.n), int), np.zeros((0, self.n), int),
                    np.zeros(0, complex))
        keys = list(self.terms)
        P = np.array([k[0] for k in keys], dtype=int).reshape(len(keys), self.n)
        Q = np.array([k[1] for k in keys], dtype=int).reshape(len(keys), self.n)
        C = np.array([self.terms[k] for k in keys], dtype=complex)
        return P, Q, C

    def __call__(self, z):
        """Evaluate at one point (shape ``(n,)``) or many (shape ``(..., n)``)."""
        z = np.asarray(z, dtype=complex)
        if z.shape[-1:] != (self.n,):
            raise DimensionError(f"point has trailing dimension {z.shape[-1:]}, expected {self.n}")
        P, Q, C = self._arrays
        if len(C) == 0:
            val = np.zeros(z.shape[:-1], dtype=complex)
        else:
            deg = int(max(P.max(initial=0), Q.max(initial=0)))
            powers = _power_table(z, deg)
            zc_powers = np.conj(powers)
            mono = np.ones(z.shape[:-1] + (len(C),), dtype=complex)
            for j in range(self.n):
                mono = mono * powers[..., j, :][..., P[:, j]] * zc_powers[..., j, :][..., Q[:, j]]
            val = mono @ C
        if self.real:
            val = val.real
        return val[()] if val.ndim == 0 else val

    def __repr__(self):
        return f"PolyJet(n={self.n}, terms={len(self.terms)}, degree={self.degree}, real={self.real})"


def _power_table(z, deg):
    """``powers[..., j, k] = z_j**k`` for ``k <= deg``."""
    out = np.ones(z.shape + (deg + 1,), dtype=complex)
    for k in range(1, deg + 1):
        out[..., k] = out[..., k - 1] * z
    return out


# ---------------------------------------------------------------------------
# directions and derivative brackets


class CDirection(np.ndarray):
    """A (1,0) direction: ``n`` complex components."""

    def __new__(cls, components):
        arr = np.asarray(components, dtype=complex).reshape(-1).view(cls)
        if not np.all(np.isfinite(arr)):
            raise ValueError("direction components must be finite")
        return arr

    def norm(self):
        return float(np.sqrt(np.vdot(self, self).real))


def _check_point(u, z):
    z = np.asarray(z, dtype=complex)
    if z.shape != (u.n,):
        raise DimensionError(f"point of shape {z.shape} does not match n={u.n}")
    return z


def _check_dir(u, d):
    d = np.asarray(d, dtype=complex).reshape(-1)
    if d.shape != (u.n,):
        raise DimensionError(f"direction of length {d.shape[0]} does not match n={u.n}")
    return d


def gradient(u, z):
    """``(u_{z_i}(z))_i`` and ``(u_{zbar_i}(z))_i``."""
    z = _check_point(u, z)
    g = np.array([u.dz(i)(z) for i in range(u.n)], dtype=complex)
    gb = np.array([u.dzb(i)(z) for i in range(u.n)], dtype=complex)
    return g, gb


def hess_c(u, z):
    """Complex Hessian ``H[i, j] = u_{z_i zbar_j}(z)``."""
    z = _check_point(u, z)
    n = u.n
    H = np.empty((n, n), dtype=complex)
    for i in range(n):
        di = u.dz(i)
        for j in range(n):
            H[i, j] = complex(di.dzb(j)(z))
    return H


def hess_holo(u, z):
    """Pure holomorphic second derivatives ``u_{z_i z_j}(z)``."""
    z = _check_point(u, z)
    n = u.n
    return np.array([[complex(u.dz(i).dz(j)(z)) for j in range(n)] for i in range(n)])


def dir1(u, z, zeta):
    """``zeta_l u_{z_l} + conj(zeta_l) u_{zbar_l}`` at ``z``."""
    zeta = _check_dir(u, zeta)
    g, gb = gradient(u, z)
    val = zeta @ g + np.conj(zeta) @ gb
    return val.real if u.real else val


def dir2(u, z, zeta):
    """``zeta_i zeta_j u_ij + 2 zeta_i conj(zeta_j) u_{i jbar} + conj(zeta_i zeta_j) u_{ibar jbar}``."""
    zeta = _check_dir(u, zeta)
    z = _check_point(u, z)
    n = u.n
    H = hess_c(u, z)
    Hh = hess_holo(u, z)
    Ha = np.array([[complex(u.dzb(i).dzb(j)(z)) for j in range(n)] for i in range(n)])
    val = zeta @ Hh @ zeta + 2 * zeta @ H @ np.conj(zeta) + np.conj(zeta) @ Ha @ np.conj(zeta)
    return val.real if u.real else val


def bracket2(u, z, xi, eta):
    """Four-term bracket ``u_{xi eta} + u_{xi etabar} + u_{eta xibar} + u_{xibar etabar}``."""
    xi = _check_dir(u, xi)
    eta = _check_dir(u, eta)
    z = _check_point(u, z)
    n = u.n
    H = hess_c(u, z)
    Hh = hess_holo(u, z)
    Ha = np.array([[complex(u.dzb(i).dzb(j)(z)) for j in range(n)] for i in range(n)])
    val = (xi @ Hh @ eta + xi @ H @ np.conj(eta) + eta @ H @ np.conj(xi)
           + np.conj(xi) @ Ha @ np.conj(eta))
    return val.real if u.real else val


# ---------------------------------------------------------------------------
# holomorphic fields with polynomial coefficients


def field_deriv(u, coeffs):
    """Apply the real operator ``xi_l d/dz_l + conj(xi_l) d/dzbar_l`` to ``u``.

    ``coeffs`` is a sequence of ``n`` holomorphic PolyJets (the components
    ``xi_l(z)``).  A real ``u`` gives a real result.
    """
    if len(coeffs) != u.n:
        raise DimensionError(f"field has {len(coeffs)} components, expected {u.n}")
    out = PolyJet(u.n)
    for l, c in enumerate(coeffs):
        if c.n != u.n:
            raise DimensionError("field coefficient dimension mismatch")
        out = out + c * u.dz(l) + c.conj() * u.dzb(l)
    out.real = u.real and all(c.is_holomorphic() for c in coeffs)
    return out


def affine_field_coeffs(n, a, A):
    """Components ``a_k + sum_l A[k, l] z_l`` as holomorphic PolyJets."""
    a = np.asarray(a, dtype=complex)
    A = np.asarray(A, dtype=complex)
    coeffs = []
    for k in range(n):
        c = PolyJet.constant(n, a[k], real=False)
        for l in range(n):
            if A[k, l] != 0:
                c = c + PolyJet.coordinate(n, l) * A[k, l]
        coeffs.append(c)
    return coeffs


# ---------------------------------------------------------------------------
# random test functions


def multi_indices(n, degree):
    """All ``(p, q)`` with total degree ``<= degree``."""
    out = []
    for total in range(degree + 1):
        for combo in itertools.combinations_with_replacement(range(2 * n), total):
            e = [0] * (2 * n)
            for c in combo:
                e[c] += 1
            out.append((tuple(e[:n]), tuple(e[n:])))
    return out


def random_real_poly(n, degree, rng, scale=1.0, min_degree=0):
    """Random real-valued polynomial with complex-normal coefficients."""
    terms = {}
    for p, q in multi_indices(n, degree):
        if sum(p) + sum(q) < min_degree or (p, q) in terms:
            continue
        if p == q:
            terms[(p, q)] = scale * rng.standard_normal()
        else:
            c = scale * (rng.standard_normal() + 1j * rng.standard_normal()) / np.sqrt(2)
            terms[(p, q)] = c
            terms[(q, p)] = np.conj(c)
    return PolyJet(n, terms, real=True)


def random_admissible(n, rng, degree=4, min_eig=0.1, radius=1.0, samples=64):
    """``|z|^2 + eps * (random real quartic)`` with complex Hessian eigenvalues ``>= min_eig``.

    ``eps`` is halved until the bound holds at ``samples`` points of the ball
    of the given radius.  Points of the check sample are returned too.
    """
    base = PolyJet.norm_squared(n)
    pert = random_real_poly(n, degree, rng, min_degree=2)
    pts = random_ball_points(n, samples, rng, radius)
    eps = 0.5
    while eps > 1e-8:
        u = base + pert * eps
        u.real = True
        if min(np.linalg.eigvalsh(hess_c(u, z)).min() for z in pts) >= min_eig:
            return u
        eps *= 0.5
    return base


def random_ball_points(n, count, rng, radius=1.0):
    g = rng.standard_normal((count, 2 * n))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    r = radius * rng.random(count) ** (1.0 / (2 * n))
    x = g * r[:, None]
    return x[:, :n] + 1j * x[:, n:]


def random_direction(n, rng):
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return CDirection(v / np.linalg.norm(v))


def compose_holomorphic(u, G):
    """``u(G(w))`` for a polynomial holomorphic map ``G`` (list of ``n`` PolyJets in ``m`` vars)."""
    if len(G) != u.n:
        raise DimensionError(f"map has {len(G)} components, expected {u.n}")
    m = G[0].n
    deg = max(max(sum(p) for p, _ in u.terms), max(sum(q) for _, q in u.terms)) if u.terms else 0
    hol = [[PolyJet.constant(m, 1.0)] for _ in range(u.n)]
    for k in range(u.n):
        for _ in range(deg):
            hol[k].append(hol[k][-1] * G[k])
    anti = [[h.conj() for h in row] for row in hol]
    acc = defaultdict(complex)
    for (p, q), c in u.terms.items():
        mono = PolyJet.constant(m, c)
        for k in range(u.n):
            if p[k]:
                mono = mono * hol[k][p[k]]
            if q[k]:
                mono = mono * anti[k][q[k]]
        for key, v in mono.terms.items():
            acc[key] += v
    return PolyJet._trusted(m, acc, u.real)
