"""The extended operator L on Omega x C^(n+1), the barriers v1, v2, v3 and sampling checks.

Variables are ordered ``(z_1..z_n, zeta_1..zeta_n, zeta_0)``; extended
functions are :class:`~krylab.wirtinger.Jet2` objects over these ``2n + 1``
complex slots, so every derivative entering ``L`` comes from closed forms
through the chain rule.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .calculus import PolyJet, hess_c
from .geometry import DefiningFunction
from .wirtinger import Jet2, sum_jets


class BarrierError(ValueError):
    pass


class HypothesisError(BarrierError):
    """The comparison function is not a strict supersolution on the sample."""


@dataclass(frozen=True)
class BarrierParams:
    alpha: float
    beta: float

    def __post_init__(self):
        if not (0 < self.alpha < 1 and 0 < self.beta < 1):
            raise BarrierError("alpha and beta must lie in (0, 1)")
        if self.beta > self.alpha**2 / 10 * (1 + 1e-12):
            raise BarrierError(f"beta={self.beta} violates beta <= alpha^2/10")

    @classmethod
    def from_alpha(cls, alpha):
        return cls(alpha, alpha**2 / 10)


@dataclass
class ExtendedSample:
    z: np.ndarray      # (S, n)
    zeta: np.ndarray   # (S, n)
    zeta0: np.ndarray  # (S,)

    @property
    def size(self):
        return self.z.shape[0]

    @property
    def n(self):
        return self.z.shape[1]

    def prime_norm(self):
        return np.sqrt(np.sum(np.abs(self.zeta) ** 2, axis=1) + np.abs(self.zeta0) ** 2)

    def subset(self, mask):
        return ExtendedSample(self.z[mask], self.zeta[mask], self.zeta0[mask])


def sample_shell(n, count, rng, inner=0.5, outer=2.0):
    """Uniform-in-volume points of the shell ``inner < ||(zeta, zeta0)|| < outer`` in ``C^(n+1)``."""
    d = 2 * (n + 1)
    g = rng.standard_normal((count, d))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    r = (inner**d + rng.random(count) * (outer**d - inner**d)) ** (1.0 / d)
    g *= r[:, None]
    zp = g[:, : n + 1] + 1j * g[:, n + 1:]
    return zp[:, :n], zp[:, n]


def sample_extended(dom, count, rng, boundary=False):
    z = dom.sample_boundary(count, rng) if boundary else dom.sample_interior(count, rng)
    zeta, zeta0 = sample_shell(dom.n, count, rng)
    return ExtendedSample(np.asarray(z), zeta, zeta0)


# ---------------------------------------------------------------------------
# coefficient fields


def constant_a(n):
    def field(z):
        z = np.atleast_2d(z)
        return np.broadcast_to(np.eye(n) / n, (z.shape[0], n, n)).astype(complex)
    return field


@dataclass
class LOperator:
    a_field: object
    psi: PolyJet
    params: BarrierParams
    psi_scale: float = 1.0

    @property
    def n(self):
        return self.psi.n

    @property
    def m(self):
        return 2 * self.n + 1

    def psi_jet(self, z):
        return Jet2.from_poly(self.psi, z, self.m)

    def coefficients(self, pts):
        """``(a, r, q, A, b)`` at each sample point."""
        n, m = self.n, self.m
        al, be = self.params.alpha, self.params.beta
        z, zeta = pts.z, pts.zeta
        a = self.a_field(z)
        psi = np.real(self.psi(z))
        dpsi = np.stack([self.psi.dz(j)(z) for j in range(n)], axis=1)
        psi_zetabar = np.sum(np.conj(zeta) * np.conj(dpsi), axis=1)
        r = al * psi_zetabar / (psi + be)
        q = (np.conj(zeta) / 4 + al * dpsi * psi_zetabar[:, None] / (psi + be)[:, None]) / (psi + be)[:, None]
        S = z.shape[0]
        C = np.zeros((S, n, m), complex)
        C[:, :, :n] = np.eye(n)
        C[:, :, n:2 * n] = r[:, None, None] * np.eye(n)
        C[:, :, 2 * n] = np.conj(q)
        A = np.conj(np.swapaxes(C, 1, 2)) @ a @ C
        b = np.zeros((S, m), complex)
        b[:, n:2 * n] = np.einsum("sij,sj->si", a, np.conj(q))
        return a, r, q, A, b

    def apply(self, w, pts, coeffs=None, drift=True):
        """``L[w] = sum A^{I Jbar} w_{I Jbar} - 2 Re(sum b_k w_k)``."""
        _, _, _, A, b = self.coefficients(pts) if coeffs is None else coeffs
        second = np.einsum("sij,sij->s", A, w.mixed_hessian())
        out = second
        if drift:
            out = out - 2 * np.real(np.einsum("si,si->s", b, w.holo_grad()))
        return np.real(out)

    def variables(self, pts):
        """Jets of ``z``, ``zeta`` and ``zeta_0``."""
        m, n = self.m, self.n
        zs = [Jet2.variable(m, j, pts.z[:, j]) for j in range(n)]
        zetas = [Jet2.variable(m, n + j, pts.zeta[:, j]) for j in range(n)]
        zeta0 = Jet2.variable(m, 2 * n, pts.zeta0)
        return zs, zetas, zeta0


def build_l(a_field, psi, params, check_points=None):
    """Assemble ``L``; rescales ``psi`` so that ``a^{i jbar} psi_{i jbar} <= -2`` on the check points."""
    jet = psi.jet if isinstance(psi, DefiningFunction) else psi
    n = jet.n
    if check_points is None:
        rng = np.random.default_rng(0)
        from .calculus import random_ball_points
        check_points = random_ball_points(n, 256, rng, psi.radius if isinstance(psi, DefiningFunction) else 1.0)
    a = a_field(check_points)
    tr = np.trace(a, axis1=1, axis2=2).real
    if np.abs(tr - 1).max() > 1e-10:
        raise BarrierError("coefficient field must have unit trace")
    if np.linalg.eigvalsh(a).min() <= 0:
        raise BarrierError("coefficient field must be positive definite")
    H = np.array([hess_c(jet, z) for z in check_points])
    lap = np.real(np.einsum("sij,sij->s", a, H))
    worst = lap.max()
    if worst >= 0:
        raise BarrierError("psi is not strictly plurisuperharmonic against the coefficient field")
    scale = max(1.0, 2.0 / -worst)
    psi_scaled = jet * scale
    psi_scaled.real = True
    return LOperator(a_field, psi_scaled, params, scale)


# ---------------------------------------------------------------------------
# barrier functions


@dataclass
class BarrierJets:
    v1: Jet2
    v2: Jet2
    v3: Jet2
    combo: Jet2
    psi_zeta: Jet2
    psi: Jet2

    def root(self):
        return self.combo.sqrt()


def barrier_jets(L, pts):
    n, m = L.n, L.m
    al, be = L.params.alpha, L.params.beta
    _, zetas, zeta0 = L.variables(pts)
    psi = L.psi_jet(pts.z)
    psi_zeta = sum_jets([zetas[l] * Jet2.from_poly(L.psi.dz(l), pts.z, m) for l in range(n)])
    base = psi + be
    zeta_sq = sum_jets([zt.abs2() for zt in zetas])
    v1 = psi_zeta.abs2() * base.power(-al)
    v2 = base.power(1 - al) * zeta_sq * (1.0 / al)
    v3 = base.power(1 - al) * zeta0.abs2()
    combo = v1 + v2 + v3 * (be / 4)
    return BarrierJets(v1, v2, v3, combo, psi_zeta, psi)


def barrier_eval(psi, params, z, zeta, zeta0):
    """``(v1, v2, v3, v)`` from the closed forms at one extended point."""
    jet = psi.jet if isinstance(psi, DefiningFunction) else psi
    z = np.asarray(z, dtype=complex)
    zeta = np.asarray(zeta, dtype=complex)
    al, be = params.alpha, params.beta
    p = float(np.real(jet(z)))
    psi_zeta = sum(zeta[l] * jet.dz(l)(z) for l in range(jet.n))
    base = p + be
    v1 = abs(psi_zeta) ** 2 / base**al
    v2 = base ** (1 - al) * float(np.sum(np.abs(zeta) ** 2)) / al
    v3 = base ** (1 - al) * abs(zeta0) ** 2
    return v1, v2, v3, float(np.sqrt(v1 + v2 + be / 4 * v3))


@dataclass
class LemmaReport:
    count: int
    all_negative: bool
    max_value: float
    c_empirical: float
    worst_index: int
    worst_point: tuple
    explicit_form_slack: float  # min over samples of (bound - L value) for the explicit final form
    values: np.ndarray = field(repr=False, default=None)


def barrier_lemma_check(L, pts):
    """Evaluate ``L[v1 + v2 + beta/4 v3]`` and the smallest constant in the lemma's bound."""
    al, be = L.params.alpha, L.params.beta
    keep = pts.prime_norm() > 0
    pts = pts.subset(keep)
    jets = barrier_jets(L, pts)
    Lv = L.apply(jets.combo, pts)
    base = np.real(jets.psi.val) + be
    zeta_sq = np.sum(np.abs(pts.zeta) ** 2, axis=1)
    pz = np.abs(jets.psi_zeta.val) ** 2
    z0 = np.abs(pts.zeta0) ** 2
    Q = (zeta_sq / al + al * pz / base + be * z0) / base**al
    neg = Lv < 0
    c = float(np.max(Q[neg] / -Lv[neg])) if neg.any() else float("inf")
    bound = -((1 - al) / al) * zeta_sq / base**al - (al / 4) * pz / base ** (al + 1) - (be / 2) * z0 / base**al
    worst = int(np.argmax(Lv))
    wp = (pts.z[worst], pts.zeta[worst], pts.zeta0[worst])
    return LemmaReport(int(pts.size), bool(neg.all()), float(Lv.max()), c if neg.all() else float("inf"),
                       worst, wp, float(np.min(bound - Lv)), Lv)


def search_alpha(dom, a_field, samples=2000, rng=None, grid=None):
    """Largest dyadic ``alpha`` whose lemma check passes at ``beta = alpha^2 / 10``."""
    rng = np.random.default_rng(11) if rng is None else rng
    grid = [2.0**-k for k in range(1, 11)] if grid is None else grid
    pts = sample_extended(dom, samples, rng)
    tried = []
    for alpha in sorted(grid, reverse=True):
        L = build_l(a_field, dom, BarrierParams.from_alpha(alpha))
        rep = barrier_lemma_check(L, pts)
        tried.append((alpha, rep.max_value))
        if rep.all_negative:
            return alpha, tried
    raise BarrierError(f"no alpha in the grid passes; worst values {tried}")


# ---------------------------------------------------------------------------
# perturbation functions along a radial solution


def radial_u_jets(radial, pts, m, orders=(0,)):
    """Jets of ``phi^{(k)}(|z|^2)`` for the requested derivative orders ``k``."""
    n = pts.n
    zs = [Jet2.variable(m, j, pts.z[:, j]) for j in range(n)]
    t = sum_jets([zj.abs2() for zj in zs])
    tv = np.real(t.val)
    need = max(orders) + 2
    d = radial.derivatives(tv, need)
    return {k: t.apply(d[k], d[k + 1], d[k + 2]) for k in orders}


def perturbation_jet(L, radial, pts, order):
    """``u_(zeta) + 2 Re(zeta0) u`` (order 1) or
    ``u_(zeta)(zeta) + 4 Re(zeta0) u_(zeta) + |2 Re zeta0|^2 u`` (order 2)."""
    n, m = L.n, L.m
    zs, zetas, zeta0 = L.variables(pts)
    phis = radial_u_jets(radial, pts, m, orders=(0, 1, 2))
    s = sum_jets([zetas[i] * zs[i].conj() for i in range(n)])
    P = s + s.conj()            # 2 Re(zeta . conj z)
    two_re0 = zeta0 + zeta0.conj()
    u = phis[0]
    u1 = phis[1] * P
    if order == 1:
        return u1 + two_re0 * u
    if order != 2:
        raise BarrierError("order must be 1 or 2")
    zeta_sq = sum_jets([zt.abs2() for zt in zetas])
    u2 = phis[2] * P * P + phis[1] * zeta_sq * 2.0
    return u2 + two_re0 * u1 * 2.0 + two_re0 * two_re0 * u


def ma_linearization_field(radial):
    """Normalized Monge-Ampere linearization ``a^{i jbar}`` along ``u = phi(|z|^2)``."""
    n = radial.n

    def field(z):
        z = np.atleast_2d(z)
        t = np.sum(np.abs(z) ** 2, axis=1)
        d = radial.derivatives(t, 2)
        H = d[1][:, None, None] * np.eye(n) + d[2][:, None, None] * np.conj(z)[:, :, None] * z[:, None, :]
        G = np.swapaxes(np.linalg.inv(H), 1, 2)
        return G / np.trace(G, axis1=1, axis2=2).real[:, None, None]
    return field


@dataclass
class PerturbationReport:
    order: int
    mu: float
    values: np.ndarray = field(repr=False)
    drift_cancellation: float = float("nan")


def perturbation_check(L, radial, pts, order):
    """Smallest ``mu`` with ``L[w] >= -mu (|zeta| + |zeta|/beta + |zeta0|)`` (order 1)
    or ``L[w] >= -mu ||zeta'||^2`` (order 2) on the sample."""
    be = L.params.beta
    w = perturbation_jet(L, radial, pts, order)
    coeffs = L.coefficients(pts)
    Lw = L.apply(w, pts, coeffs)
    zn = np.sqrt(np.sum(np.abs(pts.zeta) ** 2, axis=1))
    if order == 1:
        denom = zn + zn / be + np.abs(pts.zeta0)
    else:
        denom = pts.prime_norm() ** 2
    mu = float(max(0.0, np.max(-Lw / denom)))
    # drift terms against the z/zeta_0 blocks of the second-order part
    n = L.n
    A, b = coeffs[3], coeffs[4]
    Hw = w.mixed_hessian()
    block = np.einsum("si,si->s", A[:, :n, 2 * n], Hw[:, :n, 2 * n]) + np.einsum(
        "sj,sj->s", A[:, 2 * n, :n], Hw[:, 2 * n, :n])
    grad = w.holo_grad()
    if order == 1:
        drift = 2 * np.real(np.einsum("si,si->s", b, grad))
        cancel = float(np.max(np.abs(np.real(block) - drift)))
    else:
        cancel = float("nan")
    return PerturbationReport(order, mu, Lw, cancel)


# ---------------------------------------------------------------------------
# Krylov ratio inequality


@dataclass
class KrylovReport:
    holds: bool
    min_slack: float
    interior_sup: float
    boundary_sup: float
    argmax: int
    ratios: np.ndarray = field(repr=False)


def krylov_ratio_check(L, w_jet, v_jet, pts, w_boundary, v_boundary, tol=1e-9):
    """Check ``w/v <= max(sup L[w]/L[v], sup_boundary w/v)`` pointwise on the sample.

    ``w_boundary``/``v_boundary`` are values on boundary samples of the
    extended domain.  Raises :class:`HypothesisError` when ``v <= 0`` or
    ``L[v] >= 0`` at some interior sample.
    """
    coeffs = L.coefficients(pts)
    Lw = L.apply(w_jet, pts, coeffs)
    Lv = L.apply(v_jet, pts, coeffs)
    v = np.real(v_jet.val)
    w = np.real(w_jet.val)
    if np.any(v <= 0) or np.any(Lv >= 0):
        bad = int(np.argmax((v <= 0) | (Lv >= 0)))
        raise HypothesisError(f"need v > 0 and L[v] < 0; sample {bad}: v={v[bad]:.3g}, L[v]={Lv[bad]:.3g}")
    interior = float(np.max(Lw / Lv))
    boundary = float(np.max(np.real(w_boundary) / np.real(v_boundary)))
    rhs = max(interior, boundary)
    ratios = w / v
    slack = rhs - ratios
    return KrylovReport(bool(slack.min() >= -tol), float(slack.min()), interior, boundary,
                        int(np.argmax(ratios)), ratios)


def sample_extended_boundary(dom, count, rng, include_shell=True):
    """Samples of the boundary of ``Omega^N``.

    With ``include_shell`` a third of the points sit on ``boundary(Omega) x shell``
    and the rest on ``Omega x {||zeta'|| = 2}`` and ``Omega x {||zeta'|| = 1/2}``;
    otherwise all points lie over ``boundary(Omega)``.
    """
    if not include_shell:
        return sample_extended(dom, count, rng, boundary=True)
    k = count // 3
    parts = [sample_extended(dom, count - 2 * k, rng, boundary=True)]
    for radius in (2.0, 0.5):
        z = np.asarray(dom.sample_interior(k, rng))
        zeta, zeta0 = sample_shell(dom.n, k, rng, inner=radius, outer=radius)
        parts.append(ExtendedSample(z, zeta, zeta0))
    return ExtendedSample(*(np.concatenate([getattr(p, f) for p in parts]) for f in ("z", "zeta", "zeta0")))


def lemma_pair_krylov_check(L, radial, pts, boundary_pts, tol=1e-9):
    """Krylov ratio check for ``w = u_(zeta) + 2 Re(zeta0) u`` against the barrier ``v``."""
    w = perturbation_jet(L, radial, pts, 1)
    v = barrier_jets(L, pts).root()
    wb = perturbation_jet(L, radial, boundary_pts, 1).val
    vb = barrier_jets(L, boundary_pts).root().val
    return krylov_ratio_check(L, w, v, pts, wb, vb, tol)
