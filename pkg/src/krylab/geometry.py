"""Test domains, boundary frames and adapted holomorphic coordinates.

Domains are given by polynomial defining functions ``psi`` (positive inside,
zero on the boundary); ``rho = -psi`` is the strictly plurisubharmonic
orientation used for charts.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .calculus import PolyJet, compose_holomorphic, gradient, hess_c, hess_holo, random_ball_points


class DomainError(ValueError):
    pass


class ChartError(ValueError):
    pass


@dataclass
class DefiningFunction:
    """Polynomial defining function ``psi`` with cached sanity data."""

    jet: PolyJet
    kind: str = "custom"
    params: dict = field(default_factory=dict)
    radius: float = 1.0  # domain is contained in the ball of this radius
    margin: float = float("nan")

    @property
    def n(self):
        return self.jet.n

    @property
    def rho(self):
        return -self.jet

    def __call__(self, z):
        return self.jet(z)

    def grad_norm(self, z):
        """Euclidean norm of the real gradient, ``2 |psi_zbar|``."""
        _, gb = gradient(self.jet, z)
        return 2.0 * float(np.linalg.norm(gb))

    def levi_min(self, z):
        return float(np.linalg.eigvalsh(hess_c(self.rho, z)).min())

    def boundary_point(self, direction):
        """Boundary point on the ray from the origin along a real direction in ``C^n``."""
        d = np.asarray(direction, dtype=complex)
        d = d / np.linalg.norm(d)
        t = brentq(lambda s: float(self.jet(s * d)), 0.0, self.radius * (1 + 1e-9), xtol=1e-15, rtol=1e-15)
        z = t * d
        # polish with Newton along the ray
        for _ in range(3):
            val = float(self.jet(z))
            _, gb = gradient(self.jet, z)
            slope = 2.0 * float(np.real(np.vdot(gb, d)))
            if slope == 0:
                break
            z = z - (val / slope) * d
        return z

    def sample_boundary(self, count, rng):
        pts = []
        for _ in range(count):
            g = rng.standard_normal(2 * self.n)
            pts.append(self.boundary_point(g[: self.n] + 1j * g[self.n:]))
        return np.array(pts)

    def sample_interior(self, count, rng):
        out = []
        while len(out) < count:
            cand = random_ball_points(self.n, 2 * count, rng, self.radius)
            vals = self.jet(cand)
            out.extend(cand[vals > 0])
        return np.array(out[:count])


def _ball_jet(n):
    return 1.0 - PolyJet.norm_squared(n)


def make_domain(kind, n=2, axes=None, amplitude=0.1, pair=(0, 1), quartic=0.0,
                rng=None, check_samples=1000):
    """Build a test domain.

    ``ball``: ``psi = 1 - |z|^2``.  ``ellipsoid``: ``psi = c (1 - sum |z_j|^2 / a_j^2)``
    with ``c`` the smallest scale making ``|grad psi| >= 1`` on the boundary.
    ``perturbed-ball``: ``psi = 1 - |z|^2 - amplitude Re(z_i z_j) - quartic |z_1|^4``.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    if kind == "ball":
        jet, radius, params = _ball_jet(n), 1.0, {}
    elif kind == "ellipsoid":
        if axes is None:
            raise DomainError("ellipsoid needs semi-axes")
        axes = np.asarray(axes, dtype=float)
        if np.any(axes <= 0):
            raise DomainError("ellipsoid semi-axes must be positive")
        n = axes.size
        terms = {}
        for j in range(n):
            e = tuple(int(i == j) for i in range(n))
            terms[(e, e)] = -1.0 / axes[j] ** 2
        # |grad psi| on the boundary is at least 2 / max(a); rescale if that is below one
        scale = max(1.0, axes.max() / 2.0)
        jet = (PolyJet(n, terms, real=True) + 1.0) * scale
        radius, params = float(axes.max()), {"axes": axes.tolist(), "scale": scale}
    elif kind == "perturbed-ball":
        i, j = pair
        if abs(amplitude) >= 2:
            raise DomainError(f"amplitude {amplitude} makes the sublevel set unbounded")
        zi, zj = PolyJet.coordinate(n, i), PolyJet.coordinate(n, j)
        jet = _ball_jet(n) - PolyJet.real_part(zi * zj) * amplitude
        c = 1.0 - abs(amplitude) / 2.0
        radius = 1.0 / np.sqrt(c)
        if quartic:
            z1 = PolyJet.coordinate(n, 0)
            jet = jet - (z1 * z1.conj()) ** 2 * quartic
            if quartic < 0:
                # first crossing of 1 - c r^2 + |q| r^4 bounds the component around 0
                disc = c * c - 4 * abs(quartic)
                if disc < 0:
                    raise DomainError(f"quartic {quartic} leaves the component around 0 unbounded")
                radius = float(np.sqrt((c - np.sqrt(disc)) / (2 * abs(quartic))))
        jet.real = True
        params = {"amplitude": amplitude, "pair": list(pair), "quartic": quartic}
    else:
        raise DomainError(f"unknown domain kind {kind!r}")
    dom = DefiningFunction(jet, kind, params, radius)
    pts = np.concatenate([dom.sample_interior(check_samples // 2, rng),
                          dom.sample_boundary(max(1, check_samples // 20), rng)])
    dom.margin = min(dom.levi_min(z) for z in pts)
    if dom.margin <= 0:
        raise DomainError(f"defining function is not strictly plurisubharmonic: margin {dom.margin:.3g}")
    return dom


# ---------------------------------------------------------------------------
# boundary frame


@dataclass(frozen=True)
class BoundaryFrame:
    """``eta`` holds the components ``rho_{zbar_i}``; ``gamma`` is the unit inner
    normal as a point of ``C^n = R^{2n}``; ``curvature(T)`` is the normal
    curvature of the level set along a real tangent ``T``."""

    point: np.ndarray
    eta: np.ndarray
    gamma: np.ndarray
    real_hessian: np.ndarray

    def curvature(self, T):
        T = np.asarray(T, dtype=complex)
        t = np.concatenate([T.real, T.imag])
        t = t / np.linalg.norm(t)
        g = np.concatenate([self.gamma.real, self.gamma.imag])
        if abs(t @ g) > 1e-9:
            raise ValueError("direction is not tangent to the level set")
        grad_norm = 2.0 * np.linalg.norm(self.eta)
        return float(t @ self.real_hessian @ t / grad_norm)


def real_hessian(jet, z):
    """Hessian in real coordinates ``(x_1..x_n, y_1..y_n)`` from Wirtinger derivatives."""
    H = hess_c(jet, z)
    Hh = hess_holo(jet, z)
    # d_x = d + dbar, d_y = i (d - dbar)
    xx = 2 * (Hh + H).real
    yy = 2 * (H - Hh).real
    xy = -2 * (Hh - H).imag
    n = jet.n
    out = np.zeros((2 * n, 2 * n))
    out[:n, :n] = xx
    out[n:, n:] = yy
    out[:n, n:] = xy
    out[n:, :n] = xy.T
    return out


def boundary_frame(dom, z):
    jet = dom.jet if isinstance(dom, DefiningFunction) else dom
    rho = -jet
    z = np.asarray(z, dtype=complex)
    _, eta = gradient(rho, z)
    norm = np.linalg.norm(eta)
    if norm == 0:
        raise ValueError("vanishing gradient: no boundary frame")
    return BoundaryFrame(z, eta, -eta / norm, real_hessian(rho, z))


# ---------------------------------------------------------------------------
# Taylor coefficients


@dataclass(frozen=True)
class TaylorTable:
    """Coefficient groups of ``f(p + z) = f(p) + 2 Re(lin . z) + Re(z^T Q20 z) + z^T H11 conj(z) + cubic``."""

    value: float
    linear: np.ndarray
    q20: np.ndarray
    h11: np.ndarray
    cubic: dict | None = None


def taylor_expand(jet, p, order=2):
    if order not in (1, 2, 3):
        raise ValueError("order must be 1, 2 or 3")
    jet = jet.jet if isinstance(jet, DefiningFunction) else jet
    p = np.asarray(p, dtype=complex)
    g, _ = gradient(jet, p)
    n = jet.n
    q20 = hess_holo(jet, p) if order >= 2 else np.zeros((n, n))
    h11 = hess_c(jet, p) if order >= 2 else np.zeros((n, n))
    cubic = None
    if order == 3:
        cubic = {}
        for i in range(n):
            for j in range(n):
                for k in range(n):
                    cubic[("zzz", i, j, k)] = complex(jet.dz(i).dz(j).dz(k)(p))
                    cubic[("zzb", i, j, k)] = complex(jet.dz(i).dz(j).dzb(k)(p))
    return TaylorTable(float(np.real(jet(p))), g, q20, h11, cubic)


# ---------------------------------------------------------------------------
# adapted coordinates


def _affine_map(n, offset, M):
    """Components of ``w -> offset + M w``."""
    zs = [PolyJet.coordinate(n, i) for i in range(n)]
    out = []
    for k in range(n):
        c = PolyJet.constant(n, offset[k])
        for i in range(n):
            if M[k, i] != 0:
                c = c + zs[i] * M[k, i]
        out.append(c)
    return out


def _unitary_with_last_column(v):
    """Unitary matrix whose last column is the unit vector ``v``, close to the identity otherwise."""
    n = v.size
    cols = []
    cands = []
    for j in range(n):
        e = np.zeros(n, complex)
        e[j] = 1
        r = e - np.vdot(v, e) * v
        cands.append((j, r))
    # drop the candidate most parallel to v
    drop = int(np.argmin([np.linalg.norm(r) for _, r in cands]))
    for j, r in cands:
        if j == drop:
            continue
        for c in cols:
            r = r - np.vdot(c, r) * c
        cols.append(r / np.linalg.norm(r))
    cols.append(v)
    return np.column_stack(cols)


@dataclass
class AdaptedChart:
    """Holomorphic chart ``w -> z`` centred at a boundary point.

    ``z = base + U s`` with ``s = (B w', w_n + 1/2 w^T C w)``.  The local
    defining function is ``(1 + Re(lam . s)) * rho(z(w)) / scale``; the
    positive affine multiplier removes the normal-tangential and ``|w_n|^2``
    entries of the complex Hessian, which no holomorphic change can do.
    """

    base: np.ndarray
    unitary: np.ndarray
    scale: float
    levi_map: np.ndarray
    shear: np.ndarray
    multiplier: np.ndarray
    to_ambient: list
    local_defining: PolyJet

    @property
    def n(self):
        return self.base.size

    def __call__(self, w):
        """Map chart coordinates to ambient ones."""
        return np.stack([c(w) for c in self.to_ambient], axis=-1)

    def residuals(self):
        t = taylor_expand(self.local_defining, np.zeros(self.n))
        n = self.n
        target = np.zeros(n, complex)
        target[-1] = -1
        return {
            "value": abs(t.value),
            "linear": float(np.abs(t.linear - target).max()),
            "q20": float(np.abs(t.q20).max()),
            "levi": float(np.abs(t.h11 - np.eye(n)).max()),
        }

    def boundary_point(self, tangential):
        """Solve ``rho(w', x_n + i y_n) = 0`` for ``x_n``; ``tangential = (w', y_n)`` as a complex
        ``(n-1)``-vector plus a real number."""
        wp, yn = tangential
        n = self.n
        rho = self.local_defining
        dxn = rho.dx(n - 1)
        w = np.zeros(n, complex)
        w[:-1] = wp
        w[-1] = 1j * yn
        for _ in range(60):
            val = float(rho(w))
            d = float(dxn(w))
            step = val / d
            w[-1] -= step
            if abs(step) < 1e-17:
                break
        return w


def adapted_coordinates(dom, p, tol=1e-12):
    jet = dom.jet if isinstance(dom, DefiningFunction) else dom
    n = jet.n
    p = np.asarray(p, dtype=complex)
    if abs(float(jet(p))) > tol:
        raise ChartError(f"point is not on the boundary: psi(p) = {float(jet(p)):.3g}")
    rho = -jet
    g, _ = gradient(rho, p)
    gnorm = float(np.linalg.norm(g))
    if gnorm == 0:
        raise ChartError("vanishing gradient at base point")
    U = _unitary_with_last_column(-np.conj(g) / gnorm)
    # step 1: translate, rotate, scale so that the linear part is -2 Re s_n
    ambient_s = _affine_map(n, p, U)
    rho1 = compose_holomorphic(rho, ambient_s) * (1.0 / gnorm)
    H = hess_c(rho1, np.zeros(n))
    # step 2: positive multiplier clearing H[k, n] (k < n) and setting H[n, n] = 1
    lam = np.zeros(n, complex)
    lam[:-1] = 2 * H[:-1, -1]
    lam[-1] = H[-1, -1].real - 1.0
    Htan = H[:-1, :-1]
    eig = np.linalg.eigvalsh(Htan) if n > 1 else np.array([1.0])
    if eig.min() <= 0:
        raise ChartError(f"degenerate Levi form (min eigenvalue {eig.min():.3g})")
    # step 3: Levi normalisation B^T Htan conj(B) = I via Cholesky
    B = np.eye(n, dtype=complex)
    if n > 1:
        L = np.linalg.cholesky(Htan)
        B[:-1, :-1] = np.linalg.inv(L).T
    s_of_t = _affine_map(n, np.zeros(n), B)
    s = [PolyJet.coordinate(n, k) for k in range(n)]
    mult_s = PolyJet.constant(n, 1.0)
    for k in range(n):
        if lam[k] != 0:
            mult_s = mult_s + PolyJet.real_part(s[k] * lam[k])
    rho2 = rho1 * mult_s
    rho2.real = True
    rho3 = compose_holomorphic(rho2, s_of_t)
    # step 4: holomorphic quadratic shear t_n = w_n + 1/2 w^T C w
    C = hess_holo(rho3, np.zeros(n))
    w = [PolyJet.coordinate(n, k) for k in range(n)]
    t_of_w = list(w)
    for i in range(n):
        for j in range(n):
            if C[i, j] != 0:
                t_of_w[-1] = t_of_w[-1] + w[i] * w[j] * (0.5 * C[i, j])
    local = compose_holomorphic(rho3, t_of_w)
    # ambient map z(w) = p + U B t(w)
    s_of_w = [sum((t_of_w[j] * B[k, j] for j in range(n) if B[k, j] != 0), PolyJet(n))
              for k in range(n)]
    to_ambient = []
    for k in range(n):
        c = PolyJet.constant(n, p[k])
        for j in range(n):
            if U[k, j] != 0:
                c = c + s_of_w[j] * U[k, j]
        to_ambient.append(c)
    _prune(local)
    return AdaptedChart(p, U, gnorm, B, C, lam, to_ambient, local)


def _prune(jet, tol=1e-15):
    scale = max((abs(c) for c in jet.terms.values()), default=1.0)
    for k in [k for k, c in jet.terms.items() if abs(c) < tol * scale]:
        del jet.terms[k]
