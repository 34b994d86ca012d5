"""Regularized complex Monge-Ampere on the unit ball: radial reduction and a coarse grid scheme.

For ``u = phi(|z|^2)`` the complex Hessian is ``phi' I + phi'' conj(z) z^T`` with
determinant ``phi'^(n-1) (phi' + t phi'')``, so ``(t phi')^n = n int_0^t
s^(n-1) (g + eps) ds``.  We store ``g`` as a :class:`numpy.polynomial.Polynomial`
in ``t = |z|^2`` so every derivative of ``phi'`` comes from exact quadrature.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import factorial

import numpy as np
from numpy.polynomial import Polynomial
from numpy.polynomial.legendre import leggauss
from scipy.sparse import csr_matrix
from scipy.sparse.linalg import LinearOperator, bicgstab, spilu, spsolve


class SolverError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    """Policy iteration exhausted its budget; the partial field is attached."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


_INNER_NODES, _INNER_WEIGHTS = leggauss(40)
_INNER_NODES = (_INNER_NODES + 1) / 2
_INNER_WEIGHTS = _INNER_WEIGHTS / 2
_PANEL_NODES, _PANEL_WEIGHTS = leggauss(5)


def as_profile(g):
    """Coerce ``g`` to a polynomial in ``t``; scalars are constants, sequences are coefficients."""
    if isinstance(g, Polynomial):
        return g
    if np.isscalar(g):
        return Polynomial([float(g)])
    return Polynomial(np.asarray(g, dtype=float))


def power_profile(m, scale=1.0):
    return Polynomial([0.0] * m + [scale])


@dataclass(frozen=True)
class RadialProblem:
    n: int
    g: Polynomial
    c: float = 0.0
    eps: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "g", as_profile(self.g))
        if self.n < 1:
            raise SolverError("dimension must be positive")
        if self.eps < 0:
            raise SolverError("eps must be non-negative")
        t = np.linspace(0, 1, 2001)
        if np.min(self.g(t)) + self.eps < -1e-14:
            raise SolverError("g + eps must be non-negative on [0, 1]")

    def rhs(self, t):
        return self.g(t) + self.eps


def _taylor_power(a, p):
    """Taylor coefficients of ``(sum a_k s^k)^p`` (``a_0 > 0``), truncated to ``len(a)`` terms."""
    K = a.shape[0]
    b = np.zeros_like(a)
    b[0] = a[0] ** p
    for k in range(1, K):
        acc = np.zeros_like(a[0])
        for j in range(1, k + 1):
            acc = acc + (p * j - (k - j)) * a[j] * b[k - j]
        b[k] = acc / (k * a[0])
    return b


@dataclass
class RadialSolution:
    problem: RadialProblem
    edges: np.ndarray = field(repr=False)
    cumulative: np.ndarray = field(repr=False)
    second_offset: float = 0.0  # fault injection hook for the residual oracle

    @property
    def n(self):
        return self.problem.n

    def _mean_taylor(self, t, order):
        """Taylor coefficients in ``s`` of ``K(t + s) = n int_0^1 sig^(n-1) (g((t+s) sig) + eps) d sig``."""
        n, g = self.n, self.problem.g
        t = np.asarray(t, dtype=float)
        sig = _INNER_NODES
        out = np.zeros((order + 1,) + t.shape)
        gk = g
        for k in range(order + 1):
            vals = gk(np.multiply.outer(t, sig))
            out[k] = n * (vals * sig ** (n - 1 + k)) @ _INNER_WEIGHTS / factorial(k)
            gk = gk.deriv()
        out[0] = out[0] + self.problem.eps
        return out

    def slope(self, t):
        """``phi'(t) = K(t)^(1/n)``."""
        K = self._mean_taylor(t, 0)[0]
        if np.any(K < -1e-14):
            raise SolverError("negative averaged right-hand side")
        return np.maximum(K, 0.0) ** (1.0 / self.n)

    def derivatives(self, t, order):
        """``[phi, phi', ..., phi^(order)]`` at ``t``; derivatives past the first need ``K(t) > 0``."""
        t = np.asarray(t, dtype=float)
        out = [self.value(t)]
        if order == 0:
            return out
        a = self._mean_taylor(t, order - 1)
        with np.errstate(divide="ignore", invalid="ignore"):
            b = _taylor_power(np.maximum(a, 0.0) if order == 1 else a, 1.0 / self.n)
        for k in range(order):
            out.append(b[k] * factorial(k))
        if order >= 2 and self.second_offset:
            out[2] = out[2] + self.second_offset
        return out

    def _integral(self, t):
        """``int_0^t phi'``."""
        t = np.asarray(t, dtype=float)
        idx = np.clip(np.searchsorted(self.edges, t, side="right") - 1, 0, self.edges.size - 2)
        left = self.edges[idx]
        half = (t - left) / 2
        nodes = left[..., None] + half[..., None] * (_PANEL_NODES + 1)
        part = (self.slope(nodes) @ _PANEL_WEIGHTS) * half
        return self.cumulative[idx] + part

    def value(self, t):
        return self.problem.c - (self.cumulative[-1] - self._integral(t))

    def __call__(self, z):
        z = np.atleast_2d(np.asarray(z, dtype=complex))
        return self.value(np.sum(np.abs(z) ** 2, axis=1))

    def complex_hessian(self, z):
        z = np.atleast_2d(np.asarray(z, dtype=complex))
        t = np.sum(np.abs(z) ** 2, axis=1)
        d = self.derivatives(t, 2)
        n = self.n
        return d[1][:, None, None] * np.eye(n) + d[2][:, None, None] * np.conj(z)[:, :, None] * z[:, None, :]


def solve_radial(problem, panels=10_000):
    """Radial solution with ``phi(1) = c``; the integral of ``phi'`` uses composite Gauss on a
    grid graded as ``(k / panels)^2`` so fractional powers at ``t = 0`` stay resolved."""
    edges = (np.arange(panels + 1) / panels) ** 2
    probe = RadialSolution(problem, edges, np.zeros(panels + 1))
    left, right = edges[:-1], edges[1:]
    half = (right - left) / 2
    nodes = left[:, None] + half[:, None] * (_PANEL_NODES + 1)
    pieces = (probe.slope(nodes) @ _PANEL_WEIGHTS) * half
    cumulative = np.concatenate([[0.0], np.cumsum(pieces)])
    return RadialSolution(problem, edges, cumulative)


def radial_ma_residual(sol, z):
    """``max |det(D^2_C u) - (g + eps)|`` at the sample points, from ``phi'`` and ``phi''``."""
    z = np.atleast_2d(np.asarray(z, dtype=complex))
    t = np.sum(np.abs(z) ** 2, axis=1)
    det = np.linalg.det(sol.complex_hessian(z)).real
    return float(np.max(np.abs(det - sol.problem.rhs(t))))


def power_closed_form(n, m, c=0.0):
    """Closed-form ``(phi, phi')`` for ``g = t^m``, ``eps = 0``."""
    k = (n / (n + m)) ** (1.0 / n)
    e = m / n

    def phi(t):
        return c - k * (1 - np.asarray(t) ** (e + 1)) / (e + 1)

    def dphi(t):
        return k * np.asarray(t) ** e
    return phi, dphi


# ---------------------------------------------------------------------------
# norms


@dataclass
class NormReport:
    eps: float
    grad_sup: float
    hess_sup: dict   # delta -> sup |D^2 u| over |z| < 1 - delta (delta = 0 is all of Omega)
    M: float


def radial_norms(sol, deltas=(0.0, 0.1, 0.2), samples=4001):
    """Operator-norm sup of the real Hessian, gradient sup and the boundary quantity ``M``.

    The real Hessian of ``phi(|x|^2)`` has eigenvalues ``2 phi'`` and ``2 phi' + 4 t phi''``.
    """
    r = np.linspace(0, 1, samples)[1:]
    t = r**2
    d = sol.derivatives(t, 2)
    lam = np.maximum(np.abs(2 * d[1]), np.abs(2 * d[1] + 4 * t * d[2]))
    grad = 2 * d[1] * r
    hess = {}
    for delta in deltas:
        mask = r < 1 - delta if delta > 0 else r <= 1
        hess[float(delta)] = float(lam[mask].max())
    end = sol.derivatives(np.array([1.0]), 2)
    M = float(2 * end[1][0] + 4 * end[2][0])
    return NormReport(sol.problem.eps, float(grad.max()), hess, M)


# ---------------------------------------------------------------------------
# grid scheme for n = 2


_S2 = 1 / np.sqrt(2)
GRID_DIRECTIONS = np.array([
    [1, 0], [0, 1],
    [_S2, _S2], [_S2, -_S2],
    [_S2, 1j * _S2], [_S2, -1j * _S2],
], dtype=complex)
FRAMES = [(0, 1), (2, 3), (4, 5)]
RATIOS = [4.0**j for j in range(-3, 4)]


def _lattice_vectors(v):
    """Integer lattice steps for the real lines through ``v`` and ``i v`` plus their lengths."""
    out = []
    for w in (v, 1j * v):
        real = np.array([w[0].real, w[0].imag, w[1].real, w[1].imag])
        step = real / np.abs(real[np.abs(real) > 1e-12]).min()
        step = np.rint(step).astype(int)
        out.append((step, float(np.linalg.norm(step))))
    return out


@dataclass
class GridField:
    N: int
    h: float
    coords: np.ndarray = field(repr=False)    # (N^4, 4) real coordinates
    values: np.ndarray = field(repr=False)    # (N^4,)
    interior: np.ndarray = field(repr=False)  # boolean mask
    iterations: int = 0
    residual: float = float("nan")
    converged: bool = False

    def complex_points(self):
        c = self.coords
        return c[:, 0] + 1j * c[:, 1], c[:, 2] + 1j * c[:, 3]

    def to_rows(self):
        z1, z2 = self.complex_points()
        return [dict(x1=c[0], y1=c[1], x2=c[2], y2=c[3], u=v, interior=int(m))
                for c, v, m in zip(self.coords, self.values, self.interior)]


def _second_difference_rows(coords, interior, h, step, length, boundary_value):
    """Shortley-Weller weights for the unit second derivative along ``step``.

    Returns ``(center, plus_index, plus_weight, minus_index, minus_weight, rhs)``;
    an index of ``-1`` means the neighbour was replaced by a boundary value folded into ``rhs``.
    """
    N = round(2 / h) + 1
    idx = np.flatnonzero(interior)
    x = coords[idx]
    e = step * h
    grid = lambda p: np.rint((p + 1) / h).astype(int)

    def neighbour(sign):
        p = x + sign * e
        inside = np.all(np.abs(p) <= 1 + 1e-12, axis=1)
        inside &= np.sum(p**2, axis=1) < 1 - 1e-12
        k = grid(np.clip(p, -1, 1))
        flat = np.ravel_multi_index(k.T, (N,) * 4, mode="clip")
        inside &= interior[flat]
        # fraction of the step to the sphere
        a = np.sum(e**2)
        b = 2 * np.sum(x * e, axis=1) * sign
        c = np.sum(x**2, axis=1) - 1
        theta = (-b + np.sqrt(b * b - 4 * a * c)) / (2 * a)
        theta = np.where(inside, 1.0, np.clip(theta, 1e-6, 1.0))
        bpt = x + sign * theta[:, None] * e
        bval = np.where(inside, 0.0, boundary_value(bpt))
        return np.where(inside, flat, -1), theta, bval

    ip, tp, bp = neighbour(+1)
    im, tm, bm = neighbour(-1)
    scale = 2.0 / ((tp + tm) * (length * h) ** 2)
    wp = scale / tp
    wm = scale / tm
    center = -(wp + wm)
    rhs = np.where(ip < 0, wp * bp, 0.0) + np.where(im < 0, wm * bm, 0.0)
    return idx, center, ip, wp, im, wm, rhs


def _linear_solve(A, b, x0=None):
    """ILU-preconditioned BiCGSTAB with a direct fallback; 4D fill-in makes plain LU slow."""
    A = A.tocsc()
    try:
        ilu = spilu(A, drop_tol=1e-5, fill_factor=10)
        M = LinearOperator(A.shape, ilu.solve)
        x, info = bicgstab(A, b, x0=x0, M=M, rtol=1e-13, atol=0.0, maxiter=500)
        if info == 0:
            return x
    except RuntimeError:
        pass
    return spsolve(A, b)


def _ball_lattice(N):
    h = 2.0 / (N - 1)
    axis = np.linspace(-1, 1, N)
    coords = np.stack(np.meshgrid(axis, axis, axis, axis, indexing="ij"), axis=-1).reshape(-1, 4)
    interior = np.sum(coords**2, axis=1) < 1 - 1e-12
    return h, coords, interior


def solve_grid2(g, eps=0.0, boundary=None, N=13, tol=1e-6, max_policy=200):
    """Policy iteration for ``min_A tr(A D^2_C u) / 2 = sqrt(g + eps)`` on the unit ball in ``C^2``.

    ``g`` is a polynomial in ``t = |z|^2``; ``boundary`` maps real coordinates
    ``(k, 4)`` to Dirichlet data (default zero).  Each policy step solves the
    linear monotone system to round-off with a preconditioned Krylov method.
    """
    if N > 21 or N < 5:
        raise SolverError("grid size N must lie in 5..21")
    g = as_profile(g)
    boundary = (lambda p: np.zeros(p.shape[0])) if boundary is None else boundary
    h, coords, interior = _ball_lattice(N)
    total = coords.shape[0]
    t = np.sum(coords**2, axis=1)
    rhs_f = g(t) + eps
    if np.any(rhs_f[interior] < -1e-14):
        raise SolverError("g + eps must be non-negative")
    f = np.sqrt(np.maximum(rhs_f, 0.0))
    # directional operators u_{v vbar} = (D^2_re + D^2_im) / 4
    dir_ops = []
    for v in GRID_DIRECTIONS:
        rows = [_second_difference_rows(coords, interior, h, s, L, boundary) for s, L in _lattice_vectors(v)]
        dir_ops.append(rows)
    idx = np.flatnonzero(interior)
    pos = -np.ones(total, dtype=int)
    pos[idx] = np.arange(idx.size)
    policies = [(fr, r) for fr in FRAMES for r in RATIOS]

    def assemble(choice):
        data, ri, ci = [], [], []
        rhs = np.zeros(idx.size)
        for p, ((d1, d2), ratio) in enumerate(policies):
            sel = choice == p
            if not sel.any():
                continue
            lam1, lam2 = np.sqrt(ratio), 1 / np.sqrt(ratio)
            for d, lam in ((d1, lam1), (d2, lam2)):
                for (_, center, ip, wp, im, wm, r) in dir_ops[d]:
                    c = lam / 8  # tr(A H) / 2 with u_vv = (re + im) / 4
                    rows = np.flatnonzero(sel)
                    ri.append(rows); ci.append(rows); data.append(c * center[sel])
                    for nb, w in ((ip, wp), (im, wm)):
                        ok = sel & (nb >= 0)
                        rr = np.flatnonzero(ok)
                        ri.append(rr); ci.append(pos[nb[ok]]); data.append(c * w[ok])
                    rhs[sel] -= c * r[sel]
        A = csr_matrix((np.concatenate(data), (np.concatenate(ri), np.concatenate(ci))),
                       shape=(idx.size, idx.size))
        return A, rhs

    def apply_all(u_full):
        vals = np.empty((len(policies), idx.size))
        dvals = []
        for d in range(len(GRID_DIRECTIONS)):
            acc = np.zeros(idx.size)
            for (_, center, ip, wp, im, wm, r) in dir_ops[d]:
                up = np.where(ip >= 0, u_full[np.maximum(ip, 0)], 0.0)
                um = np.where(im >= 0, u_full[np.maximum(im, 0)], 0.0)
                acc += (center * u_full[idx] + np.where(ip >= 0, wp * up, 0.0)
                        + np.where(im >= 0, wm * um, 0.0) + r) / 4
            dvals.append(acc)
        for p, ((d1, d2), ratio) in enumerate(policies):
            vals[p] = (np.sqrt(ratio) * dvals[d1] + dvals[d2] / np.sqrt(ratio)) / 2
        return vals

    u = np.zeros(total)
    u[~interior] = boundary(coords[~interior])
    choice = np.full(idx.size, policies.index((FRAMES[0], 1.0)))
    residual = np.inf
    it = 0
    for it in range(1, max_policy + 1):
        A, rhs = assemble(choice)
        u[idx] = _linear_solve(A, f[idx] + rhs, u[idx])
        vals = apply_all(u)
        new_choice = np.argmin(vals, axis=0)
        residual = float(np.max(np.abs(vals.min(axis=0) - f[idx])))
        if residual < tol or np.array_equal(new_choice, choice):
            break
        choice = new_choice
    out = GridField(N, h, coords, u, interior, it, residual, residual < tol)
    if not out.converged:
        raise ConvergenceError(f"policy iteration stopped at residual {residual:.3g}", out)
    return out


def grid_error(field_, sol):
    """Sup-norm difference between a grid field and the radial solution at interior nodes."""
    z1, z2 = field_.complex_points()
    pts = np.stack([z1, z2], axis=1)[field_.interior]
    return float(np.max(np.abs(field_.values[field_.interior] - sol(pts))))


def grid_norms(field_, deltas=(0.2, 0.3)):
    """Sup of axis second differences at nodes at least ``max(delta, 3h)`` inside."""
    N, h = field_.N, field_.h
    U = field_.values.reshape((N,) * 4)
    r = np.sqrt(np.sum(field_.coords**2, axis=1)).reshape((N,) * 4)
    out = {}
    for delta in deltas:
        d = max(delta, 3 * h)
        best = 0.0
        for ax in range(4):
            D2 = (np.roll(U, -1, ax) - 2 * U + np.roll(U, 1, ax)) / h**2
            mask = r < 1 - d
            if mask.any():
                best = max(best, float(np.abs(D2[mask]).max()))
        out[float(delta)] = best
    return out


def grid_admissibility(field_, boundary=None):
    """Smallest discrete complex directional Laplacian over interior nodes and grid directions."""
    h, coords, interior = field_.h, field_.coords, field_.interior
    u = field_.values
    boundary = (lambda p: np.zeros(p.shape[0])) if boundary is None else boundary
    worst = np.inf
    for v in GRID_DIRECTIONS:
        acc = 0.0
        for s, L in _lattice_vectors(v):
            idx, center, ip, wp, im, wm, r = _second_difference_rows(coords, interior, h, s, L, boundary)
            up = np.where(ip >= 0, u[np.maximum(ip, 0)], 0.0)
            um = np.where(im >= 0, u[np.maximum(im, 0)], 0.0)
            acc = acc + (center * u[idx] + np.where(ip >= 0, wp * up, 0.0)
                         + np.where(im >= 0, wm * um, 0.0) + r) / 4
        worst = min(worst, float(np.min(acc)))
    return worst


