"""Affine skew-hermitian vector fields, tangentiality checks and commutation identities."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .calculus import PolyJet, affine_field_coeffs, field_deriv, gradient, hess_c
from .operators import op_eval, op_grad, op_second_form, pair


class FieldError(ValueError):
    pass


@dataclass(frozen=True)
class AffineSkewHermitianField:
    """Holomorphic field ``xi = a + A z`` with ``A^* = -A``."""

    a: np.ndarray
    A: np.ndarray
    name: str = ""

    def __post_init__(self):
        a = np.asarray(self.a, dtype=complex)
        A = np.asarray(self.A, dtype=complex)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "A", A)
        if A.shape != (a.size, a.size):
            raise FieldError("matrix and constant part have inconsistent sizes")

    @property
    def n(self):
        return self.a.size

    def skew_defect(self):
        return float(np.abs(self.A + self.A.conj().T).max())

    def __call__(self, z):
        """Components ``xi_k(z)`` at one or many points."""
        z = np.asarray(z, dtype=complex)
        return self.a + z @ self.A.T

    def coeffs(self):
        return affine_field_coeffs(self.n, self.a, self.A)

    def flow_is_unitary(self, t):
        E = expm(t * self.A.conj())
        return float(np.abs(E.conj().T @ E - np.eye(self.n)).max())

    def pushforward(self, U, shift):
        """The field in coordinates ``z' = U z + shift`` for unitary ``U``."""
        A2 = U @ self.A @ U.conj().T
        a2 = U @ self.a - A2 @ shift
        return AffineSkewHermitianField(a2, A2, self.name)


def standard_fields(n):
    """The ``2n - 1`` fields of the tangential frame at the origin of adapted coordinates."""
    out = []
    last = n - 1
    for k in range(n - 1):
        a = np.zeros(n, complex)
        A = np.zeros((n, n), complex)
        a[k] = 1
        A[last, k] += 1  # z_k d/dz_n
        A[k, last] -= 1  # -z_n d/dz_k
        out.append(AffineSkewHermitianField(a, A, f"xi_{k + 1}"))
    for j in range(n - 1):
        a = np.zeros(n, complex)
        A = np.zeros((n, n), complex)
        a[j] = 1j
        A[last, j] -= 1j
        A[j, last] -= 1j
        out.append(AffineSkewHermitianField(a, A, f"xi_{n + j}"))
    a = np.zeros(n, complex)
    A = np.zeros((n, n), complex)
    a[last] = 1j
    A[last, last] = -1j
    out.append(AffineSkewHermitianField(a, A, f"xi_{2 * n - 1}"))
    return out


def constant_field(n, a):
    return AffineSkewHermitianField(np.asarray(a, complex), np.zeros((n, n), complex), "constant")


# ---------------------------------------------------------------------------
# pairings and tangential decomposition


def real_pair(xi, eta):
    """``(xi, eta) = Re sum xi_l conj(eta_l)``."""
    return float(np.real(np.vdot(eta, xi)))


@dataclass(frozen=True)
class TangentialSplit:
    """``xi = scalar * normal + zeta`` with ``normal = eta / ||eta||`` and ``(zeta, eta) = 0``."""

    scalar: float
    normal: np.ndarray
    zeta: np.ndarray

    def reassemble(self):
        return self.scalar * self.normal + self.zeta


def tangential_split(xi_value, rho, z):
    """Split a (1,0) vector at ``z`` against ``eta = rho_{zbar_i} d/dz_i``."""
    _, eta = gradient(rho, z)
    norm = np.linalg.norm(eta)
    if norm == 0:
        raise FieldError("vanishing gradient: no tangential split")
    nu = eta / norm
    xi_value = np.asarray(xi_value, dtype=complex)
    s = real_pair(xi_value, nu)
    return TangentialSplit(s, nu, xi_value - s * nu)


# ---------------------------------------------------------------------------
# approximate tangentiality


RADII = 2.0 ** -np.arange(3, 11)


@dataclass
class OrderReport:
    radii: np.ndarray
    values: dict  # condition -> array of max |defect| per radius
    slopes: dict
    constants: dict

    def passes(self, threshold=1.9):
        return all(s >= threshold for s in self.slopes.values())


def _fit(radii, vals, floor=1e-13):
    vals = np.asarray(vals, dtype=float)
    if np.all(vals <= floor):
        return float("inf"), 0.0
    mask = vals > floor
    if mask.sum() < 2:
        return float("inf"), float(vals.max() / radii[np.argmax(vals)] ** 2)
    slope, _ = np.polyfit(np.log(radii[mask]), np.log(vals[mask]), 1)
    const = float(np.max(vals / radii**2))
    return float(slope), const


def _tangential_samples(n, radius, count, rng):
    """Points of the sphere of given radius in ``(z', y_n)`` space."""
    g = rng.standard_normal((count, 2 * n - 1))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    g *= radius
    wp = g[:, : n - 1] + 1j * g[:, n - 1: 2 * n - 2]
    return wp, g[:, -1]


def approx_tangential_check(field, chart, rng=None, directions=16, radii=RADII):
    """Fitted vanishing orders of the three approximate-tangentiality defects.

    (1) ``|(xi, eta)|``, (2) ``||xi - zeta||`` with ``zeta`` the tangential part,
    (3) ``| ||xi|| - 1 |``, each sampled on the boundary at ``||(z', y_n)|| = r``.
    """
    rng = np.random.default_rng(7) if rng is None else rng
    rho = chart.local_defining
    n = chart.n
    if max(chart.residuals().values()) > 1e-9:
        raise FieldError("chart is not adapted at the origin")
    values = {1: [], 2: [], 3: []}
    for r in radii:
        wp, yn = _tangential_samples(n, r, directions, rng)
        worst = [0.0, 0.0, 0.0]
        for k in range(directions):
            w = chart.boundary_point((wp[k], yn[k]))
            xi = field(w)
            g, _ = gradient(rho, w)
            d1 = abs(float(np.real(xi @ g)))
            split = tangential_split(xi, rho, w)
            d2 = float(np.linalg.norm(xi - split.zeta))
            d3 = abs(float(np.linalg.norm(xi)) - 1.0)
            worst = [max(worst[0], d1), max(worst[1], d2), max(worst[2], d3)]
        for c in (1, 2, 3):
            values[c].append(worst[c - 1])
    slopes, consts = {}, {}
    for c in (1, 2, 3):
        slopes[c], consts[c] = _fit(np.asarray(radii), values[c])
    return OrderReport(np.asarray(radii), {c: np.asarray(v) for c, v in values.items()}, slopes, consts)


# ---------------------------------------------------------------------------
# commutation identities


def _matrix_field(jets, z):
    n = len(jets)
    return np.array([[complex(jets[i][j](z)) for j in range(n)] for i in range(n)])


def _hessian_jets(u):
    n = u.n
    return [[u.dz(i).dzb(j) for j in range(n)] for i in range(n)]


@dataclass
class CommutationResidual:
    first: float   # derivative relation (xi_k)_l = A_kl = -conj(A_lk)
    second: float  # u_(xi) i jbar identity
    fourth: float  # u_(xi)(xi) i jbar identity
    scale: float


def commutation_check(u, field, z):
    """Residuals of the first- and second-order commutation identities at ``z``.

    Left sides differentiate ``u_(xi)`` and ``u_(xi)(xi)`` as polynomials; right
    sides differentiate the entries of the complex Hessian along the field and
    add the coefficient-derivative corrections.
    """
    z = np.asarray(z, dtype=complex)
    coeffs = field.coeffs()
    A = field.A
    # derivative relation checked on the polynomial coefficients themselves
    Dxi = np.array([[complex(coeffs[k].dz(l)(z)) for l in range(u.n)] for k in range(u.n)])
    first = float(max(np.abs(Dxi - A).max(), np.abs(A + A.conj().T).max()))
    u1 = field_deriv(u, coeffs)
    u2 = field_deriv(u1, coeffs)
    H = hess_c(u, z)
    Hj = _hessian_jets(u)
    TH_j = [[field_deriv(h, coeffs) for h in row] for row in Hj]
    TH = _matrix_field(TH_j, z)
    TTH = _matrix_field([[field_deriv(h, coeffs) for h in row] for row in TH_j], z)
    At, Ab = A.T, A.conj()
    lhs1 = hess_c(u1, z)
    rhs1 = TH + At @ H + H @ Ab
    lhs2 = hess_c(u2, z)
    rhs2 = TTH + 2 * (At @ TH + TH @ Ab) + At @ At @ H + H @ Ab @ Ab + 2 * At @ H @ Ab
    scale = max(1.0, float(np.abs(lhs2).max()), float(np.abs(lhs1).max()))
    return CommutationResidual(first, float(np.abs(lhs1 - rhs1).max()),
                               float(np.abs(lhs2 - rhs2).max()), scale)


@dataclass
class QuadraticResidual:
    residual: float     # |lhs - rhs| of the operator identity
    inequality: float   # lhs - (F(u))_(xi)(xi), should be >= 0 for concave F
    first_variation: float
    scale: float


def f_quadratic_check(F, u, field, z, grad=None):
    """Residual of ``F^{ij} u_(xi)(xi) i jbar = (F(D^2 u))_(xi)(xi) - F^{ij,pq} u_(xi)ij u_(xi)pq``.

    ``(F(D^2 u))_(xi)(xi)`` is computed by the plain chain rule along the flow,
    ``F'[T T H] + F''[T H, T H]`` with ``T`` differentiating Hessian entries,
    so no commutation formula enters the right side.  ``grad`` overrides the
    operator gradient (used for fault injection).
    """
    z = np.asarray(z, dtype=complex)
    coeffs = field.coeffs()
    H = hess_c(u, z)
    G = op_grad(F, H) if grad is None else grad
    u1 = field_deriv(u, coeffs)
    u2 = field_deriv(u1, coeffs)
    Hj = _hessian_jets(u)
    TH_j = [[field_deriv(h, coeffs) for h in row] for row in Hj]
    TH = _matrix_field(TH_j, z)
    TTH = _matrix_field([[field_deriv(h, coeffs) for h in row] for row in TH_j], z)
    flow_second = pair(G, TTH).real + op_second_form(F, H, TH)
    lhs = pair(G, hess_c(u2, z)).real
    V = hess_c(u1, z)
    rhs = flow_second - op_second_form(F, H, V)
    A = field.A
    fv = np.sum(G * (A.conj() @ H + H @ A.T))
    scale = max(1.0, abs(lhs), abs(flow_second))
    return QuadraticResidual(abs(lhs - rhs), lhs - flow_second, float(abs(fv)), scale)


# ---------------------------------------------------------------------------
# obstruction for unitary-only normalisation


@dataclass
class ObstructionResult:
    matrices: list          # solved A for each of the 2n-1 constant directions
    directions: list        # constant parts
    linear_residuals: list  # remaining linear coefficients of condition (1), per direction
    norm_defects: list      # linear coefficients of ||xi||^2 - 1, per direction
    ranks: list
    obstruction: np.ndarray  # rho_{y_n z_l}(0), l < n
    normalized: PolyJet


def normalize_unitary(rho):
    """Rotate and rescale ``rho`` (zero at the origin) so that ``rho_z(0) = -e_n`` and the
    tangential diagonal second derivatives ``rho_{z_k z_k}(0)`` are real."""
    from .calculus import compose_holomorphic, hess_holo
    from .geometry import _affine_map, _unitary_with_last_column

    n = rho.n
    g, _ = gradient(rho, np.zeros(n))
    gnorm = float(np.linalg.norm(g))
    if gnorm == 0:
        raise FieldError("degenerate gradient: normalisation unreachable")
    U = _unitary_with_last_column(-np.conj(g) / gnorm)
    r1 = compose_holomorphic(rho, _affine_map(n, np.zeros(n), U)) * (1.0 / gnorm)
    Q = hess_holo(r1, np.zeros(n))
    phases = np.ones(n, complex)
    for k in range(n - 1):
        if abs(Q[k, k]) > 0:
            phases[k] = np.exp(-0.5j * np.angle(Q[k, k]))
    r2 = compose_holomorphic(r1, _affine_map(n, np.zeros(n), np.diag(phases)))
    r2.real = True
    return r2


def _condition_one_linear(rho, c, A):
    """Linear coefficients of ``Re(xi_k rho_{z_k})`` on ``(x_1, y_1, ..., x_n, y_n)``."""
    n = rho.n
    zero = np.zeros(n)
    g, _ = gradient(rho, zero)
    Rzz = np.array([[complex(rho.dz(k).dz(l)(zero)) for l in range(n)] for k in range(n)])
    Rzbz = np.array([[complex(rho.dzb(k).dz(l)(zero)) for l in range(n)] for k in range(n)])
    # holomorphic-linear coefficient of z_l: c_k rho_kl + conj(c_k) rho_{kbar l} + A_kl rho_k(0)
    kappa = c @ Rzz + np.conj(c) @ Rzbz + g @ A
    # Re(kappa z) = Re(kappa) x - Im(kappa) y
    return np.column_stack([kappa.real, -kappa.imag])


def obstruction(rho, normalize=True):
    """Solve the linear system for skew-hermitian completions of the constant directions
    ``d/dz_s``, ``i d/dz_s`` (s < n) and ``i d/dz_n``."""
    r = normalize_unitary(rho) if normalize else rho
    n = r.n
    zero = np.zeros(n)
    Rzz = np.array([[complex(r.dz(k).dz(l)(zero)) for l in range(n)] for k in range(n)])
    Rzbz = np.array([[complex(r.dzb(k).dz(l)(zero)) for l in range(n)] for k in range(n)])
    dirs = []
    for s in range(n - 1):
        c = np.zeros(n, complex)
        c[s] = 1
        dirs.append(c)
    for s in range(n - 1):
        c = np.zeros(n, complex)
        c[s] = 1j
        dirs.append(c)
    c = np.zeros(n, complex)
    c[-1] = 1j
    dirs.append(c)
    mats, lin_res, defects, ranks = [], [], [], []
    for c in dirs:
        kappa0 = c @ Rzz + np.conj(c) @ Rzbz
        A = np.zeros((n, n), complex)
        A[-1, :-1] = kappa0[:-1]
        A[-1, -1] = 1j * kappa0[-1].imag
        A[:-1, -1] = -np.conj(A[-1, :-1])
        mats.append(A)
        L = _condition_one_linear(r, c, A)
        # x_n is allowed to survive: it is O(||(z', y_n)||^2) on the boundary
        L[-1, 0] = 0.0
        lin_res.append(float(np.abs(L).max()))
        # linear part of ||c + A z||^2 - 1 is 2 Re(conj(c) . A z)
        beta = np.conj(c) @ A
        d = np.column_stack([2 * beta.real, -2 * beta.imag])
        d[-1, 0] = 0.0
        defects.append(d)
        ranks.append(_system_rank(r, c))
    obst = np.array([complex(r.dy(n - 1).dz(l)(zero)) for l in range(n - 1)])
    return ObstructionResult(mats, dirs, lin_res, defects, ranks, obst, r)


def _system_rank(rho, c):
    """Rank of the real linear map from the free entries (a_nl, l < n complex; a_nn imaginary)
    to the constrained linear coefficients of condition (1)."""
    n = rho.n
    cols = []
    base = _condition_one_linear(rho, c, np.zeros((n, n), complex))
    for l in range(n):
        for unit in ((1.0, 1j) if l < n - 1 else (1j,)):
            A = np.zeros((n, n), complex)
            A[-1, l] = unit
            if l < n - 1:
                A[l, -1] = -np.conj(unit)
            M = _condition_one_linear(rho, c, A) - base
            M[-1, 0] = 0.0
            v = np.delete(M.reshape(-1), 2 * (n - 1))
            cols.append(v)
    return int(np.linalg.matrix_rank(np.column_stack(cols)))
