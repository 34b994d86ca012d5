"""Boundary profile of the second tangential derivative along a radial solution.

For a tangential field ``xi`` at a boundary point ``p`` we sample
``w = u_(xi)(xi) - u_(xi)(xi)(p)`` in adapted coordinates, subtract its linear
part in the boundary parameters ``(w', y_n)``, and fit the smallest constants in

    w <= C1 s^2 + C2 M s^4              on the boundary,
    w <= C4 (s^2 + M s^4 + M psi)       inside,

with ``s = ||(w', y_n)||`` and ``M`` the boundary normal-normal second derivative.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .calculus import PolyJet, compose_holomorphic
from .fields import standard_fields
from .geometry import ChartError, adapted_coordinates
from .solver import radial_norms
from .wirtinger import Jet2, sum_jets

PROFILE_RADII = tuple(2.0 ** -k for k in range(2, 8))


@dataclass
class ProfileFit:
    base: np.ndarray
    field_index: int
    field_name: str
    C1: float
    C2: float
    C4: float
    M: float
    radii: tuple
    per_radius: np.ndarray = field(repr=False)  # max w / s^2 at each radius
    flagged: bool = False  # per-radius constant grows by more than 4x toward the base point


def pluriharmonic_quadratic(n, coefficient, i=0, j=None):
    """``coefficient * Re(z_i z_j)``; adding it to a solution keeps the complex Hessian."""
    j = n - 1 if j is None else j
    z = [PolyJet.coordinate(n, k) for k in range(n)]
    return PolyJet.real_part(z[i] * z[j]) * coefficient


def _second_field_derivative(sol, chart, xi, w, extra=None):
    """``u_(xi)(xi)`` at chart points ``w`` for ``u = phi(|z|^2) + extra`` composed with the chart.

    ``extra`` is a PolyJet already pulled back to chart coordinates.
    """
    n = chart.n
    w = np.atleast_2d(np.asarray(w, dtype=complex))
    Z = [Jet2.from_poly(c, w, n) for c in chart.to_ambient]
    t = sum_jets([zk.abs2() for zk in Z])
    d = sol.derivatives(np.real(t.val), 2)
    U = t.apply(d[0], d[1], d[2])
    if extra is not None:
        U = U + Jet2.from_poly(extra, w, n)
    g = U.holo_grad()
    Hh = U.hess[:, :n, :n]
    Hm = U.mixed_hessian()
    X = xi(w)  # (S, n)
    A = xi.A
    holo = np.einsum("si,sj,sij->s", X, X, Hh) + np.einsum("si,ji,sj->s", X, A, g)
    mixed = np.einsum("si,sj,sij->s", X, np.conj(X), Hm)
    return 2 * np.real(holo) + 2 * np.real(mixed)


def _tangent_directions(n, count, rng):
    d = rng.standard_normal((count, 2 * n - 1))
    return d / np.linalg.norm(d, axis=1, keepdims=True)


def _boundary_points(chart, params):
    n = chart.n
    out = []
    for x in params:
        wp = x[: n - 1] + 1j * x[n - 1: 2 * n - 2]
        out.append(chart.boundary_point((wp, x[-1])))
    return np.array(out)


def boundary_profile(sol, dom, field_index=0, radii=PROFILE_RADII, base=None, directions=48,
                     depth_fractions=(0.25, 0.5, 1.0), rng=None, field_=None, harmonic=None):
    """Fit ``(C1, C2, C4)`` for ``u = sol + harmonic`` on the ball ``dom``.

    The standard fields generate unitary motions of the ball, so for a purely
    radial ``u`` the profile vanishes identically; a pluriharmonic ``harmonic``
    term (see :func:`pluriharmonic_quadratic`) gives a solution with
    non-constant boundary data and a non-trivial profile.  ``field_``
    overrides the standard field (used for controls).
    """
    rng = np.random.default_rng(5) if rng is None else rng
    n = dom.n
    base = np.eye(n)[-1].astype(complex) if base is None else np.asarray(base, dtype=complex)
    try:
        chart = adapted_coordinates(dom, base)
    except Exception as exc:  # pragma: no cover - geometry errors are reported as chart failures
        raise ChartError(f"no adapted chart at {base}: {exc}") from exc
    xi = field_ if field_ is not None else standard_fields(n)[field_index]
    M = radial_norms(sol, deltas=(0.0,)).M
    extra = None if harmonic is None else compose_holomorphic(harmonic, chart.to_ambient)
    w0 = _second_field_derivative(sol, chart, xi, np.zeros((1, n)), extra)[0]

    def profile(points):
        return _second_field_derivative(sol, chart, xi, points, extra) - w0

    # linear part of w along the boundary parametrisation, by central differences
    step = 1e-4
    lin = np.zeros(2 * n - 1)
    for k in range(2 * n - 1):
        e = np.zeros(2 * n - 1)
        e[k] = step
        wp, wm = profile(_boundary_points(chart, [e, -e]))
        lin[k] = (wp - wm) / (2 * step)

    dirs = _tangent_directions(n, directions, rng)
    per_radius = []
    s_all, w_all = [], []
    for s in radii:
        params = dirs * s
        vals = profile(_boundary_points(chart, params)) - params @ lin
        per_radius.append(np.max(vals) / s**2)
        s_all.append(np.full(len(params), s))
        w_all.append(vals)
    s_all = np.concatenate(s_all)
    w_all = np.concatenate(w_all)
    small = s_all <= np.median(radii)
    C1 = max(0.0, float(np.max(w_all[small] / s_all[small] ** 2)))
    C2 = max(0.0, float(np.max((w_all - C1 * s_all**2) / (M * s_all**4))))

    # interior samples pushed inward along Re w_n
    ints, dens = [], []
    for s in radii:
        params = dirs * s
        bpts = _boundary_points(chart, params)
        for frac in depth_fractions:
            pts = bpts.copy()
            pts[:, -1] += frac * s**2
            z = chart(pts)
            psi = np.real(dom.jet(z))
            keep = psi > 0
            vals = profile(pts[keep]) - params[keep] @ lin
            ints.append(vals)
            dens.append(s**2 + M * s**4 + M * psi[keep])
    ints = np.concatenate(ints)
    dens = np.concatenate(dens)
    C4 = max(0.0, float(np.max(ints / dens)))
    per_radius = np.array(per_radius)
    noise = 1e-8 * max(M, 1.0)
    flagged = bool(per_radius[-1] > 4 * max(per_radius[0], noise))
    return ProfileFit(base, field_index, xi.name, C1, C2, C4, M, tuple(radii), per_radius, flagged)
