"""Configuration and batch runners behind the command-line interface."""

from __future__ import annotations

import configparser
import hashlib
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .barrier import (BarrierParams, build_l, barrier_lemma_check, constant_a,
                      lemma_pair_krylov_check, ma_linearization_field, perturbation_check,
                      sample_extended, sample_extended_boundary, search_alpha)
from .calculus import hess_c, random_admissible, random_ball_points
from .fields import AffineSkewHermitianField, commutation_check, f_quadratic_check
from .geometry import make_domain
from .operators import HessianOperator, holomorphic_map, ma_holo_check, op_grad
from .profile import boundary_profile, pluriharmonic_quadratic
from .solver import RadialProblem, grid_admissibility, grid_error, radial_norms, solve_grid2, solve_radial

IDENTITY_TOL = 1e-8
HOLO_TOL = 1e-9


class ConfigError(ValueError):
    pass


def _floats(text):
    return tuple(float(x) for x in text.split(",") if x.strip())


def _ints(text):
    return tuple(int(x) for x in text.split(",") if x.strip())


def parse_profile(text):
    """``"1"``, ``"t^m"`` or comma-separated coefficients ``c0, c1, ...`` in ``t``."""
    s = text.strip().replace(" ", "")
    if s.startswith("t^"):
        m = int(s[2:])
        return tuple([0.0] * m + [1.0])
    if s == "t":
        return (0.0, 1.0)
    return _floats(s)


@dataclass
class SweepConfig:
    seed: int = 0
    out: str = "krylab-out"
    # domain and operator
    domain: str = "ball"
    n: int = 2
    axes: tuple = ()
    operator: str = "ma"
    k: int = 0
    # radial family
    g: tuple = (0.0, 0.0, 1.0)
    exponents: tuple = (2, 4)
    eps: tuple = (1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6)
    deltas: tuple = (0.1, 0.2)
    # barrier
    alpha: str = "auto"
    beta: str = "auto"
    samples: int = 10_000
    coefficient: str = "identity"  # identity (a = I/n) or ma (linearization along the radial solution)
    # identity suites
    instances: int = 200
    holo_instances: int = 100
    dims: tuple = (2, 3)
    inject_grad_error: float = 0.0
    # grid
    sizes: tuple = (9, 13)
    grid_g: tuple = (1.0,)
    grid_eps: float = 0.0
    # profile
    profile_fields: tuple = (0, 1, 2)
    profile_exponent: int = 2
    profile_harmonic: float = 0.5  # coefficient of the pluriharmonic Re(z_1 z_n) term

    def validate(self):
        if not self.eps:
            raise ConfigError("eps list is empty")
        if any(e <= 0 for e in self.eps) or list(self.eps) != sorted(self.eps, reverse=True):
            raise ConfigError("eps list must be positive and strictly decreasing")
        if self.samples <= 0 or self.instances <= 0:
            raise ConfigError("sample sizes must be positive")
        if self.domain not in ("ball", "ellipsoid", "perturbed-ball"):
            raise ConfigError(f"unknown domain kind {self.domain!r}")
        if self.coefficient not in ("identity", "ma"):
            raise ConfigError(f"unknown coefficient field {self.coefficient!r}")
        for name in ("alpha", "beta"):
            v = getattr(self, name)
            if v != "auto":
                try:
                    x = float(v)
                except ValueError as exc:
                    raise ConfigError(f"{name} must be 'auto' or a number") from exc
                if not 0 < x < 1:
                    raise ConfigError(f"{name} must lie in (0, 1)")
        return self

    def digest(self):
        text = "\n".join(f"{k}={v!r}" for k, v in sorted(asdict(self).items()) if k != "out")
        return hashlib.sha256(text.encode()).hexdigest()[:12]


_KEYS = {
    ("run", "seed"): ("seed", int),
    ("run", "out"): ("out", str),
    ("domain", "kind"): ("domain", str),
    ("domain", "n"): ("n", int),
    ("domain", "axes"): ("axes", _floats),
    ("operator", "kind"): ("operator", str),
    ("operator", "k"): ("k", int),
    ("sweep", "g"): ("g", parse_profile),
    ("sweep", "exponents"): ("exponents", _ints),
    ("sweep", "eps"): ("eps", _floats),
    ("sweep", "deltas"): ("deltas", _floats),
    ("barrier", "alpha"): ("alpha", str),
    ("barrier", "beta"): ("beta", str),
    ("barrier", "samples"): ("samples", int),
    ("barrier", "coefficient"): ("coefficient", str),
    ("identities", "instances"): ("instances", int),
    ("identities", "holo_instances"): ("holo_instances", int),
    ("identities", "dims"): ("dims", _ints),
    ("identities", "inject_grad_error"): ("inject_grad_error", float),
    ("grid", "sizes"): ("sizes", _ints),
    ("grid", "g"): ("grid_g", parse_profile),
    ("grid", "eps"): ("grid_eps", float),
    ("profile", "fields"): ("profile_fields", _ints),
    ("profile", "exponent"): ("profile_exponent", int),
    ("profile", "harmonic"): ("profile_harmonic", float),
}


def load_config(path=None, text=None):
    """Read a ``key = value`` file with ``[section]`` headers; unknown keys are errors."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        if path is not None:
            with open(path, encoding="utf-8") as fh:
                cp.read_file(fh)
        elif text is not None:
            cp.read_string(text)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot parse config: {exc}") from exc
    cfg = SweepConfig()
    for section in cp.sections():
        for key, raw in cp.items(section):
            entry = _KEYS.get((section, key))
            if entry is None:
                raise ConfigError(f"unknown key [{section}] {key}")
            name, conv = entry
            try:
                setattr(cfg, name, conv(raw))
            except ValueError as exc:
                raise ConfigError(f"[{section}] {key} = {raw!r}: {exc}") from exc
    return cfg.validate()


def worker_count():
    raw = os.environ.get("KRYLAB_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError as exc:
        raise ConfigError(f"KRYLAB_THREADS must be an integer, got {raw!r}") from exc


def parallel_map(fn, items, threads=None):
    """Order-stable map over a process pool capped by ``KRYLAB_THREADS``."""
    threads = worker_count() if threads is None else threads
    items = list(items)
    if threads <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# identity suite


def random_skew_field(n, rng, scale=1.0):
    Z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    A = scale * (Z - Z.conj().T) / 2
    a = scale * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    return AffineSkewHermitianField(a, A, "random")


def _operator_for(index, n):
    kinds = [HessianOperator.sigma_root(n, 1), HessianOperator.monge_ampere(n)]
    if n >= 2:
        kinds.insert(1, HessianOperator.sigma_root(n, 2))
    return kinds[index % len(kinds)]


def identity_instance(args):
    seed, idx, dims, inject = args
    rng = np.random.default_rng([seed, idx])
    n = dims[idx % len(dims)]
    F = _operator_for(idx // len(dims), n)
    u = random_admissible(n, rng, degree=4, radius=0.6)
    xi = random_skew_field(n, rng)
    z = random_ball_points(n, 1, rng, 0.5)[0]
    com = commutation_check(u, xi, z)
    grad = None
    if inject:
        grad = op_grad(F, hess_c(u, z)) + inject
    quad = f_quadratic_check(F, u, xi, z, grad=grad)
    rel_c = max(com.second, com.fourth) / com.scale
    rel_q = quad.residual / quad.scale
    return dict(instance=idx, n=n, operator=str(F), degree=u.degree,
                commutation_first=com.first, commutation_rel=rel_c, quadratic_rel=rel_q,
                concavity_gap=quad.inequality, first_variation=quad.first_variation,
                passed=bool(com.first < IDENTITY_TOL and rel_c < IDENTITY_TOL and rel_q < IDENTITY_TOL))


def holo_instance(args):
    seed, idx, dims = args
    rng = np.random.default_rng([seed, 10_000 + idx])
    n = dims[idx % len(dims)]
    u = random_admissible(n, rng, degree=4, radius=1.0)
    lin = np.eye(n) + 0.2 * (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
    quad = {(k, i, j): 0.1 * complex(*rng.standard_normal(2))
            for k in range(n) for i in range(n) for j in range(i, n)}
    G = holomorphic_map(n, lin, quad)
    w = random_ball_points(n, 1, rng, 0.3)[0]
    res = ma_holo_check(u, G, w)
    return dict(instance=idx, n=n, residual=res, passed=bool(res < HOLO_TOL))


def run_identity_suite(cfg):
    """Commutation and operator identities plus holomorphic invariance; returns ``(rows, holo_rows)``."""
    inject = cfg.inject_grad_error
    rows = parallel_map(identity_instance, [(cfg.seed, i, cfg.dims, inject) for i in range(cfg.instances)])
    holo = parallel_map(holo_instance, [(cfg.seed, i, cfg.dims) for i in range(cfg.holo_instances)])
    return rows, holo


# ---------------------------------------------------------------------------
# radial sweeps


def _sweep_row(args):
    n, g, eps, deltas = args
    sol = solve_radial(RadialProblem(n, g, eps=eps))
    rep = radial_norms(sol, deltas=(0.0,) + tuple(deltas))
    row = dict(n=n, g=",".join(repr(c) for c in g), eps=eps, grad_sup=rep.grad_sup, hess_sup=rep.hess_sup[0.0])
    for d in deltas:
        row[f"hess_sup_delta_{d:g}"] = rep.hess_sup[float(d)]
    row["M"] = rep.M
    return row


def relative_spread(values):
    v = np.asarray(values, dtype=float)
    top = np.max(np.abs(v))
    return 0.0 if top == 0 else float((v.max() - v.min()) / top)


def run_sweep(cfg, g=None):
    """Per-eps norm rows and a summary with spreads and the fitted interior constants."""
    g = cfg.g if g is None else g
    rows = parallel_map(_sweep_row, [(cfg.n, g, e, cfg.deltas) for e in cfg.eps])
    summary = dict(n=cfg.n, g=",".join(repr(c) for c in g),
                   hess_spread=relative_spread([r["hess_sup"] for r in rows]),
                   M_spread=relative_spread([r["M"] for r in rows]))
    for d in cfg.deltas:
        key = f"hess_sup_delta_{d:g}"
        C = max(r[key] - 0.5 * r["M"] for r in rows)
        summary[f"C_delta_{d:g}"] = C
    return rows, summary


def weakly_interior_check(cfg, g, summary, extra_eps=(1e-7, 1e-8, 0.0)):
    """Rows comparing interior sups with ``0.5 M + C`` for the sweep and for eps outside it.

    ``in_fit`` marks the eps values the constant was fitted on; ``excess`` is
    ``interior - bound`` (non-positive when the bound holds).
    """
    out = []
    for e in tuple(cfg.eps) + tuple(extra_eps):
        r = _sweep_row((cfg.n, g, e, cfg.deltas))
        for d in cfg.deltas:
            C = summary[f"C_delta_{d:g}"]
            interior = r[f"hess_sup_delta_{d:g}"]
            bound = 0.5 * r["M"] + C
            out.append(dict(eps=e, delta=d, in_fit=e in cfg.eps, interior=interior, bound=bound,
                            excess=interior - bound, holds=bool(interior <= bound + 1e-12)))
    return out


# ---------------------------------------------------------------------------
# barrier certification


def _domain(cfg):
    kw = {}
    if cfg.domain == "ellipsoid":
        kw["axes"] = np.asarray(cfg.axes or (1.0, 2.0) + (1.0,) * (cfg.n - 2))
    return make_domain(cfg.domain, cfg.n, **kw)


def run_barrier(cfg):
    """Lemma check, constant stability, PSD scan, perturbation constants and the Krylov check."""
    dom = _domain(cfg)
    rng = np.random.default_rng(cfg.seed)
    sol = solve_radial(RadialProblem(cfg.n, cfg.g, eps=cfg.eps[0]))
    a_field = constant_a(cfg.n) if cfg.coefficient == "identity" else ma_linearization_field(sol)
    if cfg.alpha == "auto":
        alpha, tried = search_alpha(dom, a_field, samples=min(cfg.samples, 2000), rng=np.random.default_rng(cfg.seed))
    else:
        alpha, tried = float(cfg.alpha), []
    beta = alpha**2 / 10 if cfg.beta == "auto" else float(cfg.beta)
    params = BarrierParams(alpha, beta)
    L = build_l(a_field, dom, params)
    pts = sample_extended(dom, cfg.samples, rng)
    t0 = time.perf_counter()
    lemma = barrier_lemma_check(L, pts)
    big = barrier_lemma_check(L, sample_extended(dom, 4 * cfg.samples, rng))
    A = L.coefficients(pts)[3]
    eig = np.linalg.eigvalsh(A)
    psd_rel = float(np.min(eig[:, 0] / np.maximum(eig[:, -1], 1e-300)))
    L_ma = build_l(ma_linearization_field(sol), dom, params)
    mu1 = perturbation_check(L_ma, sol, pts, 1)
    mu2 = perturbation_check(L_ma, sol, pts, 2)
    kr = lemma_pair_krylov_check(L_ma, sol, pts, sample_extended_boundary(dom, cfg.samples, rng))
    kr_strict = lemma_pair_krylov_check(L_ma, sol, pts,
                                        sample_extended_boundary(dom, cfg.samples, rng, include_shell=False))
    row = dict(domain=dom.kind, n=cfg.n, alpha=alpha, beta=beta, samples=cfg.samples,
               psi_scale=L.psi_scale, all_negative=lemma.all_negative, max_L=lemma.max_value,
               c_empirical=lemma.c_empirical, c_empirical_4x=big.c_empirical,
               c_ratio=big.c_empirical / lemma.c_empirical, all_negative_4x=big.all_negative,
               psd_min_relative=psd_rel, mu_order1=mu1.mu, mu_order2=mu2.mu,
               drift_cancellation=mu1.drift_cancellation,
               krylov_holds=kr.holds, krylov_slack=kr.min_slack,
               krylov_holds_boundary_only=kr_strict.holds, krylov_slack_boundary_only=kr_strict.min_slack)
    elapsed = time.perf_counter() - t0
    return row, tried, elapsed


# ---------------------------------------------------------------------------
# boundary profile and grid


def _profile_row(args):
    n, m, eps, fields_, coef = args
    dom = make_domain("ball", n)
    sol = solve_radial(RadialProblem(n, tuple([0.0] * m + [1.0]), eps=eps))
    harmonic = pluriharmonic_quadratic(n, coef) if coef else None
    out = []
    for k in fields_:
        fit = boundary_profile(sol, dom, k, harmonic=harmonic)
        out.append(dict(n=n, m=m, eps=eps, harmonic=coef, field=fit.field_name, C1=fit.C1, C2=fit.C2,
                        C4=fit.C4, M=fit.M, flagged=fit.flagged))
    return out


def run_profile(cfg):
    chunks = parallel_map(_profile_row, [(cfg.n, cfg.profile_exponent, e, cfg.profile_fields, cfg.profile_harmonic)
                                         for e in cfg.eps])
    rows = [r for chunk in chunks for r in chunk]
    return rows


def run_grid(cfg):
    """Grid solves against the radial oracle; raises :class:`ConvergenceError` on non-convergence."""
    if cfg.n != 2:
        raise ConfigError("the grid solver is limited to n = 2")
    sol = solve_radial(RadialProblem(2, cfg.grid_g, eps=cfg.grid_eps))
    rows = []
    for N in cfg.sizes:
        f = solve_grid2(cfg.grid_g, eps=cfg.grid_eps, N=N)
        rows.append(dict(N=N, h=f.h, policy_iterations=f.iterations, residual=f.residual,
                         sup_error=grid_error(f, sol), admissibility_min=grid_admissibility(f)))
    return rows

