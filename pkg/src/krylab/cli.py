"""Command-line driver: ``krylab {identities,barrier,sweep,profile,grid}``."""

from __future__ import annotations

import argparse
import logging
import sys
import time

from .barrier import BarrierError
from .report import ReportError, emit_report
from .solver import ConvergenceError, SolverError
from .suites import (ConfigError, SweepConfig, load_config, run_barrier, run_grid, run_identity_suite,
                     run_profile, run_sweep, weakly_interior_check)

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_CONVERGENCE = 0, 2, 3, 4

log = logging.getLogger("krylab")

SCHEMAS = {
    "identities": (
        "identities.csv: instance, n, operator, degree, commutation_first, commutation_rel, quadratic_rel,\n"
        "  concavity_gap, first_variation, passed\n"
        "holomorphic.csv: instance, n, residual, passed"),
    "barrier": (
        "barrier.csv: domain, n, alpha, beta, samples, psi_scale, all_negative, max_L, c_empirical,\n"
        "  c_empirical_4x, c_ratio, all_negative_4x, psd_min_relative, mu_order1, mu_order2,\n"
        "  drift_cancellation, krylov_holds, krylov_slack, krylov_holds_boundary_only,\n"
        "  krylov_slack_boundary_only\n"
        "alpha_search.csv: alpha, max_L"),
    "sweep": (
        "sweep_m<m>.csv: n, g, eps, grad_sup, hess_sup, hess_sup_delta_<d>..., M\n"
        "sweep_summary.csv: n, g, hess_spread, M_spread, C_delta_<d>...\n"
        "sweep_interior.csv: g, eps, delta, in_fit, interior, bound, excess, holds"),
    "profile": "profile.csv: n, m, eps, harmonic, field, C1, C2, C4, M, flagged",
    "grid": "grid.csv: N, h, policy_iterations, residual, sup_error, admissibility_min",
}

COMMON = """Every CSV row starts with tool_version, seed, config_hash.
Exit codes: 0 ok, 2 check failure, 3 configuration error, 4 solver non-convergence.
KRYLAB_THREADS caps the worker pool (default 1)."""


def _parser():
    p = argparse.ArgumentParser(prog="krylab", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter, epilog=COMMON)
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("identities", "barrier", "sweep", "profile", "grid"):
        s = sub.add_parser(name, formatter_class=argparse.RawDescriptionHelpFormatter,
                           epilog=SCHEMAS[name] + "\n\n" + COMMON)
        s.add_argument("--config", metavar="PATH", help="key = value file with [section] headers")
        s.add_argument("--seed", type=int, help="unsigned 64-bit seed")
        s.add_argument("--out", metavar="DIR", help="output directory")
        s.add_argument("--samples", type=int, metavar="N", help="sample size (barrier) or instance count (identities)")
        s.add_argument("--alpha", metavar="{auto|value}")
        s.add_argument("--beta", metavar="{auto|value}")
        s.add_argument("-v", "--verbose", action="store_true")
    return p


def _config(args):
    cfg = load_config(args.config) if args.config else SweepConfig()
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        cfg.seed = args.seed
    if args.out is not None:
        cfg.out = args.out
    if args.samples is not None:
        if args.command == "identities":
            cfg.instances = args.samples
        else:
            cfg.samples = args.samples
    if args.alpha is not None:
        cfg.alpha = args.alpha
    if args.beta is not None:
        cfg.beta = args.beta
    return cfg.validate()


def _identities(cfg):
    rows, holo = run_identity_suite(cfg)
    h = cfg.digest()
    emit_report(rows, cfg.out, "identities", cfg.seed, h)
    emit_report(holo, cfg.out, "holomorphic", cfg.seed, h)
    failed = sum(not r["passed"] for r in rows) + sum(not r["passed"] for r in holo)
    log.info("identities: %d/%d, holomorphic: %d/%d passed", len(rows) - sum(not r["passed"] for r in rows),
             len(rows), len(holo) - sum(not r["passed"] for r in holo), len(holo))
    return EXIT_CHECK if failed else EXIT_OK


def _barrier(cfg):
    row, tried, elapsed = run_barrier(cfg)
    h = cfg.digest()
    emit_report([row], cfg.out, "barrier", cfg.seed, h)
    if tried:
        emit_report([dict(alpha=a, max_L=v) for a, v in tried], cfg.out, "alpha_search", cfg.seed, h)
    log.info("barrier: alpha=%g c=%.4g (4x: %.4g) krylov slack %.3g, %.1fs", row["alpha"], row["c_empirical"],
             row["c_empirical_4x"], row["krylov_slack"], elapsed)
    ok = row["all_negative"] and row["all_negative_4x"] and row["krylov_holds"]
    return EXIT_OK if ok else EXIT_CHECK


def _sweep(cfg):
    h = cfg.digest()
    summaries, interior = [], []
    for m in cfg.exponents:
        g = tuple([0.0] * m + [1.0])
        rows, summary = run_sweep(cfg, g)
        emit_report(rows, cfg.out, f"sweep_m{m}", cfg.seed, h,
                    chart=("eps", ["hess_sup", "M"], f"sup |D^2 u| and M, g = t^{m}", True))
        summaries.append(summary)
        interior.extend(dict(g=summary["g"], **r) for r in weakly_interior_check(cfg, g, summary))
    emit_report(summaries, cfg.out, "sweep_summary", cfg.seed, h)
    emit_report(interior, cfg.out, "sweep_interior", cfg.seed, h)
    return EXIT_OK if all(r["holds"] for r in interior if r["in_fit"]) else EXIT_CHECK


def _profile(cfg):
    rows = run_profile(cfg)
    emit_report(rows, cfg.out, "profile", cfg.seed, cfg.digest())
    return EXIT_OK


def _grid(cfg):
    rows = run_grid(cfg)
    emit_report(rows, cfg.out, "grid", cfg.seed, cfg.digest(),
                chart=("N", ["sup_error"], "grid vs radial sup error", False))
    return EXIT_OK


COMMANDS = {"identities": _identities, "barrier": _barrier, "sweep": _sweep, "profile": _profile, "grid": _grid}


def main(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    t0 = time.perf_counter()
    try:
        cfg = _config(args)
        code = COMMANDS[args.command](cfg)
    except (ConfigError, BarrierError, SolverError) as exc:
        print(f"krylab: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConvergenceError as exc:
        print(f"krylab: solver did not converge: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except ReportError as exc:
        print(f"krylab: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    log.info("%s finished in %.1fs", args.command, time.perf_counter() - t0)
    return code


if __name__ == "__main__":
    sys.exit(main())
