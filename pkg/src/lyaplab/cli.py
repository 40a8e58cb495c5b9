"""Command-line interface: ``lyaplab <subcommand> [options]``.

Exit codes: 0 all enabled checks passed, 1 a check failed, 2 usage or
config error.  The resolved master seed is always printed.
"""
from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import replace

import numpy as np

from . import experiments as ex
from .config import ConfigError, config_to_dict, parse_config
from .linalg import DomainError
from .results import SCHEMA_VERSION, ResultTable, emit

SEED_ENV = "LYAPLAB_SEED"

DEFAULT_SCENARIO = {
    "lyapunov": "sl2-irreducible",
    "lln": "sl2-irreducible",
    "eigvec-lln": "lower-triangular-reducible",
    "geometry": "sl2-irreducible",
    "growth-bounds": "lower-triangular-reducible",
    "counterexample": "paper-counterexample",
}


class UsageError(Exception):
    pass


def resolve_seed(cli_seed, config_seed: int) -> tuple:
    """--seed wins, then $LYAPLAB_SEED, then the config's master_seed."""
    if cli_seed is not None:
        return int(cli_seed), "--seed"
    env = os.environ.get(SEED_ENV)
    if env not in (None, ""):
        try:
            return int(env), SEED_ENV
        except ValueError:
            raise UsageError(f"{SEED_ENV}={env!r} is not an integer") from None
    return int(config_seed), "config"


def _load(args) -> ex.ScenarioConfig:
    cfg = parse_config(args.config or DEFAULT_SCENARIO[args.command])
    seed, origin = resolve_seed(args.seed, cfg.master_seed)
    print(f"master seed: {seed} (from {origin})", file=sys.stderr)
    kw = {"master_seed": seed}
    if args.trials is not None:
        kw["trials"] = args.trials
    if args.n_max is not None:
        kw["n_max"] = args.n_max
    if getattr(args, "epsilon", None):
        kw["epsilons"] = tuple(args.epsilon)
    if getattr(args, "walk_side", None):
        kw["walk_side"] = args.walk_side
    try:
        return replace(cfg, **kw)
    except DomainError as exc:
        raise UsageError(str(exc)) from None


def _table(cfg, columns, rows, summary) -> ResultTable:
    scen = config_to_dict(cfg) if cfg is not None else {}
    return ResultTable(SCHEMA_VERSION, scen, columns, rows, summary)


def _tail_rows(reports: dict) -> list:
    rows = []
    for name, rep in reports.items():
        lo, hi = rep.wilson()
        for i, e in enumerate(rep.epsilons):
            for j, n in enumerate(rep.n):
                rows.append([name, float(e), int(n), int(rep.counts[i, j]), int(rep.totals[i, j]),
                             float(rep.freq[i, j]), float(lo[i, j]), float(hi[i, j])])
    return rows


TAIL_COLUMNS = ["event", "epsilon", "n", "count", "total", "frequency", "wilson_low", "wilson_high"]


def _tail_checks(reports: dict) -> dict:
    """Frequency at the largest evaluated n at most the engineering threshold."""
    checks = {}
    for name, rep in reports.items():
        for i in range(rep.epsilons.size):
            seen = np.flatnonzero(rep.totals[i] > 0)
            if seen.size:
                checks[f"{name}_eps{rep.epsilons[i]:.4g}_freq_le_{ex.TAIL_THRESHOLD}"] = bool(
                    rep.freq[i, seen[-1]] <= ex.TAIL_THRESHOLD)
    return checks


# ---------------------------------------------------------------- subcommands


def cmd_lemma_check(args):
    seed, origin = resolve_seed(args.seed, 0)
    print(f"master seed: {seed} (from {origin})", file=sys.stderr)
    rep = ex.run_lemma_fuzz(args.count, dims=tuple(args.dims), seed=seed,
                            include_corpus=not args.no_corpus)
    rows = [[c, rep.evaluated[c], rep.violations[c]] for c in ex.FUZZ_CHECKS]
    checks = {f"{c}_zero_violations": rep.violations[c] == 0 for c in ex.FUZZ_CHECKS}
    summary = {"count_per_dim": args.count, "dims": list(args.dims), "gap_lemma_applicable": rep.applicable,
               "examples": [{k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in e.items()}
                            for e in rep.examples],
               "checks": checks}
    return _table(None, ["check", "evaluated", "violations"], rows, summary), checks


def cmd_lyapunov(args):
    cfg = _load(args)
    recs = ex.simulate(cfg, workers=args.workers)
    ok = ex._ok(recs)
    if not ok:
        raise DomainError("every trial failed")
    spec = ex.spectrum_from_records(ok)
    lam1, se1 = ex.pooled_lambda1(ok)
    svd_rates = np.mean([r.log_sv[-1] / r.n[-1] for r in ok], axis=0)
    combined = max(3.0 * math.hypot(spec.stderr[0], se1), 1e-9)
    checks = {
        "qr_vs_norm_lambda1_within_3se": abs(spec.lam[0] - lam1) <= combined,
        "qr_vs_svd_within_0.01": bool(np.max(np.abs(spec.lam - svd_rates)) <= 0.01),
    }
    rows = [[k + 1, float(spec.lam[k]), float(spec.stderr[k]), float(svd_rates[k])] for k in range(cfg.dim)]
    summary = {"lambda": spec.lam, "stderr": spec.stderr, "gap_index": spec.gap_index,
               "lambda1_from_norm": lam1, "lambda1_norm_stderr": se1,
               "failed_trials": ex._failures(recs), "checks": checks}
    return _table(cfg, ["k", "lambda_qr", "stderr", "lambda_svd"], rows, summary), checks


def cmd_lln(args):
    cfg = _load(args)
    r = ex.run_lln(cfg, workers=args.workers)
    rows = [[int(n), r.rho_rate["mean"][j], r.rho_rate["std"][j], r.rho_rate["min"][j], r.rho_rate["max"][j],
             r.norm_rate["mean"][j], r.l1_deviation[j], r.max_gap[j]] for j, n in enumerate(r.n)]
    checks = {f"{k}_violations_zero": v == 0 for k, v in r.violations.items()}
    summary = {"lambda1_hat": r.lambda1_hat, "lambda1_stderr": r.lambda1_stderr,
               "violations": r.violations, "failed_trials": r.failed, "checks": checks}
    cols = ["n", "rho_rate_mean", "rho_rate_std", "rho_rate_min", "rho_rate_max",
            "norm_rate_mean", "l1_deviation", "max_rho_norm_gap"]
    return _table(cfg, cols, rows, summary), checks


def cmd_eigvec_lln(args):
    cfg = _load(args)
    r = ex.run_eigen_vector_lln(cfg, workers=args.workers)
    d = cfg.dim
    cols = ["n"] + [f"rate_mean_{k + 1}" for k in range(d)] + [f"rate_std_{k + 1}" for k in range(d)]
    rows = [[int(n), *r.rate_mean[j].tolist(), *r.rate_std[j].tolist()] for j, n in enumerate(r.n)]
    checks = {f"{k}_violations_zero": v == 0 for k, v in r.violations.items()}
    checks["det_identity_within_1e-9"] = r.det_identity_error <= 1e-9
    summary = {"lambda": r.spectrum.lam, "stderr": r.spectrum.stderr, "gap_index": r.spectrum.gap_index,
               "final_rate_mean": r.rate_mean[-1], "spectrum_diff": r.spectrum_diff,
               "det_identity_error": r.det_identity_error, "failed_trials": r.failed, "checks": checks}
    return _table(cfg, cols, rows, summary), checks


def cmd_geometry(args):
    cfg = _load(args)
    r = ex.run_geometry_decay(cfg, workers=args.workers)
    if r.warning:
        print(f"warning: {r.warning}", file=sys.stderr)
    checks = _tail_checks(r.reports)
    summary = {"lambda": r.spectrum.lam, "gap_index": r.spectrum.gap_index, "epsilons": r.epsilons,
               "degenerate_skipped": r.degenerate_skipped, "warning": r.warning,
               "threshold_note": f"frequency threshold {ex.TAIL_THRESHOLD} is an engineering choice",
               "failed_trials": r.failed, "checks": checks}
    return _table(cfg, TAIL_COLUMNS, _tail_rows(r.reports), summary), checks


def cmd_growth(args):
    cfg = _load(args)
    r = ex.run_growth_bounds(cfg, workers=args.workers)
    checks = _tail_checks(r.reports)
    summary = {"lambda1_hat": r.lambda1_hat, "epsilons": r.epsilons,
               "threshold_note": f"frequency threshold {ex.TAIL_THRESHOLD} is an engineering choice",
               "failed_trials": r.failed, "checks": checks}
    return _table(cfg, TAIL_COLUMNS, _tail_rows(r.reports), summary), checks


def cmd_counterexample(args):
    cfg = _load(args)
    r = ex.run_counterexample(cfg.n_max, cfg.master_seed)
    rec = r.record
    rows = np.column_stack([rec.n, rec.log_rho / rec.n, rec.log_norm / rec.n, rec.coset_label])
    rows = [[int(a), float(b), float(c), int(d)] for a, b, c, d in rows]
    return (_table(cfg, ["n", "rho_rate", "norm_rate", "coset_code"], rows, r.summary), r.checks)


COMMANDS = {
    "lemma-check": cmd_lemma_check,
    "lyapunov": cmd_lyapunov,
    "lln": cmd_lln,
    "eigvec-lln": cmd_eigvec_lln,
    "geometry": cmd_geometry,
    "growth-bounds": cmd_growth,
    "counterexample": cmd_counterexample,
}


def _positive(s: str) -> int:
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lyaplab", description="Random matrix product laboratory")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="built-in scenario id or JSON config path")
        s.add_argument("--seed", type=int, help=f"master seed (overrides ${SEED_ENV} and the config)")
        s.add_argument("--trials", type=_positive)
        s.add_argument("--n-max", type=_positive)
        s.add_argument("--out", help="output file (default: stdout)")
        s.add_argument("--format", choices=("csv", "json"), default="csv")
        s.add_argument("--workers", type=_positive, default=1)
        if name in ("geometry", "growth-bounds"):
            s.add_argument("--epsilon", type=float, action="append", help="repeatable")
        if name == "geometry":
            s.add_argument("--walk-side", choices=("left", "right"))
        if name == "lemma-check":
            s.add_argument("--count", type=int, default=100_000, help="random matrices per dimension")
            s.add_argument("--dims", type=_positive, nargs="+", default=[2, 3, 5])
            s.add_argument("--no-corpus", action="store_true", help="skip the a/sigma/omega word corpus")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    try:
        table, checks = COMMANDS[args.command](args)
    except (UsageError, ConfigError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        text = emit(table, args.format, args.out)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.out is None:
        sys.stdout.write(text)
    failed = [k for k, v in checks.items() if not v]
    for k, v in checks.items():
        print(f"{'PASS' if v else 'FAIL'} {k}", file=sys.stderr)
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
