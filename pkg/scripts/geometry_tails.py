"""Tail frequencies of the projective events versus n for several epsilons.

Runs the SL2 scenario on the left walk (attracting point vs repelling
hyperplane, contraction of a fixed line) and on the right walk
(stabilization of the attracting point) and writes one CSV per walk side.
Usage:

    python scripts/geometry_tails.py --trials 1000 --n-max 200 --eps 0.2 0.45 0.9
"""
import argparse
from dataclasses import replace

from lyaplab.cli import TAIL_COLUMNS, _tail_rows
from lyaplab.config import config_to_dict
from lyaplab.experiments import run_geometry_decay
from lyaplab.results import SCHEMA_VERSION, ResultTable, emit
from lyaplab.scenarios import builtin


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--n-max", type=int, default=200)
    p.add_argument("--eps", type=float, nargs="+", default=[0.2, 0.45, 0.9])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    args = p.parse_args()

    base = replace(builtin("sl2-irreducible", seed=args.seed), trials=args.trials, n_max=args.n_max,
                   epsilons=tuple(args.eps), extra_checkpoints=())
    for side, cfg in (("left", base), ("right", replace(base, n_max=2 * args.n_max, walk_side="right"))):
        res = run_geometry_decay(cfg, workers=args.workers)
        table = ResultTable(SCHEMA_VERSION, config_to_dict(cfg), TAIL_COLUMNS, _tail_rows(res.reports),
                            {"lambda": res.spectrum.lam, "warning": res.warning})
        emit(table, "csv", f"geometry_{side}.csv")
        print(f"{side} walk: lambda_hat={res.spectrum.lam}")
        for name, rep in res.reports.items():
            for i, e in enumerate(rep.epsilons):
                print(f"  {name:9s} eps={e:.2f} " + " ".join(
                    f"n={n}:{f:.3f}" for n, f, t in zip(rep.n, rep.freq[i], rep.totals[i]) if t and n % 10 == 0))


if __name__ == "__main__":
    main()
