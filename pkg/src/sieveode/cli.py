"""Command line entry point: simulate, estimate, sweep, gap-probe.

Exit codes: 0 success, 1 config or input error, 2 degenerate optimizer winner.
"""

from __future__ import annotations

import argparse
import logging
import sys

from . import report
from .errors import DegenerateWinnerError
from .harness import RunConfig, gap_medians, load_config, run_consistency_sweep, run_estimation, run_gap_probe, simulate_dataset
from .model import get_model, read_dataset_csv, write_dataset_csv


def _floats(text):
    return tuple(float(v) for v in text.split(",") if v.strip())


def _ints(text):
    return tuple(int(v) for v in text.split(",") if v.strip())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sieveode", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="simulate a model and write noisy observations as CSV")
    sim.add_argument("--model", required=True)
    sim.add_argument("--theta", type=_floats, required=True)
    sim.add_argument("--xi", type=_floats, required=True)
    sim.add_argument("--t-end", type=float, required=True)
    sim.add_argument("--n", type=int, required=True)
    sim.add_argument("--sigma", type=float, default=0.0)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--measured", type=_ints, default=None,
                     help="0-based indices of the observed states (default: the model's default)")
    sim.add_argument("--out", required=True)

    est = sub.add_parser("estimate", help="estimate theta and xi from a data CSV")
    est.add_argument("--data", required=True)
    est.add_argument("--model", required=True)
    est.add_argument("--measured", type=_ints, required=True, help="0-based indices of the CSV columns' states")
    est.add_argument("--k", type=int, default=None)
    est.add_argument("--delta", type=float, default=None)
    est.add_argument("--grid", type=int, default=1001)
    est.add_argument("--seed", type=int, default=0)
    est.add_argument("--starts", type=int, default=5)
    est.add_argument("--max-evals", type=int, default=5000)
    est.add_argument("--bandwidth", type=float, default=None)
    est.add_argument("--out", required=True)

    sweep = sub.add_parser("sweep", help="Monte-Carlo consistency sweep over sample sizes")
    sweep.add_argument("--config", required=True)
    sweep.add_argument("--out-csv", required=True)
    sweep.add_argument("--out-svg", default=None)

    gap = sub.add_parser("gap-probe", help="sup |M_n - M| over random sieve elements")
    gap.add_argument("--config", required=True)
    gap.add_argument("--candidates", type=int, default=50)
    gap.add_argument("--out-csv", required=True)
    return parser


def _simulate(args):
    model = get_model(args.model, args.measured)
    config = RunConfig(model=args.model, theta=args.theta, xi=args.xi, t_end=args.t_end, n=args.n,
                       sigma=args.sigma, seed=args.seed, measured=model.measured)
    _, data = simulate_dataset(config, model)
    write_dataset_csv(data, args.out)


def _estimate(args):
    dataset = read_dataset_csv(args.data)
    config = RunConfig(model=args.model, measured=args.measured, n=dataset.n, grid=args.grid,
                       k=args.k, delta=args.delta, seed=args.seed, starts=args.starts,
                       max_evals=args.max_evals, bandwidth=args.bandwidth, data=args.data)
    est, _ = run_estimation(config, dataset)
    report.write_estimate_json(est, args.out)
    print(f"theta_hat = {est.theta.tolist()}")
    print(f"xi_hat    = {est.xi.tolist()}")
    print(f"M_n       = {est.mn_value:.6g} (converged={est.converged}, evals={est.evals})")


def _sweep(args):
    config = load_config(args.config)
    result = run_consistency_sweep(config)
    report.write_sweep_csv(result.rows, args.out_csv)
    if args.out_svg:
        report.write_sweep_svg(result, args.out_svg)
    for n, med in result.medians().items():
        print(f"n={n:6d}  median theta_err={med:.6g}")


def _gap_probe(args):
    config = load_config(args.config)
    rows = run_gap_probe(config, candidate_count=args.candidates, reps=config.reps)
    report.write_gap_csv(rows, args.out_csv)
    for n, med in gap_medians(rows).items():
        print(f"n={n:6d}  median max|M_n - M|={med:.6g}")


COMMANDS = {"simulate": _simulate, "estimate": _estimate, "sweep": _sweep, "gap-probe": _gap_probe}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except DegenerateWinnerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
