"""Command-line front end: ``hybridfilter {simulate,filter,experiment,bench,plot}``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import _core
from .config import ConfigError, ExperimentConfig
from .experiment import bench_dimension, qekf_params, run_experiment, write_timing_csv, TIMING_FILE
from .qekf import initial_state, run_qekf, write_qekf_csv
from .sme import run_sme, write_sme_csv
from .truth import MeasurementRecord, read_record_csv, simulate_truth, write_truth_csv

log = logging.getLogger("hybridfilter")


def _load_config(args) -> ExperimentConfig:
    config = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    return config.with_overrides(
        seed=args.seed,
        out=args.out,
        workers=args.workers,
        n_prime=args.n_prime,
        s_matrix=args.s_matrix,
    )


def cmd_simulate(args, config):
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    count = args.count or config.N
    for i in range(count):
        traj = simulate_truth(config.qubit, config.ou, config.qubit_state(), config.dt, config.T,
                              seed=config.seed, index=i)
        path = write_truth_csv(traj, out / f"truth_{i:04d}.csv")
        traj.record.save(out / f"record_{i:04d}.npz")
        log.info("wrote %s", path)
    config.save(out / "manifest.txt", header=f"simulate: {count} trajectories")
    return 0


def _read_record(path: str, dt: float) -> MeasurementRecord:
    if path.endswith(".npz"):
        return MeasurementRecord.load(path)
    return read_record_csv(path, dt=dt)


def cmd_filter(args, config):
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.record:
        record = _read_record(args.record, config.dt)
    else:
        record = simulate_truth(config.qubit, config.ou, config.qubit_state(), config.dt, config.T,
                                seed=config.seed, index=0).record
    stem = Path(args.record).stem if args.record else "trajectory_0000"
    if args.method in ("sme", "both"):
        res = run_sme(record, config.enlarged_model(), config.enlarged_state(), config.analog(),
                      stride=config.stride)
        path = write_sme_csv(res, out / f"{stem}_sme.csv")
        print(f"SME  -> {path}  ({res.wall_time:.3f} s, n'={config.n_prime})")
    if args.method in ("qekf", "both"):
        res = run_qekf(record, qekf_params(config),
                       initial_state(config.rho1, config.coherent_amplitude), stride=config.stride)
        path = write_qekf_csv(res, out / f"{stem}_qekf.csv")
        print(f"QEKF -> {path}  ({res.wall_time:.3f} s, S={config.s_matrix})")
    return 0


def cmd_experiment(args, config):
    metrics = run_experiment(config, bench=not args.no_bench)
    print(f"{metrics.n} trajectories ({len(metrics.failures)} failed) -> {config.out}")
    for f in ("sme", "qekf"):
        print(f"  RMSE of {f.upper()} q estimate vs truth ensemble mean: {metrics.rmse_q[f]:.4f}")
    for index, step, msg in metrics.failures:
        print(f"  trajectory {index} aborted at step {step}: {msg}", file=sys.stderr)
    return 1 if metrics.failures else 0


def cmd_bench(args, config):
    n_primes = [int(s) for s in args.n_primes.split(",")] if args.n_primes else list(config.bench_n_primes)
    rows = bench_dimension(config, n_primes, repeats=args.repeats)
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    write_timing_csv(rows, out / TIMING_FILE)
    print(f"backend: {_core.BACKEND}")
    print(f"{'n_prime':>7} {'SME [s]':>10} {'QEKF [s]':>10}")
    for r in rows:
        print(f"{r['n_prime']:>7} {r['sme_seconds']:>10.4f} {r['qekf_seconds']:>10.4f}")
    return 0


def cmd_plot(args, config):
    from .plots import emit_plots

    for path in emit_plots(config.out):
        print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="key = value configuration file")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument("--workers", type=int, help="worker processes for ensembles")
    common.add_argument("--n-prime", type=int, dest="n_prime", help="cavity Fock cutoff")
    common.add_argument("--s-matrix", choices=["paper", "derived"], dest="s_matrix",
                        help="QEKF cross-correlation vector")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="hybridfilter", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="generate truth trajectories and records")
    p.add_argument("--count", type=int, help="number of trajectories (default: N from config)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("filter", parents=[common], help="run filters on one measurement record")
    p.add_argument("--method", choices=["sme", "qekf", "both"], default="both")
    p.add_argument("--record", metavar="PATH", help="truth CSV or .npz record (default: simulate one)")
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("experiment", parents=[common], help="full Monte Carlo experiment")
    p.add_argument("--no-bench", action="store_true", help="skip the timing sweep")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("bench", parents=[common], help="SME vs QEKF runtime over cavity cutoffs")
    p.add_argument("--n-primes", metavar="LIST", help="comma-separated cutoffs")
    p.add_argument("--repeats", type=int)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("plot", parents=[common], help="render experiment CSVs to SVG")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = _load_config(args)
    except (ConfigError, OSError) as exc:
        print(f"hybridfilter: {exc}", file=sys.stderr)
        return 2
    try:
        return args.func(args, config)
    except _core.IntegrationError as exc:
        print(f"hybridfilter: integration aborted at {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
