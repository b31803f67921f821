"""Monte Carlo experiments: truth simulation feeding both filters, plus timing sweeps."""
from __future__ import annotations

import csv
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, _core
from ._core import IntegrationError
from .config import ExperimentConfig
from .qekf import QekfParams, initial_state, run_qekf
from .sme import run_sme
from .truth import simulate_truth

__all__ = [
    "Metrics",
    "TrajectoryResult",
    "run_trajectory",
    "run_ensemble",
    "run_experiment",
    "bench_dimension",
    "write_timing_csv",
    "FIGURE_FILES",
]

log = logging.getLogger(__name__)

SOURCES = ("truth", "sme", "qekf")
OBSERVABLES = ("sx", "sy", "sz", "q")
FIGURE_FILES = {
    "sx": "fig4_sigma_x.csv",
    "sy": "fig5_sigma_y.csv",
    "sz": "fig6_sigma_z.csv",
    "q": "fig7_q.csv",
}
TIMING_FILE = "fig8_timing.csv"


def qekf_params(config: ExperimentConfig) -> QekfParams:
    analog = config.analog()
    return QekfParams(config.k1, analog.k, analog.alpha, config.lam, config.mu, config.s_matrix)


@dataclass
class TrajectoryResult:
    """Series for one trajectory on the output grid; ``series[source][observable]``."""

    index: int
    times: np.ndarray
    series: dict
    rho_hat: np.ndarray
    wall_time: dict


def run_trajectory(config: ExperimentConfig, index: int, *, keep_rho: bool = False) -> TrajectoryResult:
    """Simulate trajectory ``index`` and run both filters on its record."""
    stride = config.stride
    truth = simulate_truth(config.qubit, config.ou, config.qubit_state(), config.dt, config.T,
                           seed=config.seed, index=index)
    analog = config.analog()
    sme = run_sme(truth.record, config.enlarged_model(), config.enlarged_state(), analog, stride=stride)
    qekf = run_qekf(truth.record, qekf_params(config),
                    initial_state(config.rho1, config.coherent_amplitude), stride=stride)
    bloch = truth.bloch()[::stride]
    series = {
        "truth": {"sx": bloch[:, 0], "sy": bloch[:, 1], "sz": bloch[:, 2], "q": truth.q_path[::stride]},
        "sme": {k: sme.estimates[k] for k in OBSERVABLES},
        "qekf": {"sx": qekf.x_hat[:, 0], "sy": qekf.x_hat[:, 1], "sz": qekf.x_hat[:, 2], "q": qekf.q_hat},
    }
    return TrajectoryResult(
        index=index,
        times=sme.times,
        series=series,
        rho_hat=sme.rho if keep_rho else None,
        wall_time={"sme": sme.wall_time, "qekf": qekf.wall_time},
    )


def _task(args):
    config, index, keep_rho = args
    try:
        return run_trajectory(config, index, keep_rho=keep_rho)
    except IntegrationError as exc:
        return exc.__class__.__name__, index, exc.step, str(exc)


@dataclass
class Metrics:
    """Ensemble summary on the output grid.

    ``mean[source][obs]`` and ``se[source][obs]`` are per-time ensemble means and
    standard errors; ``rmse_q[filter]`` compares the filter's ensemble-mean
    disturbance estimate with the truth ensemble mean of ``q``.
    """

    times: np.ndarray
    n: int
    mean: dict
    se: dict
    std: dict
    rmse_q: dict
    wall_time: dict
    rho_hat_mean: np.ndarray | None = None
    failures: list = field(default_factory=list)


def run_ensemble(config: ExperimentConfig, *, workers: int | None = None,
                 average_rho: bool = False) -> Metrics:
    """Run ``config.N`` trajectories and aggregate them in index order.

    Failed trajectories are logged and listed in ``Metrics.failures`` as
    ``(index, step, message)``; the remaining ones are still aggregated.
    """
    workers = workers or config.workers
    tasks = [(config, i, average_rho) for i in range(config.N)]
    pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    results = pool.map(_task, tasks) if pool else map(_task, tasks)

    ok, failures = [], []
    rho_sum = None
    try:
        for res in results:
            if isinstance(res, TrajectoryResult):
                if average_rho:
                    # fold in and drop: full state histories are large
                    rho_sum = res.rho_hat.copy() if rho_sum is None else rho_sum + res.rho_hat
                    res.rho_hat = None
                ok.append(res)
            else:
                _, index, step, msg = res
                log.error("trajectory %d aborted at step %d: %s", index, step, msg)
                failures.append((index, step, msg))
    finally:
        if pool:
            pool.shutdown()
    if not ok:
        raise IntegrationError(f"all {config.N} trajectories failed; first: {failures[0][2]}",
                               failures[0][1])

    n = len(ok)
    mean, se, std = {}, {}, {}
    for src in SOURCES:
        mean[src], se[src], std[src] = {}, {}, {}
        for obs in OBSERVABLES:
            stack = np.array([r.series[src][obs] for r in ok])
            mean[src][obs] = stack.mean(axis=0)
            std[src][obs] = stack.std(axis=0, ddof=1) if n > 1 else np.zeros(stack.shape[1])
            se[src][obs] = std[src][obs] / np.sqrt(n)
    rmse = {
        f: float(np.sqrt(np.mean((mean[f]["q"] - mean["truth"]["q"]) ** 2))) for f in ("sme", "qekf")
    }
    rho_mean = rho_sum / n if average_rho else None
    return Metrics(
        times=ok[0].times,
        n=n,
        mean=mean,
        se=se,
        std=std,
        rmse_q=rmse,
        wall_time={f: np.array([r.wall_time[f] for r in ok]) for f in ("sme", "qekf")},
        rho_hat_mean=rho_mean,
        failures=failures,
    )


def _write_figure_csv(metrics: Metrics, obs: str, path: Path):
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", *(f"{s}_{k}" for s in SOURCES for k in ("mean", "se"))])
        for k, t in enumerate(metrics.times):
            row = [repr(float(t))]
            for s in SOURCES:
                row += [repr(float(metrics.mean[s][obs][k])), repr(float(metrics.se[s][obs][k]))]
            w.writerow(row)


def manifest_header(config: ExperimentConfig) -> str:
    return (f"hybridfilter {__version__} experiment manifest\n"
            f"kernel backend: {_core.BACKEND}\nmaster seed: {config.seed}\n"
            "re-run with: hybridfilter experiment --config <this file>")


def run_experiment(config: ExperimentConfig, out_dir=None, *, workers: int | None = None,
                   bench: bool = True) -> Metrics:
    """Run the ensemble and write one CSV per figure plus ``manifest.txt``.

    Figure CSVs depend only on the configuration and seed; the timing table
    (``fig8_timing.csv``) is the only nondeterministic output.
    """
    out = Path(out_dir or config.out)
    out.mkdir(parents=True, exist_ok=True)
    config.save(out / "manifest.txt", header=manifest_header(config))
    metrics = run_ensemble(config, workers=workers)
    for obs, name in FIGURE_FILES.items():
        _write_figure_csv(metrics, obs, out / name)
    if metrics.failures:
        with (out / "failures.csv").open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["trajectory", "step", "message"])
            w.writerows(metrics.failures)
    with (out / "summary.txt").open("w") as fh:
        fh.write(f"trajectories: {metrics.n} ok, {len(metrics.failures)} failed\n")
        for f in ("sme", "qekf"):
            fh.write(f"rmse_q_{f}: {metrics.rmse_q[f]!r}\n")
    if bench and config.bench_n_primes:
        write_timing_csv(bench_dimension(config, config.bench_n_primes), out / TIMING_FILE)
    return metrics


def bench_dimension(config: ExperimentConfig, n_primes, *, repeats: int | None = None,
                    warmup: int = 1, backend: str | None = None, min_sample: float = 0.05) -> list[dict]:
    """Mean wall-clock of one full SME pass and one QEKF pass per cavity cutoff.

    All passes consume the same record (trajectory 0). Only the filter loops
    are timed; ``warmup`` untimed passes precede the timed ones, and cutoffs are
    interleaved across repeats so drift in machine load is shared. Each QEKF
    sample averages enough back-to-back passes to last about ``min_sample``
    seconds.
    """
    repeats = repeats or config.bench_repeats
    truth = simulate_truth(config.qubit, config.ou, config.qubit_state(), config.dt, config.T,
                           seed=config.seed, index=0)
    params = qekf_params(config)
    x0 = initial_state(config.rho1, config.coherent_amplitude)
    # timing only: small cutoffs may truncate the coherent state noticeably
    setups = {n: (config.enlarged_model(n), config.enlarged_state(n, eps=1.0)) for n in n_primes}
    stride = len(truth.record)

    def one_pass(n, batch=1):
        model, rho0 = setups[n]
        s = run_sme(truth.record, model, rho0, stride=stride, observables={}, backend=backend)
        q = sum(run_qekf(truth.record, params, x0, stride=stride, backend=backend).wall_time
                for _ in range(batch))
        return s.wall_time, q / batch

    times = {n: ([], []) for n in n_primes}
    for n in n_primes:
        for _ in range(warmup):
            one_pass(n)
    # a QEKF pass takes milliseconds; average back-to-back passes so timer jitter stays small
    single = run_qekf(truth.record, params, x0, stride=stride, backend=backend).wall_time
    batch = max(1, min(100, int(min_sample / max(single, 1e-9))))
    for _ in range(repeats):
        for n in n_primes:
            s, q = one_pass(n, batch)
            times[n][0].append(s)
            times[n][1].append(q)
    return [
        {"n_prime": n, "sme_seconds": float(np.mean(times[n][0])),
         "qekf_seconds": float(np.mean(times[n][1])),
         "sme_std": float(np.std(times[n][0])), "qekf_std": float(np.std(times[n][1]))}
        for n in n_primes
    ]


def write_timing_csv(rows, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["n_prime", "sme_seconds", "qekf_seconds", "sme_std", "qekf_std"])
        w.writeheader()
        w.writerows(rows)
    return path
