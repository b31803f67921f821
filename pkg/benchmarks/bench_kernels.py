"""Compare the compiled and pure-Python integration kernels.

    python benchmarks/bench_kernels.py [--steps 2000] [--n-primes 2,4,6,8] [--repeats 3]

Both backends run the same measurement record; the table lists seconds per
1000 steps and the largest state difference between them.
"""
import argparse
import time

import numpy as np

from hybridfilter import _core
from hybridfilter.config import reference_config
from hybridfilter.experiment import qekf_params
from hybridfilter.qekf import initial_state, run_qekf
from hybridfilter.sme import run_sme
from hybridfilter.truth import MeasurementRecord, simulate_truth


def best_of(fn, repeats):
    best, out = np.inf, None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=2000)
    ap.add_argument("--n-primes", default="2,4,6,8")
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args(argv)

    backends = _core.available_backends()
    if "compiled" not in backends:
        print("compiled kernels not built; only the python backend is available")
    config = reference_config()
    truth = simulate_truth(config.qubit, config.ou, config.qubit_state(), config.dt, config.T, seed=config.seed)
    record = MeasurementRecord(config.dt, truth.record.increments[: args.steps])
    per_k = 1000 / len(record)

    print(f"{'filter':<8}{'n_prime':>8}" + "".join(f"{b + ' [s/1k]':>18}" for b in backends)
          + f"{'speedup':>10}{'max diff':>12}")
    for n in (int(s) for s in args.n_primes.split(",")):
        model, rho0 = config.enlarged_model(n), config.enlarged_state(n, eps=1.0)
        res = {b: best_of(lambda b=b: run_sme(record, model, rho0, stride=len(record),
                                              observables={}, backend=b), args.repeats)
               for b in backends}
        _row("SME", n, res, lambda r: r.rho, per_k)

    params = qekf_params(config)
    x0 = initial_state(config.rho1, config.coherent_amplitude)
    res = {b: best_of(lambda b=b: run_qekf(record, params, x0, stride=len(record), backend=b), args.repeats)
           for b in backends}
    _row("QEKF", "-", res, lambda r: r.x_hat, per_k)


def _row(name, n, res, state, per_k):
    cells = "".join(f"{res[b][0] * per_k:>18.4f}" for b in res)
    if len(res) == 2:
        speed = res["python"][0] / res["compiled"][0]
        diff = np.abs(state(res["python"][1]) - state(res["compiled"][1])).max()
        cells += f"{speed:>9.1f}x{diff:>12.1e}"
    print(f"{name:<8}{n:>8}" + cells)


if __name__ == "__main__":
    main()
