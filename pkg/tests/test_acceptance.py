"""End-to-end acceptance checks on the default experiment configuration.

Each test prints one ``criterion N: PASS|FAIL`` line; the lines are repeated
in the terminal summary.
"""
import math
import time

import numpy as np
import pytest

from hybridfilter.config import reference_config
from hybridfilter.experiment import FIGURE_FILES, bench_dimension, qekf_params, run_ensemble, run_experiment
from hybridfilter.model import OUProcess, analog_cavity
from hybridfilter.operators import (
    DensityMatrixError,
    check_density_matrix,
    commutator,
    identity,
    pauli,
    trace_distance,
)
from hybridfilter.qekf import drift_f, initial_state, jacobian_F, run_qekf
from hybridfilter.sme import run_sme, unconditional_evolution
from hybridfilter.truth import simulate_truth

from conftest import random_density, report

pytestmark = pytest.mark.slow

REF = reference_config()
N_LARGE = 200


@pytest.fixture(scope="module")
def large_ensemble():
    t0 = time.perf_counter()
    metrics = run_ensemble(REF.with_overrides(N=N_LARGE), average_rho=True)
    metrics.elapsed = time.perf_counter() - t0
    return metrics


def _grid_index(metrics, t):
    return int(np.argmin(np.abs(metrics.times - t)))


def test_criterion_1_analog_mapping():
    analog = analog_cavity(OUProcess(0.25, 1 / (2 * math.sqrt(2))), 8)
    ok = analog.k == 0.5 and analog.alpha == 1.0
    report(1, ok, f"k={analog.k!r} alpha={analog.alpha!r}")
    assert ok


def test_criterion_2_sigma_z_decay(large_ensemble):
    m = large_ensemble
    assert m.n >= 50 and not m.failures
    rows = []
    ok = True
    for t in (2.0, 5.0, 10.0, 20.0):
        i = _grid_index(m, t)
        dev = abs(m.mean["sme"]["sz"][i] - (-1 + math.exp(-0.55 * t)))
        bound = 3 * m.std["sme"]["sz"][i] / math.sqrt(m.n)
        ok &= dev <= bound
        rows.append(f"t={t:g}: {dev:.2e}<={bound:.2e}")
    report(2, ok, f"N={m.n} ({m.elapsed:.0f} s); " + ", ".join(rows))
    assert ok


def test_criterion_3_coherences_decay(large_ensemble):
    m = large_ensemble
    i = _grid_index(m, 20.0)
    vals = {f"{f}_{o}": abs(m.mean[f][o][i]) for f in ("sme", "qekf") for o in ("sx", "sy")}
    ok = max(vals["sme_sx"], vals["sme_sy"]) < 0.1 and max(vals["qekf_sx"], vals["qekf_sy"]) < 0.2
    report(3, ok, "|mean| at t=20: " + ", ".join(f"{k}={v:.3g}" for k, v in vals.items()))
    assert ok


def test_criterion_4_disturbance_tracking():
    m = run_ensemble(REF.with_overrides(N=20))
    sme, qekf = m.rmse_q["sme"], m.rmse_q["qekf"]
    # reference only: distance of the SME mean from the exact OU mean
    exact = np.sqrt(np.mean((m.mean["sme"]["q"] - REF.ou.mean(m.times)) ** 2))
    ok = sme <= 0.05 and qekf <= 0.15
    report(4, ok, f"N=20 RMSE vs truth sample mean: SME={sme:.4f} (<=0.05), QEKF={qekf:.4f} (<=0.15); "
                  f"SME vs exact OU mean={exact:.4f}")
    assert sme <= 0.05
    assert qekf <= 0.15


def test_criterion_5_timing_sweep():
    rows = bench_dimension(REF, [2, 3, 4, 5, 6], repeats=10)
    sme = [r["sme_seconds"] for r in rows]
    qekf = [r["qekf_seconds"] for r in rows]
    increasing = all(b > a for a, b in zip(sme, sme[1:]))
    spread = (max(qekf) - min(qekf)) / min(qekf)
    ok = increasing and spread < 0.2
    report(5, ok, "SME s=" + ",".join(f"{s:.3f}" for s in sme)
           + f"; QEKF spread={spread:.1%} (s=" + ",".join(f"{s:.4f}" for s in qekf) + ")")
    assert increasing
    assert spread < 0.2


def test_criterion_6_filter_consistency(large_ensemble):
    m = large_ensemble
    times = [1.0, 2.0, 5.0, 10.0, 20.0]
    exact = unconditional_evolution(REF.enlarged_model(), REF.enlarged_state(), times)
    dist = [trace_distance(m.rho_hat_mean[_grid_index(m, t)], e) for t, e in zip(times, exact)]
    ok = m.n >= 200 and max(dist) <= 0.05
    report(6, ok, f"N={m.n} trace distances " + ", ".join(f"t={t:g}:{d:.4f}" for t, d in zip(times, dist)))
    assert ok


def _invariant_checks(tmp_path):
    failures = []
    sx, sy, sz = pauli("x"), pauli("y"), pauli("z")
    if not (np.array_equal(commutator(sx, sy), 2j * sz) and np.array_equal(commutator(sz, sx), 2j * sy)
            and np.array_equal(commutator(sy, sz), 2j * sx)):
        failures.append("pauli")

    rng = np.random.default_rng(0)
    model = REF.enlarged_model()
    drift = max(abs(np.trace(model.generator(random_density(rng, model.dim)))) * REF.dt for _ in range(50))
    if drift > 1e-9:
        failures.append(f"lindblad trace {drift:.2e}")

    truth = simulate_truth(REF.qubit, REF.ou, REF.qubit_state(), REF.dt, REF.T, seed=REF.seed)
    try:
        for rho in truth.rho_path:
            check_density_matrix(rho)
    except DensityMatrixError as exc:
        failures.append(f"truth state: {exc}")
    res = run_sme(truth.record, model, REF.enlarged_state(), REF.analog())
    herm = np.abs(res.rho - res.rho.conj().transpose(0, 2, 1)).max()
    if herm > 1e-9 or res.trace_err.max() > 1e-9 or res.min_eig.min() < -1e-8:
        failures.append(f"sme state herm={herm:.1e} trace={res.trace_err.max():.1e} eig={res.min_eig.min():.1e}")

    params = qekf_params(REF)
    h = 1e-6
    worst = 0.0
    for _ in range(20):
        x = rng.uniform(-1.5, 1.5, size=5)
        fd = np.column_stack([(drift_f(x + h * e, params) - drift_f(x - h * e, params)) / (2 * h)
                              for e in np.eye(5)])
        F = jacobian_F(x, params)
        worst = max(worst, np.abs(F - fd).max() / max(1.0, np.abs(F).max()))
    if worst > 1e-6:
        failures.append(f"jacobian {worst:.1e}")

    q = run_qekf(truth.record, params, initial_state(REF.rho1, REF.coherent_amplitude))
    if not np.array_equal(q.P, q.P.transpose(0, 2, 1)) or np.linalg.eigvalsh(q.P)[:, 0].min() < -1e-8:
        failures.append("qekf covariance")

    small = REF.with_overrides(N=2, T=1.0)
    run_experiment(small, tmp_path / "a", bench=False)
    run_experiment(small, tmp_path / "b", bench=False)
    for name in FIGURE_FILES.values():
        if (tmp_path / "a" / name).read_bytes() != (tmp_path / "b" / name).read_bytes():
            failures.append(f"determinism {name}")
    return failures


def test_criterion_7_invariant_suites(tmp_path):
    failures = _invariant_checks(tmp_path)
    report(7, not failures, "all invariant checks hold" if not failures else "; ".join(failures))
    assert not failures


def test_criterion_8_truncation_stability():
    worst = 0.0
    for index in range(3):
        record = simulate_truth(REF.qubit, REF.ou, REF.qubit_state(), REF.dt, REF.T,
                                seed=REF.seed, index=index).record
        q = {}
        for n in (8, 10):
            q[n] = run_sme(record, REF.enlarged_model(n), REF.enlarged_state(n), REF.analog(n),
                           stride=REF.stride).estimates["q"]
        worst = max(worst, np.abs(q[8] - q[10]).max() / np.abs(q[10]).max())
    ok = worst < 0.01
    report(8, ok, f"max relative sup-norm difference n'=8 vs 10 over 3 records: {worst:.2e}")
    assert ok
