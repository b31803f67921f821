import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hybridfilter import __version__
from hybridfilter.cli import main
from hybridfilter.config import ConfigError, ExperimentConfig, reference_config
from hybridfilter.experiment import FIGURE_FILES, bench_dimension, run_ensemble, run_experiment
from hybridfilter.plots import emit_plots

SMALL = ExperimentConfig(T=1.0, N=3, n_prime=6, bench_n_primes=(2, 3), bench_repeats=1)


def _read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_reference_defaults():
    c = reference_config()
    assert (c.k1, c.u, c.q0, c.n_prime, c.dt, c.T, c.N) == (0.55, 0.25, 0.25, 8, 1e-3, 20.0, 20)
    assert c.v == 1 / (2 * math.sqrt(2))
    assert c.lam == 0.0 and c.mu == 0.01
    assert c.coherent_amplitude == 0.25
    assert np.allclose(c.qubit_state(), 0.5 * np.ones((2, 2)))
    assert c.enlarged_state().shape == (16, 16)


def test_round_trip_defaults():
    c = reference_config()
    assert ExperimentConfig.from_text(c.to_text("header line")) == c


@settings(max_examples=50, deadline=None)
@given(
    k1=st.floats(1e-3, 10), u=st.floats(1e-3, 10), v=st.floats(-5, 5).filter(lambda x: x != 0),
    q0=st.floats(-2, 2), dt=st.floats(1e-5, 1e-2), N=st.integers(1, 500),
    beta=st.none() | st.complex_numbers(max_magnitude=2, allow_nan=False, allow_infinity=False),
    s=st.sampled_from(["paper", "derived"]), seed=st.integers(0, 2**63),
    primes=st.lists(st.integers(2, 9), max_size=4).map(tuple),
)
def test_round_trip_is_lossless(k1, u, v, q0, dt, N, beta, s, seed, primes):
    c = ExperimentConfig(k1=k1, u=u, v=v, q0=q0, dt=dt, N=N, beta=beta, s_matrix=s, seed=seed,
                         bench_n_primes=primes)
    assert ExperimentConfig.from_text(c.to_text()) == c


@pytest.mark.parametrize("kw", [{"k1": 0}, {"u": -1}, {"mu": 0}, {"lam": -1}, {"N": 0}, {"dt": 30.0},
                                {"n_prime": 1}, {"s_matrix": "x"}, {"rho1": (1, 1, 0)}, {"stride": 0}])
def test_invalid_configs(kw):
    with pytest.raises(ConfigError):
        ExperimentConfig(**kw)


def test_parse_errors():
    with pytest.raises(ConfigError, match="unknown key"):
        ExperimentConfig.from_text("nope = 1")
    with pytest.raises(ConfigError, match="expected"):
        ExperimentConfig.from_text("k1 0.5")
    with pytest.raises(ConfigError, match="cannot parse"):
        ExperimentConfig.from_text("N = lots")
    c = ExperimentConfig.from_text("# comment\nk1 = 0.7  # rate\n\nrho1 = 0,0,1\n")
    assert c.k1 == 0.7 and c.rho1 == (0.0, 0.0, 1.0)


def test_ensemble_metrics():
    m = run_ensemble(SMALL)
    assert m.n == 3 and not m.failures
    assert m.times.shape == (101,)
    for src in ("truth", "sme", "qekf"):
        for obs in ("sx", "sy", "sz", "q"):
            assert m.mean[src][obs].shape == (101,)
            assert (m.se[src][obs] >= 0).all()
    assert m.rmse_q["sme"] >= 0 and m.rmse_q["qekf"] >= 0
    assert m.wall_time["sme"].shape == (3,)
    assert m.mean["truth"]["q"][0] == 0.25
    assert m.mean["sme"]["q"][0] == pytest.approx(0.25, abs=1e-6)


def test_parallel_ensemble_matches_serial():
    a = run_ensemble(SMALL, workers=1, average_rho=True)
    b = run_ensemble(SMALL, workers=2, average_rho=True)
    for src in a.mean:
        for obs in a.mean[src]:
            assert np.array_equal(a.mean[src][obs], b.mean[src][obs])
    assert np.array_equal(a.rho_hat_mean, b.rho_hat_mean)


def test_experiment_outputs_are_deterministic(tmp_path):
    run_experiment(SMALL, tmp_path / "a", bench=False)
    run_experiment(SMALL, tmp_path / "b", bench=False)
    for name in [*FIGURE_FILES.values(), "manifest.txt", "summary.txt"]:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    rows = _read_csv(tmp_path / "a" / "fig7_q.csv")
    assert list(rows[0]) == ["t", "truth_mean", "truth_se", "sme_mean", "sme_se", "qekf_mean", "qekf_se"]
    assert len(rows) == 101


def test_manifest_reproduces_the_run(tmp_path):
    run_experiment(SMALL.with_overrides(seed=9), tmp_path / "a", bench=False)
    text = (tmp_path / "a" / "manifest.txt").read_text()
    assert __version__ in text and "master seed: 9" in text
    again = ExperimentConfig.load(tmp_path / "a" / "manifest.txt")
    assert again == SMALL.with_overrides(seed=9)
    run_experiment(again, tmp_path / "b", bench=False)
    assert (tmp_path / "a" / "fig6_sigma_z.csv").read_bytes() == (tmp_path / "b" / "fig6_sigma_z.csv").read_bytes()


def test_bench_table():
    rows = bench_dimension(SMALL, [3], repeats=1, warmup=0)
    assert len(rows) == 1
    assert rows[0]["n_prime"] == 3
    assert rows[0]["sme_seconds"] > 0 and rows[0]["qekf_seconds"] > 0


def test_plots(tmp_path):
    run_experiment(SMALL, tmp_path, bench=True)
    svgs = emit_plots(tmp_path)
    assert sorted(p.name for p in svgs) == sorted(
        [n.replace(".csv", ".svg") for n in FIGURE_FILES.values()] + ["fig8_timing.svg"]
    )
    assert all(p.read_text().lstrip().startswith("<?xml") for p in svgs)


def test_plots_reject_missing_columns(tmp_path):
    (tmp_path / "fig4_sigma_x.csv").write_text("t,truth_mean\n0,1\n")
    with pytest.raises(ValueError, match="missing columns"):
        emit_plots(tmp_path)


# command line -------------------------------------------------------------

@pytest.fixture
def small_config(tmp_path):
    path = tmp_path / "small.cfg"
    SMALL.save(path)
    return path


def test_cli_simulate_and_filter(tmp_path, small_config, capsys):
    out = tmp_path / "sim"
    assert main(["simulate", "--config", str(small_config), "--out", str(out), "--count", "2", "--seed", "4"]) == 0
    truth = _read_csv(out / "truth_0001.csv")
    assert list(truth[0]) == ["step", "t", "dY", "q_true", "sx_true", "sy_true", "sz_true"]
    assert len(truth) == 1000
    assert (out / "record_0000.npz").exists()
    assert ExperimentConfig.load(out / "manifest.txt").seed == 4

    fout = tmp_path / "filt"
    for rec in ("truth_0000.csv", "record_0000.npz"):
        assert main(["filter", "--config", str(small_config), "--out", str(fout), "--method", "both",
                     "--record", str(out / rec), "--s-matrix", "paper", "--n-prime", "5"]) == 0
    a = (fout / "truth_0000_sme.csv").read_bytes()
    b = (fout / "record_0000_sme.csv").read_bytes()
    assert a == b
    assert _read_csv(fout / "record_0000_qekf.csv")[0].keys() >= {"q2_hat", "K_5"}
    assert "S=paper" in capsys.readouterr().out


def test_cli_filter_single_method(tmp_path, small_config):
    out = tmp_path / "f"
    assert main(["filter", "--config", str(small_config), "--out", str(out), "--method", "qekf"]) == 0
    assert sorted(p.name for p in out.iterdir()) == ["trajectory_0000_qekf.csv"]


def test_cli_experiment_bench_plot(tmp_path, small_config, capsys):
    out = tmp_path / "exp"
    args = ["--config", str(small_config), "--out", str(out)]
    assert main(["experiment", *args, "--workers", "2", "--no-bench"]) == 0
    assert "RMSE" in capsys.readouterr().out
    assert main(["bench", *args, "--n-primes", "2,4", "--repeats", "1"]) == 0
    rows = _read_csv(out / "fig8_timing.csv")
    assert [r["n_prime"] for r in rows] == ["2", "4"]
    assert main(["plot", *args]) == 0
    assert (out / "fig8_timing.svg").exists() and (out / "fig7_q.svg").exists()


def test_cli_reports_bad_config(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("k1 = -1\n")
    assert main(["experiment", "--config", str(bad)]) == 2
    assert "k1" in capsys.readouterr().err
    with pytest.raises(SystemExit):
        main(["filter", "--method", "kalman"])
