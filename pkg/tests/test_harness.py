import json

import numpy as np
import pytest

from cfdetect import cli
from cfdetect.harness import (
    DESK,
    DIAG_FIELDS,
    OVERHEAD_FIELDS,
    ROW_FIELDS,
    ExperimentConfig,
    SweepSpec,
    build_scenario,
    diagnose,
    overhead,
    quantize_received,
    run_sweep,
    run_trials,
    scenario_hash,
    sweep_fields,
    to_csv,
)
from cfdetect.solver_consensus import ConfigError

TINY = DESK.replace(N=16, K=4, trials=2, cd_sweeps=10)


def test_defaults_follow_simulation_setup():
    cfg = ExperimentConfig()
    assert (cfg.N, cfg.alpha, cfg.lambda_c, cfg.side, cfg.L_m, cfg.noise_power_dbm) == \
        (100, 0.1, 0.2, 200.0, 8, -99.0)
    assert (cfg.M, cfg.K, cfg.L) == (3, 24, 6)
    cfg.validate()


@pytest.mark.parametrize("kw", [
    {"N": 0}, {"M": 0}, {"alpha": 1.5}, {"mu": 0.0}, {"algorithm": "amp"},
    {"field_mode": "x"}, {"bits_dist": 0}, {"trials": 0}, {"lambda_c": -0.1},
])
def test_config_validation(kw):
    with pytest.raises(ConfigError):
        DESK.replace(**kw).validate()


def test_config_from_dict():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"bogus": 1})
    cfg = ExperimentConfig.from_dict({"N": 12, "seed": 3})
    assert cfg.N == 12 and cfg.to_dict()["seed"] == 3


def test_errors_reported_before_trials(monkeypatch):
    called = []
    monkeypatch.setattr("cfdetect.harness.run_trial", lambda *a: called.append(a))
    with pytest.raises(ConfigError):
        run_trials(TINY.replace(alpha=2.0))
    assert not called


def test_scenario_is_reproducible():
    a, b = build_scenario(TINY, 1), build_scenario(TINY, 1)
    np.testing.assert_array_equal(a.ys[0], b.ys[0])
    np.testing.assert_array_equal(a.a_true, b.a_true)
    c = build_scenario(TINY, 2)
    assert not np.array_equal(a.ys[0], c.ys[0])


def test_scenario_hash_ignores_solver_settings():
    assert scenario_hash(TINY, 0) == scenario_hash(TINY.replace(algorithm="mismatched", mu=5), 0)
    assert scenario_hash(TINY, 0) != scenario_hash(TINY, 1)
    assert scenario_hash(TINY, 0) != scenario_hash(TINY.replace(seed=1), 0)


def test_byte_identical_csv():
    cfg = TINY.replace(algorithm="centralized")
    assert to_csv(run_trials(cfg), ROW_FIELDS) == to_csv(run_trials(cfg), ROW_FIELDS)


def test_workers_do_not_change_output():
    cfg = TINY.replace(algorithm="mismatched", trials=3)
    assert to_csv(run_trials(cfg), ROW_FIELDS) == \
        to_csv(run_trials(cfg.replace(workers=2)), ROW_FIELDS)


def test_algorithms_share_scenarios():
    rows_c = run_trials(TINY.replace(trials=1, algorithm="centralized"))
    rows_d = run_trials(TINY.replace(trials=1, algorithm="distributed"))
    assert rows_c[0]["scenario_hash"] == rows_d[0]["scenario_hash"]
    assert rows_c[0]["algorithm"] == "centralized" and rows_d[0]["algorithm"] == "distributed"


def test_row_contents():
    timings = []
    rows = run_trials(TINY.replace(algorithm="distributed", bits_dist=3), timings)
    assert len(rows) == 2 and len(timings) == 2
    for r in rows:
        assert set(ROW_FIELDS) == set(r)
        assert 0 <= r["equal_error_rate"] <= 1
        assert r["bits_distributed"] == 2 * r["outer_iters_run"] * 2 * 16 * 3


def test_quantized_fronthaul_runs():
    rows = run_trials(TINY.replace(algorithm="centralized", bits_cent=6))
    assert all(0 <= r["equal_error_rate"] <= 1 for r in rows)


def test_quantize_received_bounds():
    y = np.random.default_rng(0).standard_normal(50) * (1 + 1j)
    q = quantize_received(y, 4)
    c = np.abs(y.real).max()
    assert np.max(np.abs(q.real - y.real)) <= c / 16 + 1e-12


def test_sweep_layout():
    spec = SweepSpec("lambda_c", [0.05, 0.3], {"algorithm": "mismatched"})
    rows = run_sweep(spec, TINY)
    assert [r["lambda_c"] for r in rows] == [0.05, 0.05, 0.3, 0.3]
    text = to_csv(rows, sweep_fields(spec))
    assert text.splitlines()[0].startswith("lambda_c,trial,algorithm")


def test_empty_sweep_is_header_only():
    spec = SweepSpec("K", [])
    text = to_csv(run_sweep(spec, TINY), sweep_fields(spec))
    assert text == ",".join(sweep_fields(spec)) + "\n"


def test_sweep_rejects_unknown_parameter():
    with pytest.raises(ConfigError):
        run_sweep(SweepSpec("nope", [1]), TINY)


def test_antenna_count_trend():
    spec = SweepSpec("K", [8, 16], {"algorithm": "centralized", "trials": 30})
    rows = run_sweep(spec, DESK)
    mean = {k: np.mean([r["equal_error_rate"] for r in rows if r["K"] == k]) for k in (8, 16)}
    assert mean[16] <= mean[8]


def test_diagnose_rows():
    rows = diagnose(TINY.replace(field_mode="hybrid"))
    assert len(rows) == 2 * 16 * 15 // 2
    assert set(DIAG_FIELDS) == set(rows[0])


def test_overhead_rows():
    (row,) = overhead(ExperimentConfig(bits_dist=3, bits_cent=6), iterations=2)
    assert set(OVERHEAD_FIELDS) == set(row)
    assert row["bits_distributed"] == 3600 and row["bits_centralized"] == 5184


# --- command line ----------------------------------------------------------

def run_cli(args, capsys):
    code = cli.main(args)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_cli_overhead(capsys):
    code, out, _ = run_cli(["overhead", "--set", "bits_dist=3", "--set", "bits_cent=6",
                            "--iterations", "2"], capsys)
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == ",".join(OVERHEAD_FIELDS)
    assert lines[1].split(",")[OVERHEAD_FIELDS.index("bits_distributed")] == "3600"


def test_cli_simulate_with_config_file(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({**TINY.to_dict(), "algorithm": "mismatched"}))
    out_path = tmp_path / "out.csv"
    code, _, _ = run_cli(["simulate", "--config", str(cfg), "--trials", "2", "--seed", "5",
                          "--out", str(out_path)], capsys)
    assert code == 0
    text = out_path.read_text()
    expected = to_csv(run_trials(TINY.replace(algorithm="mismatched", seed=5)), ROW_FIELDS)
    assert text == expected


def test_cli_sweep_from_spec_file(tmp_path, capsys):
    spec = tmp_path / "sweep.json"
    spec.write_text(json.dumps({"experiment": {**TINY.to_dict(), "algorithm": "mismatched",
                                               "trials": 1},
                                "sweep": {"parameter": "K", "values": [2, 4]}}))
    code, out, _ = run_cli(["sweep", "--config", str(spec)], capsys)
    assert code == 0
    lines = out.splitlines()
    assert lines[0].startswith("K,trial") and len(lines) == 3


def test_cli_diagnose(capsys):
    code, out, _ = run_cli(["diagnose", "--preset", "desk", "--set", "N=5",
                            "--set", "field_mode=\"hybrid\""], capsys)
    assert code == 0
    assert out.splitlines()[0] == ",".join(DIAG_FIELDS)
    assert len(out.splitlines()) == 1 + 2 * 10


@pytest.mark.parametrize("args", [
    ["simulate", "--set", "M=0"],
    ["simulate", "--set", "bogus=1"],
    ["simulate", "--set", "novalue"],
    ["simulate", "--config", "/nonexistent/cfg.json"],
    ["sweep", "--preset", "desk"],
])
def test_cli_config_errors(args, capsys):
    code, out, err = run_cli(args, capsys)
    assert code == 2 and out == ""
    payload = json.loads(err.strip().splitlines()[-1])
    assert set(payload) == {"error", "message"}
