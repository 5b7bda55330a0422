import json
from pathlib import Path

import numpy as np
import pytest

from etconsensus import cli
from etconsensus.config import load_raw, validate_raw

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

GOOD = """
[graph]
n = 3
edges = [[1, 2, 1.0], [2, 3, 1.0], [3, 1, 1.0]]
[gain]
c = 1.0
gamma = 0.6
[noise]
sigma = 1.0
[sim]
x0 = [1.0, 0.0, -1.0]
dt = 0.01
t_end = 5.0
seed = 7
sample_stride = 10
[experiment]
runs = 40
moments = [2.0]
rho_list = [0.2]
output_dir = "outdir"
emit = ["events", "moments", "xinf", "report", "trajectories"]
"""


def _write(tmp_path, text, name="cfg.toml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_bundled_configs_validate_clean():
    for name in ("five_agents.toml", "ring3.toml"):
        raw, _ = load_raw(CONFIGS / name)
        assert validate_raw(raw) == []


def test_validation_collects_every_violation(tmp_path):
    broken = GOOD.replace("gamma = 0.6", "gamma = 0.5") \
                 .replace("[[1, 2, 1.0]", "[[1, 2, -1.0]") \
                 .replace("runs = 40", "runs = 0")
    raw, _ = load_raw(_write(tmp_path, broken))
    violations = validate_raw(raw)
    fields = {v.field for v in violations}
    assert {"gain.gamma", "graph.edges[0]", "experiment.runs"} <= fields
    gamma_msg = next(v.message for v in violations if v.field == "gain.gamma")
    assert "gamma must lie strictly in (0.5, 1)" in gamma_msg
    weight_msg = next(v.message for v in violations if v.field == "graph.edges[0]")
    assert "(1, 2" in weight_msg


def test_validation_cites_the_stability_guard(tmp_path):
    raw, _ = load_raw(_write(tmp_path, GOOD.replace("dt = 0.01", "dt = 1.5").
                             replace("t_end = 5.0", "t_end = 6.0")))
    violations = validate_raw(raw)
    assert any("a(0)*max(l_ii)*dt" in v.message for v in violations)


def test_validate_command_exit_codes(tmp_path, capsys):
    good = _write(tmp_path, GOOD)
    assert cli.main(["validate", str(good)]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report == {"valid": True, "violations": []}

    bad = _write(tmp_path, GOOD.replace("gamma = 0.6", "gamma = 1.2"), "bad.toml")
    assert cli.main(["validate", str(bad)]) == 2
    report = json.loads(capsys.readouterr().out)
    assert not report["valid"]
    assert report["violations"]


def test_validate_unreadable_file(tmp_path, capsys):
    assert cli.main(["validate", str(tmp_path / "absent.toml")]) == 2
    assert not json.loads(capsys.readouterr().out)["valid"]


def test_run_rejects_malformed_toml(tmp_path, capsys):
    path = _write(tmp_path, "[graph\nn = 3")
    assert cli.main(["run", str(path)]) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "config_parse"


def test_run_rejects_invalid_config_with_record(tmp_path, capsys):
    path = _write(tmp_path, GOOD.replace("gamma = 0.6", "gamma = 0.4"))
    assert cli.main(["run", str(path)]) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "validation"
    assert any(v["field"] == "gain.gamma" for v in err["violations"])


def test_run_produces_expected_artifacts(tmp_path):
    path = _write(tmp_path, GOOD)
    out = tmp_path / "outdir"
    assert cli.main(["run", str(path), "--output", str(out)]) == 0
    for name in ("report.json", "moments.csv", "xinf.csv", "events.csv",
                 "trajectory_run0000.csv", "event_log_run0000.csv"):
        assert (out / name).exists(), name
    report = json.loads((out / "report.json").read_text())
    assert report["n_runs"] == 40
    assert report["config_sha256"]
    assert "splitmix64" in report["run_seed_derivation"]
    assert "SeedSequence" in report["edge_stream_scheme"]
    assert report["trigger_rule"] == "canonical"
    assert len(report["results"]["consensus_weights"]) == 3
    header = (out / "trajectory_run0000.csv").read_text().splitlines()[0]
    assert header == "t,x_1,x_2,x_3,xt_1,xt_2,xt_3"
    assert (out / "event_log_run0000.csv").read_text().splitlines()[0] == "agent,k,t_k"


def test_run_outputs_are_byte_identical(tmp_path):
    path = _write(tmp_path, GOOD)
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["run", str(path), "--output", str(out_a)]) == 0
    assert cli.main(["run", str(path), "--output", str(out_b)]) == 0
    for name in ("moments.csv", "xinf.csv", "events.csv",
                 "trajectory_run0000.csv", "event_log_run0000.csv"):
        assert (out_a / name).read_bytes() == (out_b / name).read_bytes(), name


def test_single_deterministic_run_flags(tmp_path):
    path = _write(tmp_path, GOOD)
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    args = ["run", str(path), "--runs", "1", "--no-noise", "--continuous", "--seed", "3"]
    assert cli.main(args + ["--output", str(out_a)]) == 0
    assert cli.main(args + ["--output", str(out_b)]) == 0
    traj_a = (out_a / "trajectory_run0000.csv").read_bytes()
    assert traj_a == (out_b / "trajectory_run0000.csv").read_bytes()
    # continuous + no-noise: broadcast column tracks the state column
    lines = traj_a.decode().splitlines()[1:]
    for line in lines[:: max(1, len(lines) // 20)]:
        cells = line.split(",")
        assert cells[1:4] == cells[4:7]
    report = json.loads((out_a / "report.json").read_text())
    assert report["continuous_mode"] is True
    assert report["overrides"]["no_noise"] is True


def test_run_abort_exit_code_and_record(tmp_path, capsys):
    # astronomically spread initial states overflow the very first step
    cfg = GOOD.replace("x0 = [1.0, 0.0, -1.0]", "x0 = [1e308, -1e308, 0.0]")
    path = _write(tmp_path, cfg)
    with np.errstate(over="ignore", invalid="ignore"):
        code = cli.main(["run", str(path), "--output", str(tmp_path / "aborted")])
    assert code == 3
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "simulation_abort"
    assert err["step"] == 1
    assert err["run_index"] is not None


def test_strict_mode_gates_on_failed_checks(tmp_path, capsys):
    # 3 runs cannot hit the variance tolerance: checks fail deterministically
    noisy = GOOD.replace("runs = 40", "runs = 3").replace("seed = 7", "seed = 99")
    path = _write(tmp_path, noisy)
    out = tmp_path / "strictout"
    assert cli.main(["run", str(path), "--output", str(out)]) == 0
    capsys.readouterr()
    assert cli.main(["run", str(path), "--output", str(out), "--strict"]) == 4
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "acceptance"
    assert "variance_vs_truncated_theory_15pct" in err["failed_checks"]


def test_nonuniform_noise_map_round_trip(tmp_path):
    cfg = GOOD.replace('sigma = 1.0', 'sigma = 0.2\nper_edge = [[1, 2, 2.0]]')
    path = _write(tmp_path, cfg)
    out = tmp_path / "mapped"
    assert cli.main(["run", str(path), "--output", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    # r'SS'r with uniform weights: ((2)^2 + 0.2^2 + 0.2^2) / 9
    expected = (4.0 + 0.04 + 0.04) / 9.0
    assert report["results"]["weighted_diffusion_power"] == pytest.approx(expected, rel=1e-12)


def test_trigger_scale_extension_flagged(tmp_path):
    cfg = GOOD + "\n"
    cfg = cfg.replace("sample_stride = 10", "sample_stride = 10\ntrigger_scale = 2.5")
    path = _write(tmp_path, cfg)
    out = tmp_path / "scaled"
    assert cli.main(["run", str(path), "--output", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["trigger_rule"] == "extension"
    assert report["trigger_scale"] == 2.5
