import csv
import io
import json
import math
import shutil

import numpy as np
import pytest

from complexnav import bench, cli
from complexnav.metrics import aggregate
from complexnav.scenario import Scenario, parse_condition
from complexnav.sim import read_trajectory_csv

SMALL = {
    "experiment_seed": 5,
    "trials_per_condition": 3,
    "sweeps": ["mixture", "density"],
    "methods": ["CV", "orca", {"name": "MPPI-CV", "params": {"samples": 50}}],
}


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    cfg = bench.ExperimentConfig.from_dict(SMALL)
    bench.run_experiments(cfg, out)
    return out


def write_cfg(path, **over):
    d = {**SMALL, **over}
    path.write_text(json.dumps(d))
    return path


# -- config -----------------------------------------------------------------------

def test_config_defaults():
    cfg = bench.ExperimentConfig()
    assert cfg.trials_per_condition == 100
    assert [m.name for m in cfg.methods] == ["cv", "rp", "orca", "sfm", "mpc_cv", "mppi_cv"]
    assert cfg.sweeps == ("density", "directionality", "mixture", "width")
    assert len(cfg.conditions()) == 24


def test_config_parsing():
    cfg = bench.ExperimentConfig.from_dict(SMALL)
    assert cfg.sweeps == ("density", "mixture")
    assert [m.name for m in cfg.methods] == ["cv", "orca", "mppi_cv"]
    assert cfg.trial_config("mppi_cv").params.mppi.samples == 50
    assert cfg.trial_config("cv").params.mppi.samples == 400
    back = bench.ExperimentConfig.from_dict(bench.resolved_config(cfg))
    assert back.to_dict() == cfg.to_dict()


@pytest.mark.parametrize("bad", [
    {"sweeps": ["speed"]},
    {"methods": ["rgl"]},
    {"methods": [{"name": "cv", "params": {"x": 1}}]},
    {"methods": [{"name": "mpc_cv", "params": {"bogus": 1}}]},
    {"methods": ["cv", "CV"]},
    {"trials_per_condition": 0},
    {"workers": 0},
    {"dt": -1},
    {"colour": "red"},
    {"policy_params": {"sfm": {"strength": 3}}},
])
def test_config_errors(bad):
    with pytest.raises(bench.ConfigError):
        bench.ExperimentConfig.from_dict({**SMALL, **bad})


def test_load_config_errors(tmp_path):
    with pytest.raises(bench.ConfigError):
        bench.load_config(tmp_path / "missing.json")
    p = tmp_path / "broken.json"
    p.write_text("{not json")
    with pytest.raises(bench.ConfigError):
        bench.load_config(p)


# -- run outputs ---------------------------------------------------------------------

def test_counting_example(tmp_path):
    cfg = bench.ExperimentConfig.from_dict({"trials_per_condition": 10, "sweeps": ["density"],
                                            "methods": ["cv", "orca"]})
    rows = bench.run_rows(cfg)
    assert len(rows) == 7 * 2 * 10


def test_output_files(run_dir):
    names = {p.name for p in run_dir.iterdir()}
    assert {"trials.csv", "summary.json", "correlations.json", "resolved_config.json", "plotdata"} <= names
    plots = sorted(p.name for p in (run_dir / "plotdata").iterdir())
    assert len(plots) == 8 and "density_success.csv" in plots
    with open(run_dir / "plotdata" / "mixture_min_distance.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["level", "method", "mean", "std"]
    assert len(rows) == 1 + 5 * 3


def test_trials_csv_layout(run_dir):
    rows = bench.read_trials_csv(run_dir / "trials.csv")
    assert len(rows) == 12 * 3 * 3
    header = (run_dir / "trials.csv").read_text().splitlines()[0].split(",")
    assert tuple(header) == bench.TRIAL_COLUMNS
    keys = [(parse_condition(r.condition_id).index, ["cv", "orca", "mppi_cv"].index(r.method), r.trial_id)
            for r in rows]
    assert keys == sorted(keys)


def test_methods_share_scenarios(run_dir):
    rows = bench.read_trials_csv(run_dir / "trials.csv")
    by_trial = {}
    for r in rows:
        by_trial.setdefault((r.condition_id, r.trial_id), set()).add((r.seed, r.scenario_hash))
    assert all(len(v) == 1 for v in by_trial.values())
    cond = parse_condition("density-0.1")
    assert rows[[r.condition_id for r in rows].index("density-0.1")].seed == bench.scenario_seed(5, cond, 0)


def test_resolved_config_is_complete(run_dir):
    d = json.loads((run_dir / "resolved_config.json").read_text())
    pp = d["policy_params"]
    assert set(pp) == {"sfm", "orca", "mpc_cv", "mppi_cv"}
    assert set(pp["sfm"]) == {"tau", "agent_strength", "agent_range", "wall_strength", "wall_range", "max_force"}
    assert set(pp["orca"]) == {"neighbor_dist", "time_horizon", "radius_margin"}
    assert d["trial"] == {"dt": 0.25, "time_limit": 50.0, "goal_tolerance": 0.3}
    assert d["calibration"]["selected"]["sfm"] == pp["sfm"]
    assert d["format_version"] == bench.FORMAT_VERSION
    assert {m["name"]: m["params"].get("samples") for m in d["methods"]}["mppi_cv"] == 50


def test_summary_recomputes_from_csv(run_dir):
    summary = json.loads((run_dir / "summary.json").read_text())
    rows = bench.read_trials_csv(run_dir / "trials.csv")
    assert summary["conventions"]["std"] == "population"
    for c in summary["conditions"]:
        for m, s in c["methods"].items():
            mine = [r for r in rows if r.condition_id == c["condition_id"] and r.method == m]
            assert aggregate(mine) == s


def test_deterministic_and_worker_invariant(run_dir, tmp_path):
    cfg = bench.ExperimentConfig.from_dict(SMALL)
    bench.run_experiments(cfg, tmp_path / "again", workers=1)
    bench.run_experiments(cfg, tmp_path / "pool", workers=3)
    ref = (run_dir / "trials.csv").read_bytes()
    assert (tmp_path / "again" / "trials.csv").read_bytes() == ref
    assert (tmp_path / "pool" / "trials.csv").read_bytes() == ref
    for name in ("summary.json", "correlations.json"):
        assert (tmp_path / "pool" / name).read_bytes() == (run_dir / name).read_bytes()


# -- analyze -------------------------------------------------------------------

def test_analyze_reproduces_correlations(run_dir, tmp_path):
    copy = tmp_path / "copy"
    shutil.copytree(run_dir, copy)
    (copy / "correlations.json").unlink()
    bench.analyze(copy)
    assert (copy / "correlations.json").read_bytes() == (run_dir / "correlations.json").read_bytes()


def test_analyze_partial_summary(run_dir, tmp_path):
    copy = tmp_path / "partial"
    shutil.copytree(run_dir, copy)
    summary = json.loads((copy / "summary.json").read_text())
    # keep only one mixture level plus all density levels
    summary["conditions"] = [c for c in summary["conditions"]
                             if c["factor"] == "density" or c["condition_id"] == "mixture-mix2"]
    (copy / "summary.json").write_text(json.dumps(summary))
    corr = bench.analyze(copy)
    mix = [r for r in corr["reports"] if r["factor"] == "mixture"]
    assert mix and all(r["insufficient"] for r in mix)
    dens = [r for r in corr["reports"] if r["factor"] == "density" and r["metric"] == "success"]
    assert not dens[0]["insufficient"]


def test_analyze_errors(tmp_path):
    with pytest.raises(FileNotFoundError):
        bench.analyze(tmp_path)
    assert list(tmp_path.iterdir()) == []
    (tmp_path / "summary.json").write_text("{broken")
    with pytest.raises(ValueError):
        bench.analyze(tmp_path)
    assert not (tmp_path / "correlations.json").exists()


# -- replay -------------------------------------------------------------------------

def test_replay_success_and_repeatability(run_dir):
    rows = bench.read_trials_csv(run_dir / "trials.csv")
    row = next(r for r in rows if r.outcome == "success")
    text = bench.replay_csv(run_dir, row.condition_id, row.method, row.trial_id)
    assert text == bench.replay_csv(run_dir, row.condition_id, row.method, row.trial_id)
    _, pos, _, tags = read_trajectory_csv(io.StringIO(text))
    goal = np.array([5.0, 9.0])
    assert np.linalg.norm(pos[-1, 0] - goal) <= 0.3
    assert tags[0] == row.method


def test_replay_detects_tampered_seed(run_dir, tmp_path):
    copy = tmp_path / "tampered"
    shutil.copytree(run_dir, copy)
    lines = (copy / "trials.csv").read_text().splitlines()
    cells = lines[1].split(",")
    cells[6] = str(int(cells[6]) + 1)
    lines[1] = ",".join(cells)
    (copy / "trials.csv").write_text("\n".join(lines) + "\n")
    with pytest.raises(bench.InvariantError, match="hash mismatch"):
        bench.replay(copy, cells[0], cells[4], int(cells[5]))
    assert cli.main(["replay", str(copy), cells[0], cells[4], cells[5]]) == cli.EXIT_INVARIANT


def test_replay_unknown_trial(run_dir):
    with pytest.raises(KeyError):
        bench.replay(run_dir, "density-0.1", "cv", 99)
    with pytest.raises(KeyError):
        bench.replay(run_dir, "width-2", "cv", 0)


# -- command line ---------------------------------------------------------------------

def test_cli_run_and_env_override(tmp_path, monkeypatch, capsys):
    cfg = write_cfg(tmp_path / "cfg.json", trials_per_condition=2, sweeps=["width"], methods=["cv"],
                    output_dir=str(tmp_path / "ignored"))
    monkeypatch.setenv(bench.OUTPUT_DIR_ENV, str(tmp_path / "env_out"))
    assert cli.main(["run", "--config", str(cfg), "--quiet"]) == 0
    assert (tmp_path / "env_out" / "trials.csv").exists()
    assert not (tmp_path / "ignored").exists()
    assert "width" in capsys.readouterr().out


def test_cli_paper_flag(tmp_path, monkeypatch):
    cfg = write_cfg(tmp_path / "cfg.json", sweeps=["mixture"], methods=["static"],
                    output_dir=str(tmp_path / "paper"), time_limit=0.5)
    assert cli.main(["run", "--config", str(cfg), "--paper", "--quiet"]) == 0
    rows = bench.read_trials_csv(tmp_path / "paper" / "trials.csv")
    assert len(rows) == 5 * 500


def test_cli_exit_codes(tmp_path, run_dir, capsys):
    bad = write_cfg(tmp_path / "bad.json", sweeps=["speed"])
    assert cli.main(["run", "--config", str(bad)]) == cli.EXIT_CONFIG
    unknown = write_cfg(tmp_path / "unknown.json", methods=["rgl"])
    assert cli.main(["run", "--config", str(unknown)]) == cli.EXIT_CONFIG
    blocker = tmp_path / "file"
    blocker.write_text("x")
    io_cfg = write_cfg(tmp_path / "io.json", output_dir=str(blocker / "sub"))
    assert cli.main(["run", "--config", str(io_cfg)]) == cli.EXIT_IO
    assert cli.main(["analyze", str(tmp_path / "nothing")]) == cli.EXIT_IO
    assert cli.main(["replay", str(run_dir), "density-0.1", "cv", "99"]) != 0
    assert cli.main(["gen", "--condition", "density-0.9", "--seed", "1"]) == cli.EXIT_CONFIG
    capsys.readouterr()


def test_cli_gen_matches_recorded_hash(run_dir, capsys):
    row = bench.read_trials_csv(run_dir / "trials.csv")[0]
    assert cli.main(["gen", "--condition", row.condition_id, "--seed", str(row.seed)]) == 0
    sc = Scenario.from_json(capsys.readouterr().out)
    assert sc.hash() == row.scenario_hash


def test_cli_analyze_and_replay_out(run_dir, tmp_path, capsys):
    copy = tmp_path / "c"
    shutil.copytree(run_dir, copy)
    assert cli.main(["analyze", str(copy)]) == 0
    assert "density" in capsys.readouterr().out
    out = tmp_path / "traj.csv"
    assert cli.main(["replay", str(copy), "mixture-mix1", "orca", "1", "--out", str(out)]) == 0
    assert out.read_text().startswith("step,time,agent_id")


def test_calibration_helpers():
    rates = bench.calibration_gate(trials=10)
    assert set(rates) == {"sfm", "orca"}
    assert all(0.0 <= v <= 1.0 for v in rates.values())
    small = {"agent_strength": [2.0, 5.0], "agent_range": [0.3], "tau": [0.5]}
    params, rate = bench.calibrate_sfm(small, trials=10)
    assert params.agent_strength in (2.0, 5.0) and 0.0 <= rate <= 1.0
