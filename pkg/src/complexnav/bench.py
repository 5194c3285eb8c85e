"""Batch runner: sweeps x methods x seeded trials, persisted as CSV and JSON.

Every method sees the same scenario for a given (condition, trial) because the
scenario seed is derived from ``(experiment_seed, condition_index, trial_index)``
only. Results are sorted before writing, so the files do not depend on the
number of worker processes.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from . import __version__
from .analysis import SCHEME, correlate_experiment
from .metrics import CONVENTIONS, METRICS, aggregate
from .policies.orca import OrcaParams
from .policies.sfm import SfmParams
from .predictive import CostParams
from .scenario import (Factor, SweepCondition, all_conditions, derive_seed, factor_conditions,
                       parse_condition, sample_scenario)
from .sim import EGO_POLICIES, PolicyParams, TrialConfig, run_trial, write_trajectory_csv

FORMAT_VERSION = 1
OUTPUT_DIR_ENV = "COMPLEXNAV_OUTPUT_DIR"
DEFAULT_TRIALS = 100
PAPER_TRIALS = 500
DEFAULT_METHODS = ("cv", "rp", "orca", "sfm", "mpc_cv", "mppi_cv")
CONTROLLER_METHODS = ("mpc_cv", "mppi_cv")

TRIAL_COLUMNS = ("condition_id", "factor", "level_index", "level", "method", "trial_id", "seed",
                 "sim_seed", "scenario_hash", "outcome", "time_to_goal", "min_distance",
                 "path_irregularity", "steps")

# How the shipped SFM defaults were obtained: grid search over
# (agent_strength, agent_range, tau) on the SFM-only base mixture, 40 seeds,
# keeping the setting with the best SFM ego success (ties go to the mildest).
CALIBRATION = {
    "threshold": 0.85,
    "conditions": {"sfm": "mixture-sfm_only", "orca": "mixture-orca_only"},
    "grid": {"agent_strength": [5.0, 10.0, 20.0], "agent_range": [0.2, 0.3, 0.5], "tau": [0.5, 1.0]},
    "selection": "highest sfm ego success; ties to smallest agent_strength, agent_range, tau",
    "trials": 40,
    "experiment_seed": 99,
    "selected": {"sfm": SfmParams().to_dict(), "orca": OrcaParams().to_dict()},
    "previous_sfm": {"agent_strength": 2.0, "agent_range": 0.5, "tau": 0.5, "sfm_only_success": 0.30},
}


class ConfigError(ValueError):
    pass


class InvariantError(RuntimeError):
    pass


def normalize_method(tag: str) -> str:
    t = str(tag).strip().lower().replace("-", "_")
    if t not in EGO_POLICIES:
        raise ConfigError(f"unknown method {tag!r}; expected one of {EGO_POLICIES}")
    return t


@dataclass(frozen=True)
class MethodSpec:
    name: str
    params: dict = field(default_factory=dict)

    def trial_params(self, base: PolicyParams) -> PolicyParams:
        if not self.params:
            return base
        if self.name == "mpc_cv":
            return replace(base, mpc=CostParams(**{**base.mpc.to_dict(), **self.params}))
        return replace(base, mppi=CostParams(**{**base.mppi.to_dict(), **self.params}))

    def to_dict(self, base: PolicyParams) -> dict:
        p = self.trial_params(base)
        block = {"mpc_cv": p.mpc.to_dict(), "mppi_cv": p.mppi.to_dict()}.get(self.name, {})
        return {"name": self.name, "params": block}


def _method_from(entry) -> MethodSpec:
    if isinstance(entry, str):
        return MethodSpec(normalize_method(entry))
    if not isinstance(entry, dict) or "name" not in entry:
        raise ConfigError(f"method entry must be a tag or an object with 'name': {entry!r}")
    name = normalize_method(entry["name"])
    params = dict(entry.get("params") or {})
    if params and name not in CONTROLLER_METHODS:
        # sfm and orca share their parameters with the humans, set under policy_params
        raise ConfigError(f"method {name!r} takes no own parameters; use policy_params")
    if params:
        try:
            CostParams(**params)
        except TypeError as e:
            raise ConfigError(f"bad parameters for {name}: {e}") from None
    return MethodSpec(name, params)


@dataclass(frozen=True)
class ExperimentConfig:
    experiment_seed: int = 0
    trials_per_condition: int = DEFAULT_TRIALS
    sweeps: tuple[str, ...] = tuple(f.value for f in Factor)
    methods: tuple[MethodSpec, ...] = tuple(MethodSpec(m) for m in DEFAULT_METHODS)
    dt: float = 0.25
    time_limit: float = 50.0
    goal_tolerance: float = 0.3
    policy_params: PolicyParams = field(default_factory=PolicyParams)
    output_dir: str = "results"
    workers: int | str = 1

    def __post_init__(self):
        if int(self.trials_per_condition) < 1:
            raise ConfigError("trials_per_condition must be >= 1")
        if not self.sweeps:
            raise ConfigError("at least one sweep is required")
        if not self.methods:
            raise ConfigError("at least one method is required")
        names = [m.name for m in self.methods]
        if len(set(names)) != len(names):
            raise ConfigError("duplicate method names")
        if not (self.workers == "auto" or (isinstance(self.workers, int) and self.workers >= 1)):
            raise ConfigError("workers must be a positive integer or 'auto'")
        try:
            self.trial_config("cv")
        except ValueError as e:
            raise ConfigError(str(e)) from None

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in fields(cls)} | {"trial", "format_version", "package_version",
                                                 "calibration", "conventions"}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kw: dict = {}
        if "experiment_seed" in d:
            kw["experiment_seed"] = _int(d["experiment_seed"], "experiment_seed")
        if "trials_per_condition" in d:
            kw["trials_per_condition"] = _int(d["trials_per_condition"], "trials_per_condition")
        if "sweeps" in d:
            sweeps = []
            for s in d["sweeps"]:
                try:
                    sweeps.append(Factor(str(s).lower()).value)
                except ValueError:
                    raise ConfigError(f"invalid sweep {s!r}; expected one of "
                                      f"{[f.value for f in Factor]}") from None
            # fixed order regardless of how the file lists them
            kw["sweeps"] = tuple(f.value for f in Factor if f.value in sweeps)
        if "methods" in d:
            kw["methods"] = tuple(_method_from(m) for m in d["methods"])
        trial = dict(d.get("trial") or {})
        for k in ("dt", "time_limit", "goal_tolerance"):
            if k in d:
                trial[k] = d[k]
        for k, v in trial.items():
            if k not in ("dt", "time_limit", "goal_tolerance"):
                raise ConfigError(f"unknown trial setting {k!r}")
            try:
                kw[k] = float(v)
            except (TypeError, ValueError):
                raise ConfigError(f"{k} must be a number") from None
        if "policy_params" in d:
            pp = d["policy_params"] or {}
            try:
                kw["policy_params"] = PolicyParams.from_dict(pp)
            except (TypeError, ValueError) as e:
                raise ConfigError(f"bad policy_params: {e}") from None
        if "output_dir" in d:
            kw["output_dir"] = str(d["output_dir"])
        if "workers" in d:
            w = d["workers"]
            kw["workers"] = w if w == "auto" else _int(w, "workers")
        return cls(**kw)

    def to_dict(self) -> dict:
        return {
            "experiment_seed": self.experiment_seed,
            "trials_per_condition": self.trials_per_condition,
            "sweeps": list(self.sweeps),
            "methods": [m.to_dict(self.policy_params) for m in self.methods],
            "trial": {"dt": self.dt, "time_limit": self.time_limit, "goal_tolerance": self.goal_tolerance},
            "policy_params": self.policy_params.to_dict(),
            "output_dir": self.output_dir,
            "workers": self.workers,
        }

    def method(self, name: str) -> MethodSpec:
        name = normalize_method(name)
        for m in self.methods:
            if m.name == name:
                return m
        raise ConfigError(f"method {name!r} is not part of this experiment")

    def trial_config(self, method: str) -> TrialConfig:
        spec = next((m for m in self.methods if m.name == method), MethodSpec(method))
        return TrialConfig(dt=self.dt, time_limit=self.time_limit, goal_tolerance=self.goal_tolerance,
                           ego_policy=method, params=spec.trial_params(self.policy_params))

    def conditions(self) -> list[SweepCondition]:
        out = []
        for s in self.sweeps:
            out.extend(factor_conditions(s))
        return out

    def n_workers(self) -> int:
        return (os.cpu_count() or 1) if self.workers == "auto" else int(self.workers)


def _int(v, name: str) -> int:
    if isinstance(v, bool) or not isinstance(v, (int, float)) or int(v) != v:
        raise ConfigError(f"{name} must be an integer")
    return int(v)


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"config {path} is not valid JSON: {e}") from None
    return ExperimentConfig.from_dict(data)


def resolve_output_dir(cfg: ExperimentConfig) -> Path:
    return Path(os.environ.get(OUTPUT_DIR_ENV) or cfg.output_dir)


# -- trials -------------------------------------------------------------------

def scenario_seed(experiment_seed: int, cond: SweepCondition, trial: int) -> int:
    return derive_seed(experiment_seed, cond.index, trial)


def sim_seed(seed: int, method: str) -> int:
    return derive_seed(seed, zlib.crc32(method.encode()))


@dataclass(frozen=True)
class TrialRow:
    condition_id: str
    factor: str
    level_index: int
    level: str
    method: str
    trial_id: int
    seed: int
    sim_seed: int
    scenario_hash: str
    outcome: str
    time_to_goal: float | None
    min_agent_distance: float | None
    path_irregularity: float | None
    steps: int

    def cells(self) -> list[str]:
        return [self.condition_id, self.factor, str(self.level_index), self.level, self.method,
                str(self.trial_id), str(self.seed), str(self.sim_seed), self.scenario_hash,
                self.outcome, _fmt(self.time_to_goal), _fmt(self.min_agent_distance),
                _fmt(self.path_irregularity), str(self.steps)]

    @classmethod
    def from_cells(cls, r: dict) -> "TrialRow":
        return cls(r["condition_id"], r["factor"], int(r["level_index"]), r["level"], r["method"],
                   int(r["trial_id"]), int(r["seed"]), int(r["sim_seed"]), r["scenario_hash"],
                   r["outcome"], _parse(r["time_to_goal"]), _parse(r["min_distance"]),
                   _parse(r["path_irregularity"]), int(r["steps"]))


def _fmt(x: float | None) -> str:
    return "" if x is None else repr(float(x))


def _parse(s: str) -> float | None:
    return None if s == "" else float(s)


def _run_one(cfg: ExperimentConfig, cond: SweepCondition, trial: int, sc, method: str):
    s = sim_seed(sc.seed, method)
    result = run_trial(sc, cfg.trial_config(method), s)
    return s, result


def run_condition_trial(cfg: ExperimentConfig, cond: SweepCondition, trial: int) -> list[TrialRow]:
    seed = scenario_seed(cfg.experiment_seed, cond, trial)
    sc = sample_scenario(cond, seed)
    h = sc.hash()
    rows = []
    for m in cfg.methods:
        s, r = _run_one(cfg, cond, trial, sc, m.name)
        rows.append(TrialRow(cond.name, cond.factor.value, cond.level_index, cond.level_label, m.name,
                             trial, seed, s, h, r.outcome.value, r.time_to_goal,
                             r.min_agent_distance, r.path_irregularity, r.steps))
    return rows


def _run_chunk(cfg: ExperimentConfig, tasks: list[tuple[str, int]]) -> list[TrialRow]:
    out = []
    for name, trial in tasks:
        out.extend(run_condition_trial(cfg, parse_condition(name), trial))
    return out


def _sort_key(cfg: ExperimentConfig):
    cond_order = {c.name: i for i, c in enumerate(all_conditions())}
    method_order = {m.name: i for i, m in enumerate(cfg.methods)}
    return lambda r: (cond_order[r.condition_id], method_order[r.method], r.trial_id)


def run_rows(cfg: ExperimentConfig, workers: int | None = None, progress=None) -> list[TrialRow]:
    tasks = [(c.name, k) for c in cfg.conditions() for k in range(cfg.trials_per_condition)]
    workers = workers or cfg.n_workers()
    rows: list[TrialRow] = []
    if workers <= 1:
        for i, (name, k) in enumerate(tasks):
            rows.extend(_run_chunk(cfg, [(name, k)]))
            if progress:
                progress(i + 1, len(tasks))
    else:
        size = max(1, min(16, len(tasks) // (4 * workers) or 1))
        chunks = [tasks[i:i + size] for i in range(0, len(tasks), size)]
        done = 0
        with ProcessPoolExecutor(max_workers=workers) as ex:
            for part, chunk in zip(ex.map(_run_chunk, [cfg] * len(chunks), chunks), chunks):
                rows.extend(part)
                done += len(chunk)
                if progress:
                    progress(done, len(tasks))
    rows.sort(key=_sort_key(cfg))
    expected = len(tasks) * len(cfg.methods)
    if len(rows) != expected:
        raise InvariantError(f"expected {expected} trial rows, got {len(rows)}")
    return rows


# -- persistence --------------------------------------------------------------

def trials_csv(rows: list[TrialRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRIAL_COLUMNS)
    for r in rows:
        w.writerow(r.cells())
    return buf.getvalue()


def read_trials_csv(path) -> list[TrialRow]:
    with open(path, newline="") as fh:
        return [TrialRow.from_cells(r) for r in csv.DictReader(fh)]


def summarize(rows: list[TrialRow], cfg: ExperimentConfig) -> dict:
    groups: dict[tuple[str, str], list[TrialRow]] = {}
    for r in rows:
        groups.setdefault((r.condition_id, r.method), []).append(r)
    conditions = []
    for cond in cfg.conditions():
        methods = {m.name: aggregate(groups[(cond.name, m.name)])
                   for m in cfg.methods if (cond.name, m.name) in groups}
        if not methods:
            continue
        conditions.append({"condition_id": cond.name, "factor": cond.factor.value,
                           "level_index": cond.level_index, "level": cond.level_label,
                           "methods": methods})
    return {"format_version": FORMAT_VERSION, "conventions": CONVENTIONS,
            "experiment_seed": cfg.experiment_seed, "trials_per_condition": cfg.trials_per_condition,
            "methods": [m.name for m in cfg.methods], "conditions": conditions}


def correlations_from_summary(summary: dict) -> dict:
    try:
        conditions = summary["conditions"]
        factors = []
        for c in conditions:
            if c["factor"] not in factors:
                factors.append(c["factor"])
        factors = [f.value for f in Factor if f.value in factors]
        reports = []
        for f in factors:
            entries = [{"method": m, "level_index": c["level_index"], "summary": s}
                       for c in conditions if c["factor"] == f for m, s in c["methods"].items()]
            for metric in METRICS:
                reports.append(correlate_experiment(entries, f, metric).to_dict())
    except (KeyError, TypeError, AttributeError) as e:
        raise ValueError(f"corrupt summary: {e!r}") from None
    return {"format_version": FORMAT_VERSION, "scheme": SCHEME, "reports": reports}


def plot_tables(summary: dict) -> dict[str, str]:
    """``{"<factor>_<metric>.csv": text}`` with columns level, method, mean, std."""
    out = {}
    factors = [f.value for f in Factor if any(c["factor"] == f.value for c in summary["conditions"])]
    for f in factors:
        conds = [c for c in summary["conditions"] if c["factor"] == f]
        for metric in METRICS:
            buf = io.StringIO()
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(("level", "method", "mean", "std"))
            for c in conds:
                for m, s in c["methods"].items():
                    block = s.get(metric)
                    w.writerow((c["level"], m, "" if block is None else repr(block["mean"]),
                                "" if block is None else repr(block["std"])))
            out[f"{f}_{metric}.csv"] = buf.getvalue()
    return out


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def resolved_config(cfg: ExperimentConfig) -> dict:
    d = cfg.to_dict()
    d["format_version"] = FORMAT_VERSION
    d["package_version"] = __version__
    d["conventions"] = CONVENTIONS
    d["calibration"] = CALIBRATION
    return d


def write_outputs(out: Path, cfg: ExperimentConfig, rows: list[TrialRow]) -> dict:
    summary = summarize(rows, cfg)
    out.mkdir(parents=True, exist_ok=True)
    (out / "plotdata").mkdir(exist_ok=True)
    (out / "trials.csv").write_text(trials_csv(rows))
    (out / "summary.json").write_text(_dump(summary))
    (out / "correlations.json").write_text(_dump(correlations_from_summary(summary)))
    (out / "resolved_config.json").write_text(_dump(resolved_config(cfg)))
    for name, text in plot_tables(summary).items():
        (out / "plotdata" / name).write_text(text)
    return summary


def run_experiments(cfg: ExperimentConfig, out_dir=None, workers: int | None = None,
                    progress=None) -> Path:
    out = Path(out_dir) if out_dir is not None else resolve_output_dir(cfg)
    out.mkdir(parents=True, exist_ok=True)
    if not os.access(out, os.W_OK):
        raise PermissionError(f"output directory {out} is not writable")
    rows = run_rows(cfg, workers, progress)
    write_outputs(out, cfg, rows)
    return out


def analyze(results_dir) -> dict:
    """Rebuild correlations.json from summary.json alone."""
    path = Path(results_dir) / "summary.json"
    if not path.is_file():
        raise FileNotFoundError(f"no summary.json in {results_dir}")
    try:
        summary = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ValueError(f"corrupt summary {path}: {e}") from None
    if not isinstance(summary, dict) or not summary.get("conditions"):
        raise ValueError(f"summary {path} holds no conditions")
    corr = correlations_from_summary(summary)
    (Path(results_dir) / "correlations.json").write_text(_dump(corr))
    return corr


def load_results_config(results_dir) -> ExperimentConfig:
    path = Path(results_dir) / "resolved_config.json"
    if not path.is_file():
        raise FileNotFoundError(f"no resolved_config.json in {results_dir}")
    return ExperimentConfig.from_dict(json.loads(path.read_text()))


def replay(results_dir, condition: str, method: str, trial: int):
    """Re-run one recorded trial. Returns ``(row, result)``.

    The scenario is rebuilt from the recorded seed and must hash to the
    recorded value, and the outcome and metrics must match the row.
    """
    cfg = load_results_config(results_dir)
    method = normalize_method(method)
    try:
        cond = parse_condition(condition)
    except ValueError as e:
        raise KeyError(str(e)) from None
    rows = read_trials_csv(Path(results_dir) / "trials.csv")
    match = [r for r in rows if r.condition_id == cond.name and r.method == method
             and r.trial_id == int(trial)]
    if not match:
        raise KeyError(f"no trial {condition}/{method}/{trial} in {results_dir}")
    row = match[0]
    sc = sample_scenario(cond, row.seed)
    if sc.hash() != row.scenario_hash:
        raise InvariantError(f"scenario hash mismatch for {condition}/{method}/{trial}: "
                             f"recorded {row.scenario_hash}, regenerated {sc.hash()}")
    result = run_trial(sc, cfg.trial_config(method), row.sim_seed)
    if (result.outcome.value != row.outcome or result.steps != row.steps
            or not _same(result.min_agent_distance, row.min_agent_distance)
            or not _same(result.path_irregularity, row.path_irregularity)):
        raise InvariantError(f"replay of {condition}/{method}/{trial} does not reproduce the record")
    return row, result


def _same(a, b) -> bool:
    if a is None or b is None:
        return a is None and b is None
    return float(a) == float(b) or (math.isnan(a) and math.isnan(b))


def replay_csv(results_dir, condition: str, method: str, trial: int) -> str:
    _, result = replay(results_dir, condition, method, trial)
    buf = io.StringIO()
    write_trajectory_csv(buf, result)
    return buf.getvalue()


# -- calibration --------------------------------------------------------------

def calibration_gate(params: PolicyParams | None = None, trials: int = 100,
                     experiment_seed: int = 0) -> dict[str, float]:
    """Ego success of SFM among SFM humans and ORCA among ORCA humans (base density)."""
    params = params or PolicyParams()
    cfg = ExperimentConfig(experiment_seed=experiment_seed, policy_params=params,
                           methods=(MethodSpec("sfm"), MethodSpec("orca")))
    rates = {}
    for method, cond_name in CALIBRATION["conditions"].items():
        cond = parse_condition(cond_name)
        ok = 0
        for k in range(trials):
            sc = sample_scenario(cond, scenario_seed(experiment_seed, cond, k))
            _, r = _run_one(cfg, cond, k, sc, method)
            ok += r.outcome.value == "success"
        rates[method] = ok / trials
    return rates


def calibrate_sfm(grid: dict | None = None, trials: int = CALIBRATION["trials"],
                  experiment_seed: int = CALIBRATION["experiment_seed"]) -> tuple[SfmParams, float]:
    """Grid-search the SFM repulsion for the best SFM ego success among SFM humans.

    Ties go to the mildest setting. Returns the chosen parameters and their
    success rate; compare the rate against ``CALIBRATION["threshold"]``.
    """
    grid = grid or CALIBRATION["grid"]
    base = PolicyParams()
    cond = parse_condition(CALIBRATION["conditions"]["sfm"])
    scenarios = [sample_scenario(cond, scenario_seed(experiment_seed, cond, k)) for k in range(trials)]
    best = None
    for a in sorted(grid["agent_strength"]):
        for b in sorted(grid["agent_range"]):
            for tau in sorted(grid["tau"]):
                sfm = replace(base.sfm, agent_strength=a, agent_range=b, tau=tau)
                cfg = ExperimentConfig(policy_params=replace(base, sfm=sfm), methods=(MethodSpec("sfm"),))
                ok = sum(_run_one(cfg, cond, k, sc, "sfm")[1].outcome.value == "success"
                         for k, sc in enumerate(scenarios))
                if best is None or ok / trials > best[1]:
                    best = (sfm, ok / trials)
    return best
