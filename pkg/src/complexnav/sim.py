"""Fixed-timestep synchronous simulation of one trial.

Every step all agents decide against the same pre-step snapshot, commands go
through the wall clamp, positions are integrated, and humans that reached
their current goal move on to the next one in their precomputed sequence.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import metrics
from .policies.basic import preferred_velocities
from .policies.orca import OrcaParams, orca_batch
from .policies.reactive import build_action_space, select_action
from .policies.sfm import SfmParams, sfm_batch
from .policies.state import AgentState, WorldSnapshot
from .predictive import MPC_DEFAULTS, MPPI_DEFAULTS, CostParams, MppiController, mpc_cv_action
from .scenario import Scenario
from .world import Workspace, clamp_all

HUMAN_POLICIES = ("orca", "sfm", "cv", "static")
EGO_POLICIES = ("cv", "static", "sfm", "orca", "rp", "mpc_cv", "mppi_cv")

TRAJECTORY_COLUMNS = ("step", "time", "agent_id", "x", "y", "vx", "vy", "policy_tag")


class Outcome(str, Enum):
    SUCCESS = "success"
    COLLISION = "collision"
    TIMEOUT = "timeout"


@dataclass(frozen=True)
class PolicyParams:
    sfm: SfmParams = SfmParams()
    orca: OrcaParams = OrcaParams()
    mpc: CostParams = MPC_DEFAULTS
    mppi: CostParams = MPPI_DEFAULTS

    def to_dict(self) -> dict:
        return {"sfm": self.sfm.to_dict(), "orca": self.orca.to_dict(),
                "mpc_cv": self.mpc.to_dict(), "mppi_cv": self.mppi.to_dict()}

    @classmethod
    def from_dict(cls, d: dict | None) -> "PolicyParams":
        d = d or {}
        return cls(
            sfm=SfmParams(**d.get("sfm", {})),
            orca=OrcaParams(**d.get("orca", {})),
            mpc=CostParams(**{**MPC_DEFAULTS.to_dict(), **d.get("mpc_cv", {})}),
            mppi=CostParams(**{**MPPI_DEFAULTS.to_dict(), **d.get("mppi_cv", {})}),
        )


@dataclass(frozen=True)
class TrialConfig:
    dt: float = 0.25
    time_limit: float = 50.0
    goal_tolerance: float = 0.3
    ego_policy: str = "cv"
    params: PolicyParams = field(default_factory=PolicyParams)
    record_full_trajectories: bool = True

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.time_limit < self.dt:
            raise ValueError("time_limit must be at least one step")
        if self.ego_policy not in EGO_POLICIES:
            raise ValueError(f"unknown ego policy {self.ego_policy!r}; expected one of {EGO_POLICIES}")

    @property
    def max_steps(self) -> int:
        return int(math.ceil(self.time_limit / self.dt - 1e-9))

    def to_dict(self) -> dict:
        return {"dt": self.dt, "time_limit": self.time_limit, "goal_tolerance": self.goal_tolerance,
                "ego_policy": self.ego_policy, "record_full_trajectories": self.record_full_trajectories,
                "params": self.params.to_dict()}


@dataclass
class SimState:
    time: float
    positions: np.ndarray
    velocities: np.ndarray
    radii: np.ndarray
    v_pref: np.ndarray
    goal_sequences: np.ndarray  # (n_agents, G, 2); row 0 is the ego goal repeated
    goal_index: np.ndarray
    tags: tuple[str, ...]
    workspace: Workspace
    dt: float

    def current_goals(self) -> np.ndarray:
        g = self.goal_sequences.shape[1]
        return self.goal_sequences[np.arange(len(self.goal_index)), self.goal_index % g]

    def snapshot(self) -> WorldSnapshot:
        return WorldSnapshot(self.time, self.positions, self.velocities, self.radii,
                             self.workspace, self.dt)

    def agent(self, i: int) -> AgentState:
        return AgentState(self.positions[i].copy(), self.velocities[i].copy(), float(self.radii[i]),
                          self.current_goals()[i], float(self.v_pref[i]), self.tags[i], i)


def initial_state(sc: Scenario, ego_policy: str, dt: float) -> SimState:
    n = sc.n + 1
    g = sc.agent_goal_sequences.shape[1] if sc.n else 1
    goals = np.empty((n, g, 2))
    goals[0] = sc.ego_goal
    if sc.n:
        goals[1:] = sc.agent_goal_sequences
    positions = np.vstack([sc.ego_start[None, :], sc.agent_starts.reshape(-1, 2)])
    return SimState(
        time=0.0,
        positions=positions,
        velocities=np.zeros((n, 2)),
        radii=np.concatenate([[sc.ego_radius], sc.agent_radii]),
        v_pref=np.full(n, sc.v_pref),
        goal_sequences=goals,
        goal_index=np.zeros(n, dtype=np.int64),
        tags=(ego_policy,) + tuple(sc.agent_policies),
        workspace=sc.workspace,
        dt=dt,
    )


class Policies:
    """Evaluates every agent's policy for one trial; holds the ego's controller state."""

    def __init__(self, tags: tuple[str, ...], params: PolicyParams = PolicyParams()):
        self.tags = tags
        self.params = params
        arr = np.array(tags)
        self.groups = {t: np.flatnonzero(arr == t).astype(np.int64) for t in ("orca", "sfm", "cv")}
        self.ego = tags[0]
        self.moving = arr != "static"
        self._mppi = MppiController(params.mppi) if self.ego == "mppi_cv" else None
        self._actions = None
        if self.ego == "rp":
            self._actions = build_action_space(1.0).velocities()

    def __call__(self, state: SimState, rng: np.random.Generator) -> np.ndarray:
        pos, vel, radii = state.positions, state.velocities, state.radii
        ws, dt = state.workspace, state.dt
        goals = state.current_goals()
        pref = preferred_velocities(pos, goals, state.v_pref, dt)
        cmd = np.zeros_like(pos)
        idx = self.groups["cv"]
        cmd[idx] = pref[idx]
        idx = self.groups["orca"]
        if len(idx):
            o = self.params.orca
            cmd[idx] = orca_batch(idx, pos, vel, radii, pref[idx], state.v_pref[idx],
                                  o.neighbor_dist, o.time_horizon, dt, o.radius_margin)
        idx = self.groups["sfm"]
        if len(idx):
            s = self.params.sfm
            cmd[idx] = sfm_batch(idx, pos, vel, radii, goals[idx], state.v_pref[idx], dt,
                                 s.tau, s.agent_strength, s.agent_range, s.wall_strength,
                                 s.wall_range, s.max_force, ws.width, ws.length)
        if self.ego == "rp":
            actions = self._actions * state.v_pref[0]
            cmd[0] = select_action(pos[0], goals[0], radii[0], pos[1:], vel[1:], radii[1:], actions, dt)
        elif self.ego == "mpc_cv":
            cmd[0] = mpc_cv_action(state.agent(0), state.snapshot(), self.params.mpc, rng)
        elif self.ego == "mppi_cv":
            cmd[0] = self._mppi(state.agent(0), state.snapshot(), rng)
        return cmd


def step(state: SimState, policies: Policies, rng: np.random.Generator,
         goal_tolerance: float = 0.3) -> SimState:
    cmd = policies(state, rng)
    ws, dt = state.workspace, state.dt
    vel = clamp_all(state.positions, cmd, state.radii, dt, ws.width, ws.length)
    pos = state.positions + vel * dt
    goal_index = state.goal_index.copy()
    goals = state.current_goals()
    reached = np.hypot(*(pos - goals).T) <= goal_tolerance
    reached[0] = False  # the ego's goal ends the trial instead
    reached &= policies.moving
    goal_index[reached] += 1
    return SimState(state.time + dt, pos, vel, state.radii, state.v_pref, state.goal_sequences,
                    goal_index, state.tags, ws, dt)


@dataclass
class TrialResult:
    outcome: Outcome
    time_to_goal: float | None
    min_agent_distance: float | None
    path_irregularity: float | None
    steps: int
    times: np.ndarray
    positions: np.ndarray  # (T, n_agents, 2), ego first
    velocities: np.ndarray
    radii: np.ndarray
    tags: tuple[str, ...]
    ego_goal: np.ndarray

    @property
    def ego_trajectory(self) -> np.ndarray:
        return self.positions[:, 0, :]

    @property
    def agent_trajectories(self) -> np.ndarray:
        return self.positions[:, 1:, :]

    def trajectory_csv(self) -> str:
        buf = io.StringIO()
        write_trajectory_csv(buf, self)
        return buf.getvalue()


def run_trial(sc: Scenario, tc: TrialConfig, seed: int) -> TrialResult:
    rng = np.random.default_rng(seed)
    state = initial_state(sc, tc.ego_policy, tc.dt)
    policies = Policies(state.tags, tc.params)
    goal = sc.ego_goal
    r_sum = state.radii[0] + state.radii[1:]

    times = [state.time]
    positions = [state.positions]
    velocities = [state.velocities]
    outcome = Outcome.TIMEOUT
    time_to_goal = None
    min_gap = math.inf

    def gap_of(p):
        if len(r_sum) == 0:
            return math.inf
        return float((np.hypot(*(p[1:] - p[0]).T) - r_sum).min())

    min_gap = gap_of(state.positions)
    for _ in range(tc.max_steps):
        state = step(state, policies, rng, tc.goal_tolerance)
        times.append(state.time)
        positions.append(state.positions)
        velocities.append(state.velocities)
        gap = gap_of(state.positions)
        min_gap = min(min_gap, gap)
        if gap < 0.0:
            outcome = Outcome.COLLISION
            break
        if math.hypot(*(state.positions[0] - goal)) <= tc.goal_tolerance:
            outcome = Outcome.SUCCESS
            time_to_goal = state.time
            break

    pos_arr = np.stack(positions)
    irregularity = metrics.path_irregularity(pos_arr[:, 0, :], goal)
    return TrialResult(
        outcome=outcome,
        time_to_goal=time_to_goal,
        min_agent_distance=None if sc.n == 0 else min_gap,
        path_irregularity=irregularity,
        steps=len(times) - 1,
        times=np.asarray(times),
        positions=pos_arr,
        velocities=np.stack(velocities),
        radii=state.radii.copy(),
        tags=state.tags,
        ego_goal=np.asarray(goal, dtype=float),
    )


def write_trajectory_csv(fh, result: TrialResult) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(TRAJECTORY_COLUMNS)
    for k, t in enumerate(result.times):
        for i in range(result.positions.shape[1]):
            x, y = result.positions[k, i]
            vx, vy = result.velocities[k, i]
            w.writerow([k, repr(float(t)), i, repr(float(x)), repr(float(y)),
                        repr(float(vx)), repr(float(vy)), result.tags[i]])


def read_trajectory_csv(fh):
    """Parse a trajectory dump back into ``(times, positions, velocities, tags)``."""
    rows = list(csv.DictReader(fh))
    n_steps = max(int(r["step"]) for r in rows) + 1
    n_agents = max(int(r["agent_id"]) for r in rows) + 1
    times = np.zeros(n_steps)
    pos = np.zeros((n_steps, n_agents, 2))
    vel = np.zeros((n_steps, n_agents, 2))
    tags = [""] * n_agents
    for r in rows:
        k, i = int(r["step"]), int(r["agent_id"])
        times[k] = float(r["time"])
        pos[k, i] = float(r["x"]), float(r["y"])
        vel[k, i] = float(r["vx"]), float(r["vy"])
        tags[i] = r["policy_tag"]
    return times, pos, vel, tuple(tags)
