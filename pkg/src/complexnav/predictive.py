"""Sampling-based predictive controllers driven by motion predictions.

Both controllers score candidate control sequences with :func:`rollout_cost`
against open-loop predictions of the other agents. ``mpc_cv_action`` keeps the
single best random-shooting candidate; ``mppi_cv_action`` averages noisy
perturbations of a nominal sequence with exponential weights.

Predictors are pluggable: anything mapping ``(snapshot, horizon, ego_index)``
to a :class:`PredictionSet` can be registered under a name. Only ``"cv"``
ships with the package.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable

import numba
import numpy as np

from .policies.basic import _pref
from .policies.state import AgentState, WorldSnapshot
from .world import Workspace, _clamp


@dataclass(frozen=True)
class CostParams:
    goal_weight: float = 1.0
    collision_penalty: float = 1e4
    discomfort_weight: float = 5.0
    discomfort_buffer: float = 0.2
    smoothness_weight: float = 0.1
    temperature: float = 0.5
    samples: int = 500
    noise_scale: float = 0.5
    horizon: int = 8

    def __post_init__(self):
        weights = (self.goal_weight, self.collision_penalty, self.discomfort_weight,
                   self.discomfort_buffer, self.smoothness_weight, self.noise_scale)
        if min(weights) < 0:
            raise ValueError("cost weights must be non-negative")
        if self.samples < 1 or self.horizon < 1:
            raise ValueError("samples and horizon must be >= 1")
        if not self.temperature > 0:
            raise ValueError("temperature must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


MPC_DEFAULTS = CostParams(samples=500)
MPPI_DEFAULTS = CostParams(samples=400)


@dataclass(frozen=True)
class PredictionSet:
    horizon: int
    positions: np.ndarray  # (n_agents, horizon, 2)
    radii: np.ndarray
    agent_ids: tuple[int, ...] = ()

    def __len__(self) -> int:
        return self.positions.shape[0]


def predict_cv(snapshot: WorldSnapshot, horizon: int, ego_index: int = 0) -> PredictionSet:
    """Constant-velocity extrapolation of every non-ego agent; walls are ignored."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    mask = np.arange(snapshot.n_agents) != ego_index
    pos = snapshot.positions[mask]
    vel = snapshot.velocities[mask]
    steps = np.arange(1, horizon + 1, dtype=float)[None, :, None] * snapshot.dt
    preds = pos[:, None, :] + steps * vel[:, None, :]
    ids = tuple(int(i) for i in np.flatnonzero(mask))
    return PredictionSet(horizon, preds.reshape(len(ids), horizon, 2), snapshot.radii[mask].copy(), ids)


Predictor = Callable[[WorldSnapshot, int, int], PredictionSet]
_PREDICTORS: dict[str, Predictor] = {"cv": predict_cv}


def register_predictor(name: str, fn: Predictor) -> None:
    _PREDICTORS[name] = fn


def get_predictor(name: str) -> Predictor:
    try:
        return _PREDICTORS[name]
    except KeyError:
        raise KeyError(f"no predictor registered as {name!r}; known: {sorted(_PREDICTORS)}") from None


@numba.njit(cache=True)
def rollout_costs(px0, py0, vx0, vy0, controls, preds, radii, r_ego, gx, gy,
                  w_g, c_col, w_d, buf, w_s, dt, w, l):
    n_samples = controls.shape[0]
    horizon = controls.shape[1]
    n_agents = preds.shape[0]
    out = np.empty(n_samples)
    for k in range(n_samples):
        px = px0
        py = py0
        prev_x = vx0
        prev_y = vy0
        cost = 0.0
        for h in range(horizon):
            ux = controls[k, h, 0]
            uy = controls[k, h, 1]
            cx, cy = _clamp(px, py, ux, uy, r_ego, dt, w, l)
            px += cx * dt
            py += cy * dt
            cost += w_g * math.sqrt((px - gx) ** 2 + (py - gy) ** 2)
            for j in range(n_agents):
                d = math.sqrt((px - preds[j, h, 0]) ** 2 + (py - preds[j, h, 1]) ** 2)
                rs = r_ego + radii[j]
                if d < rs:
                    cost += c_col
                elif d - rs < buf:
                    cost += w_d * (buf - (d - rs))
            cost += w_s * ((ux - prev_x) ** 2 + (uy - prev_y) ** 2)
            prev_x = ux
            prev_y = uy
        out[k] = cost
    return out


def _batch_costs(ego: AgentState, controls: np.ndarray, preds: PredictionSet, cp: CostParams,
                 ws: Workspace, dt: float) -> np.ndarray:
    if controls.shape[1] != preds.horizon:
        raise ValueError("control length must match the prediction horizon")
    return rollout_costs(float(ego.position[0]), float(ego.position[1]),
                         float(ego.velocity[0]), float(ego.velocity[1]),
                         np.ascontiguousarray(controls, dtype=float),
                         np.ascontiguousarray(preds.positions, dtype=float).reshape(-1, preds.horizon, 2),
                         np.ascontiguousarray(preds.radii, dtype=float),
                         float(ego.radius), float(ego.current_goal[0]), float(ego.current_goal[1]),
                         cp.goal_weight, cp.collision_penalty, cp.discomfort_weight,
                         cp.discomfort_buffer, cp.smoothness_weight, float(dt), ws.width, ws.length)


def rollout_cost(ego: AgentState, u, preds: PredictionSet, cp: CostParams, ws: Workspace,
                 dt: float) -> float:
    """Cost of driving the ego with controls ``u`` (shape ``(H, 2)``) against ``preds``.

    Per step: distance to goal, a flat penalty for overlapping a predicted
    disc or a linear one inside the discomfort buffer, and a squared
    control-change term (the first change is measured from the current velocity).
    """
    u = np.asarray(u, dtype=float)
    return float(_batch_costs(ego, u[None], preds, cp, ws, dt)[0])


@numba.njit(cache=True)
def cv_sequence(px, py, gx, gy, v_pref, r, horizon, dt, w, l):
    out = np.empty((horizon, 2))
    for h in range(horizon):
        ux, uy = _pref(px, py, gx, gy, v_pref, dt)
        out[h, 0] = ux
        out[h, 1] = uy
        cx, cy = _clamp(px, py, ux, uy, r, dt, w, l)
        px += cx * dt
        py += cy * dt
    return out


def straight_sequence(ego: AgentState, horizon: int, ws: Workspace, dt: float) -> np.ndarray:
    return cv_sequence(float(ego.position[0]), float(ego.position[1]),
                       float(ego.current_goal[0]), float(ego.current_goal[1]),
                       float(ego.v_pref), float(ego.radius), horizon, float(dt), ws.width, ws.length)


def clip_speed(u: np.ndarray, v_max: float) -> np.ndarray:
    speed = np.linalg.norm(u, axis=-1, keepdims=True)
    scale = np.where(speed > v_max, v_max / np.maximum(speed, 1e-300), 1.0)
    return u * scale


def _random_piecewise(n: int, horizon: int, v_pref: float, rng: np.random.Generator) -> np.ndarray:
    # two constant pieces per candidate, switching at a random step
    headings = rng.uniform(0.0, 2 * math.pi, size=(n, 2))
    speeds = rng.uniform(0.0, v_pref, size=(n, 2))
    switch = rng.integers(1, horizon, size=n) if horizon > 1 else np.ones(n, dtype=int)
    piece = (np.arange(horizon)[None, :] >= switch[:, None]).astype(int)
    h = np.take_along_axis(headings, piece, axis=1)
    s = np.take_along_axis(speeds, piece, axis=1)
    return np.stack([s * np.cos(h), s * np.sin(h)], axis=2)


def mpc_candidates(ego: AgentState, cp: CostParams, ws: Workspace, dt: float,
                   rng: np.random.Generator) -> np.ndarray:
    first = straight_sequence(ego, cp.horizon, ws, dt)[None]
    rest = _random_piecewise(cp.samples - 1, cp.horizon, ego.v_pref, rng)
    return np.concatenate([first, rest], axis=0)


def mpc_cv_action(ego: AgentState, snapshot: WorldSnapshot, cp: CostParams = MPC_DEFAULTS,
                  rng: np.random.Generator | None = None, predictor: str = "cv") -> np.ndarray:
    """Random-shooting MPC: return the first command of the cheapest candidate."""
    rng = rng if rng is not None else np.random.default_rng(0)
    preds = get_predictor(predictor)(snapshot, cp.horizon, ego.index)
    candidates = mpc_candidates(ego, cp, snapshot.workspace, snapshot.dt, rng)
    costs = _batch_costs(ego, candidates, preds, cp, snapshot.workspace, snapshot.dt)
    return candidates[int(np.argmin(costs)), 0].copy()


def mppi_weights(costs, temperature: float) -> np.ndarray:
    costs = np.asarray(costs, dtype=float)
    return np.exp(-(costs - costs.min()) / temperature)


def mppi_cv_action(ego: AgentState, snapshot: WorldSnapshot, cp: CostParams = MPPI_DEFAULTS,
                   nominal: np.ndarray | None = None, rng: np.random.Generator | None = None,
                   predictor: str = "cv") -> tuple[np.ndarray, np.ndarray]:
    """One MPPI update. Returns ``(command, shifted_nominal)``.

    The shifted nominal drops the executed command and repeats the last one,
    ready to warm-start the next call.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    ws, dt = snapshot.workspace, snapshot.dt
    if nominal is None:
        nominal = straight_sequence(ego, cp.horizon, ws, dt)
    nominal = np.asarray(nominal, dtype=float)
    preds = get_predictor(predictor)(snapshot, cp.horizon, ego.index)
    noise = rng.normal(0.0, 1.0, size=(cp.samples, cp.horizon, 2)) * cp.noise_scale
    samples = clip_speed(nominal[None] + noise, ego.v_pref)
    costs = _batch_costs(ego, samples, preds, cp, ws, dt)
    weights = mppi_weights(costs, cp.temperature)
    updated = np.tensordot(weights, samples, axes=(0, 0)) / weights.sum()
    updated = clip_speed(updated, ego.v_pref)
    command = updated[0].copy()
    shifted = np.concatenate([updated[1:], updated[-1:]], axis=0)
    return command, shifted


class MppiController:
    """Keeps the warm-started nominal sequence between calls within one trial."""

    def __init__(self, cp: CostParams = MPPI_DEFAULTS, predictor: str = "cv"):
        self.cp = cp
        self.predictor = predictor
        self.nominal: np.ndarray | None = None

    def reset(self) -> None:
        self.nominal = None

    def __call__(self, ego: AgentState, snapshot: WorldSnapshot, rng: np.random.Generator) -> np.ndarray:
        command, self.nominal = mppi_cv_action(ego, snapshot, self.cp, self.nominal, rng, self.predictor)
        return command

