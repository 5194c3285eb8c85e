"""One-step lookahead planner over a discrete speed x heading action set."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .state import AgentState, WorldSnapshot

N_SPEEDS = 5
N_HEADINGS = 16


@dataclass(frozen=True)
class ActionSpace:
    speeds: np.ndarray
    headings: np.ndarray
    includes_stop: bool = True

    def velocities(self) -> np.ndarray:
        """All actions as an ``(m, 2)`` array; the stop action, if any, is row 0."""
        s, h = np.meshgrid(self.speeds, self.headings, indexing="ij")
        moving = np.stack([(s * np.cos(h)).ravel(), (s * np.sin(h)).ravel()], axis=1)
        if self.includes_stop:
            return np.vstack([np.zeros((1, 2)), moving])
        return moving

    def __len__(self) -> int:
        return len(self.speeds) * len(self.headings) + int(self.includes_stop)


def build_action_space(v_pref: float) -> ActionSpace:
    if not v_pref > 0:
        raise ValueError("v_pref must be positive")
    # exponentially spaced speeds, denser near zero
    speeds = np.array([(math.exp((i + 1) / N_SPEEDS) - 1) / (math.e - 1) * v_pref
                       for i in range(N_SPEEDS)])
    headings = np.linspace(0.0, 2 * math.pi, N_HEADINGS, endpoint=False)
    return ActionSpace(speeds, headings, True)


def select_action(position, goal, radius, others_pos, others_vel, others_r, actions, dt):
    nxt = position + actions * dt
    if len(others_pos):
        pred = others_pos + others_vel * dt
        gap = np.linalg.norm(nxt[:, None, :] - pred[None, :, :], axis=2)
        free = np.all(gap >= radius + others_r[None, :], axis=1)
    else:
        free = np.ones(len(actions), dtype=bool)
    if not free.any():
        return np.zeros(2)
    dist = np.linalg.norm(nxt - goal, axis=1)
    dist[~free] = np.inf
    return actions[int(np.argmin(dist))].copy()


def reactive_action(agent: AgentState, snapshot: WorldSnapshot,
                    space: ActionSpace | None = None) -> np.ndarray:
    """Pick the collision-free action whose next position is closest to the goal.

    Others are propagated one step at their current velocity. If every action
    collides, stop.
    """
    space = space or build_action_space(agent.v_pref)
    mask = np.arange(snapshot.n_agents) != agent.index
    return select_action(agent.position, agent.current_goal, agent.radius,
                         snapshot.positions[mask], snapshot.velocities[mask], snapshot.radii[mask],
                         space.velocities(), snapshot.dt)
