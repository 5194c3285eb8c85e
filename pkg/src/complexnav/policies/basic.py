"""Goal-seeking primitives: constant velocity and static agents."""
from __future__ import annotations

import math

import numba
import numpy as np

from .state import AgentState

AT_GOAL_EPS = 1e-9


@numba.njit(cache=True)
def _pref(px, py, gx, gy, v_pref, dt):
    dx = gx - px
    dy = gy - py
    dist = math.sqrt(dx * dx + dy * dy)
    if dist <= AT_GOAL_EPS:
        return 0.0, 0.0
    # slow down so the last step lands on the goal instead of overshooting
    speed = min(v_pref, dist / dt)
    return dx / dist * speed, dy / dist * speed


@numba.njit(cache=True)
def preferred_velocities(pos, goals, v_pref, dt):
    out = np.empty_like(pos)
    for i in range(pos.shape[0]):
        out[i, 0], out[i, 1] = _pref(pos[i, 0], pos[i, 1], goals[i, 0], goals[i, 1], v_pref[i], dt)
    return out


def preferred_velocity(position, goal, v_pref: float, dt: float) -> np.ndarray:
    vx, vy = _pref(float(position[0]), float(position[1]), float(goal[0]), float(goal[1]),
                   float(v_pref), float(dt))
    return np.array([vx, vy])


def cv_action(agent: AgentState, dt: float) -> np.ndarray:
    """Head straight for the current goal at ``v_pref``, ignoring everyone else."""
    return preferred_velocity(agent.position, agent.current_goal, agent.v_pref, dt)


def static_action(agent: AgentState, dt: float) -> np.ndarray:
    return np.zeros(2)
