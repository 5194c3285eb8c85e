"""Social force model: goal attraction plus exponential agent and wall repulsion."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numba
import numpy as np

from .state import AgentState, WorldSnapshot

COINCIDENT_EPS = 1e-9


@dataclass(frozen=True)
class SfmParams:
    tau: float = 0.5
    agent_strength: float = 5.0
    agent_range: float = 0.3
    wall_strength: float = 5.0
    wall_range: float = 0.2
    max_force: float = 10.0

    def to_dict(self) -> dict:
        return asdict(self)


@numba.njit(cache=True)
def _pair_angle(a, b):
    # deterministic direction for coincident centres, from the unordered pair
    lo = min(a, b)
    hi = max(a, b)
    h = (lo * 73856093) ^ (hi * 19349663)
    h = h % 3600
    return 2.0 * math.pi * h / 3600.0


@numba.njit(cache=True)
def sfm_force_kernel(i, pos, vel, radii, gx, gy, v_pref, tau, a, b, a_w, b_w, f_max, w, l):
    px = pos[i, 0]
    py = pos[i, 1]
    dx = gx - px
    dy = gy - py
    dist = math.sqrt(dx * dx + dy * dy)
    ex = 0.0
    ey = 0.0
    if dist > COINCIDENT_EPS:
        ex = dx / dist
        ey = dy / dist
    fx = (v_pref * ex - vel[i, 0]) / tau
    fy = (v_pref * ey - vel[i, 1]) / tau
    ri = radii[i]
    for j in range(pos.shape[0]):
        if j == i:
            continue
        rx = px - pos[j, 0]
        ry = py - pos[j, 1]
        d = math.sqrt(rx * rx + ry * ry)
        if d < COINCIDENT_EPS:
            ang = _pair_angle(i, j)
            sgn = 1.0 if i < j else -1.0
            nx = sgn * math.cos(ang)
            ny = sgn * math.sin(ang)
        else:
            nx = rx / d
            ny = ry / d
        mag = min(a * math.exp((ri + radii[j] - d) / b), f_max)
        fx += mag * nx
        fy += mag * ny
    # walls: left, right, bottom, top with inward normals
    mag = min(a_w * math.exp((ri - px) / b_w), f_max)
    fx += mag
    mag = min(a_w * math.exp((ri - (w - px)) / b_w), f_max)
    fx -= mag
    mag = min(a_w * math.exp((ri - py) / b_w), f_max)
    fy += mag
    mag = min(a_w * math.exp((ri - (l - py)) / b_w), f_max)
    fy -= mag
    return fx, fy


@numba.njit(cache=True)
def sfm_batch(indices, pos, vel, radii, goals, v_pref, dt, tau, a, b, a_w, b_w, f_max, w, l):
    out = np.empty((indices.shape[0], 2))
    for k in range(indices.shape[0]):
        i = indices[k]
        fx, fy = sfm_force_kernel(i, pos, vel, radii, goals[k, 0], goals[k, 1], v_pref[k],
                                  tau, a, b, a_w, b_w, f_max, w, l)
        vx = vel[i, 0] + dt * fx
        vy = vel[i, 1] + dt * fy
        speed = math.sqrt(vx * vx + vy * vy)
        if speed > v_pref[k]:
            vx *= v_pref[k] / speed
            vy *= v_pref[k] / speed
        out[k, 0] = vx
        out[k, 1] = vy
    return out


def _args(p: SfmParams):
    return (p.tau, p.agent_strength, p.agent_range, p.wall_strength, p.wall_range, p.max_force)


def sfm_force(agent: AgentState, snapshot: WorldSnapshot, params: SfmParams = SfmParams()) -> np.ndarray:
    ws = snapshot.workspace
    fx, fy = sfm_force_kernel(agent.index, snapshot.positions, snapshot.velocities, snapshot.radii,
                              float(agent.current_goal[0]), float(agent.current_goal[1]),
                              agent.v_pref, *_args(params), ws.width, ws.length)
    return np.array([fx, fy])


def sfm_action(agent: AgentState, snapshot: WorldSnapshot, params: SfmParams = SfmParams()) -> np.ndarray:
    """One explicit Euler velocity update under the total social force, speed-capped at ``v_pref``."""
    ws = snapshot.workspace
    out = sfm_batch(np.array([agent.index]), snapshot.positions, snapshot.velocities,
                    snapshot.radii, np.asarray(agent.current_goal, dtype=float).reshape(1, 2),
                    np.array([agent.v_pref]), snapshot.dt, *_args(params), ws.width, ws.length)
    return out[0]
