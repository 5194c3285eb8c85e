"""Optimal reciprocal collision avoidance.

Each neighbour contributes one half-plane in velocity space; both agents of a
pair take half of the avoidance effort. Walls are not modelled here, the shared
wall clamp handles them.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numba
import numpy as np

from .basic import preferred_velocity
from .lp import solve_lines
from .state import AgentState, HalfPlane, WorldSnapshot


@dataclass(frozen=True)
class OrcaParams:
    neighbor_dist: float = 10.0
    time_horizon: float = 5.0
    radius_margin: float = 0.02

    def to_dict(self) -> dict:
        return asdict(self)


@numba.njit(cache=True)
def orca_lines(i, pos, vel, radii, neighbor_dist, tau, dt, margin):
    n = pos.shape[0]
    # neighbours sorted by distance, ties by index
    order = np.argsort(np.sqrt((pos[:, 0] - pos[i, 0]) ** 2 + (pos[:, 1] - pos[i, 1]) ** 2),
                       kind="mergesort")
    points = np.empty((n, 2))
    dirs = np.empty((n, 2))
    m = 0
    inv_tau = 1.0 / tau
    range_sq = neighbor_dist * neighbor_dist
    for k in range(n):
        j = order[k]
        if j == i:
            continue
        rpx = pos[j, 0] - pos[i, 0]
        rpy = pos[j, 1] - pos[i, 1]
        dist_sq = rpx * rpx + rpy * rpy
        if dist_sq > range_sq:
            break
        rvx = vel[i, 0] - vel[j, 0]
        rvy = vel[i, 1] - vel[j, 1]
        cr = radii[i] + radii[j] + margin
        cr_sq = cr * cr
        if dist_sq > cr_sq:
            wx = rvx - inv_tau * rpx
            wy = rvy - inv_tau * rpy
            w_sq = wx * wx + wy * wy
            dot1 = wx * rpx + wy * rpy
            if dot1 < 0.0 and dot1 * dot1 > cr_sq * w_sq:
                # closest point lies on the truncation circle
                wl = math.sqrt(w_sq)
                ux = wx / wl
                uy = wy / wl
                dx = uy
                dy = -ux
                scale = cr * inv_tau - wl
                u_x = scale * ux
                u_y = scale * uy
            else:
                leg = math.sqrt(dist_sq - cr_sq)
                if rpx * wy - rpy * wx > 0.0:
                    dx = (rpx * leg - rpy * cr) / dist_sq
                    dy = (rpx * cr + rpy * leg) / dist_sq
                else:
                    dx = -(rpx * leg + rpy * cr) / dist_sq
                    dy = -(-rpx * cr + rpy * leg) / dist_sq
                dot2 = rvx * dx + rvy * dy
                u_x = dot2 * dx - rvx
                u_y = dot2 * dy - rvy
        else:
            # already overlapping: resolve within one time step
            inv_dt = 1.0 / dt
            wx = rvx - inv_dt * rpx
            wy = rvy - inv_dt * rpy
            wl = math.sqrt(wx * wx + wy * wy)
            if wl < 1e-12:
                ux = 1.0 if i < j else -1.0
                uy = 0.0
                wl = 0.0
            else:
                ux = wx / wl
                uy = wy / wl
            dx = uy
            dy = -ux
            scale = cr * inv_dt - wl
            u_x = scale * ux
            u_y = scale * uy
        points[m, 0] = vel[i, 0] + 0.5 * u_x
        points[m, 1] = vel[i, 1] + 0.5 * u_y
        dirs[m, 0] = dx
        dirs[m, 1] = dy
        m += 1
    return points[:m], dirs[:m]


@numba.njit(cache=True)
def orca_batch(indices, pos, vel, radii, pref, v_max, neighbor_dist, tau, dt, margin):
    out = np.empty((indices.shape[0], 2))
    for k in range(indices.shape[0]):
        i = indices[k]
        points, dirs = orca_lines(i, pos, vel, radii, neighbor_dist, tau, dt, margin)
        vx, vy = solve_lines(points, dirs, points.shape[0], v_max[k], pref[k, 0], pref[k, 1])
        out[k, 0] = vx
        out[k, 1] = vy
    return out


def orca_halfplanes(agent: AgentState, snapshot: WorldSnapshot,
                    params: OrcaParams = OrcaParams()) -> list[HalfPlane]:
    points, dirs = orca_lines(agent.index, snapshot.positions, snapshot.velocities, snapshot.radii,
                              params.neighbor_dist, params.time_horizon, snapshot.dt,
                              params.radius_margin)
    return [HalfPlane(p.copy(), np.array([-d[1], d[0]])) for p, d in zip(points, dirs)]


def orca_action(agent: AgentState, snapshot: WorldSnapshot,
                params: OrcaParams = OrcaParams()) -> np.ndarray:
    pref = preferred_velocity(agent.position, agent.current_goal, agent.v_pref, snapshot.dt)
    out = orca_batch(np.array([agent.index]), snapshot.positions, snapshot.velocities,
                     snapshot.radii, pref.reshape(1, 2), np.array([agent.v_pref]),
                     params.neighbor_dist, params.time_horizon, snapshot.dt, params.radius_margin)
    return out[0]
