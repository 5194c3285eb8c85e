"""Workspace geometry, wall clearance and the shared wall-clamping rule.

The free region is the open rectangle ``(0, w) x (0, l)``; everything
outside it is obstacle. Every policy output goes through
:func:`clamp_action_to_walls` before integration.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np


@dataclass(frozen=True)
class Workspace:
    width: float
    length: float

    def __post_init__(self):
        if not (self.width > 0 and self.length > 0):
            raise ValueError(f"workspace dimensions must be positive, got {self.width}x{self.length}")

    @property
    def area(self) -> float:
        return self.width * self.length

    @property
    def center(self) -> np.ndarray:
        return np.array([self.width / 2.0, self.length / 2.0])

    def to_dict(self) -> dict:
        return {"w": self.width, "l": self.length}


@dataclass(frozen=True)
class Disc:
    center: tuple[float, float]
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("disc radius must be positive")

    @property
    def area(self) -> float:
        return math.pi * self.radius ** 2


@numba.njit(cache=True)
def _clearance(px, py, r, w, l):
    return min(px, w - px, py, l - py) - r


@numba.njit(cache=True)
def _clamp(px, py, vx, vy, r, dt, w, l):
    # per-axis: zero the component heading into a wall the next-step disc would cross
    nx = px + vx * dt
    ny = py + vy * dt
    if vx < 0.0 and nx - r < 0.0:
        vx = 0.0
    elif vx > 0.0 and nx + r > w:
        vx = 0.0
    if vy < 0.0 and ny - r < 0.0:
        vy = 0.0
    elif vy > 0.0 and ny + r > l:
        vy = 0.0
    return vx, vy


@numba.njit(cache=True)
def clamp_all(pos, vel, radii, dt, w, l):
    out = np.empty_like(vel)
    for i in range(pos.shape[0]):
        vx, vy = _clamp(pos[i, 0], pos[i, 1], vel[i, 0], vel[i, 1], radii[i], dt, w, l)
        out[i, 0] = vx
        out[i, 1] = vy
    return out


def wall_clearance(p, r: float, ws: Workspace) -> float:
    """Signed distance between a disc and the nearest wall (negative on overlap)."""
    return float(_clearance(float(p[0]), float(p[1]), float(r), ws.width, ws.length))


def clamp_action_to_walls(p, v, r: float, dt: float, ws: Workspace) -> np.ndarray:
    """Zero each velocity component that would push the disc through a wall in one step.

    Tangential components are kept, so an agent sliding along a wall keeps
    moving. Clamping an already clamped velocity is a no-op.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    vx, vy = _clamp(float(p[0]), float(p[1]), float(v[0]), float(v[1]), float(r), float(dt),
                    ws.width, ws.length)
    return np.array([vx, vy])


def discs_collide(a: Disc, b: Disc) -> bool:
    # strict: tangent discs are not in collision
    dx = a.center[0] - b.center[0]
    dy = a.center[1] - b.center[1]
    return math.hypot(dx, dy) < a.radius + b.radius
