from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..world import Workspace


@dataclass(frozen=True)
class AgentState:
    """The deciding agent's own view of itself, goal included.

    ``index`` is this agent's row in the accompanying :class:`WorldSnapshot`.
    """

    position: np.ndarray
    velocity: np.ndarray
    radius: float
    current_goal: np.ndarray
    v_pref: float
    policy_tag: str
    index: int = 0


@dataclass(frozen=True)
class WorldSnapshot:
    """Kinematic state of every agent at one instant (row 0 is the ego).

    Only positions, velocities and radii are exposed; other agents' goals and
    policies are deliberately absent.
    """

    time: float
    positions: np.ndarray
    velocities: np.ndarray
    radii: np.ndarray
    workspace: Workspace
    dt: float

    @property
    def n_agents(self) -> int:
        return self.positions.shape[0]


def make_snapshot(positions, velocities, radii, workspace: Workspace, dt: float,
                  time: float = 0.0) -> WorldSnapshot:
    positions = np.ascontiguousarray(positions, dtype=float).reshape(-1, 2)
    velocities = np.ascontiguousarray(velocities, dtype=float).reshape(-1, 2)
    radii = np.broadcast_to(np.asarray(radii, dtype=float), (positions.shape[0],)).copy()
    return WorldSnapshot(float(time), positions, velocities, radii, workspace, float(dt))


def agent_from_snapshot(snapshot: WorldSnapshot, index: int, goal, v_pref: float,
                        policy_tag: str) -> AgentState:
    return AgentState(
        position=snapshot.positions[index].copy(),
        velocity=snapshot.velocities[index].copy(),
        radius=float(snapshot.radii[index]),
        current_goal=np.asarray(goal, dtype=float),
        v_pref=float(v_pref),
        policy_tag=policy_tag,
        index=index,
    )


@dataclass(frozen=True)
class HalfPlane:
    """Velocity-space constraint ``(v - point) . normal >= 0``."""

    point: np.ndarray
    normal: np.ndarray

    def __post_init__(self):
        if abs(float(np.hypot(*self.normal)) - 1.0) > 1e-9:
            raise ValueError("half-plane normal must be a unit vector")

    @property
    def direction(self) -> np.ndarray:
        # boundary direction with the feasible side on its left
        return np.array([self.normal[1], -self.normal[0]])

    def violation(self, v) -> float:
        return float(-np.dot(np.asarray(v) - self.point, self.normal))
