"""Reactive navigation policies. Each maps an agent and a world snapshot to a velocity."""
from .basic import cv_action, preferred_velocity, static_action
from .lp import solve_lp2, solve_min_violation
from .orca import OrcaParams, orca_action, orca_halfplanes
from .reactive import ActionSpace, build_action_space, reactive_action
from .sfm import SfmParams, sfm_action, sfm_force
from .state import AgentState, HalfPlane, WorldSnapshot, agent_from_snapshot, make_snapshot

__all__ = [
    "ActionSpace",
    "AgentState",
    "HalfPlane",
    "OrcaParams",
    "SfmParams",
    "WorldSnapshot",
    "agent_from_snapshot",
    "build_action_space",
    "cv_action",
    "make_snapshot",
    "orca_action",
    "orca_halfplanes",
    "preferred_velocity",
    "reactive_action",
    "sfm_action",
    "sfm_force",
    "solve_lp2",
    "solve_min_violation",
    "static_action",
]
