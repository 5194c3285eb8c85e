"""Trial metrics: success, time to goal, minimum distance to agents, path irregularity.

Time, distance and irregularity are aggregated over successful trials only;
success rate is over all trials. Standard deviations are population (divide by N)
and distances are surface-to-surface (radii subtracted).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

STATIONARY_EPS = 1e-6
ARC_EPS = 1e-9

CONVENTIONS = {
    "std": "population",
    "min_distance": "surface",
    "min_rotation_needed": "initial_misalignment",
    "aggregate_over": {"success": "all_trials", "others": "successful_trials"},
}

METRICS = ("success", "time_to_goal", "min_distance", "path_irregularity")


def wrap_angle(a):
    """Wrap into (-pi, pi]."""
    w = np.remainder(np.asarray(a, dtype=float) + math.pi, 2 * math.pi) - math.pi
    w = np.where(w == -math.pi, math.pi, w)
    return float(w) if np.ndim(w) == 0 else w


def path_irregularity(traj, goal) -> float | None:
    """Unnecessary turning per metre of path (rad/m).

    Headings come from successive displacements, skipping stationary steps.
    The rotation that was needed is the misalignment between the first heading
    and the bearing from the start to ``goal``. Returns ``None`` when the path
    has no length.
    """
    p = np.asarray(traj, dtype=float).reshape(-1, 2)
    if len(p) < 2:
        return None
    disp = np.diff(p, axis=0)
    step = np.hypot(disp[:, 0], disp[:, 1])
    arc = float(step.sum())
    if arc < ARC_EPS:
        return None
    moving = disp[step >= STATIONARY_EPS]
    if len(moving) == 0:
        return None
    headings = np.arctan2(moving[:, 1], moving[:, 0])
    total = float(np.abs(wrap_angle(np.diff(headings))).sum()) if len(headings) > 1 else 0.0
    g = np.asarray(goal, dtype=float)
    bearing = math.atan2(g[1] - p[0, 1], g[0] - p[0, 0])
    needed = abs(wrap_angle(bearing - headings[0]))
    return max(0.0, total - needed) / arc


def min_agent_distance(positions, radii, ego_index: int = 0) -> float | None:
    """Smallest ego-to-agent surface distance over a ``(T, n_agents, 2)`` trajectory."""
    pos = np.asarray(positions, dtype=float)
    radii = np.asarray(radii, dtype=float)
    if pos.shape[1] < 2:
        return None
    others = np.arange(pos.shape[1]) != ego_index
    delta = pos[:, others, :] - pos[:, ego_index:ego_index + 1, :]
    gap = np.hypot(delta[..., 0], delta[..., 1]) - radii[ego_index] - radii[others][None, :]
    return float(gap.min())


@dataclass(frozen=True)
class MetricVector:
    success: int
    time_to_goal: float | None
    min_distance: float | None
    path_irregularity: float | None

    def get(self, metric: str):
        return getattr(self, metric)


def metric_vector(result) -> MetricVector:
    ok = result.outcome == "success"
    return MetricVector(
        success=int(ok),
        time_to_goal=result.time_to_goal if ok else None,
        min_distance=result.min_agent_distance if ok else None,
        path_irregularity=result.path_irregularity if ok else None,
    )


def _stats(values: list[float]) -> dict | None:
    if not values:
        return None
    arr = np.asarray(values, dtype=float)
    return {"mean": float(arr.mean()), "std": float(arr.std(ddof=0)), "n": int(arr.size)}


def aggregate(results: Iterable) -> dict:
    """Per-condition summary of trial results (anything with ``outcome`` and the metric fields)."""
    results = list(results)
    if not results:
        raise ValueError("aggregate needs at least one result")
    counts = {"success": 0, "collision": 0, "timeout": 0}
    times, dists, irregs = [], [], []
    for r in results:
        outcome = str(getattr(r.outcome, "value", r.outcome))
        counts[outcome] += 1
        if outcome != "success":
            continue
        if r.time_to_goal is not None:
            times.append(r.time_to_goal)
        if r.min_agent_distance is not None:
            dists.append(r.min_agent_distance)
        if r.path_irregularity is not None:
            irregs.append(r.path_irregularity)
    n = len(results)
    rate = counts["success"] / n
    return {
        "n_trials": n,
        "counts": counts,
        "success": {"mean": rate, "std": math.sqrt(rate * (1.0 - rate)), "n": n},
        "time_to_goal": _stats(times),
        "min_distance": _stats(dists),
        "path_irregularity": _stats(irregs),
        "no_successes": counts["success"] == 0,
    }


def summary_mean(summary: dict, metric: str) -> float | None:
    block = summary.get(metric)
    return None if block is None else block["mean"]
