"""Scenario construction and the four single-factor sweeps.

A scenario fixes everything a trial needs: agent count, footprints, ego
start/goal, human starts with precomputed goal sequences, human policies and
the rectangular workspace. Generation is a pure function of
``(condition, seed)``.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .world import Workspace, wall_clearance

AGENT_RADIUS = 0.3
V_PREF = 1.0
BASE_N = 15
BASE_SIZE = 10.0

MARGIN = 0.5
MIN_SEPARATION = 2 * AGENT_RADIUS + 0.2
MAX_ATTEMPTS = 1000
GOAL_SEQUENCE_LENGTH = 10
CIRCLE_RADIUS = 4.0
CIRCLE_NOISE = 0.5
RANDOM_MIN_TRAVEL = 2.0
LANE_CONE = math.radians(15.0)

POLICY_TAGS = ("orca", "sfm", "cv", "static")

_MASK64 = (1 << 64) - 1


class ScenarioGenerationError(RuntimeError):
    pass


class Factor(str, Enum):
    DENSITY = "density"
    DIRECTIONALITY = "directionality"
    MIXTURE = "mixture"
    WIDTH = "width"


class Directionality(str, Enum):
    PASSING = "passing"
    CROSSING = "crossing"
    PASSING_AND_CROSSING = "passing_and_crossing"
    CIRCLE_CROSSING = "circle_crossing"
    RANDOM = "random"


@dataclass(frozen=True)
class MixtureSpec:
    name: str
    orca: int = 0
    sfm: int = 0
    cv: int = 0
    static: int = 0

    @property
    def total(self) -> int:
        return self.orca + self.sfm + self.cv + self.static

    def policies(self) -> list[str]:
        return (["orca"] * self.orca + ["sfm"] * self.sfm
                + ["cv"] * self.cv + ["static"] * self.static)

    def to_dict(self) -> dict:
        return {"name": self.name, "orca": self.orca, "sfm": self.sfm,
                "cv": self.cv, "static": self.static}


DENSITY_LEVELS = (0.05, 0.10, 0.15, 0.20, 0.25, 0.30, 0.35)
DIRECTIONALITY_LEVELS = (
    Directionality.PASSING,
    Directionality.CROSSING,
    Directionality.PASSING_AND_CROSSING,
    Directionality.CIRCLE_CROSSING,
    Directionality.RANDOM,
)
MIXTURE_LEVELS = (
    MixtureSpec("sfm_only", sfm=15),
    MixtureSpec("orca_only", orca=15),
    MixtureSpec("mix1", orca=8, sfm=7),
    MixtureSpec("mix2", orca=5, sfm=5, cv=2, static=3),
    MixtureSpec("mix3", orca=4, sfm=4, cv=4, static=3),
)
WIDTH_LEVELS = (4.5, 4.0, 3.5, 3.0, 2.5, 2.0, 1.5)

BASE_MIXTURE = MIXTURE_LEVELS[2]
BASE_DIRECTIONALITY = Directionality.PASSING_AND_CROSSING

_LEVELS = {
    Factor.DENSITY: DENSITY_LEVELS,
    Factor.DIRECTIONALITY: DIRECTIONALITY_LEVELS,
    Factor.MIXTURE: MIXTURE_LEVELS,
    Factor.WIDTH: WIDTH_LEVELS,
}


@dataclass(frozen=True)
class SweepCondition:
    factor: Factor
    level_index: int

    def __post_init__(self):
        object.__setattr__(self, "factor", Factor(self.factor))
        if not 0 <= self.level_index < len(_LEVELS[self.factor]):
            raise ValueError(f"level {self.level_index} out of range for {self.factor.value}")

    @property
    def level_value(self):
        return _LEVELS[self.factor][self.level_index]

    @property
    def level_label(self) -> str:
        v = self.level_value
        if isinstance(v, MixtureSpec):
            return v.name
        if isinstance(v, Directionality):
            return v.value
        return f"{v:g}"

    @property
    def name(self) -> str:
        return f"{self.factor.value}-{self.level_label}"

    @property
    def index(self) -> int:
        """Position of this condition in :func:`all_conditions`."""
        return all_conditions().index(self)


def factor_conditions(factor: Factor | str) -> list[SweepCondition]:
    factor = Factor(factor)
    return [SweepCondition(factor, i) for i in range(len(_LEVELS[factor]))]


def all_conditions() -> list[SweepCondition]:
    out: list[SweepCondition] = []
    for f in Factor:
        out.extend(factor_conditions(f))
    return out


def parse_condition(name: str) -> SweepCondition:
    for cond in all_conditions():
        if cond.name == name:
            return cond
    raise ValueError(f"unknown condition {name!r}")


# -- seeds --------------------------------------------------------------------

def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(*parts: int) -> int:
    """Fold integers into one 64-bit seed with splitmix64.

    Used as ``derive_seed(experiment_seed, condition_index, trial_index)`` so a
    trial's scenario never depends on execution order.
    """
    h = 0
    for p in parts:
        h = splitmix64(h ^ (int(p) & _MASK64))
    return h


# -- scenario -----------------------------------------------------------------

@dataclass(eq=False)
class Scenario:
    n: int
    ego_radius: float
    agent_radii: np.ndarray
    ego_start: np.ndarray
    ego_goal: np.ndarray
    agent_starts: np.ndarray
    agent_goal_sequences: np.ndarray
    agent_policies: tuple[str, ...]
    workspace: Workspace
    v_pref: float = V_PREF
    seed: int | None = None
    condition: str | None = None
    min_separation: float = field(default=MIN_SEPARATION, repr=False)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "ego_start": self.ego_start.tolist(),
            "ego_goal": self.ego_goal.tolist(),
            "starts": self.agent_starts.tolist(),
            "goal_sequences": self.agent_goal_sequences.tolist(),
            "policies": list(self.agent_policies),
            "workspace": self.workspace.to_dict(),
            "v_pref": self.v_pref,
            "radii": self.agent_radii.tolist(),
            "ego_radius": self.ego_radius,
            "seed": self.seed,
            "condition": self.condition,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, **kwargs)

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        n = int(d["n"])
        return cls(
            n=n,
            ego_radius=float(d.get("ego_radius", AGENT_RADIUS)),
            agent_radii=np.asarray(d["radii"], dtype=float).reshape(n),
            ego_start=np.asarray(d["ego_start"], dtype=float),
            ego_goal=np.asarray(d["ego_goal"], dtype=float),
            agent_starts=np.asarray(d["starts"], dtype=float).reshape(n, 2),
            agent_goal_sequences=np.asarray(d["goal_sequences"], dtype=float).reshape(n, -1, 2),
            agent_policies=tuple(d["policies"]),
            workspace=Workspace(float(d["workspace"]["w"]), float(d["workspace"]["l"])),
            v_pref=float(d["v_pref"]),
            seed=d.get("seed"),
            condition=d.get("condition"),
        )

    @classmethod
    def from_json(cls, text: str) -> "Scenario":
        return cls.from_dict(json.loads(text))

    def hash(self) -> str:
        """64-bit digest of the serialized scenario, as 16 hex characters."""
        return hashlib.blake2b(self.to_json().encode(), digest_size=8).hexdigest()


def agents_for_density(d: float, ws: Workspace) -> int:
    if d < 0:
        raise ValueError("density must be non-negative")
    return int(round(d * ws.area))


def _lane_pair(axis: int, ws: Workspace, rng: np.random.Generator, side: int | None = None,
               along: float | None = None):
    # axis 1: travel along y (passing); axis 0: travel along x (crossing)
    size = (ws.width, ws.length)
    travel = size[axis]
    lateral = size[1 - axis]
    if side is None:
        side = int(rng.integers(2))
    lo, hi = MARGIN, lateral - MARGIN
    if hi < lo:
        lo = hi = lateral / 2.0
    if along is None:
        along = rng.uniform(lo, hi)
    span = travel - 2 * MARGIN
    drift = rng.uniform(-1.0, 1.0) * math.tan(LANE_CONE) * span
    along_goal = min(max(along + drift, lo), hi)
    start_t = MARGIN if side == 0 else travel - MARGIN
    goal_t = travel - MARGIN if side == 0 else MARGIN
    start = np.empty(2)
    goal = np.empty(2)
    start[axis], start[1 - axis] = start_t, along
    goal[axis], goal[1 - axis] = goal_t, along_goal
    return start, goal


def _circle_point(center, radius, angle, rng):
    noise_r = CIRCLE_NOISE * math.sqrt(rng.random())
    noise_a = rng.uniform(0.0, 2 * math.pi)
    return (center + radius * np.array([math.cos(angle), math.sin(angle)])
            + noise_r * np.array([math.cos(noise_a), math.sin(noise_a)]))


def _circle_radius(ws: Workspace) -> float:
    return min(CIRCLE_RADIUS, min(ws.width, ws.length) / 2.0 - 2 * CIRCLE_NOISE)


def _uniform_point(ws: Workspace, rng) -> np.ndarray:
    return np.array([rng.uniform(MARGIN, ws.width - MARGIN), rng.uniform(MARGIN, ws.length - MARGIN)])


def sample_start_goal(tag: Directionality | str, ws: Workspace, rng: np.random.Generator):
    """Draw one (start, goal) pair for the given directionality."""
    tag = Directionality(tag)
    if tag is Directionality.PASSING_AND_CROSSING:
        tag = Directionality.PASSING if rng.random() < 0.5 else Directionality.CROSSING
    if tag is Directionality.PASSING:
        return _lane_pair(1, ws, rng)
    if tag is Directionality.CROSSING:
        return _lane_pair(0, ws, rng)
    if tag is Directionality.CIRCLE_CROSSING:
        c = ws.center
        angle = rng.uniform(0.0, 2 * math.pi)
        rc = _circle_radius(ws)
        return _circle_point(c, rc, angle, rng), _circle_point(c, rc, angle + math.pi, rng)
    for _ in range(MAX_ATTEMPTS):
        s = _uniform_point(ws, rng)
        g = _uniform_point(ws, rng)
        if np.linalg.norm(g - s) >= RANDOM_MIN_TRAVEL:
            return s, g
    raise ScenarioGenerationError(f"random start/goal: no pair {RANDOM_MIN_TRAVEL} m apart in {ws}")


def _next_goal(tag: Directionality, prev: np.ndarray, ws: Workspace, rng) -> np.ndarray:
    # continue from where the previous leg ended
    if tag in (Directionality.PASSING, Directionality.CROSSING):
        axis = 1 if tag is Directionality.PASSING else 0
        travel = (ws.width, ws.length)[axis]
        side = 0 if prev[axis] < travel / 2.0 else 1
        _, goal = _lane_pair(axis, ws, rng, side=side, along=float(prev[1 - axis]))
        return goal
    if tag is Directionality.CIRCLE_CROSSING:
        c = ws.center
        d = prev - c
        angle = math.atan2(d[1], d[0]) + math.pi
        return _circle_point(c, _circle_radius(ws), angle, rng)
    for _ in range(MAX_ATTEMPTS):
        g = _uniform_point(ws, rng)
        if np.linalg.norm(g - prev) >= RANDOM_MIN_TRAVEL:
            return g
    raise ScenarioGenerationError("random goal sequence: no goal far enough from the previous one")


def _ego_endpoints(ws: Workspace):
    cx = ws.width / 2.0
    return np.array([cx, 1.0]), np.array([cx, ws.length - 1.0])


def _separated(p, placed, sep) -> bool:
    return all(math.hypot(p[0] - q[0], p[1] - q[1]) >= sep for q in placed)


def _place_random(kinds, static, ws, anchors, geo):
    """Sequential rejection sampling; returns ``None`` if some agent cannot be placed."""
    placed = list(anchors)
    pairs = []
    for kind, still in zip(kinds, static):
        for attempt in range(MAX_ATTEMPTS):
            s, g = sample_start_goal(kind, ws, geo)
            # lanes saturate at high density: fall back to starting part-way along the
            # first leg, then anywhere in the room. static agents always stand inside the room
            if attempt >= 3 * MAX_ATTEMPTS // 4:
                s = np.array([geo.uniform(AGENT_RADIUS, ws.width - AGENT_RADIUS),
                              geo.uniform(AGENT_RADIUS, ws.length - AGENT_RADIUS)])
            elif still or attempt >= MAX_ATTEMPTS // 2:
                s = s + geo.random() * (g - s)
            if wall_clearance(s, AGENT_RADIUS, ws) >= 0 and _separated(s, placed, MIN_SEPARATION):
                break
        else:
            return None
        placed.append(s)
        pairs.append((s, g))
    return pairs


def _lattice_slots(ws: Workspace) -> np.ndarray:
    lo = AGENT_RADIUS
    nx = int(math.floor((ws.width - 2 * lo) / MIN_SEPARATION)) + 1
    ny = int(math.floor((ws.length - 2 * lo) / MIN_SEPARATION)) + 1
    xs = np.linspace(lo, ws.width - lo, nx) if nx > 1 else np.array([ws.width / 2.0])
    ys = np.linspace(lo, ws.length - lo, ny) if ny > 1 else np.array([ws.length / 2.0])
    return np.array([(x, y) for y in ys for x in xs])


def _place_lattice(kinds, ws, anchors, geo, condition):
    # dense fallback for narrow rooms: every agent takes a random free slot of a
    # lattice whose spacing is the minimum separation
    slots = _lattice_slots(ws)
    slots = slots[geo.permutation(len(slots))]
    placed = list(anchors)
    pairs = []
    for i, kind in enumerate(kinds):
        for s in slots:
            if _separated(s, placed, MIN_SEPARATION):
                break
        else:
            raise ScenarioGenerationError(
                f"{condition}: could not place agent {i} of {len(kinds)} (random and lattice placement failed)")
        placed.append(s)
        _, g = sample_start_goal(kind, ws, geo)
        pairs.append((s.copy(), g))
    return pairs


def _build(ws: Workspace, n: int, tag: Directionality, mixture: MixtureSpec | None,
           seed: int, condition: str) -> Scenario:
    geo_seq, pol_seq = np.random.SeedSequence(seed).spawn(2)
    geo = np.random.default_rng(geo_seq)
    pol = np.random.default_rng(pol_seq)

    if mixture is None:
        # density sweep: keep the base ORCA/SFM proportion
        n_orca = int(round(n * BASE_MIXTURE.orca / BASE_MIXTURE.total))
        policies = ["orca"] * n_orca + ["sfm"] * (n - n_orca)
    else:
        if mixture.total != n:
            raise ValueError(f"mixture {mixture.name} has {mixture.total} agents, scenario has {n}")
        policies = mixture.policies()
    policies = [policies[i] for i in pol.permutation(n)] if n else []
    static = [p == "static" for p in policies]

    kinds = []
    for _ in range(n):
        kind = tag
        if kind is Directionality.PASSING_AND_CROSSING:
            kind = Directionality.PASSING if geo.random() < 0.5 else Directionality.CROSSING
        kinds.append(kind)

    ego_start, ego_goal = _ego_endpoints(ws)
    anchors = [ego_start, ego_goal]
    pairs = _place_random(kinds, static, ws, anchors, geo)
    if pairs is None:
        pairs = _place_lattice(kinds, ws, anchors, geo, condition)

    starts = np.zeros((n, 2))
    goals = np.zeros((n, GOAL_SEQUENCE_LENGTH, 2))
    for i, ((s, g), kind) in enumerate(zip(pairs, kinds)):
        starts[i] = s
        if static[i]:
            goals[i] = s
            continue
        goals[i, 0] = g
        for k in range(1, GOAL_SEQUENCE_LENGTH):
            goals[i, k] = _next_goal(kind, goals[i, k - 1], ws, geo)

    return Scenario(
        n=n,
        ego_radius=AGENT_RADIUS,
        agent_radii=np.full(n, AGENT_RADIUS),
        ego_start=ego_start,
        ego_goal=ego_goal,
        agent_starts=starts,
        agent_goal_sequences=goals,
        agent_policies=tuple(policies),
        workspace=ws,
        v_pref=V_PREF,
        seed=int(seed),
        condition=condition,
    )


def base_scenario(seed: int) -> Scenario:
    ws = Workspace(BASE_SIZE, BASE_SIZE)
    return _build(ws, BASE_N, BASE_DIRECTIONALITY, BASE_MIXTURE, seed, "base")


def sample_scenario(cond: SweepCondition, seed: int) -> Scenario:
    ws = Workspace(BASE_SIZE, BASE_SIZE)
    n = BASE_N
    tag = BASE_DIRECTIONALITY
    mixture: MixtureSpec | None = BASE_MIXTURE
    if cond.factor is Factor.DENSITY:
        n = agents_for_density(cond.level_value, ws)
        mixture = None
    elif cond.factor is Factor.DIRECTIONALITY:
        tag = cond.level_value
    elif cond.factor is Factor.MIXTURE:
        mixture = cond.level_value
    elif cond.factor is Factor.WIDTH:
        ws = Workspace(cond.level_value, BASE_SIZE)
    return _build(ws, n, tag, mixture, seed, cond.name)


def custom_scenario(n: int, directionality: Directionality | str, mixture: MixtureSpec | None = None,
                    workspace: Workspace | None = None, seed: int = 0, name: str = "custom") -> Scenario:
    """Scenario outside the sweep catalogue, e.g. a homogeneous crowd.

    ``mixture=None`` keeps the base ORCA/SFM proportion.
    """
    ws = workspace or Workspace(BASE_SIZE, BASE_SIZE)
    return _build(ws, n, Directionality(directionality), mixture, seed, name)
