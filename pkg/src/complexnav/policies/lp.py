"""Two-dimensional linear programs over velocity half-planes.

Lines are stored as ``points[k]`` and unit ``dirs[k]``; the feasible side of
line ``k`` is on its left, i.e. ``det(dirs[k], v - points[k]) >= 0``.

``lp2`` minimises ``|v - target|`` inside the speed disc by the incremental
method: when the running optimum violates a new line, the new optimum lies on
that line, so a 1D problem (``lp1``) is solved there. ``lp3`` is the fallback
for empty intersections and minimises the largest violation instead.
"""
from __future__ import annotations

import math

import numba
import numpy as np

from .state import HalfPlane

EPS = 1e-10


@numba.njit(cache=True)
def _det(ax, ay, bx, by):
    return ax * by - ay * bx


@numba.njit(cache=True)
def lp1(points, dirs, line, radius, ox, oy, direction_opt):
    px = points[line, 0]
    py = points[line, 1]
    dx = dirs[line, 0]
    dy = dirs[line, 1]
    dot = px * dx + py * dy
    disc = dot * dot + radius * radius - (px * px + py * py)
    if disc < 0.0:
        return False, 0.0, 0.0
    sq = math.sqrt(disc)
    t_left = -dot - sq
    t_right = -dot + sq
    for i in range(line):
        denom = _det(dx, dy, dirs[i, 0], dirs[i, 1])
        numer = _det(dirs[i, 0], dirs[i, 1], px - points[i, 0], py - points[i, 1])
        if abs(denom) <= EPS:
            if numer < 0.0:
                return False, 0.0, 0.0
            continue
        t = numer / denom
        if denom >= 0.0:
            t_right = min(t_right, t)
        else:
            t_left = max(t_left, t)
        if t_left > t_right:
            return False, 0.0, 0.0
    if direction_opt:
        if ox * dx + oy * dy > 0.0:
            t = t_right
        else:
            t = t_left
    else:
        t = dx * (ox - px) + dy * (oy - py)
        if t < t_left:
            t = t_left
        elif t > t_right:
            t = t_right
    return True, px + t * dx, py + t * dy


@numba.njit(cache=True)
def lp2(points, dirs, n_lines, radius, ox, oy, direction_opt):
    """Return ``(fail_index, vx, vy)``; ``fail_index == n_lines`` means success."""
    if direction_opt:
        rx = ox * radius
        ry = oy * radius
    elif ox * ox + oy * oy > radius * radius:
        norm = math.sqrt(ox * ox + oy * oy)
        rx = ox / norm * radius
        ry = oy / norm * radius
    else:
        rx = ox
        ry = oy
    for i in range(n_lines):
        if _det(dirs[i, 0], dirs[i, 1], points[i, 0] - rx, points[i, 1] - ry) > 0.0:
            ok, nx, ny = lp1(points, dirs, i, radius, ox, oy, direction_opt)
            if not ok:
                return i, rx, ry
            rx = nx
            ry = ny
    return n_lines, rx, ry


@numba.njit(cache=True)
def lp3(points, dirs, n_lines, begin, radius, rx, ry):
    distance = 0.0
    proj_pts = np.empty((n_lines, 2))
    proj_dirs = np.empty((n_lines, 2))
    for i in range(begin, n_lines):
        if _det(dirs[i, 0], dirs[i, 1], points[i, 0] - rx, points[i, 1] - ry) > distance:
            m = 0
            for j in range(i):
                denom = _det(dirs[i, 0], dirs[i, 1], dirs[j, 0], dirs[j, 1])
                if abs(denom) <= EPS:
                    if dirs[i, 0] * dirs[j, 0] + dirs[i, 1] * dirs[j, 1] > 0.0:
                        continue
                    qx = 0.5 * (points[i, 0] + points[j, 0])
                    qy = 0.5 * (points[i, 1] + points[j, 1])
                else:
                    s = _det(dirs[j, 0], dirs[j, 1], points[i, 0] - points[j, 0],
                             points[i, 1] - points[j, 1]) / denom
                    qx = points[i, 0] + s * dirs[i, 0]
                    qy = points[i, 1] + s * dirs[i, 1]
                ddx = dirs[j, 0] - dirs[i, 0]
                ddy = dirs[j, 1] - dirs[i, 1]
                norm = math.sqrt(ddx * ddx + ddy * ddy)
                proj_pts[m, 0] = qx
                proj_pts[m, 1] = qy
                proj_dirs[m, 0] = ddx / norm
                proj_dirs[m, 1] = ddy / norm
                m += 1
            fail, nx, ny = lp2(proj_pts, proj_dirs, m, radius, -dirs[i, 1], dirs[i, 0], True)
            # numerical failure here keeps the previous result; it is already near-optimal
            if fail >= m:
                rx = nx
                ry = ny
            distance = _det(dirs[i, 0], dirs[i, 1], points[i, 0] - rx, points[i, 1] - ry)
    return rx, ry


@numba.njit(cache=True)
def solve_lines(points, dirs, n_lines, radius, ox, oy):
    """lp2 with the lp3 fallback; always returns a velocity within ``radius``."""
    fail, rx, ry = lp2(points, dirs, n_lines, radius, ox, oy, False)
    if fail < n_lines:
        rx, ry = lp3(points, dirs, n_lines, fail, radius, rx, ry)
    # near-tangent line/circle intersections can overshoot the disc by rounding
    norm = math.sqrt(rx * rx + ry * ry)
    if norm > radius:
        rx *= radius / norm
        ry *= radius / norm
    return rx, ry


def _to_lines(halfplanes):
    m = len(halfplanes)
    points = np.empty((m, 2))
    dirs = np.empty((m, 2))
    for k, hp in enumerate(halfplanes):
        points[k] = hp.point
        dirs[k] = hp.direction
    return points, dirs


def solve_lp2(halfplanes: list[HalfPlane], v_pref_vec, v_max: float) -> np.ndarray | None:
    """Closest velocity to ``v_pref_vec`` satisfying every half-plane and ``|v| <= v_max``.

    Returns ``None`` when the constraints (speed disc included) have no
    common point.
    """
    if not v_max > 0:
        raise ValueError("v_max must be positive")
    points, dirs = _to_lines(halfplanes)
    fail, vx, vy = lp2(points, dirs, len(halfplanes), float(v_max),
                       float(v_pref_vec[0]), float(v_pref_vec[1]), False)
    if fail < len(halfplanes):
        return None
    return np.array([vx, vy])


def solve_min_violation(halfplanes: list[HalfPlane], v_pref_vec, v_max: float) -> np.ndarray:
    points, dirs = _to_lines(halfplanes)
    vx, vy = solve_lines(points, dirs, len(halfplanes), float(v_max),
                         float(v_pref_vec[0]), float(v_pref_vec[1]))
    return np.array([vx, vy])
