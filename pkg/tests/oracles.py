"""Independent reference implementations used to check the package.

Nothing here imports the code under test. Each oracle follows the defining
formula as literally as possible and favours clarity over speed.
"""
from __future__ import annotations

import itertools
import math

import numpy as np


# -- linear program -----------------------------------------------------------

def _feasible(v, lines, v_max, tol):
    if math.hypot(v[0], v[1]) > v_max + tol:
        return False
    for point, normal in lines:
        if (v[0] - point[0]) * normal[0] + (v[1] - point[1]) * normal[1] < -tol:
            return False
    return True


def lp_candidates(lines, target, v_max):
    """Every point that can be the projection of ``target`` onto the feasible set.

    The minimiser of a strictly convex distance over a compact convex set is
    either ``target`` itself, the projection onto one active boundary piece
    (a line or the speed circle), or a vertex where two pieces meet.
    """
    t = np.asarray(target, dtype=float)
    cands = [t]
    n = math.hypot(*t)
    cands.append(t / n * v_max if n > 0 else np.array([v_max, 0.0]))
    for point, normal in lines:
        p = np.asarray(point, dtype=float)
        nn = np.asarray(normal, dtype=float)
        cands.append(t - np.dot(t - p, nn) * nn)
        # line / circle intersections
        d = np.array([nn[1], -nn[0]])
        b = np.dot(p, d)
        c = np.dot(p, p) - v_max * v_max
        disc = b * b - c
        if disc >= 0:
            for s in (-b - math.sqrt(disc), -b + math.sqrt(disc)):
                cands.append(p + s * d)
    for (p1, n1), (p2, n2) in itertools.combinations(lines, 2):
        a = np.array([n1, n2], dtype=float)
        if abs(np.linalg.det(a)) < 1e-12:
            continue
        rhs = np.array([np.dot(n1, p1), np.dot(n2, p2)])
        cands.append(np.linalg.solve(a, rhs))
    return cands


def lp_enumerate(lines, target, v_max, tol=1e-9):
    """Exact projection by enumerating candidates; ``None`` if nothing is feasible."""
    best, best_d = None, math.inf
    for c in lp_candidates(lines, target, v_max):
        if _feasible(c, lines, v_max, tol):
            d = math.hypot(c[0] - target[0], c[1] - target[1])
            if d < best_d:
                best, best_d = c, d
    return best


def lp_dense(lines, target, v_max, n_radial=400, n_angular=1600):
    """Best feasible point on a polar grid over the speed disc (coarse check)."""
    r = np.linspace(0.0, v_max, n_radial)
    a = np.linspace(0.0, 2 * math.pi, n_angular, endpoint=False)
    rr, aa = np.meshgrid(r, a)
    pts = np.stack([(rr * np.cos(aa)).ravel(), (rr * np.sin(aa)).ravel()], axis=1)
    ok = np.ones(len(pts), dtype=bool)
    for point, normal in lines:
        ok &= (pts - np.asarray(point)) @ np.asarray(normal) >= 0
    if not ok.any():
        return None
    pts = pts[ok]
    d = np.hypot(*(pts - np.asarray(target)).T)
    return pts[int(np.argmin(d))]


# -- social force -------------------------------------------------------------

def sfm_force(i, positions, velocities, radii, goal, v_pref, tau, a, b, a_w, b_w, f_max, w, l):
    p = positions[i]
    to_goal = (goal[0] - p[0], goal[1] - p[1])
    dist = math.hypot(*to_goal)
    e = (to_goal[0] / dist, to_goal[1] / dist) if dist > 0 else (0.0, 0.0)
    fx = (v_pref * e[0] - velocities[i][0]) / tau
    fy = (v_pref * e[1] - velocities[i][1]) / tau
    for j in range(len(positions)):
        if j == i:
            continue
        dx = p[0] - positions[j][0]
        dy = p[1] - positions[j][1]
        d = math.hypot(dx, dy)
        mag = min(a * math.exp((radii[i] + radii[j] - d) / b), f_max)
        fx += mag * dx / d
        fy += mag * dy / d
    walls = [(p[0], (1.0, 0.0)), (w - p[0], (-1.0, 0.0)), (p[1], (0.0, 1.0)), (l - p[1], (0.0, -1.0))]
    for d_wall, n in walls:
        mag = min(a_w * math.exp((radii[i] - d_wall) / b_w), f_max)
        fx += mag * n[0]
        fy += mag * n[1]
    return fx, fy


# -- rollout cost -------------------------------------------------------------

def rollout_cost(p0, v0, goal, controls, preds, pred_radii, r_ego, w_g, c_col, w_d, buf, w_s, dt, w, l):
    px, py = float(p0[0]), float(p0[1])
    prev = (float(v0[0]), float(v0[1]))
    total = 0.0
    for k, (ux, uy) in enumerate(controls):
        cx, cy = ux, uy
        if (cx < 0 and px + cx * dt - r_ego < 0) or (cx > 0 and px + cx * dt + r_ego > w):
            cx = 0.0
        if (cy < 0 and py + cy * dt - r_ego < 0) or (cy > 0 and py + cy * dt + r_ego > l):
            cy = 0.0
        px += cx * dt
        py += cy * dt
        total += w_g * math.hypot(px - goal[0], py - goal[1])
        for j in range(len(preds)):
            d = math.hypot(px - preds[j][k][0], py - preds[j][k][1])
            rs = r_ego + pred_radii[j]
            if d < rs:
                total += c_col
            elif d - rs < buf:
                total += w_d * (buf - (d - rs))
        total += w_s * ((ux - prev[0]) ** 2 + (uy - prev[1]) ** 2)
        prev = (ux, uy)
    return total


# -- reactive planner -----------------------------------------------------------

def reactive_choice(position, goal, radius, others, v_pref, dt):
    """Exhaustive scan of the 81-action set; ``others`` is a list of (pos, vel, r)."""
    actions = [(0.0, 0.0)]
    for i in range(1, 6):
        s = (math.exp(i / 5) - 1) / (math.e - 1) * v_pref
        for k in range(16):
            h = 2 * math.pi * k / 16
            actions.append((s * math.cos(h), s * math.sin(h)))
    best, best_d = (0.0, 0.0), math.inf
    for ax, ay in actions:
        nx, ny = position[0] + ax * dt, position[1] + ay * dt
        clear = True
        for (op, ov, orad) in others:
            qx, qy = op[0] + ov[0] * dt, op[1] + ov[1] * dt
            if math.hypot(nx - qx, ny - qy) < radius + orad:
                clear = False
                break
        if not clear:
            continue
        d = math.hypot(nx - goal[0], ny - goal[1])
        if d < best_d:
            best, best_d = (ax, ay), d
    return best


# -- metrics ------------------------------------------------------------------

def path_irregularity(points, goal):
    pts = [(float(x), float(y)) for x, y in points]
    arc = 0.0
    headings = []
    for (x0, y0), (x1, y1) in zip(pts, pts[1:]):
        step = math.hypot(x1 - x0, y1 - y0)
        arc += step
        if step >= 1e-6:
            headings.append(math.atan2(y1 - y0, x1 - x0))
    if arc < 1e-9 or not headings:
        return None

    def wrap(a):
        while a <= -math.pi:
            a += 2 * math.pi
        while a > math.pi:
            a -= 2 * math.pi
        return a

    total = sum(abs(wrap(h1 - h0)) for h0, h1 in zip(headings, headings[1:]))
    bearing = math.atan2(goal[1] - pts[0][1], goal[0] - pts[0][0])
    needed = abs(wrap(bearing - headings[0]))
    return max(0.0, total - needed) / arc


def min_surface_distance(frames, radii):
    """``frames``: per step, a list of agent positions with the ego first."""
    best = math.inf
    for frame in frames:
        ex, ey = frame[0]
        for j in range(1, len(frame)):
            d = math.hypot(frame[j][0] - ex, frame[j][1] - ey) - radii[0] - radii[j]
            best = min(best, d)
    return best


# -- statistics ---------------------------------------------------------------

def average_ranks(values):
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        mean_rank = (i + j) / 2.0 + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = mean_rank
        i = j + 1
    return ranks


def spearman_rho(xs, ys):
    rx, ry = average_ranks(list(xs)), average_ranks(list(ys))
    n = len(rx)
    mx, my = sum(rx) / n, sum(ry) / n
    sxy = sum((a - mx) * (b - my) for a, b in zip(rx, ry))
    sxx = sum((a - mx) ** 2 for a in rx)
    syy = sum((b - my) ** 2 for b in ry)
    return sxy / math.sqrt(sxx * syy)


def _unit(rng):
    a = rng.uniform(0.0, 2 * math.pi)
    return np.array([math.cos(a), math.sin(a)])


def random_lp_instance(rng, feasible: bool):
    """``(lines, target, v_max)`` with lines as (point, unit normal), feasible side ``(v-p).n >= 0``.

    Feasible instances all contain a common point strictly inside the speed
    disc. Infeasible ones embed a certified contradiction: two opposing
    parallel constraints with a gap, a constraint beyond the disc, or three
    inward-facing constraints whose normals sum to zero.
    """
    v_max = rng.uniform(0.5, 2.0)
    target = _unit(rng) * rng.uniform(0.0, 2.0 * v_max)
    m = int(rng.integers(1, 11))
    lines = []
    if feasible:
        q = _unit(rng) * rng.uniform(0.0, 0.9 * v_max)
        for _ in range(m):
            n = _unit(rng)
            lines.append((q - rng.uniform(0.0, 0.6) * n, n))
        return lines, target, v_max
    for _ in range(m):
        n = _unit(rng)
        lines.append((_unit(rng) * rng.uniform(0.0, v_max) - rng.uniform(0.0, 0.5) * n, n))
    kind = int(rng.integers(3))
    n = _unit(rng)
    if kind == 0:
        a = rng.uniform(-v_max, v_max)
        gap = rng.uniform(0.01, 1.0)
        bad = [(a * n, n), ((a - gap) * n, -n)]
    elif kind == 1:
        bad = [((v_max + rng.uniform(0.01, 1.0)) * n, n)]
    else:
        c = rng.uniform(0.01, 1.0)
        rot = np.array([[-0.5, -math.sqrt(3) / 2], [math.sqrt(3) / 2, -0.5]])
        n2 = rot @ n
        n3 = rot @ n2
        bad = [(c * n, n), (c * n2, n2), (c * n3, n3)]
    for hp in bad:
        lines.insert(int(rng.integers(len(lines) + 1)), hp)
    return lines, target, v_max
