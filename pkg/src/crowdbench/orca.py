"""Optimal reciprocal collision avoidance: half-plane construction and the 2D LP.

A constraint line is stored as ``(px, py, dx, dy)``; the permitted side is the
left of the unit direction, i.e. ``det(d, p - v) <= 0``.
"""

import math

import numpy as np

from ._jit import njit
from .geometry import det2

LP_EPS = 1e-5


@njit
def _lp1(lines, line_no, radius, optx, opty, direction_opt, result):
    px = lines[line_no, 0]
    py = lines[line_no, 1]
    dx = lines[line_no, 2]
    dy = lines[line_no, 3]
    dot = px * dx + py * dy
    disc = dot * dot + radius * radius - (px * px + py * py)
    if disc < 0.0:
        return False
    sq = math.sqrt(disc)
    t_left = -dot - sq
    t_right = -dot + sq
    for i in range(line_no):
        denom = det2(dx, dy, lines[i, 2], lines[i, 3])
        numer = det2(lines[i, 2], lines[i, 3], px - lines[i, 0], py - lines[i, 1])
        if abs(denom) <= LP_EPS:
            if numer < 0.0:
                return False
            continue
        t = numer / denom
        if denom >= 0.0:
            t_right = min(t_right, t)
        else:
            t_left = max(t_left, t)
        if t_left > t_right:
            return False
    if direction_opt:
        if optx * dx + opty * dy > 0.0:
            t = t_right
        else:
            t = t_left
    else:
        t = dx * (optx - px) + dy * (opty - py)
        if t < t_left:
            t = t_left
        elif t > t_right:
            t = t_right
    result[0] = px + t * dx
    result[1] = py + t * dy
    return True


@njit
def _lp2(lines, n, radius, optx, opty, direction_opt, result):
    if direction_opt:
        result[0] = optx * radius
        result[1] = opty * radius
    elif optx * optx + opty * opty > radius * radius:
        s = radius / math.sqrt(optx * optx + opty * opty)
        result[0] = optx * s
        result[1] = opty * s
    else:
        result[0] = optx
        result[1] = opty
    for i in range(n):
        if det2(lines[i, 2], lines[i, 3], lines[i, 0] - result[0], lines[i, 1] - result[1]) > 0.0:
            tx = result[0]
            ty = result[1]
            if not _lp1(lines, i, radius, optx, opty, direction_opt, result):
                result[0] = tx
                result[1] = ty
                return i
    return n


@njit
def _lp3(lines, n, begin, radius, result):
    distance = 0.0
    proj = np.empty((n, 4))
    tmp = np.empty(2)
    for i in range(begin, n):
        if det2(lines[i, 2], lines[i, 3], lines[i, 0] - result[0], lines[i, 1] - result[1]) > distance:
            m = 0
            for j in range(i):
                d = det2(lines[i, 2], lines[i, 3], lines[j, 2], lines[j, 3])
                if abs(d) <= LP_EPS:
                    if lines[i, 2] * lines[j, 2] + lines[i, 3] * lines[j, 3] > 0.0:
                        continue
                    ppx = 0.5 * (lines[i, 0] + lines[j, 0])
                    ppy = 0.5 * (lines[i, 1] + lines[j, 1])
                else:
                    s = det2(lines[j, 2], lines[j, 3], lines[i, 0] - lines[j, 0], lines[i, 1] - lines[j, 1]) / d
                    ppx = lines[i, 0] + s * lines[i, 2]
                    ppy = lines[i, 1] + s * lines[i, 3]
                ddx = lines[j, 2] - lines[i, 2]
                ddy = lines[j, 3] - lines[i, 3]
                norm = math.sqrt(ddx * ddx + ddy * ddy)
                proj[m, 0] = ppx
                proj[m, 1] = ppy
                proj[m, 2] = ddx / norm
                proj[m, 3] = ddy / norm
                m += 1
            tmp[0] = result[0]
            tmp[1] = result[1]
            if _lp2(proj, m, radius, -lines[i, 3], lines[i, 2], True, result) < m:
                result[0] = tmp[0]
                result[1] = tmp[1]
            distance = det2(lines[i, 2], lines[i, 3], lines[i, 0] - result[0], lines[i, 1] - result[1])


@njit
def solve_halfplanes(lines, n, max_speed, prefx, prefy):
    """Velocity closest to the preferred one inside all half-planes and the speed disc.

    Falls back to the velocity minimising the largest violation when the
    constraints are infeasible.
    """
    result = np.empty(2)
    fail = _lp2(lines, n, max_speed, prefx, prefy, False, result)
    if fail < n:
        _lp3(lines, n, fail, max_speed, result)
    return result[0], result[1]


@njit
def orca_line(px, py, vx, vy, r, opx, opy, ovx, ovy, orad, tau, dt, share, lines, k):
    """Write the ORCA half-plane of agent (p, v, r) against neighbour o into ``lines[k]``.

    ``share`` is the fraction of the avoidance effort this agent takes (0.5 for
    reciprocal avoidance).
    """
    rpx = opx - px
    rpy = opy - py
    rvx = vx - ovx
    rvy = vy - ovy
    dist_sq = rpx * rpx + rpy * rpy
    R = r + orad
    R_sq = R * R
    if dist_sq > R_sq:
        inv_tau = 1.0 / tau
        wx = rvx - inv_tau * rpx
        wy = rvy - inv_tau * rpy
        w_len_sq = wx * wx + wy * wy
        dot1 = wx * rpx + wy * rpy
        if dot1 < 0.0 and dot1 * dot1 > R_sq * w_len_sq:
            # project on the cut-off circle
            w_len = math.sqrt(w_len_sq)
            ux_ = wx / w_len
            uy_ = wy / w_len
            dirx = uy_
            diry = -ux_
            s = R * inv_tau - w_len
            ux = s * ux_
            uy = s * uy_
        else:
            leg = math.sqrt(dist_sq - R_sq)
            if det2(rpx, rpy, wx, wy) > 0.0:
                dirx = (rpx * leg - rpy * R) / dist_sq
                diry = (rpx * R + rpy * leg) / dist_sq
            else:
                dirx = -(rpx * leg + rpy * R) / dist_sq
                diry = -(-rpx * R + rpy * leg) / dist_sq
            dot2 = rvx * dirx + rvy * diry
            ux = dot2 * dirx - rvx
            uy = dot2 * diry - rvy
    else:
        inv_dt = 1.0 / dt
        wx = rvx - inv_dt * rpx
        wy = rvy - inv_dt * rpy
        w_len = math.sqrt(wx * wx + wy * wy)
        if w_len > 0.0:
            ux_ = wx / w_len
            uy_ = wy / w_len
        else:
            ux_ = -1.0
            uy_ = 0.0
        dirx = uy_
        diry = -ux_
        s = R * inv_dt - w_len
        ux = s * ux_
        uy = s * uy_
    lines[k, 0] = vx + share * ux
    lines[k, 1] = vy + share * uy
    lines[k, 2] = dirx
    lines[k, 3] = diry


@njit
def orca_kernel(px, py, vx, vy, r, prefx, prefy, max_speed, npos, nvel, nrad, nshare, tau, dt):
    """ORCA velocity of one agent against ``len(nrad)`` neighbours."""
    n = nrad.shape[0]
    lines = np.empty((n, 4))
    for j in range(n):
        orca_line(px, py, vx, vy, r, npos[j, 0], npos[j, 1], nvel[j, 0], nvel[j, 1], nrad[j],
                  tau, dt, nshare[j], lines, j)
    return solve_halfplanes(lines, n, max_speed, prefx, prefy)
