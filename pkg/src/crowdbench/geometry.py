"""Scalar 2D geometry kernels shared by the crowd models, controllers and sensors."""

import math

import numpy as np

from ._jit import njit

INF = np.inf


@njit
def det2(ax, ay, bx, by):
    return ax * by - ay * bx


@njit
def wrap_angle(a):
    """Wrap to [-pi, pi)."""
    return (a + math.pi) % (2.0 * math.pi) - math.pi


@njit
def ttc_kernel(px, py, vx, vy, combined_radius):
    """Time until ``|p + t v| = R`` for the first t >= 0; inf when never."""
    c = px * px + py * py - combined_radius * combined_radius
    if c <= 0.0:
        return 0.0
    b = px * vx + py * vy
    if b >= 0.0:
        return INF
    a = vx * vx + vy * vy
    disc = b * b - a * c
    if disc < 0.0:
        return INF
    # c / (-b + sqrt(disc)) equals the smaller root and stays finite as a -> 0
    return c / (-b + math.sqrt(disc))


def ttc_circle(rel_position, rel_velocity, combined_radius):
    """Time-to-collision of two constant-velocity discs.

    ``rel_position`` and ``rel_velocity`` describe one disc relative to the
    other. Returns the smallest non-negative contact time, ``0.0`` if the
    discs already overlap, or ``None`` when they never touch.
    """
    t = ttc_kernel(float(rel_position[0]), float(rel_position[1]),
                   float(rel_velocity[0]), float(rel_velocity[1]), float(combined_radius))
    return None if math.isinf(t) else t


@njit
def ray_circle(ox, oy, dx, dy, cx, cy, r):
    """Distance along the unit ray (o, d) to circle (c, r); 0 inside, inf on miss."""
    fx = ox - cx
    fy = oy - cy
    cc = fx * fx + fy * fy - r * r
    if cc <= 0.0:
        return 0.0
    b = fx * dx + fy * dy
    if b >= 0.0:
        return INF
    disc = b * b - cc
    if disc < 0.0:
        return INF
    return -b - math.sqrt(disc)


@njit
def ray_segment(ox, oy, dx, dy, ax, ay, bx, by):
    """Distance along the unit ray (o, d) to segment [a, b]; inf on miss."""
    ex = bx - ax
    ey = by - ay
    denom = det2(dx, dy, ex, ey)
    if abs(denom) < 1e-12:
        return INF
    wx = ax - ox
    wy = ay - oy
    t = det2(wx, wy, ex, ey) / denom
    s = det2(wx, wy, dx, dy) / denom
    if t < 0.0 or s < 0.0 or s > 1.0:
        return INF
    return t
