"""Planar LiDAR with a per-beam agent mask, and noisy odometry."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._jit import njit
from .geometry import ray_circle, ray_segment

MIN_RANGE = 1e-3


@dataclass(frozen=True)
class LidarSpec:
    beams: int = 360
    span: float = 2.0 * math.pi
    max_range: float = 10.0
    noise_sigma: float = 0.01
    dropout: float = 0.0
    mount_offset: tuple = (0.0, 0.0, 0.0)  # (forward, left, yaw) in the robot frame

    def __post_init__(self):
        if self.beams < 1 or not self.max_range > 0:
            raise ValueError("LiDAR needs at least one beam and a positive range")

    def angles(self):
        if self.span >= 2.0 * math.pi - 1e-12:
            return self.span * np.arange(self.beams) / self.beams
        return np.linspace(-self.span / 2.0, self.span / 2.0, self.beams)


@dataclass
class LidarScan:
    ranges: np.ndarray
    mask: np.ndarray  # hit agent id per beam, -1 for none

    def to_dict(self):
        return {"ranges": self.ranges.tolist(), "mask": [None if m < 0 else int(m) for m in self.mask]}


@njit
def raycast_kernel(ox, oy, angles, cpos, crad, cids, walls, max_range):
    n = angles.shape[0]
    ranges = np.empty(n)
    mask = np.full(n, -1, np.int64)
    for b in range(n):
        dx = math.cos(angles[b])
        dy = math.sin(angles[b])
        best = max_range
        hit = -1
        for i in range(crad.shape[0]):
            t = ray_circle(ox, oy, dx, dy, cpos[i, 0], cpos[i, 1], crad[i])
            if t < best:
                best = t
                hit = cids[i]
        for s in range(walls.shape[0]):
            t = ray_segment(ox, oy, dx, dy, walls[s, 0], walls[s, 1], walls[s, 2], walls[s, 3])
            if t < best:
                best = t
                hit = -1
        ranges[b] = best
        mask[b] = hit
    return ranges, mask


def lidar_scan(pose, crowd, world, spec: LidarSpec = LidarSpec(), rng=None) -> LidarScan:
    """Cast ``spec.beams`` rays from the sensor mount; nearest agent disc or wall wins."""
    x, y, th = pose
    fx, fy, fyaw = spec.mount_offset
    ox = x + fx * math.cos(th) - fy * math.sin(th)
    oy = y + fx * math.sin(th) + fy * math.cos(th)
    angles = th + fyaw + spec.angles()
    n = len(crowd)
    cpos = np.ascontiguousarray(crowd.pos) if n else np.zeros((0, 2))
    ranges, mask = raycast_kernel(ox, oy, angles, cpos, np.asarray(crowd.radius, float),
                                  np.asarray(crowd.ids, np.int64), world.walls, float(spec.max_range))
    if rng is not None and spec.noise_sigma > 0:
        ranges = ranges + rng.normal(0.0, spec.noise_sigma, ranges.shape)
    if rng is not None and spec.dropout > 0:
        drop = rng.random(ranges.shape) < spec.dropout
        ranges = np.where(drop, spec.max_range, ranges)
        mask = np.where(drop, -1, mask)
    ranges = np.clip(ranges, MIN_RANGE, spec.max_range)
    return LidarScan(ranges, mask)


@dataclass(frozen=True)
class OdometryNoise:
    sigma_xy: float = 0.01
    sigma_theta: float = 0.01


def odometry(true_delta, noise: OdometryNoise = OdometryNoise(), rng=None):
    """Perturb a (dx, dy, dtheta) increment with independent zero-mean Gaussian noise."""
    delta = np.asarray(true_delta, dtype=np.float64).copy()
    if rng is None:
        return delta
    sigma = np.array([noise.sigma_xy, noise.sigma_xy, noise.sigma_theta])
    return delta + rng.normal(0.0, 1.0, 3) * sigma
