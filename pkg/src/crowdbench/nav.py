"""Robot controllers: straight-to-goal Baseline, DWA against a static snapshot, ORCA-based RVO."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from ._jit import njit
from .geometry import ray_circle, wrap_angle
from .grid import INTERACTION_RANGE
from .orca import orca_kernel
from .world import RobotLimits, RobotState, WorldSpec, WorldView

K_THETA = 2.0
OMEGA_EPS = 1e-6


@dataclass(frozen=True)
class GoalSpec:
    axis: tuple = (1.0, 0.0)
    progress: float = 40.0
    time_limit: float = 180.0

    @property
    def angle(self):
        return math.atan2(self.axis[1], self.axis[0])

    def to_dict(self):
        return {"axis": list(self.axis), "progress": self.progress, "time_limit": self.time_limit}


@dataclass(frozen=True)
class DwaParams:
    n_v: int = 11
    n_w: int = 21
    heading_weight: float = 0.8
    clearance_weight: float = 0.1
    velocity_weight: float = 0.1
    horizon: float = 1.5
    clearance_cap: float = 3.0
    wall_spacing: float = 0.1

    def __post_init__(self):
        weights = (self.heading_weight, self.clearance_weight, self.velocity_weight)
        if min(weights) < 0 or max(weights) == 0:
            raise ValueError("DWA weights must be non-negative and not all zero")


@dataclass(frozen=True)
class RvoCtrlParams:
    horizon: float = 1.5
    preferred_speed: float = 1.0
    neighbor_range: float = INTERACTION_RANGE

    def __post_init__(self):
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")


def _clamp(x, lo, hi):
    return min(max(x, lo), hi)


# -- Baseline -----------------------------------------------------------------


def baseline_command(robot: RobotState, goal: GoalSpec, limits: RobotLimits = RobotLimits(), k_theta=K_THETA):
    """Drive along the goal axis, ignoring everything else."""
    err = wrap_angle(goal.angle - robot.theta)
    w = _clamp(k_theta * err, -limits.w_max, limits.w_max)
    v = limits.v_max * max(0.0, math.cos(err))
    return v, w


# -- projection ---------------------------------------------------------------


def project_to_diff_drive(desired, robot: RobotState, limits: RobotLimits = RobotLimits(), k_theta=K_THETA):
    """Map a holonomic velocity to (v, w): turn toward it, advance by its forward component."""
    dx, dy = float(desired[0]), float(desired[1])
    speed = math.hypot(dx, dy)
    if speed < 1e-12:
        return 0.0, 0.0
    ang = wrap_angle(math.atan2(dy, dx) - robot.theta)
    w = _clamp(k_theta * ang, -limits.w_max, limits.w_max)
    v = _clamp(speed * max(0.0, math.cos(ang)), -limits.v_max, limits.v_max)
    return v, w


# -- DWA ----------------------------------------------------------------------


@njit
def arc_clearance(x, y, theta, v, w, ox, oy, R, cap):
    """Path length along the (v, w) arc before the robot center enters circle (o, R), capped."""
    dx = ox - x
    dy = oy - y
    if dx * dx + dy * dy < R * R:
        return 0.0
    if v <= 1e-9:
        return cap
    if abs(w) < OMEGA_EPS:
        return min(ray_circle(x, y, math.cos(theta), math.sin(theta), ox, oy, R), cap)
    rho = v / w
    cx = x - rho * math.sin(theta)
    cy = y + rho * math.cos(theta)
    ra = abs(rho)
    ex = ox - cx
    ey = oy - cy
    d = math.sqrt(ex * ex + ey * ey)
    if d > ra + R or d < abs(ra - R) or d == 0.0:
        return cap
    a = (ra * ra - R * R + d * d) / (2.0 * d)
    h = math.sqrt(max(ra * ra - a * a, 0.0))
    bx = cx + a * ex / d
    by = cy + a * ey / d
    phi0 = math.atan2(y - cy, x - cx)
    sgn = 1.0 if w > 0.0 else -1.0
    best = cap
    for s in (-1.0, 1.0):
        qx = bx - s * h * ey / d
        qy = by + s * h * ex / d
        dphi = (sgn * (math.atan2(qy - cy, qx - cx) - phi0)) % (2.0 * math.pi)
        best = min(best, ra * dphi)
    return best


@njit
def dwa_evaluate(x, y, theta, obs, vs, ws, a_max, horizon, cap, goal_angle, v_max):
    """Per-candidate (heading, clearance, velocity, admissible) over the (v, w) grid."""
    nv = vs.shape[0]
    nw = ws.shape[0]
    heading = np.empty((nv, nw))
    clear = np.empty((nv, nw))
    vel = np.empty((nv, nw))
    adm = np.empty((nv, nw), np.bool_)
    for a in range(nv):
        v = vs[a]
        for b in range(nw):
            w = ws[b]
            c = cap
            for k in range(obs.shape[0]):
                c = min(c, arc_clearance(x, y, theta, v, w, obs[k, 0], obs[k, 1], obs[k, 2], cap))
            clear[a, b] = c
            heading[a, b] = 1.0 - abs((theta + w * horizon - goal_angle + math.pi) % (2.0 * math.pi) - math.pi) / math.pi
            vel[a, b] = v / v_max
            adm[a, b] = c >= v * v / (2.0 * a_max)
    return heading, clear, vel, adm


def _normalize(x, mask):
    sel = x[mask]
    lo, hi = sel.min(), sel.max()
    if hi > lo:
        return (x - lo) / (hi - lo)
    return np.zeros_like(x)


def dwa_window(robot: RobotState, limits: RobotLimits, dt, params: DwaParams):
    v_lo = max(0.0, robot.v - limits.a_max * dt)
    v_hi = min(limits.v_max, robot.v + limits.a_max * dt)
    w_lo = max(-limits.w_max, robot.w - limits.alpha_max * dt)
    w_hi = min(limits.w_max, robot.w + limits.alpha_max * dt)
    vs = v_lo + (v_hi - v_lo) * np.arange(params.n_v) / max(params.n_v - 1, 1)
    ws = w_lo + (w_hi - w_lo) * np.arange(params.n_w) / max(params.n_w - 1, 1)
    ws[np.abs(ws) < 1e-12] = 0.0
    return vs, ws


@dataclass
class DwaDecision:
    v: float
    w: float
    emergency: bool
    score: float = float("nan")


def dwa_decide(robot: RobotState, obstacles, goal: GoalSpec, params: DwaParams = DwaParams(),
               limits: RobotLimits = RobotLimits(), dt=0.05) -> DwaDecision:
    """Full DWA decision. ``obstacles`` rows are ``(x, y, inflated_radius)`` in the point-robot frame."""
    vs, ws = dwa_window(robot, limits, dt, params)
    obs = np.ascontiguousarray(np.asarray(obstacles, dtype=np.float64).reshape(-1, 3))
    if obs.shape[0]:
        gap = np.hypot(obs[:, 0] - robot.x, obs[:, 1] - robot.y) - obs[:, 2]
        obs = np.ascontiguousarray(obs[gap <= params.clearance_cap])
    heading, clear, vel, adm = dwa_evaluate(robot.x, robot.y, robot.theta, obs, vs, ws, limits.a_max,
                                            params.horizon, params.clearance_cap, goal.angle, limits.v_max)
    if not adm.any():
        return DwaDecision(float(vs[0]), float(_clamp(0.0, ws[0], ws[-1])), True)
    g = (params.heading_weight * _normalize(heading, adm) + params.clearance_weight * _normalize(clear, adm)
         + params.velocity_weight * _normalize(vel, adm))
    g = np.where(adm, g, -np.inf)
    best = g.max()
    ia, ib = np.nonzero(g == best)
    # tie-break: lowest |w|, then lowest v
    order = np.lexsort((vs[ia], np.abs(ws[ib])))
    a, b = ia[order[0]], ib[order[0]]
    return DwaDecision(float(vs[a]), float(ws[b]), False, float(best))


@lru_cache(maxsize=8)
def wall_points(world: WorldSpec, spacing=0.1) -> np.ndarray:
    pts = []
    for ax, ay, bx, by in world.walls:
        n = max(1, int(math.ceil(math.hypot(bx - ax, by - ay) / spacing)))
        s = np.arange(n) / n
        pts.append(np.column_stack([ax + s * (bx - ax), ay + s * (by - ay)]))
    return np.vstack(pts)


def dwa_obstacles(view: WorldView, params: DwaParams = DwaParams()) -> np.ndarray:
    """Agent centers inflated by agent + robot radius, wall samples inflated by robot radius."""
    rr = view.robot.radius
    crowd = view.crowd
    agents = np.column_stack([crowd.pos, crowd.radius + rr]) if len(crowd) else np.zeros((0, 3))
    walls = wall_points(view.world, params.wall_spacing)
    walls = np.column_stack([walls, np.full(len(walls), rr)])
    return np.vstack([agents, walls])


def dwa_command(robot: RobotState, obstacle_points, goal: GoalSpec, params: DwaParams = DwaParams(),
                limits: RobotLimits = RobotLimits(), dt=0.05):
    d = dwa_decide(robot, obstacle_points, goal, params, limits, dt)
    return d.v, d.w


# -- RVO ----------------------------------------------------------------------


def rvo_holonomic(robot: RobotState, positions, velocities, radii, goal: GoalSpec, params: RvoCtrlParams = RvoCtrlParams(),
                  limits: RobotLimits = RobotLimits(), dt=0.05):
    """ORCA velocity for the robot treated as a disc of its footprint radius."""
    positions = np.asarray(positions, float).reshape(-1, 2)
    velocities = np.asarray(velocities, float).reshape(-1, 2)
    radii = np.asarray(radii, float).reshape(-1)
    if len(radii):
        near = np.hypot(positions[:, 0] - robot.x, positions[:, 1] - robot.y) <= params.neighbor_range
        positions, velocities, radii = positions[near], velocities[near], radii[near]
    vr = robot.world_velocity
    speed = min(params.preferred_speed, limits.v_max)
    pref = speed * np.asarray(goal.axis, float)
    vx, vy = orca_kernel(robot.x, robot.y, vr[0], vr[1], robot.radius, pref[0], pref[1], speed,
                         np.ascontiguousarray(positions), np.ascontiguousarray(velocities),
                         np.ascontiguousarray(radii), np.full(len(radii), 0.5), params.horizon, dt)
    return np.array([vx, vy])


def rvo_command(robot: RobotState, positions, velocities, radii, goal: GoalSpec,
                params: RvoCtrlParams = RvoCtrlParams(), limits: RobotLimits = RobotLimits(), dt=0.05):
    desired = rvo_holonomic(robot, positions, velocities, radii, goal, params, limits, dt)
    return project_to_diff_drive(desired, robot, limits)


# -- controller objects ---------------------------------------------------------


@dataclass
class BaselineController:
    goal: GoalSpec = field(default_factory=GoalSpec)
    name: str = "baseline"

    def command(self, view: WorldView):
        return baseline_command(view.robot, self.goal, view.limits)


@dataclass
class DwaController:
    goal: GoalSpec = field(default_factory=GoalSpec)
    params: DwaParams = field(default_factory=DwaParams)
    name: str = "dwa"

    def command(self, view: WorldView):
        return dwa_command(view.robot, dwa_obstacles(view, self.params), self.goal, self.params, view.limits, view.dt)


@dataclass
class RvoController:
    goal: GoalSpec = field(default_factory=GoalSpec)
    params: RvoCtrlParams = field(default_factory=RvoCtrlParams)
    name: str = "rvo"

    def command(self, view: WorldView):
        c = view.crowd
        return rvo_command(view.robot, c.pos, c.vel, c.radius, self.goal, self.params, view.limits, view.dt)


CONTROLLERS = {"baseline": BaselineController, "dwa": DwaController, "rvo": RvoController}


def make_controller(kind, goal: GoalSpec = GoalSpec(), **params):
    """Build a controller by name; ``params`` override the kind's parameter block."""
    if kind not in CONTROLLERS:
        raise ValueError(f"unknown controller {kind!r}; expected one of {sorted(CONTROLLERS)}")
    if kind == "baseline":
        if params:
            raise ValueError(f"baseline takes no parameters, got {sorted(params)}")
        return BaselineController(goal)
    if kind == "dwa":
        return DwaController(goal, DwaParams(**params))
    return RvoController(goal, RvoCtrlParams(**params))
