"""Synchronous simulation step for one robot in a wrapping crowd."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._jit import njit
from .crowd import CrowdModelConfig, crowd_velocities
from .geometry import wrap_angle
from .grid import DEFAULT_CELL_SIZE, INTERACTION_RANGE, NeighborGrid, build_grid
from .world import Crowd, RobotLimits, RobotState, SimClock, WorldSpec, WorldView

OMEGA_EPS = 1e-6
AGENT_MASS = 70.0
RELAX_ITERATIONS = 8
CONTACT_EPS = 1e-9


class SimulationError(RuntimeError):
    """Raised when the state becomes non-finite (model blow-up)."""


# -- kinematics ---------------------------------------------------------------


@njit
def diff_drive_kernel(x, y, theta, v, w, dt):
    if abs(w) < OMEGA_EPS:
        return x + v * dt * math.cos(theta), y + v * dt * math.sin(theta), theta
    th1 = theta + w * dt
    rho = v / w
    return x + rho * (math.sin(th1) - math.sin(theta)), y - rho * (math.cos(th1) - math.cos(theta)), th1


def integrate_diff_drive(pose, v, w, dt):
    """Exact arc integration of a unicycle over ``dt``."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    return diff_drive_kernel(float(pose[0]), float(pose[1]), float(pose[2]), float(v), float(w), float(dt))


def clamp_command(previous, commanded, limits: RobotLimits, dt):
    v_prev, w_prev = previous
    v, w = commanded
    dv = limits.a_max * dt
    dw = limits.alpha_max * dt
    v = min(max(v, v_prev - dv), v_prev + dv)
    v = min(max(v, -limits.v_max), limits.v_max)
    w = min(max(w, w_prev - dw), w_prev + dw)
    w = min(max(w, -limits.w_max), limits.w_max)
    return v, w


# -- contacts -----------------------------------------------------------------


@njit
def candidate_pairs(pos, radius, length, width):
    """Pairs (i < j) whose centers are within the largest possible contact distance (+ margin)."""
    n = pos.shape[0]
    if n < 2:
        return np.empty((0, 2), np.int64)
    reach = 2.0 * radius.max() + 0.25
    cell = max(reach, 0.5)
    nx = max(1, int(math.ceil(length / cell)))
    ny = max(1, int(math.ceil(width / cell)))
    start, items = build_grid(pos, cell, nx, ny)
    cap = 16 * n
    pairs = np.empty((cap, 2), np.int64)
    buf = np.empty(n, np.int64)
    k = 0
    r2 = reach * reach
    for i in range(n):
        cx = min(max(int(math.floor(pos[i, 0] / cell)), 0), nx - 1)
        cy = min(max(int(math.floor(pos[i, 1] / cell)), 0), ny - 1)
        m = 0
        for gy in range(max(cy - 1, 0), min(cy + 1, ny - 1) + 1):
            for gx in range(max(cx - 1, 0), min(cx + 1, nx - 1) + 1):
                c = gy * nx + gx
                for s in range(start[c], start[c + 1]):
                    j = items[s]
                    if j > i:
                        dx = pos[j, 0] - pos[i, 0]
                        dy = pos[j, 1] - pos[i, 1]
                        if dx * dx + dy * dy <= r2:
                            buf[m] = j
                            m += 1
        buf[:m].sort()
        for q in range(m):
            if k == pairs.shape[0]:
                grown = np.empty((2 * pairs.shape[0], 2), np.int64)
                grown[:k] = pairs[:k]
                pairs = grown
            pairs[k, 0] = i
            pairs[k, 1] = buf[q]
            k += 1
    return pairs[:k]


@njit
def relax_overlaps(pos, radius, inv_mass, pairs, iterations):
    """Gauss-Seidel position correction along contact normals, inverse-mass weighted."""
    for _ in range(iterations):
        moved = False
        for q in range(pairs.shape[0]):
            i = pairs[q, 0]
            j = pairs[q, 1]
            dx = pos[i, 0] - pos[j, 0]
            dy = pos[i, 1] - pos[j, 1]
            d = math.sqrt(dx * dx + dy * dy)
            pen = radius[i] + radius[j] - d
            if pen <= 0.0:
                continue
            if d > 0.0:
                nx = dx / d
                ny = dy / d
            else:
                nx = 1.0
                ny = 0.0
            wsum = inv_mass[i] + inv_mass[j]
            if wsum <= 0.0:
                continue
            si = pen * inv_mass[i] / wsum
            sj = pen * inv_mass[j] / wsum
            pos[i, 0] += nx * si
            pos[i, 1] += ny * si
            pos[j, 0] -= nx * sj
            pos[j, 1] -= ny * sj
            moved = True
        if not moved:
            break


def resolve_overlaps(positions, radii, masses, iterations=RELAX_ITERATIONS, length=None, width=None):
    """Separate penetrating discs; returns corrected positions (input untouched).

    Each correction is split in inverse proportion to mass, so the lighter body
    moves more. A mass of ``inf`` pins a body.
    """
    pos = np.array(positions, dtype=np.float64).reshape(-1, 2)
    radii = np.asarray(radii, dtype=np.float64)
    inv_mass = 1.0 / np.asarray(masses, dtype=np.float64)
    if length is None:
        length = float(max(pos[:, 0].max(initial=0.0), 1.0))
    if width is None:
        width = float(max(pos[:, 1].max(initial=0.0), 1.0))
    pairs = candidate_pairs(pos, radii, float(length), float(width))
    relax_overlaps(pos, radii, inv_mass, pairs, iterations)
    return pos


@njit
def robot_contacts_kernel(pos, vel, radius, rx, ry, rvx, rvy, rr):
    """Indices, depths, normals (robot -> agent) and approach speeds of robot contacts."""
    n = pos.shape[0]
    idx = np.empty(n, np.int64)
    depth = np.empty(n)
    normal = np.empty((n, 2))
    vrel = np.empty(n)
    k = 0
    for i in range(n):
        dx = pos[i, 0] - rx
        dy = pos[i, 1] - ry
        d = math.sqrt(dx * dx + dy * dy)
        pen = radius[i] + rr - d
        if pen > CONTACT_EPS:
            if d > 0.0:
                nx = dx / d
                ny = dy / d
            else:
                nx = 1.0
                ny = 0.0
            idx[k] = i
            depth[k] = pen
            normal[k, 0] = nx
            normal[k, 1] = ny
            vrel[k] = max(0.0, (rvx - vel[i, 0]) * nx + (rvy - vel[i, 1]) * ny)
            k += 1
    return idx[:k], depth[:k], normal[:k], vrel[:k]


# -- wrap ---------------------------------------------------------------------


def wrap_agent(position, flow_axis, world: WorldSpec):
    """Wrap the flow-axis coordinate modulo the corridor extent; keep the transverse one."""
    p = np.array(position, dtype=np.float64)
    extent = world.length if flow_axis == 0 else world.width
    p[flow_axis] = p[flow_axis] % extent
    return p


@njit
def confine_and_wrap(pos, radius, flow_axis, length, width):
    for i in range(pos.shape[0]):
        r = radius[i]
        if flow_axis[i] == 0:
            pos[i, 1] = min(max(pos[i, 1], r), width - r)
            pos[i, 0] = pos[i, 0] % length
        else:
            pos[i, 0] = min(max(pos[i, 0], r), length - r)
            pos[i, 1] = pos[i, 1] % width


# -- records ------------------------------------------------------------------


@dataclass
class ContactSet:
    ids: np.ndarray
    depth: np.ndarray
    normal: np.ndarray
    v_rel: np.ndarray
    onset: np.ndarray

    def __len__(self):
        return self.ids.shape[0]

    @classmethod
    def empty(cls):
        return cls(np.zeros(0, np.int64), np.zeros(0), np.zeros((0, 2)), np.zeros(0), np.zeros(0, bool))


@dataclass
class StepRecord:
    t: float
    robot: tuple  # (x, y, theta, v, w)
    ids: np.ndarray
    pos: np.ndarray
    vel: np.ndarray
    contacts: ContactSet
    lidar: object = None


@dataclass
class SimState:
    clock: SimClock
    robot: RobotState
    crowd: Crowd
    in_contact: np.ndarray

    @classmethod
    def initial(cls, robot: RobotState, crowd: Crowd, dt: float):
        return cls(SimClock(dt, 0), robot, crowd, np.zeros(len(crowd), bool))

    def record(self, contacts=None, lidar=None) -> StepRecord:
        r = self.robot
        return StepRecord(self.clock.t, (r.x, r.y, r.theta, r.v, r.w), self.crowd.ids.copy(),
                          self.crowd.pos.copy(), self.crowd.vel.copy(),
                          ContactSet.empty() if contacts is None else contacts, lidar)


@dataclass
class StepConfig:
    """Everything about a run that stays fixed across steps."""

    world: WorldSpec = field(default_factory=WorldSpec)
    limits: RobotLimits = field(default_factory=RobotLimits)
    agent_mass: float = AGENT_MASS
    interaction_range: float = INTERACTION_RANGE
    robot_pushable: bool = False  # kinematic robot: contacts never displace it
    lidar: object = None  # LidarSpec when scans are recorded


def _check_finite(state: SimState):
    r = state.robot
    ok = all(math.isfinite(x) for x in (r.x, r.y, r.theta, r.v, r.w))
    ok = ok and np.isfinite(state.crowd.pos).all() and np.isfinite(state.crowd.vel).all()
    if not ok:
        raise SimulationError(f"non-finite state at step {state.clock.step_index} (t={state.clock.t:.3f} s)")


def step(cfg: StepConfig, crowd_config: CrowdModelConfig, controller, state: SimState, rng=None):
    """Advance one step; returns ``(new_state, record, contacts)``."""
    _check_finite(state)
    world = cfg.world
    dt = state.clock.dt
    crowd = state.crowd
    robot = state.robot

    # (1) frozen views at t
    view = WorldView(world, robot, crowd, dt, cfg.limits)
    lidar = None
    if cfg.lidar is not None:
        from .sensors import lidar_scan

        lidar = lidar_scan(robot.pose, crowd, world, cfg.lidar, rng)

    # (2) controller
    v, w = clamp_command((robot.v, robot.w), controller.command(view), cfg.limits, dt)

    # (3) synchronous crowd decision
    if len(crowd):
        grid = NeighborGrid.build(crowd.pos, world.length, world.width, DEFAULT_CELL_SIZE)
        new_vel = crowd_velocities(view, crowd_config, rng=cfg.interaction_range, grid=grid)
    else:
        new_vel = np.zeros((0, 2))

    # (4) integrate
    x, y, th = diff_drive_kernel(robot.x, robot.y, robot.theta, v, w, dt)
    new_pos = crowd.pos + new_vel * dt
    rvx, rvy = v * math.cos(th), v * math.sin(th)

    # (5) contacts, then overlap resolution (robot is the last body)
    idx, depth, normal, vrel = robot_contacts_kernel(new_pos, new_vel, crowd.radius, x, y, rvx, rvy, robot.radius)
    in_contact = np.zeros(len(crowd), bool)
    in_contact[idx] = True
    contacts = ContactSet(crowd.ids[idx], depth, normal, vrel, ~state.in_contact[idx])
    if len(crowd):
        bodies = np.vstack([new_pos, [[x, y]]])
        radii = np.append(crowd.radius, robot.radius)
        inv_robot = 1.0 / robot.mass if cfg.robot_pushable else 0.0
        inv_mass = np.append(np.full(len(crowd), 1.0 / cfg.agent_mass), inv_robot)
        pairs = candidate_pairs(bodies, radii, world.length, world.width)
        relax_overlaps(bodies, radii, inv_mass, pairs, RELAX_ITERATIONS)
        new_pos = bodies[:-1]
        x, y = bodies[-1]
    # robot cannot cross the walls
    x = min(max(x, robot.radius), world.length - robot.radius)
    y = min(max(y, robot.radius), world.width - robot.radius)

    # (6) wrap
    new_pos = np.ascontiguousarray(new_pos)
    confine_and_wrap(new_pos, crowd.radius, crowd.flow_axis, world.length, world.width)

    new_crowd = Crowd(crowd.ids, new_pos, new_vel, crowd.radius, crowd.pref_speed, crowd.goal_dir, crowd.flow_axis)
    new_state = SimState(state.clock.tick(), robot.moved(x=float(x), y=float(y), theta=float(wrap_angle(th)), v=float(v), w=float(w)),
                         new_crowd, in_contact)
    _check_finite(new_state)
    # (7) record
    return new_state, new_state.record(contacts, lidar), contacts
