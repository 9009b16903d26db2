"""Velocity-space crowd models: social forces, sampled RVO and ORCA."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from ._jit import njit
from .geometry import ttc_kernel
from .grid import DEFAULT_CELL_SIZE, INTERACTION_RANGE, NeighborGrid, query_grid
from .orca import orca_kernel
from .world import AgentState, Crowd, WorldSpec

SPEED_CAP_FACTOR = 1.3
CANDIDATE_SPEED_FACTOR = 1.1
MOVING_EPS = 1e-9


class Algorithm(str, Enum):
    SOCIAL_FORCES = "SocialForces"
    RVO_SAMPLED = "RvoSampled"
    ORCA = "Orca"


ALGORITHM_CODES = {Algorithm.SOCIAL_FORCES: 0, Algorithm.RVO_SAMPLED: 1, Algorithm.ORCA: 2}

# Per-algorithm parameter defaults; unknown keys are rejected.
DEFAULT_PARAMS = {
    Algorithm.SOCIAL_FORCES: {"tau_relax": 0.5, "A": 2.0, "B": 0.35, "B_wall": 0.2},
    Algorithm.RVO_SAMPLED: {"w": 1.0, "eps_t": 0.05, "n_directions": 12, "n_speeds": 6},
    Algorithm.ORCA: {},
}
_PARAM_SLOTS = ("tau_relax", "A", "B", "B_wall", "w", "eps_t", "n_directions", "n_speeds")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class CrowdModelConfig:
    algorithm: Algorithm = Algorithm.RVO_SAMPLED
    horizon: float = 1.5
    reactive_to_robot: bool = True
    preferred_speed: float = 1.4
    max_accel: float = 10.0
    params: dict = field(default_factory=dict)
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "algorithm", Algorithm(self.algorithm))
        if not self.horizon > 0:
            raise ConfigError(f"horizon must be positive, got {self.horizon}")
        allowed = DEFAULT_PARAMS[self.algorithm]
        for key in self.params:
            if key not in allowed:
                raise ConfigError(f"unknown parameter {key!r} for {self.algorithm.value}")

    def param(self, key):
        return self.params.get(key, DEFAULT_PARAMS[self.algorithm].get(key))

    def param_vector(self) -> np.ndarray:
        merged = {}
        for algo in Algorithm:
            merged.update(DEFAULT_PARAMS[algo])
        merged.update(self.params)
        return np.array([float(merged[k]) for k in _PARAM_SLOTS])

    def to_dict(self):
        return {
            "name": self.name,
            "algorithm": self.algorithm.value,
            "horizon": self.horizon,
            "reactive_to_robot": self.reactive_to_robot,
            "preferred_speed": self.preferred_speed,
            "max_accel": self.max_accel,
            "params": dict(self.params),
        }

    @classmethod
    def from_dict(cls, d):
        known = {"name", "algorithm", "horizon", "reactive_to_robot", "preferred_speed", "max_accel", "params"}
        for key in d:
            if key not in known:
                raise ConfigError(f"unknown crowd_config key {key!r}")
        return cls(**d)


# -- per-agent kernels --------------------------------------------------------


@njit
def sf_accel_kernel(px, py, vx, vy, r, pref, gx, gy, npos, nrad, k,
                    wall_mode, length, width, tau_relax, A, B, B_wall):
    ax = (pref * gx - vx) / tau_relax
    ay = (pref * gy - vy) / tau_relax
    for j in range(k):
        dx = px - npos[j, 0]
        dy = py - npos[j, 1]
        d = math.sqrt(dx * dx + dy * dy)
        if d > 0.0:
            nx = dx / d
            ny = dy / d
        else:
            nx = 1.0
            ny = 0.0
        f = A * math.exp((r + nrad[j] - d) / B)
        ax += f * nx
        ay += f * ny
    # walls parallel to the flow axis; the walls the flow crosses are permeable
    if wall_mode == 1:
        ay += A * math.exp((r - py) / B_wall)
        ay -= A * math.exp((r - (width - py)) / B_wall)
    elif wall_mode == 2:
        ax += A * math.exp((r - px) / B_wall)
        ax -= A * math.exp((r - (length - px)) / B_wall)
    return ax, ay


@njit
def rvo_candidate(idx, pref, gx, gy, n_dirs, n_speeds):
    if idx == 0:
        return pref * gx, pref * gy
    if idx == 1:
        return 0.0, 0.0
    m = idx - 2
    kd = m // n_speeds
    ks = m % n_speeds + 1
    ang = 2.0 * math.pi * kd / n_dirs
    c = math.cos(ang)
    s = math.sin(ang)
    speed = pref * 1.1 * ks / n_speeds
    return speed * (c * gx - s * gy), speed * (s * gx + c * gy)


@njit
def rvo_kernel(px, py, vx, vy, r, pref, gx, gy, npos, nvel, nrad, nrecip, k,
               tau, w, eps_t, n_dirs, n_speeds):
    """Lowest-cost sampled velocity; returns (vx, vy, cost, index)."""
    prefx = pref * gx
    prefy = pref * gy
    n_cand = 2 + n_dirs * n_speeds
    best = np.inf
    best_i = 0
    bx = 0.0
    by = 0.0
    for idx in range(n_cand):
        cx, cy = rvo_candidate(idx, pref, gx, gy, n_dirs, n_speeds)
        ex = cx - prefx
        ey = cy - prefy
        dist = math.sqrt(ex * ex + ey * ey)
        if dist >= best:
            continue
        ttc_min = np.inf
        cost = dist
        for j in range(k):
            if nrecip[j]:
                ux = 2.0 * cx - vx
                uy = 2.0 * cy - vy
            else:
                ux = cx
                uy = cy
            t = ttc_kernel(px - npos[j, 0], py - npos[j, 1], ux - nvel[j, 0], uy - nvel[j, 1], r + nrad[j])
            if t < ttc_min:
                ttc_min = t
                if ttc_min < tau:
                    cost = dist + w / max(ttc_min, eps_t)
                    if cost >= best:
                        break
        if cost < best:
            best = cost
            best_i = idx
            bx = cx
            by = cy
    return bx, by, best, best_i


@njit
def _cap_speed(vx, vy, cap):
    s = math.sqrt(vx * vx + vy * vy)
    if s > cap:
        f = cap / s
        return vx * f, vy * f
    return vx, vy


@njit
def agent_velocity_kernel(algorithm, px, py, vx, vy, r, pref, gx, gy, wall_mode,
                          npos, nvel, nrad, nrecip, k, horizon, max_accel, params, dt, length, width):
    if algorithm == 0:
        ax, ay = sf_accel_kernel(px, py, vx, vy, r, pref, gx, gy, npos, nrad, k, wall_mode, length, width,
                                 params[0], params[1], params[2], params[3])
        a = math.sqrt(ax * ax + ay * ay)
        if a > max_accel:
            ax *= max_accel / a
            ay *= max_accel / a
        nvx = vx + ax * dt
        nvy = vy + ay * dt
    elif algorithm == 1:
        nvx, nvy, _, _ = rvo_kernel(px, py, vx, vy, r, pref, gx, gy, npos, nvel, nrad, nrecip, k,
                                    horizon, params[4], params[5], int(params[6]), int(params[7]))
    else:
        share = np.full(k, 0.5)
        nvx, nvy = orca_kernel(px, py, vx, vy, r, pref * gx, pref * gy, pref,
                               npos[:k], nvel[:k], nrad[:k], share, horizon, dt)
    return _cap_speed(nvx, nvy, SPEED_CAP_FACTOR * pref)


@njit
def crowd_velocities_kernel(pos, vel, radius, pref_speed, goal_dir, flow_axis,
                            rx, ry, rvx, rvy, rr, include_robot,
                            algorithm, horizon, max_accel, params, dt, length, width, rng,
                            cell_start, items, cell_size, nx, ny, order):
    """New velocity for every agent, each a pure function of the frozen state."""
    n = pos.shape[0]
    out = np.empty((n, 2))
    ids = np.empty(n, np.int64)
    npos = np.empty((n + 1, 2))
    nvel = np.empty((n + 1, 2))
    nrad = np.empty(n + 1)
    nrecip = np.empty(n + 1, np.bool_)
    for oi in range(order.shape[0]):
        i = order[oi]
        px = pos[i, 0]
        py = pos[i, 1]
        m = query_grid(pos, cell_start, items, cell_size, nx, ny, px, py, rng, i, ids)
        k = 0
        if include_robot:
            ddx = rx - px
            ddy = ry - py
            if ddx * ddx + ddy * ddy <= rng * rng:
                npos[0, 0] = rx
                npos[0, 1] = ry
                nvel[0, 0] = rvx
                nvel[0, 1] = rvy
                nrad[0] = rr
                nrecip[0] = False
                k = 1
        for q in range(m):
            j = ids[q]
            npos[k, 0] = pos[j, 0]
            npos[k, 1] = pos[j, 1]
            nvel[k, 0] = vel[j, 0]
            nvel[k, 1] = vel[j, 1]
            nrad[k] = radius[j]
            nrecip[k] = vel[j, 0] * vel[j, 0] + vel[j, 1] * vel[j, 1] > MOVING_EPS * MOVING_EPS
            k += 1
        wall_mode = 1 if flow_axis[i] == 0 else 2
        out[i, 0], out[i, 1] = agent_velocity_kernel(
            algorithm, px, py, vel[i, 0], vel[i, 1], radius[i], pref_speed[i], goal_dir[i, 0], goal_dir[i, 1],
            wall_mode, npos, nvel, nrad, nrecip, k, horizon, max_accel, params, dt, length, width)
    return out


# -- Python-facing API --------------------------------------------------------


def _neighbor_arrays(neighbors, robot=None):
    """Stack neighbour discs; ``robot`` (position, velocity, radius) goes first and is non-reciprocal."""
    rows = []
    if robot is not None:
        rows.append((robot[0][0], robot[0][1], robot[1][0], robot[1][1], robot[2], False))
    for a in neighbors:
        v = np.asarray(a.velocity, float)
        rows.append((a.position[0], a.position[1], v[0], v[1], a.radius, bool(v @ v > MOVING_EPS ** 2)))
    k = len(rows)
    npos = np.array([[r[0], r[1]] for r in rows], float).reshape(k, 2)
    nvel = np.array([[r[2], r[3]] for r in rows], float).reshape(k, 2)
    nrad = np.array([r[4] for r in rows], float)
    nrecip = np.array([r[5] for r in rows], np.bool_)
    return npos, nvel, nrad, nrecip, k


def social_forces_accel(agent: AgentState, neighbors, walls: WorldSpec | None = None, params=None):
    """Goal relaxation plus exponential repulsion from neighbours and the lateral walls.

    ``walls`` is the corridor; only the two walls parallel to the agent's flow
    axis push. ``None`` disables wall forces.
    """
    p = dict(DEFAULT_PARAMS[Algorithm.SOCIAL_FORCES])
    p.update(params or {})
    npos, _, nrad, _, k = _neighbor_arrays(neighbors)
    wall_mode = 0 if walls is None else (1 if agent.flow_axis == 0 else 2)
    length = walls.length if walls is not None else 0.0
    width = walls.width if walls is not None else 0.0
    ax, ay = sf_accel_kernel(agent.position[0], agent.position[1], agent.velocity[0], agent.velocity[1],
                             agent.radius, agent.preferred_speed, agent.goal_direction[0], agent.goal_direction[1],
                             npos, nrad, k, wall_mode, length, width,
                             p["tau_relax"], p["A"], p["B"], p["B_wall"])
    return np.array([ax, ay])


def rvo_candidates(agent: AgentState, n_directions=12, n_speeds=6) -> np.ndarray:
    """The candidate velocities in tie-break order: v_pref, zero, then the polar grid."""
    n = 2 + n_directions * n_speeds
    out = np.empty((n, 2))
    for i in range(n):
        out[i] = rvo_candidate(i, agent.preferred_speed, agent.goal_direction[0], agent.goal_direction[1],
                               n_directions, n_speeds)
    return out


def rvo_sampled_choice(agent: AgentState, neighbors, config: CrowdModelConfig, robot=None):
    """(velocity, cost, candidate index) minimising the sampled RVO cost."""
    npos, nvel, nrad, nrecip, k = _neighbor_arrays(neighbors, robot)
    vx, vy, cost, idx = rvo_kernel(
        agent.position[0], agent.position[1], agent.velocity[0], agent.velocity[1], agent.radius,
        agent.preferred_speed, agent.goal_direction[0], agent.goal_direction[1],
        npos, nvel, nrad, nrecip, k, config.horizon, float(config.param("w")), float(config.param("eps_t")),
        int(config.param("n_directions")), int(config.param("n_speeds")))
    return np.array([vx, vy]), cost, idx


def rvo_sampled_velocity(agent: AgentState, neighbors, config: CrowdModelConfig, rng=None, robot=None):
    # the candidate grid is deterministic; rng is accepted for interface symmetry
    return rvo_sampled_choice(agent, neighbors, config, robot)[0]


def orca_lines(agent: AgentState, neighbors, tau, dt=0.05, robot=None):
    """The ORCA half-planes ``(point, direction)`` this agent sees; permitted side is left of direction."""
    from .orca import orca_line

    npos, nvel, nrad, _, k = _neighbor_arrays(neighbors, robot)
    lines = np.empty((k, 4))
    for j in range(k):
        orca_line(agent.position[0], agent.position[1], agent.velocity[0], agent.velocity[1], agent.radius,
                  npos[j, 0], npos[j, 1], nvel[j, 0], nvel[j, 1], nrad[j], tau, dt, 0.5, lines, j)
    return lines


def orca_velocity(agent: AgentState, neighbors, tau, v_pref=None, dt=0.05, robot=None, max_speed=None):
    """ORCA velocity closest to ``v_pref`` (default: preferred speed along the goal)."""
    if v_pref is None:
        v_pref = agent.preferred_speed * agent.goal_direction
    if max_speed is None:
        max_speed = agent.preferred_speed
    npos, nvel, nrad, _, k = _neighbor_arrays(neighbors, robot)
    vx, vy = orca_kernel(agent.position[0], agent.position[1], agent.velocity[0], agent.velocity[1], agent.radius,
                         float(v_pref[0]), float(v_pref[1]), float(max_speed), npos, nvel, nrad,
                         np.full(k, 0.5), float(tau), float(dt))
    return np.array([vx, vy])


def crowd_velocities(view, config: CrowdModelConfig, rng=INTERACTION_RANGE, order=None, grid=None):
    """Synchronous velocity update for the whole crowd of ``view``."""
    crowd = view.crowd
    n = len(crowd)
    if n == 0:
        return np.zeros((0, 2))
    if grid is None:
        grid = NeighborGrid.build(crowd.pos, view.world.length, view.world.width, DEFAULT_CELL_SIZE)
    if order is None:
        order = np.arange(n, dtype=np.int64)
    robot = view.robot
    rv = robot.world_velocity
    return crowd_velocities_kernel(
        crowd.pos, crowd.vel, crowd.radius, crowd.pref_speed, crowd.goal_dir, crowd.flow_axis,
        robot.x, robot.y, rv[0], rv[1], robot.radius, bool(config.reactive_to_robot),
        ALGORITHM_CODES[config.algorithm], float(config.horizon), float(config.max_accel),
        config.param_vector(), float(view.dt), float(view.world.length), float(view.world.width), float(rng),
        grid.cell_start, grid.items, grid.cell_size, grid.nx, grid.ny, np.asarray(order, np.int64))


def update_agent_velocity(agent_index, view, config: CrowdModelConfig, rng=None):
    """New velocity of the agent at row ``agent_index`` of ``view.crowd``."""
    order = np.array([agent_index], np.int64)
    return crowd_velocities(view, config, order=order)[agent_index].copy()
