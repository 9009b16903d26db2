"""State containers shared by the simulator, crowd models and controllers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np


@dataclass(frozen=True)
class WorldSpec:
    """Axis-aligned corridor ``[0, length] x [0, width]`` enclosed by four walls."""

    length: float = 50.0
    width: float = 10.0

    @property
    def walls(self) -> np.ndarray:
        """Wall segments as rows ``(ax, ay, bx, by)``: bottom, right, top, left."""
        L, W = self.length, self.width
        return np.array([[0.0, 0.0, L, 0.0], [L, 0.0, L, W], [L, W, 0.0, W], [0.0, W, 0.0, 0.0]])

    def to_dict(self):
        return {"length": self.length, "width": self.width}


@dataclass(frozen=True)
class RobotLimits:
    v_max: float = 1.0
    a_max: float = 5.0
    w_max: float = 2.0 * math.pi
    alpha_max: float = 2.0 * math.pi


@dataclass(frozen=True)
class RobotState:
    """Differential-drive robot: pose, last executed (v, w) command and body."""

    x: float
    y: float
    theta: float
    v: float = 0.0
    w: float = 0.0
    radius: float = 0.18
    mass: float = 20.0
    top_height: float = 0.42

    @property
    def pose(self):
        return (self.x, self.y, self.theta)

    @property
    def world_velocity(self) -> np.ndarray:
        return np.array([self.v * math.cos(self.theta), self.v * math.sin(self.theta)])

    def moved(self, **changes) -> "RobotState":
        return replace(self, **changes)


@dataclass
class AgentState:
    """One crowd member (single-agent view used by the per-agent APIs)."""

    id: int
    position: np.ndarray
    velocity: np.ndarray
    radius: float = 0.3
    preferred_speed: float = 1.4
    goal_direction: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0]))
    flow_axis: int = 0

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=np.float64)
        self.velocity = np.asarray(self.velocity, dtype=np.float64)
        self.goal_direction = np.asarray(self.goal_direction, dtype=np.float64)


@dataclass
class Crowd:
    """Struct-of-arrays crowd; row ``i`` is the agent with ``ids[i]``."""

    ids: np.ndarray
    pos: np.ndarray
    vel: np.ndarray
    radius: np.ndarray
    pref_speed: np.ndarray
    goal_dir: np.ndarray
    flow_axis: np.ndarray

    def __len__(self):
        return self.ids.shape[0]

    @classmethod
    def empty(cls):
        return cls(np.zeros(0, np.int64), np.zeros((0, 2)), np.zeros((0, 2)), np.zeros(0),
                   np.zeros(0), np.zeros((0, 2)), np.zeros(0, np.int64))

    @classmethod
    def from_agents(cls, agents):
        if not agents:
            return cls.empty()
        return cls(
            ids=np.array([a.id for a in agents], np.int64),
            pos=np.array([a.position for a in agents], np.float64).reshape(-1, 2),
            vel=np.array([a.velocity for a in agents], np.float64).reshape(-1, 2),
            radius=np.array([a.radius for a in agents], np.float64),
            pref_speed=np.array([a.preferred_speed for a in agents], np.float64),
            goal_dir=np.array([a.goal_direction for a in agents], np.float64).reshape(-1, 2),
            flow_axis=np.array([a.flow_axis for a in agents], np.int64),
        )

    def agent(self, i) -> AgentState:
        return AgentState(int(self.ids[i]), self.pos[i].copy(), self.vel[i].copy(), float(self.radius[i]),
                          float(self.pref_speed[i]), self.goal_dir[i].copy(), int(self.flow_axis[i]))

    def copy(self) -> "Crowd":
        return Crowd(self.ids.copy(), self.pos.copy(), self.vel.copy(), self.radius.copy(),
                     self.pref_speed.copy(), self.goal_dir.copy(), self.flow_axis.copy())


@dataclass(frozen=True)
class SimClock:
    dt: float = 0.05
    step_index: int = 0

    @property
    def t(self) -> float:
        return self.step_index * self.dt

    def tick(self) -> "SimClock":
        return SimClock(self.dt, self.step_index + 1)


@dataclass
class WorldView:
    """Frozen snapshot handed to controllers and crowd models at the start of a step."""

    world: WorldSpec
    robot: RobotState
    crowd: Crowd
    dt: float
    limits: RobotLimits = RobotLimits()
