"""Benchmark scenarios: flows, densities, the 100-cell standard suite and crowd spawning."""

from __future__ import annotations

import hashlib
import itertools
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .crowd import Algorithm, ConfigError, CrowdModelConfig
from .nav import GoalSpec
from .world import AgentState, RobotState, WorldSpec

AGENT_RADIUS = 0.3
PREFERRED_SPEED = 1.4
ROBOT_CLEARANCE = 1.0
MAX_REJECTIONS = 100_000
ROBOT_START = (1.0, 5.0, 0.0)


class FlowKind(str, Enum):
    ONE_D_PLUS = "1D+"
    ONE_D_MINUS = "1D-"
    ONE_D_BOTH = "1Dx"
    TWO_D = "2D"
    TWO_D_BOTH = "2Dx"

    @property
    def slug(self):
        return {"1D+": "1Dp", "1D-": "1Dm", "1Dx": "1Dx", "2D": "2D", "2Dx": "2Dx"}[self.value]

    @property
    def axis(self):
        return 0 if self.value.startswith("1D") else 1


@dataclass(frozen=True)
class DensityLevel:
    agents: int
    per_m2: float

    def to_dict(self):
        return {"agents": self.agents, "per_m2": self.per_m2}


DENSITIES = (DensityLevel(50, 0.1), DensityLevel(100, 0.2), DensityLevel(200, 0.4), DensityLevel(350, 0.7))
LOW_DENSITY = DENSITIES[0]

CROWD_CONFIGS = (
    CrowdModelConfig(Algorithm.SOCIAL_FORCES, horizon=1.5, reactive_to_robot=True, name="sf-r"),
    CrowdModelConfig(Algorithm.SOCIAL_FORCES, horizon=1.5, reactive_to_robot=False, name="sf-nr"),
    CrowdModelConfig(Algorithm.RVO_SAMPLED, horizon=0.5, reactive_to_robot=True, name="rvo05-r"),
    CrowdModelConfig(Algorithm.RVO_SAMPLED, horizon=1.5, reactive_to_robot=True, name="rvo15-r"),
    CrowdModelConfig(Algorithm.RVO_SAMPLED, horizon=1.5, reactive_to_robot=False, name="rvo15-nr"),
)


class ScenarioError(ValueError):
    pass


class SpawnError(RuntimeError):
    """The requested crowd does not fit in the corridor."""


class Status(str, Enum):
    RUNNING = "running"
    GOAL_REACHED = "goal"
    TIMED_OUT = "timeout"


def density_level(agents: int) -> DensityLevel:
    for d in DENSITIES:
        if d.agents == agents:
            return d
    raise ScenarioError(f"unsupported density of {agents} agents")


def scenario_id(flow: FlowKind, density: DensityLevel, crowd_name: str) -> str:
    return f"{flow.slug}_{density.agents:03d}_{crowd_name}"


def cell_seed(master_seed: int, cell: str) -> int:
    digest = hashlib.blake2b(f"{master_seed}/{cell}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little") >> 1


@dataclass
class ScenarioSpec:
    id: str
    flow: FlowKind
    density: DensityLevel
    crowd_config: CrowdModelConfig
    seed: int
    agents: list = field(default_factory=list)
    world: WorldSpec = field(default_factory=WorldSpec)
    goal: GoalSpec = field(default_factory=GoalSpec)
    robot: RobotState = field(default_factory=lambda: RobotState(*ROBOT_START))
    controller: dict | None = None
    sensors: dict | None = None

    def to_dict(self):
        d = {
            "id": self.id,
            "world": self.world.to_dict(),
            "flow": self.flow.value,
            "density": self.density.to_dict(),
            "crowd_config": self.crowd_config.to_dict(),
            "seed": self.seed,
            "agents": [_agent_to_dict(a) for a in self.agents],
            "goal": self.goal.to_dict(),
            "robot": {"x": self.robot.x, "y": self.robot.y, "theta": self.robot.theta, "radius": self.robot.radius,
                      "mass": self.robot.mass, "top_height": self.robot.top_height},
        }
        if self.controller is not None:
            d["controller"] = self.controller
        if self.sensors is not None:
            d["sensors"] = self.sensors
        return d

    @classmethod
    def from_dict(cls, d):
        _check_keys(d, {"id", "world", "flow", "density", "crowd_config", "seed", "agents", "goal"},
                    {"controller", "robot", "sensors"}, "scenario")
        _check_keys(d["world"], {"length", "width"}, set(), "world")
        _check_keys(d["density"], {"agents"}, {"per_m2"}, "density")
        _check_keys(d["goal"], {"axis", "progress", "time_limit"}, set(), "goal")
        try:
            crowd_config = CrowdModelConfig.from_dict(d["crowd_config"])
        except (ConfigError, TypeError) as e:
            raise ScenarioError(str(e)) from None
        agents = []
        for a in d["agents"]:
            _check_keys(a, {"id", "x", "y", "vx", "vy", "goal"}, {"radius", "preferred_speed"}, "agent")
            goal = np.array(a["goal"], float)
            agents.append(AgentState(int(a["id"]), np.array([a["x"], a["y"]], float), np.array([a["vx"], a["vy"]], float),
                                     float(a.get("radius", AGENT_RADIUS)), float(a.get("preferred_speed", PREFERRED_SPEED)),
                                     goal, 0 if abs(goal[0]) >= abs(goal[1]) else 1))
        robot = RobotState(*ROBOT_START)
        if "robot" in d:
            _check_keys(d["robot"], set(), {"x", "y", "theta", "radius", "mass", "top_height"}, "robot")
            robot = RobotState(**{k: float(v) for k, v in d["robot"].items()})
        if "controller" in d:
            _check_keys(d["controller"], {"kind"}, {"params"}, "controller")
        if "sensors" in d:
            _check_keys(d["sensors"], set(), {"lidar"}, "sensors")
        g = d["goal"]
        return cls(
            id=d["id"], flow=FlowKind(d["flow"]), density=density_level(int(d["density"]["agents"])),
            crowd_config=crowd_config, seed=int(d["seed"]), agents=agents,
            world=WorldSpec(float(d["world"]["length"]), float(d["world"]["width"])),
            goal=GoalSpec(tuple(float(x) for x in g["axis"]), float(g["progress"]), float(g["time_limit"])),
            robot=robot, controller=d.get("controller"), sensors=d.get("sensors"),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1) + "\n"

    def save(self, directory) -> Path:
        path = Path(directory) / f"{self.id}.json"
        path.write_text(self.dumps())
        return path

    @classmethod
    def load(cls, path):
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except ScenarioError as e:
            raise ScenarioError(f"{path}: {e}") from None


def _agent_to_dict(a: AgentState):
    return {"id": a.id, "x": float(a.position[0]), "y": float(a.position[1]), "vx": float(a.velocity[0]),
            "vy": float(a.velocity[1]), "radius": a.radius, "preferred_speed": a.preferred_speed,
            "goal": [float(a.goal_direction[0]), float(a.goal_direction[1])]}


def _check_keys(d, required, optional, where):
    if not isinstance(d, dict):
        raise ScenarioError(f"{where}: expected an object")
    for key in d:
        if key not in required and key not in optional:
            raise ScenarioError(f"{where}: unknown key {key!r}")
    for key in required:
        if key not in d:
            raise ScenarioError(f"{where}: missing key {key!r}")


def goal_direction(flow: FlowKind, index: int) -> np.ndarray:
    sign = -1.0 if (flow is FlowKind.ONE_D_MINUS or (flow in (FlowKind.ONE_D_BOTH, FlowKind.TWO_D_BOTH) and index % 2)) else 1.0
    return np.array([sign, 0.0]) if flow.axis == 0 else np.array([0.0, sign])


def spawn_crowd(n, flow: FlowKind, rng, world: WorldSpec = WorldSpec(), robot_start=ROBOT_START[:2],
                radius=AGENT_RADIUS, preferred_speed=PREFERRED_SPEED, max_rejections=MAX_REJECTIONS):
    """Uniform non-overlapping placement by rejection sampling, goals assigned by flow."""
    flow = FlowKind(flow)
    lo_x, lo_y = radius, radius
    span_x, span_y = world.length - 2.0 * radius, world.width - 2.0 * radius
    min_d = 2.0 * radius
    min_sq = min_d * min_d
    rx, ry = float(robot_start[0]), float(robot_start[1])
    # spatial hash with cells of one clearance diameter: conflicts lie in the 3x3 block
    cells = {}
    pts = []
    rejections = 0
    while len(pts) < n:
        for u, w in rng.random((2 * n, 2)).tolist():
            px, py = lo_x + u * span_x, lo_y + w * span_y
            cx, cy = int(px // min_d), int(py // min_d)
            ok = (px - rx) ** 2 + (py - ry) ** 2 >= ROBOT_CLEARANCE ** 2
            if ok:
                for key in ((cx - 1, cy - 1), (cx, cy - 1), (cx + 1, cy - 1), (cx - 1, cy), (cx, cy),
                            (cx + 1, cy), (cx - 1, cy + 1), (cx, cy + 1), (cx + 1, cy + 1)):
                    for qx, qy in cells.get(key, ()):
                        if (qx - px) * (qx - px) + (qy - py) * (qy - py) < min_sq:
                            ok = False
                            break
                    if not ok:
                        break
            if ok:
                pts.append((px, py))
                cells.setdefault((cx, cy), []).append((px, py))
                if len(pts) == n:
                    break
            else:
                rejections += 1
                if rejections >= max_rejections:
                    raise SpawnError(f"could not place {n} agents after {max_rejections} rejections (placed {len(pts)})")
    pts = np.array(pts, dtype=np.float64).reshape(n, 2)
    agents = []
    for i in range(n):
        g = goal_direction(flow, i)
        agents.append(AgentState(i, pts[i].copy(), preferred_speed * g, radius, preferred_speed, g, flow.axis))
    return agents


def make_scenario(flow, density: DensityLevel, crowd_config: CrowdModelConfig, seed: int, **kw) -> ScenarioSpec:
    flow = FlowKind(flow)
    rng = np.random.default_rng(seed)
    sid = scenario_id(flow, density, crowd_config.name)
    world = kw.pop("world", WorldSpec())
    agents = spawn_crowd(density.agents, flow, rng, world,
                         preferred_speed=crowd_config.preferred_speed)
    return ScenarioSpec(sid, flow, density, crowd_config, seed, agents, world, **kw)


@dataclass
class SuiteSpec:
    scenarios: list
    master_seed: int

    def __len__(self):
        return len(self.scenarios)

    def manifest(self):
        return {"master_seed": self.master_seed,
                "crowd_configs": [c.to_dict() for c in CROWD_CONFIGS],
                "scenarios": [f"{s.id}.json" for s in self.scenarios]}

    def save(self, directory) -> Path:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        for s in self.scenarios:
            s.save(directory)
        path = directory / "manifest.json"
        path.write_text(json.dumps(self.manifest(), indent=1) + "\n")
        return path

    @classmethod
    def load(cls, directory):
        directory = Path(directory)
        manifest = json.loads((directory / "manifest.json").read_text())
        _check_keys(manifest, {"master_seed", "scenarios"}, {"crowd_configs"}, "manifest")
        scenarios = [ScenarioSpec.load(directory / name) for name in manifest["scenarios"]]
        return cls(scenarios, int(manifest["master_seed"]))


def generate_suite(master_seed: int) -> SuiteSpec:
    """5 flows x 4 densities x 5 crowd configurations, placements frozen per cell."""
    scenarios = []
    for flow, density, cfg in itertools.product(FlowKind, DENSITIES, CROWD_CONFIGS):
        sid = scenario_id(flow, density, cfg.name)
        scenarios.append(make_scenario(flow, density, cfg, cell_seed(master_seed, sid)))
    return SuiteSpec(scenarios, master_seed)


def termination_check(progress, t, goal: GoalSpec = GoalSpec()) -> Status:
    """Goal takes precedence over the time limit when both hold."""
    if progress >= goal.progress:
        return Status.GOAL_REACHED
    if t >= goal.time_limit - 1e-9:
        return Status.TIMED_OUT
    return Status.RUNNING


def progress_along(goal: GoalSpec, start, position) -> float:
    return (position[0] - start[0]) * goal.axis[0] + (position[1] - start[1]) * goal.axis[1]
