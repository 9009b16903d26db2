"""Path efficiency, crowd-flow disturbance, proximity and collision-energy metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

RATIO_EPS = 1e-9
JERK_EPS = 1e-3
OMEGA_FLOOR = 1e-3
NBR_REAC_MAX = 5.0
CHART_MAX = 1.5
TURN_WEIGHT = 1.0  # m/rad, mixes angular into linear speed variation
HEADING_SPEED_EPS = 1e-6
BIN_WIDTH = 0.5
N_BINS = 100

METRICS = ("time_ratio", "length_ratio", "smoothness_ratio", "nbr_reac", "nbr_vel", "prox", "colliding")
METRIC_LABELS = dict(zip(METRICS, ("T/Tcr", "L/Lcr", "J/Jcr", "NBR reac.", "NBR vel.", "Prox.", "Colliding")))


class Segment(str, Enum):
    FEET = "Feet"
    LOWER_LEGS = "LowerLegs"
    UPPER_LEGS = "UpperLegs"
    UPPER_BODY = "UpperBody"


REFLECTED_MASS = {Segment.FEET: 4.0, Segment.LOWER_LEGS: 13.0, Segment.UPPER_LEGS: 24.0, Segment.UPPER_BODY: 40.0}
SEGMENT_BOUNDARIES = (0.15, 0.55, 0.95)


@dataclass
class Trajectory:
    """Record stream as arrays; row 0 is the initial state, rows 1.. are steps."""

    t: np.ndarray
    robot: np.ndarray  # (n, 5): x, y, theta, v, w
    ids: np.ndarray
    pos: np.ndarray  # (n, N, 2)
    vel: np.ndarray
    contacts: list  # ContactSet per row

    @classmethod
    def from_records(cls, records):
        n_agents = records[0].ids.shape[0]
        return cls(
            t=np.array([r.t for r in records]),
            robot=np.array([r.robot for r in records], float).reshape(-1, 5),
            ids=records[0].ids,
            pos=np.array([r.pos for r in records], float).reshape(len(records), n_agents, 2),
            vel=np.array([r.vel for r in records], float).reshape(len(records), n_agents, 2),
            contacts=[r.contacts for r in records],
        )

    @property
    def dt(self):
        return float(self.t[1] - self.t[0]) if len(self.t) > 1 else 0.0

    def contact_flags(self):
        return np.array([len(c) > 0 for c in self.contacts[1:]], bool)


# -- path efficiency ----------------------------------------------------------


@dataclass
class PathStats:
    T: float
    L: float
    J: float


def path_stats(traj: Trajectory, turn_weight=TURN_WEIGHT) -> PathStats:
    r = traj.robot
    if len(r) == 0:
        raise ValueError("empty trajectory")
    T = float(traj.t[-1] - traj.t[0])
    L = float(np.sum(np.hypot(np.diff(r[:, 0]), np.diff(r[:, 1]))))
    J = float(np.sum(np.abs(np.diff(r[:, 3])) + turn_weight * np.abs(np.diff(r[:, 4]))))
    return PathStats(T, L, J)


@dataclass
class PathEfficiency:
    time_ratio: float
    length_ratio: float
    smoothness_ratio: float
    timed_out: bool = False

    def chart(self):
        return tuple(min(max(x, 0.0), CHART_MAX) for x in (self.time_ratio, self.length_ratio, self.smoothness_ratio))


def path_efficiency(solo: PathStats, crowd: PathStats, timed_out=False, time_limit=180.0) -> PathEfficiency:
    """Solo-over-crowd ratios; a timed-out crowd run is charged the full time limit."""
    t_cr = time_limit if timed_out else crowd.T
    return PathEfficiency(
        solo.T / max(t_cr, RATIO_EPS),
        solo.L / max(crowd.L, RATIO_EPS),
        max(solo.J, JERK_EPS) / max(crowd.J, JERK_EPS),
        timed_out,
    )


# -- crowd flow ---------------------------------------------------------------


@dataclass
class FlowEffect:
    nbr_vel: float
    nbr_reac: float
    no_neighbors: bool = False


def _heading_rates(vel, dt):
    """|d heading / dt| per agent between consecutive rows; zero where either speed is ~0."""
    heading = np.arctan2(vel[..., 1], vel[..., 0])
    speed = np.hypot(vel[..., 0], vel[..., 1])
    dh = np.abs((np.diff(heading, axis=0) + np.pi) % (2 * np.pi) - np.pi)
    valid = (speed[1:] > HEADING_SPEED_EPS) & (speed[:-1] > HEADING_SPEED_EPS)
    return np.where(valid, dh / dt, 0.0)


def flow_effect(traj: Trajectory, neighbor_range=1.0) -> FlowEffect:
    """Neighbour speed relative to the crowd, and crowd turning relative to neighbour turning."""
    n_steps = len(traj.t) - 1
    if n_steps < 1 or traj.pos.shape[1] == 0:
        return FlowEffect(1.0, 1.0, True)
    vel = traj.vel
    speed = np.hypot(vel[1:, :, 0], vel[1:, :, 1])
    omega = _heading_rates(vel, traj.dt)
    d = np.hypot(traj.pos[1:, :, 0] - traj.robot[1:, None, 0], traj.pos[1:, :, 1] - traj.robot[1:, None, 1])
    near = d <= neighbor_range
    has = near.any(axis=1)
    if not has.any():
        return FlowEffect(1.0, 1.0, True)
    cnt = near.sum(axis=1)[has]
    v_nbr = float(np.mean((speed * near).sum(axis=1)[has] / cnt))
    w_nbr = float(np.mean((omega * near).sum(axis=1)[has] / cnt))
    v_all = float(np.mean(speed.mean(axis=1)))
    w_all = float(np.mean(omega.mean(axis=1)))
    nbr_vel = v_nbr / max(v_all, RATIO_EPS)
    nbr_reac = min(max(w_all / max(w_nbr, OMEGA_FLOOR), 0.0), NBR_REAC_MAX)
    return FlowEffect(nbr_vel, nbr_reac, False)


# -- proximity and contact time -------------------------------------------------


def min_distance_trace(traj: Trajectory) -> np.ndarray:
    if traj.pos.shape[1] == 0:
        return np.full(len(traj.t) - 1, np.inf)
    d = np.hypot(traj.pos[1:, :, 0] - traj.robot[1:, None, 0], traj.pos[1:, :, 1] - traj.robot[1:, None, 1])
    return d.min(axis=1)


def proximity_from_trace(d_min, R=5.0) -> float:
    d = np.clip(np.asarray(d_min, float), 0.0, R)
    if d.size == 0:
        return 0.0
    return float(1.0 - np.mean(d / R))


def proximity(traj: Trajectory, R=5.0) -> float:
    return proximity_from_trace(min_distance_trace(traj), R)


def colliding_score(contact_flags, dt, T_scenario) -> float:
    """``1 - T_collision / T_scenario`` with ``T_collision`` summed over contact steps."""
    if not T_scenario > 0:
        raise ValueError("scenario time must be positive")
    t_coll = float(np.count_nonzero(np.asarray(contact_flags, bool))) * dt
    return min(max(1.0 - t_coll / T_scenario, 0.0), 1.0)


# -- collision energy ---------------------------------------------------------


def reflected_mass(segment, table=None) -> float:
    table = REFLECTED_MASS if table is None else table
    return float(table[Segment(segment)])


def reduced_mass(m_a, m_b) -> float:
    return 1.0 / (1.0 / m_a + 1.0 / m_b)


def impact_energy(m_ref, m_rob, v_rel) -> float:
    """Kinetic energy absorbed by a two-body impact at approach speed ``v_rel``."""
    if not (m_ref > 0 and m_rob > 0):
        raise ValueError("masses must be positive")
    return 0.5 * reduced_mass(m_ref, m_rob) * v_rel * v_rel


def segment_for_contact(top_height, boundaries=SEGMENT_BOUNDARIES) -> Segment:
    """Body segment overlapping the robot's height band [0, top_height] the most (ties go low)."""
    edges = (0.0,) + tuple(boundaries) + (math.inf,)
    best, best_overlap = Segment.FEET, -1.0
    for seg, lo, hi in zip(Segment, edges[:-1], edges[1:]):
        overlap = max(0.0, min(hi, top_height) - lo)
        if overlap > best_overlap:
            best, best_overlap = seg, overlap
    return best


@dataclass
class CollisionEvent:
    t: float
    agent_id: int
    segment: Segment
    m_ref: float
    v_rel: float
    energy: float


def collision_events(traj: Trajectory, robot_mass=20.0, top_height=0.42, boundaries=SEGMENT_BOUNDARIES,
                     mass_table=None) -> list:
    """One event per contact onset."""
    seg = segment_for_contact(top_height, boundaries)
    m_ref = reflected_mass(seg, mass_table)
    events = []
    for t, c in zip(traj.t, traj.contacts):
        for i in np.nonzero(c.onset)[0]:
            v = float(c.v_rel[i])
            events.append(CollisionEvent(float(t), int(c.ids[i]), seg, m_ref, v, impact_energy(m_ref, robot_mass, v)))
    return events


@dataclass
class Histogram:
    counts: np.ndarray
    bin_width: float = BIN_WIDTH

    @property
    def edges(self):
        lo = np.arange(len(self.counts)) * self.bin_width
        hi = np.append(lo[1:], np.inf)
        return lo, hi

    def nonzero(self):
        lo, hi = self.edges
        return {(float(a), float(b)): int(c) for a, b, c in zip(lo, hi, self.counts) if c}


def energy_histogram(energies, bin_width=BIN_WIDTH, n_bins=N_BINS) -> Histogram:
    e = np.asarray(energies, float)
    idx = np.minimum(np.floor(e / bin_width).astype(np.int64), n_bins - 1)
    return Histogram(np.bincount(idx, minlength=n_bins)[:n_bins] if e.size else np.zeros(n_bins, np.int64), bin_width)


def collision_rates(events, total_time, bin_width=BIN_WIDTH, n_bins=N_BINS):
    """(f_c, Q, histogram): onsets per second, absorbed energy per second, energy histogram."""
    if not total_time > 0:
        raise ValueError("total time must be positive")
    energies = [e.energy if isinstance(e, CollisionEvent) else float(e) for e in events]
    return len(energies) / total_time, float(sum(energies)) / total_time, energy_histogram(energies, bin_width, n_bins)


# -- aggregation ----------------------------------------------------------------


@dataclass
class MetricSummary:
    controller: str
    subset: str
    metric: str
    mean: float
    std: float
    n: int
    missing: int = 0

    @property
    def chart_value(self):
        return min(max(self.mean, 0.0), CHART_MAX)


@dataclass
class BenchmarkReport:
    rows: list
    radar: list
    rates: dict = field(default_factory=dict)
    histograms: dict = field(default_factory=dict)
    missing: list = field(default_factory=list)


SUBSETS = {"all": lambda row: True, "low": lambda row: int(row["agents"]) == 50}


def _stub_row(scenario_id, controller):
    # ids look like "<flow>_<agents>_<crowd>"; enough for the subset predicates
    parts = scenario_id.split("_")
    agents = int(parts[1]) if len(parts) > 2 and parts[1].isdigit() else -1
    return {"scenario_id": scenario_id, "controller": controller, "agents": agents}


def aggregate(rows, expected=None, subsets=SUBSETS) -> BenchmarkReport:
    """Per-controller mean and population std of each metric over each subset.

    ``rows`` are per-scenario dicts with ``controller``, ``scenario_id``,
    ``agents`` and the metric keys; a metric of ``None``/NaN marks a failed
    cell. ``expected`` lists ``(scenario_id, controller)`` pairs that must be
    present; absent ones are flagged in ``missing``.
    """
    present = {(r["scenario_id"], r["controller"]) for r in rows}
    missing = sorted(set(expected or ()) - present)
    controllers = sorted({r["controller"] for r in rows} | {c for _, c in missing})
    radar = []
    for ctrl in controllers:
        for subset, keep in subsets.items():
            group = [r for r in rows if r["controller"] == ctrl and keep(r)]
            n_missing = sum(1 for s, c in missing if c == ctrl and keep(_stub_row(s, c)))
            for m in METRICS:
                vals = np.array([float(r[m]) for r in group if r.get(m) is not None and not math.isnan(float(r[m]))])
                bad = len(group) - len(vals)
                mean = float(np.mean(vals)) if len(vals) else math.nan
                std = float(np.std(vals)) if len(vals) else math.nan
                radar.append(MetricSummary(ctrl, subset, m, mean, std, len(vals), bad + n_missing))
    return BenchmarkReport(list(rows), radar, missing=missing)
