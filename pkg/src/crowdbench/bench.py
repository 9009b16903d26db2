"""Batch execution of scenario x controller runs and report assembly."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import multiprocessing
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import metrics as M
from .nav import make_controller
from .records import write_jsonl
from .scenario import ScenarioSpec, Status, SuiteSpec, progress_along, termination_check, CROWD_CONFIGS
from .sensors import LidarSpec
from .sim import SimState, SimulationError, StepConfig, step
from .world import Crowd

log = logging.getLogger(__name__)

DT = 0.05
SOLO_ID = "solo"

RUN_COLUMNS = (
    "scenario_id", "controller", "flow", "agents", "crowd_config", "status", "flags",
    "T", "L", "J", "T_solo", "L_solo", "J_solo",
    "time_ratio", "length_ratio", "smoothness_ratio", "nbr_vel", "nbr_reac", "prox", "colliding",
    "contact_time", "n_collisions", "energy",
)
EVENT_COLUMNS = ("scenario_id", "controller", "t", "agent_id", "segment", "m_ref", "v_rel", "energy")
RADAR_COLUMNS = ("controller", "subset", "metric", "label", "mean", "std", "chart_value", "n", "missing")
HIST_COLUMNS = ("controller", "bin_low", "bin_high", "count")


def fmt(x):
    if isinstance(x, float):
        return repr(x)
    return str(x)


@dataclass
class RunOutcome:
    scenario_id: str
    controller: str
    status: str
    stats: M.PathStats | None = None
    flow: M.FlowEffect | None = None
    prox: float = math.nan
    colliding: float = math.nan
    contact_time: float = math.nan
    events: list = field(default_factory=list)
    error: str = ""
    meta: dict = field(default_factory=dict)


def simulate(scenario: ScenarioSpec, controller, dt=DT, lidar: LidarSpec | None = None):
    """Run one scenario to termination; returns (records, status)."""
    rng = np.random.default_rng(scenario.seed)
    crowd = Crowd.from_agents(scenario.agents)
    state = SimState.initial(scenario.robot, crowd, dt)
    cfg = StepConfig(world=scenario.world, lidar=lidar)
    start = (scenario.robot.x, scenario.robot.y)
    records = [state.record()]
    while True:
        state, rec, _ = step(cfg, scenario.crowd_config, controller, state, rng)
        records.append(rec)
        status = termination_check(progress_along(scenario.goal, start, (state.robot.x, state.robot.y)),
                                   state.clock.t, scenario.goal)
        if status is not Status.RUNNING:
            return records, status


def _lidar_for(scenario: ScenarioSpec):
    if scenario.sensors and "lidar" in scenario.sensors:
        return LidarSpec(**(scenario.sensors["lidar"] or {}))
    return None


def run_one(scenario: ScenarioSpec, controller_kind: str, dt=DT, records_dir=None, controller_params=None) -> RunOutcome:
    params = dict(controller_params or {})
    if scenario.controller and scenario.controller.get("kind") == controller_kind:
        params = {**scenario.controller.get("params", {}), **params}
    controller = make_controller(controller_kind, scenario.goal, **params)
    meta = {"flow": scenario.flow.value, "agents": scenario.density.agents, "crowd_config": scenario.crowd_config.name}
    try:
        records, status = simulate(scenario, controller, dt, _lidar_for(scenario))
    except SimulationError as e:
        log.error("%s/%s aborted: %s", scenario.id, controller_kind, e)
        return RunOutcome(scenario.id, controller_kind, "failed", error=str(e), meta=meta)
    if records_dir is not None:
        write_jsonl(records, Path(records_dir) / f"{scenario.id}__{controller_kind}.jsonl")
    return evaluate(records, status, scenario, controller_kind, meta)


def evaluate(records, status, scenario: ScenarioSpec, controller_kind, meta=None) -> RunOutcome:
    """Per-run metrics that do not need the solo reference."""
    traj = M.Trajectory.from_records(records)
    stats = M.path_stats(traj)
    flags = traj.contact_flags()
    dt = traj.dt
    events = M.collision_events(traj, scenario.robot.mass, scenario.robot.top_height)
    return RunOutcome(
        scenario.id, controller_kind, Status(status).value, stats, M.flow_effect(traj), M.proximity(traj),
        M.colliding_score(flags, dt, stats.T), float(np.count_nonzero(flags)) * dt, events, meta=meta or {},
    )


def solo_scenario(template: ScenarioSpec) -> ScenarioSpec:
    return ScenarioSpec(SOLO_ID, template.flow, template.density, template.crowd_config, 0, [],
                        template.world, template.goal, template.robot)


def _execute(task):
    scenario, kind, records_dir = task
    return run_one(scenario, kind, DT, records_dir)


@dataclass
class RunPlan:
    suite: SuiteSpec
    controllers: tuple = ("baseline", "dwa", "rvo")
    out_dir: Path = Path("crowdbench-out")
    jobs: int = 1
    records: str = "metrics"

    def tasks(self):
        records_dir = str(Path(self.out_dir) / "records") if self.records == "full" else None
        solo = solo_scenario(self.suite.scenarios[0])
        tasks = [(solo, c, records_dir) for c in self.controllers]
        tasks += [(s, c, records_dir) for s in self.suite.scenarios for c in self.controllers]
        return tasks


def execute(plan: RunPlan) -> list:
    tasks = plan.tasks()
    if plan.jobs <= 1:
        return [_execute(t) for t in tasks]
    ctx = multiprocessing.get_context("spawn")
    with ProcessPoolExecutor(max_workers=plan.jobs, mp_context=ctx) as pool:
        return list(pool.map(_execute, tasks, chunksize=1))


def metric_rows(outcomes) -> list:
    """Pair every crowd run with its controller's solo run."""
    solo = {o.controller: o for o in outcomes if o.scenario_id == SOLO_ID}
    rows = []
    for o in sorted((o for o in outcomes if o.scenario_id != SOLO_ID), key=lambda o: (o.scenario_id, o.controller)):
        row = {"scenario_id": o.scenario_id, "controller": o.controller, **o.meta, "status": o.status}
        ref = solo.get(o.controller)
        flags = []
        if o.status == "failed" or ref is None or ref.stats is None:
            flags.append("failed" if o.status == "failed" else "no_solo")
            row.update({k: math.nan for k in RUN_COLUMNS if k not in row})
            row["n_collisions"] = 0
            row["energy"] = 0.0
            row["contact_time"] = 0.0
        else:
            timed_out = o.status == Status.TIMED_OUT.value
            eff = M.path_efficiency(ref.stats, o.stats, timed_out)
            if timed_out:
                flags.append("timed_out")
            if o.flow.no_neighbors:
                flags.append("no_neighbors")
            row.update({
                "T": o.stats.T, "L": o.stats.L, "J": o.stats.J,
                "T_solo": ref.stats.T, "L_solo": ref.stats.L, "J_solo": ref.stats.J,
                "time_ratio": eff.time_ratio, "length_ratio": eff.length_ratio,
                "smoothness_ratio": eff.smoothness_ratio, "nbr_vel": o.flow.nbr_vel, "nbr_reac": o.flow.nbr_reac,
                "prox": o.prox, "colliding": o.colliding, "contact_time": o.contact_time,
                "n_collisions": len(o.events), "energy": float(sum(e.energy for e in o.events)),
            })
        row["flags"] = ";".join(flags)
        rows.append(row)
    return rows


def event_rows(outcomes) -> list:
    rows = []
    for o in sorted(outcomes, key=lambda o: (o.scenario_id, o.controller)):
        if o.scenario_id == SOLO_ID:
            continue
        for e in o.events:
            rows.append({"scenario_id": o.scenario_id, "controller": o.controller, "t": e.t, "agent_id": e.agent_id,
                         "segment": e.segment.value, "m_ref": e.m_ref, "v_rel": e.v_rel, "energy": e.energy})
    return rows


def _write_csv(path, columns, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([fmt(r[c]) for c in columns])
    Path(path).write_text(buf.getvalue())


def _read_csv(path):
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))


def _num(x):
    try:
        return float(x)
    except (TypeError, ValueError):
        return x


def write_report(out_dir, master_seed=None, controllers=None, expected=None) -> dict:
    """Build radar, histogram and summary files from ``runs.csv`` and ``events.csv``."""
    out_dir = Path(out_dir)
    rows = [{k: (v if k in ("scenario_id", "controller", "flow", "crowd_config", "status", "flags") else _num(v))
             for k, v in r.items()} for r in _read_csv(out_dir / "runs.csv")]
    events = _read_csv(out_dir / "events.csv")
    meta_path = out_dir / "plan.json"
    meta = json.loads(meta_path.read_text()) if meta_path.exists() else {}
    if master_seed is None:
        master_seed = meta.get("master_seed")
    if controllers is None:
        controllers = meta.get("controllers") or sorted({r["controller"] for r in rows})
    if expected is None and "scenarios" in meta:
        expected = [(s, c) for s in meta["scenarios"] for c in controllers]
    report = M.aggregate(rows, expected)

    _write_csv(out_dir / "radar.csv", RADAR_COLUMNS, [
        {"controller": s.controller, "subset": s.subset, "metric": s.metric, "label": M.METRIC_LABELS[s.metric],
         "mean": s.mean, "std": s.std, "chart_value": s.chart_value, "n": s.n, "missing": s.missing}
        for s in report.radar])

    summary = {"master_seed": master_seed, "crowd_configs": [c.name for c in CROWD_CONFIGS],
               "notes": ["rvo controller: holonomic ORCA velocity projected to (v, w)",
                         "T/Tcr of timed-out runs uses the time limit"],
               "controllers": {}, "missing": [list(m) for m in report.missing],
               "failed": sorted(f"{r['scenario_id']}/{r['controller']}" for r in rows if r["status"] == "failed")}
    hist_rows = []
    for ctrl in controllers:
        crow = [r for r in rows if r["controller"] == ctrl]
        total_time = float(sum(r["T"] for r in crow if not math.isnan(r["T"])))
        energies = [float(e["energy"]) for e in events if e["controller"] == ctrl]
        if total_time > 0:
            f_c, q, hist = M.collision_rates(energies, total_time)
        else:
            f_c, q, hist = math.nan, math.nan, M.energy_histogram(energies)
        lo, hi = hist.edges
        hist_rows += [{"controller": ctrl, "bin_low": float(a), "bin_high": float(b), "count": int(c)}
                      for a, b, c in zip(lo, hi, hist.counts)]
        summary["controllers"][ctrl] = {"f_c": f_c, "Q": q, "N_c": len(energies), "energy": float(sum(energies)),
                                        "total_time": total_time, "runs": len(crow)}
    _write_csv(out_dir / "histogram.csv", HIST_COLUMNS, hist_rows)
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=1, sort_keys=True) + "\n")
    return summary


def run_suite(plan: RunPlan) -> int:
    """Execute the plan and write all outputs; returns the process exit status."""
    out = Path(plan.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if plan.records == "full":
        (out / "records").mkdir(exist_ok=True)
    outcomes = execute(plan)
    rows = metric_rows(outcomes)
    _write_csv(out / "runs.csv", RUN_COLUMNS, rows)
    _write_csv(out / "events.csv", EVENT_COLUMNS, event_rows(outcomes))
    (out / "plan.json").write_text(json.dumps({
        "master_seed": plan.suite.master_seed, "controllers": list(plan.controllers),
        "scenarios": [s.id for s in plan.suite.scenarios]}, indent=1) + "\n")
    write_report(out)
    failed = [o for o in outcomes if o.status == "failed"]
    return 2 if failed else 0
