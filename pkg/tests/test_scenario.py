import collections
import json
import time

import numpy as np
import pytest

from crowdbench.nav import GoalSpec
from crowdbench.scenario import (
    CROWD_CONFIGS, DENSITIES, FlowKind, ScenarioError, ScenarioSpec, SpawnError, Status, SuiteSpec,
    generate_suite, make_scenario, spawn_crowd, termination_check,
)
from crowdbench.world import WorldSpec


@pytest.fixture(scope="module")
def suite():
    return generate_suite(42)


def test_suite_marginals(suite):
    assert len(suite) == 100
    assert len({s.id for s in suite.scenarios}) == 100
    by_cfg = collections.Counter(s.crowd_config.name for s in suite.scenarios)
    by_density = collections.Counter(s.density.agents for s in suite.scenarios)
    by_flow = collections.Counter(s.flow for s in suite.scenarios)
    assert set(by_cfg.values()) == {20} and len(by_cfg) == 5
    assert by_density == {50: 25, 100: 25, 200: 25, 350: 25}
    assert set(by_flow.values()) == {20} and len(by_flow) == 5
    for s in suite.scenarios:
        assert len(s.agents) == s.density.agents
        assert s.robot.pose == (1.0, 5.0, 0.0)


def test_density_table():
    assert [(d.agents, d.per_m2) for d in DENSITIES] == [(50, 0.1), (100, 0.2), (200, 0.4), (350, 0.7)]
    assert [c.name for c in CROWD_CONFIGS] == ["sf-r", "sf-nr", "rvo05-r", "rvo15-r", "rvo15-nr"]


def test_suite_is_deterministic(tmp_path):
    generate_suite(7).save(tmp_path / "a")
    generate_suite(7).save(tmp_path / "b")
    for f in sorted((tmp_path / "a").iterdir()):
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()


def test_round_trip_preserves_placements(tmp_path, suite):
    suite.save(tmp_path)
    loaded = SuiteSpec.load(tmp_path)
    assert loaded.master_seed == 42
    a = next(s for s in suite.scenarios if s.id == "1Dm_350_sf-r")
    b = next(s for s in loaded.scenarios if s.id == "1Dm_350_sf-r")
    assert b.to_dict() == a.to_dict()


@pytest.mark.parametrize("flow,goal", [("1D+", (1, 0)), ("1D-", (-1, 0)), ("2D", (0, 1))])
def test_uniform_flow_goals(flow, goal):
    agents = spawn_crowd(50, flow, np.random.default_rng(0))
    assert len(agents) == 50
    for a in agents:
        assert tuple(a.goal_direction) == goal
        assert a.velocity == pytest.approx(1.4 * np.array(goal))


@pytest.mark.parametrize("flow,axis", [("1Dx", 0), ("2Dx", 1)])
def test_bidirectional_split(flow, axis):
    agents = spawn_crowd(100, flow, np.random.default_rng(0))
    signs = collections.Counter(float(a.goal_direction[axis]) for a in agents)
    assert signs == {1.0: 50, -1.0: 50}


def test_spawn_clearance_over_regenerations():
    world = WorldSpec()
    for seed in range(1000):
        n = (50, 100, 200, 350)[seed % 4]
        agents = spawn_crowd(n, FlowKind.ONE_D_PLUS, np.random.default_rng(seed))
        p = np.array([a.position for a in agents])
        d = np.sqrt(((p[:, None] - p[None]) ** 2).sum(-1))
        np.fill_diagonal(d, np.inf)
        assert d.min() >= 0.6
        assert (p >= 0.3).all() and (p[:, 0] <= world.length - 0.3).all() and (p[:, 1] <= world.width - 0.3).all()
        assert (np.hypot(p[:, 0] - 1.0, p[:, 1] - 5.0) >= 1.0).all()


def test_infeasible_density():
    with pytest.raises(SpawnError):
        spawn_crowd(200, "1D+", np.random.default_rng(0), WorldSpec(5.0, 5.0), max_rejections=1000)


def test_generation_is_fast():
    t = time.perf_counter()
    generate_suite(3)
    assert time.perf_counter() - t < 1.0


@pytest.mark.parametrize("progress,t,status", [
    (40.01, 55, Status.GOAL_REACHED), (12, 180, Status.TIMED_OUT), (39.9, 10, Status.RUNNING),
    (40.0, 180, Status.GOAL_REACHED),
])
def test_termination(progress, t, status):
    assert termination_check(progress, t, GoalSpec()) is status


class TestScenarioFile:
    def doc(self):
        s = make_scenario("1Dx", DENSITIES[0], CROWD_CONFIGS[0], 5)
        return json.loads(s.dumps())

    def test_unknown_top_level_key(self):
        d = self.doc()
        d["weather"] = "rain"
        with pytest.raises(ScenarioError, match="weather"):
            ScenarioSpec.from_dict(d)

    def test_unknown_crowd_param(self):
        d = self.doc()
        d["crowd_config"]["params"] = {"gravity": 9.8}
        with pytest.raises(ScenarioError, match="gravity"):
            ScenarioSpec.from_dict(d)

    def test_unknown_agent_key(self):
        d = self.doc()
        d["agents"][0]["hat"] = True
        with pytest.raises(ScenarioError, match="hat"):
            ScenarioSpec.from_dict(d)

    def test_missing_key(self):
        d = self.doc()
        del d["goal"]
        with pytest.raises(ScenarioError, match="goal"):
            ScenarioSpec.from_dict(d)

    def test_controller_block(self):
        d = self.doc()
        d["controller"] = {"kind": "dwa", "params": {"n_v": 5}}
        assert ScenarioSpec.from_dict(d).controller["kind"] == "dwa"
