import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import minimize

from conftest import agent, crowd_of, robot
from crowdbench.crowd import (
    Algorithm, ConfigError, CrowdModelConfig, crowd_velocities, orca_lines, orca_velocity, rvo_candidates,
    rvo_sampled_choice, rvo_sampled_velocity, social_forces_accel, update_agent_velocity,
)
from crowdbench.world import WorldSpec, WorldView

RVO15 = CrowdModelConfig(Algorithm.RVO_SAMPLED, horizon=1.5)
ORCA15 = CrowdModelConfig(Algorithm.ORCA, horizon=1.5)


class TestSocialForces:
    def test_equilibrium(self):
        a = agent(0, (10, 5), (1.4, 0))
        assert np.linalg.norm(social_forces_accel(a, [])) < 1e-12

    def test_from_rest(self):
        acc = social_forces_accel(agent(0, (10, 5), (0, 0)), [])
        assert acc == pytest.approx([2.8, 0.0])

    def test_head_on_symmetry(self):
        a = agent(0, (10, 5), (1.4, 0))
        b = agent(1, (11, 5), (-1.4, 0), goal=(-1, 0))
        fa = social_forces_accel(a, [b]) - social_forces_accel(a, [])
        fb = social_forces_accel(b, [a]) - social_forces_accel(b, [])
        assert fa == pytest.approx(-fb)
        # A exp((0.6 - 1) / 0.35), pointing away from the neighbour
        assert fa == pytest.approx([-2.0 * math.exp(-0.4 / 0.35), 0.0])

    def test_coincident_tie_break(self):
        a = agent(0, (10, 5), (1.4, 0))
        f = social_forces_accel(a, [agent(1, (10, 5))]) - social_forces_accel(a, [])
        assert f[0] > 0 and f[1] == 0

    def test_lateral_walls_push_inward(self):
        low = social_forces_accel(agent(0, (10, 0.4), (1.4, 0)), [], walls=WorldSpec())
        assert low[1] > 0 and low[0] == pytest.approx(0.0)
        high = social_forces_accel(agent(0, (10, 9.6), (1.4, 0)), [], walls=WorldSpec())
        assert high[1] == pytest.approx(-low[1])


def ttc_oracle(p, v, R):
    # solve |p + t v|^2 = R^2 with numpy's polynomial roots
    if p @ p <= R * R:
        return 0.0
    roots = np.roots([v @ v, 2 * p @ v, p @ p - R * R]) if v @ v > 0 else []
    real = [r.real for r in np.atleast_1d(roots) if abs(r.imag) < 1e-9 and r.real >= 0]
    return min(real) if real else math.inf


def rvo_oracle(a, neighbors, tau, w=1.0, eps_t=0.05):
    pref = a.preferred_speed * a.goal_direction
    goal_angle = math.atan2(a.goal_direction[1], a.goal_direction[0])
    cands = [pref, np.zeros(2)]
    for kd in range(12):
        for ks in range(1, 7):
            ang = goal_angle + 2 * math.pi * kd / 12
            cands.append(a.preferred_speed * 1.1 * ks / 6 * np.array([math.cos(ang), math.sin(ang)]))
    costs = []
    for c in cands:
        ttc = math.inf
        for b in neighbors:
            moving = np.linalg.norm(b.velocity) > 1e-9
            u = 2 * c - a.velocity if moving else c
            ttc = min(ttc, ttc_oracle(a.position - b.position, u - b.velocity, a.radius + b.radius))
        pen = w / max(ttc, eps_t) if ttc < tau else 0.0
        costs.append(pen + np.linalg.norm(c - pref))
    return np.array(cands), np.array(costs)


class TestRvoSampled:
    def test_no_neighbors_returns_pref(self):
        a = agent(0, (10, 5), (0.3, 0.2), goal=(0.6, 0.8))
        assert (rvo_sampled_velocity(a, [], RVO15) == a.preferred_speed * a.goal_direction).all()

    def test_candidates_bounded_and_first_two(self):
        a = agent(0, (10, 5))
        c = rvo_candidates(a)
        assert len(c) == 74
        assert (c[0] == [1.4, 0]).all() and (c[1] == 0).all()
        assert np.linalg.norm(c, axis=1).max() <= 1.4 * 1.1 + 1e-12

    @settings(max_examples=150, deadline=None)
    @given(st.integers(0, 10_000))
    def test_matches_exhaustive_scan(self, seed):
        rng = np.random.default_rng(seed)
        a = agent(0, (10, 5), rng.normal(size=2), goal=(1, 0))
        nbrs = [agent(j + 1, (10 + rng.uniform(-3, 3), 5 + rng.uniform(-3, 3)),
                      rng.normal(size=2) * (rng.random() > 0.2)) for j in range(rng.integers(0, 6))]
        cfg = CrowdModelConfig(Algorithm.RVO_SAMPLED, horizon=rng.choice([0.5, 1.5]))
        v, cost, idx = rvo_sampled_choice(a, nbrs, cfg)
        cands, costs = rvo_oracle(a, nbrs, cfg.horizon)
        assert cost == pytest.approx(costs.min(), rel=1e-9, abs=1e-9)
        assert (costs >= cost - 1e-9).all()
        assert np.allclose(v, cands[idx])

    def test_head_on_pass_keeps_clearance(self):
        cfg = CrowdModelConfig(Algorithm.RVO_SAMPLED, horizon=1.5, reactive_to_robot=False)
        crowd = crowd_of(agent(0, (10, 5.0), (1.4, 0)), agent(1, (20, 5.0), (-1.4, 0), goal=(-1, 0)))
        first = None
        dmin = math.inf
        for _ in range(200):
            vel = crowd_velocities(WorldView(WorldSpec(), robot(x=1, y=1), crowd, 0.05), cfg)
            if first is None:
                first = vel.copy()
            crowd.vel = vel
            crowd.pos = crowd.pos + vel * 0.05
            dmin = min(dmin, np.linalg.norm(crowd.pos[0] - crowd.pos[1]))
        assert dmin >= 0.6
        # the two agents start 10 m apart, beyond the horizon; they deviate once closer
        assert abs(crowd.pos[0, 1] - 5.0) > 0.1


def halfplane_ok(lines, v, tol=1e-7):
    for px, py, dx, dy in lines:
        if dx * (v[1] - py) - dy * (v[0] - px) < -tol:
            return False
    return True


def orca_oracle(lines, pref, vmax):
    cons = [{"type": "ineq", "fun": (lambda v, l=l: l[2] * (v[1] - l[1]) - l[3] * (v[0] - l[0]))} for l in lines]
    cons.append({"type": "ineq", "fun": lambda v: vmax * vmax - v @ v})
    best = None
    for x0 in ([0, 0], pref, [0, vmax * 0.5], [0, -vmax * 0.5], [-vmax * 0.5, 0]):
        r = minimize(lambda v: ((v - pref) ** 2).sum(), np.array(x0, float), constraints=cons,
                     method="SLSQP", options={"ftol": 1e-14, "maxiter": 500})
        if r.success and all(c["fun"](r.x) > -1e-7 for c in cons):
            if best is None or r.fun < best.fun:
                best = r
    return best


class TestOrca:
    def test_no_neighbors(self):
        a = agent(0, (10, 5), (0.2, 0.1))
        assert orca_velocity(a, [], 1.5) == pytest.approx([1.4, 0.0])

    def test_static_neighbor_ahead(self):
        a = agent(0, (10, 5), (1.4, 0))
        b = agent(1, (11, 5), (0, 0))
        v = orca_velocity(a, [b], 1.5)
        lines = orca_lines(a, [b], 1.5)
        assert halfplane_ok(lines, v)
        assert abs(v[1]) > 1e-6 and v[0] < 1.4

    def test_mirror_pair(self):
        a = agent(0, (10, 5.1), (1.4, 0))
        b = agent(1, (14, 4.9), (-1.4, 0), goal=(-1, 0))
        va = orca_velocity(a, [b], 1.5)
        vb = orca_velocity(b, [a], 1.5)
        assert va == pytest.approx(-vb, abs=1e-12)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 10_000))
    def test_matches_qp_oracle(self, seed):
        rng = np.random.default_rng(seed)
        a = agent(0, (10, 5), rng.normal(size=2) * 0.8)
        nbrs = []
        while len(nbrs) < rng.integers(1, 4):
            p = a.position + rng.uniform(-3, 3, size=2)
            if np.linalg.norm(p - a.position) > 0.7:
                nbrs.append(agent(len(nbrs) + 1, p, rng.normal(size=2)))
        v = orca_velocity(a, nbrs, 1.5)
        lines = orca_lines(a, nbrs, 1.5)
        ref = orca_oracle(lines, np.array([1.4, 0.0]), 1.4)
        if ref is None:  # infeasible: only the fallback contract applies
            assert np.linalg.norm(v) <= 1.4 + 1e-9
            return
        assert halfplane_ok(lines, v, 1e-6)
        assert np.linalg.norm(v) <= 1.4 + 1e-9
        assert np.linalg.norm(v - [1.4, 0]) == pytest.approx(np.sqrt(ref.fun), abs=1e-5)


def orca_head_on(steps=300):
    cfg = CrowdModelConfig(Algorithm.ORCA, horizon=1.5, reactive_to_robot=False)
    crowd = crowd_of(agent(0, (10, 5.05), (1.4, 0)), agent(1, (20, 4.95), (-1.4, 0), goal=(-1, 0)))
    trace = []
    for _ in range(steps):
        vel = crowd_velocities(WorldView(WorldSpec(), robot(x=1, y=1), crowd, 0.05), cfg)
        crowd.vel = vel
        crowd.pos = crowd.pos + vel * 0.05
        trace.append((crowd.pos.copy(), vel.copy()))
    return trace


def test_orca_head_on_separation_and_symmetry():
    trace = orca_head_on()
    for pos, vel in trace:
        assert np.linalg.norm(pos[0] - pos[1]) >= 0.6 - 1e-3
        # point reflection through the corridor point (15, 5)
        assert np.abs(pos[1] - (np.array([30.0, 10.0]) - pos[0])).max() < 1e-9
        assert np.abs(vel[1] + vel[0]).max() < 1e-9
    assert trace[-1][0][0, 0] > 20  # they actually passed


class TestUpdate:
    def view(self, with_robot_near):
        crowd = crowd_of(agent(0, (10, 5), (1.4, 0)), agent(1, (14, 8), (1.4, 0)))
        rob = robot(x=11.0, y=5.0, theta=math.pi, v=1.0) if with_robot_near else robot(x=40.0, y=1.0)
        return WorldView(WorldSpec(), rob, crowd, 0.05)

    @pytest.mark.parametrize("algo", list(Algorithm))
    def test_non_reactive_ignores_robot(self, algo):
        cfg = CrowdModelConfig(algo, horizon=1.5, reactive_to_robot=False)
        assert (update_agent_velocity(0, self.view(True), cfg) == update_agent_velocity(0, self.view(False), cfg)).all()

    @pytest.mark.parametrize("algo", list(Algorithm))
    def test_reactive_sees_robot(self, algo):
        cfg = CrowdModelConfig(algo, horizon=1.5, reactive_to_robot=True)
        assert not np.allclose(update_agent_velocity(0, self.view(True), cfg),
                               update_agent_velocity(0, self.view(False), cfg))

    def test_social_forces_zero_dt(self):
        cfg = CrowdModelConfig(Algorithm.SOCIAL_FORCES, horizon=1.5)
        view = self.view(True)
        view.dt = 0.0
        assert (update_agent_velocity(0, view, cfg) == view.crowd.vel[0]).all()

    @pytest.mark.parametrize("algo", list(Algorithm))
    def test_speed_cap(self, algo):
        rng = np.random.default_rng(5)
        crowd = crowd_of(*[agent(i, (rng.random() * 10 + 5, rng.random() * 9 + 0.5), rng.normal(size=2) * 3)
                           for i in range(40)])
        out = crowd_velocities(WorldView(WorldSpec(), robot(x=10), crowd, 0.05), CrowdModelConfig(algo))
        assert (np.linalg.norm(out, axis=1) <= 1.3 * 1.4 + 1e-12).all()


class TestConfig:
    def test_round_trip(self):
        cfg = CrowdModelConfig(Algorithm.SOCIAL_FORCES, horizon=0.5, reactive_to_robot=False, params={"A": 3.0})
        assert CrowdModelConfig.from_dict(cfg.to_dict()) == cfg

    def test_unknown_param_rejected(self):
        with pytest.raises(ConfigError, match="bogus"):
            CrowdModelConfig(Algorithm.ORCA, params={"bogus": 1})

    def test_unknown_key_rejected(self):
        d = RVO15.to_dict()
        d["colour"] = "red"
        with pytest.raises(ConfigError, match="colour"):
            CrowdModelConfig.from_dict(d)

    def test_horizon_positive(self):
        with pytest.raises(ConfigError):
            CrowdModelConfig(horizon=0)
