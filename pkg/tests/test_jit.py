"""The numba kernels and the interpreted fallback must agree."""

import json
import os
import subprocess
import sys

import numpy as np
import pytest

SCRIPT = r"""
import json, sys
import numpy as np
from crowdbench import _jit
from crowdbench.nav import make_controller
from crowdbench.scenario import generate_suite
from crowdbench.sim import SimState, StepConfig, step
from crowdbench.world import Crowd

out = {"use_numba": _jit.USE_NUMBA, "runs": {}}
suite = generate_suite(7)
cells = [s for s in suite.scenarios if s.density.agents == 50][::6]  # flow k with crowd config k
for s in cells:
    for kind in ("baseline", "dwa", "rvo"):
        rng = np.random.default_rng(s.seed)
        ctrl = make_controller(kind, s.goal)
        state = SimState.initial(s.robot, Crowd.from_agents(s.agents), 0.05)
        cfg = StepConfig(world=s.world)
        n_contacts = 0
        for _ in range(60):
            state, rec, _ = step(cfg, s.crowd_config, ctrl, state, rng)
            n_contacts += len(rec.contacts.ids)
        r = state.robot
        out["runs"][f"{s.id}/{kind}"] = {
            "robot": [r.x, r.y, r.theta, r.v, r.w],
            "pos": state.crowd.pos.tolist(), "vel": state.crowd.vel.tolist(), "contacts": n_contacts}
json.dump(out, sys.stdout)
"""


def run(disable):
    env = dict(os.environ)
    env.pop("CROWDBENCH_DISABLE_NUMBA", None)
    if disable:
        env["CROWDBENCH_DISABLE_NUMBA"] = "1"
    res = subprocess.run([sys.executable, "-c", SCRIPT], env=env, capture_output=True, text=True, timeout=900)
    assert res.returncode == 0, res.stderr
    return json.loads(res.stdout)


@pytest.fixture(scope="module")
def both():
    return run(False), run(True)


def test_flag_selects_backend(both):
    jit, ref = both
    assert jit["use_numba"] is True and ref["use_numba"] is False


def test_trajectories_agree(both):
    jit, ref = both
    assert jit["runs"].keys() == ref["runs"].keys() and len(jit["runs"]) == 15
    for key in jit["runs"]:
        a, b = jit["runs"][key], ref["runs"][key]
        assert a["contacts"] == b["contacts"], key
        np.testing.assert_allclose(a["robot"], b["robot"], atol=1e-9, err_msg=key)
        np.testing.assert_allclose(a["pos"], b["pos"], atol=1e-9, err_msg=key)
        np.testing.assert_allclose(a["vel"], b["vel"], atol=1e-9, err_msg=key)
