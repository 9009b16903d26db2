"""Compare step throughput of the numba kernels against the interpreted fallback.

    python benchmarks/bench_numba.py [--agents 100] [--steps 200] [--crowd sf-r]

Each backend runs in its own interpreter because the switch is read at import
time. Compilation happens on a warm-up step that is excluded from the timing.
"""

import argparse
import json
import os
import subprocess
import sys

CHILD = r"""
import json, sys, time
import numpy as np
from crowdbench import _jit
from crowdbench.nav import make_controller
from crowdbench.scenario import generate_suite
from crowdbench.sim import SimState, StepConfig, step
from crowdbench.world import Crowd

agents, steps, crowd, controller = int(sys.argv[1]), int(sys.argv[2]), sys.argv[3], sys.argv[4]
cell = next(s for s in generate_suite(42).scenarios
            if s.density.agents == agents and s.crowd_config.name == crowd and s.flow.value == "2Dx")
ctrl = make_controller(controller, cell.goal)
rng = np.random.default_rng(cell.seed)
state = SimState.initial(cell.robot, Crowd.from_agents(cell.agents), 0.05)
cfg = StepConfig(world=cell.world)
state, _, _ = step(cfg, cell.crowd_config, ctrl, state, rng)
t0 = time.perf_counter()
for _ in range(steps):
    state, _, _ = step(cfg, cell.crowd_config, ctrl, state, rng)
el = time.perf_counter() - t0
print(json.dumps({"numba": _jit.USE_NUMBA, "cell": cell.id, "seconds": el, "steps_per_s": steps / el}))
"""


def measure(disable, args):
    env = dict(os.environ)
    env.pop("CROWDBENCH_DISABLE_NUMBA", None)
    if disable:
        env["CROWDBENCH_DISABLE_NUMBA"] = "1"
    res = subprocess.run([sys.executable, "-c", CHILD, str(args.agents), str(args.steps), args.crowd, args.controller],
                         env=env, capture_output=True, text=True, check=True)
    return json.loads(res.stdout)


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--agents", type=int, default=100, choices=(50, 100, 200, 350))
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--crowd", default="sf-r")
    p.add_argument("--controller", default="dwa", choices=("baseline", "dwa", "rvo"))
    args = p.parse_args()

    jit = measure(False, args)
    ref = measure(True, args)
    print(f"cell {jit['cell']}, controller {args.controller}, {args.steps} steps at dt=0.05")
    for name, r in (("numba", jit), ("fallback", ref)):
        print(f"  {name:<9} {r['seconds']:8.3f} s  {r['steps_per_s']:9.1f} steps/s  {r['steps_per_s'] * 0.05:7.1f}x real time")
    print(f"  speedup   {ref['seconds'] / jit['seconds']:.1f}x")


if __name__ == "__main__":
    main()
