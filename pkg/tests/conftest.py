import numpy as np
import pytest

from crowdbench.world import AgentState, Crowd, RobotState, WorldSpec


@pytest.fixture
def world():
    return WorldSpec()


def agent(i, pos, vel=(0.0, 0.0), radius=0.3, pref=1.4, goal=(1.0, 0.0), axis=0):
    return AgentState(i, np.array(pos, float), np.array(vel, float), radius, pref, np.array(goal, float), axis)


def robot(x=1.0, y=5.0, theta=0.0, v=0.0, w=0.0):
    return RobotState(x, y, theta, v, w)


def crowd_of(*agents):
    return Crowd.from_agents(list(agents))


_VERDICTS = {}


@pytest.fixture
def verdict(capsys):
    """Record and print one PASS/FAIL line for an acceptance criterion."""
    def report(n, ok, detail):
        line = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        _VERDICTS[n] = line
        with capsys.disabled():
            print("\n" + line)
        return ok
    return report


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_VERDICTS):
            terminalreporter.write_line(_VERDICTS[n])
