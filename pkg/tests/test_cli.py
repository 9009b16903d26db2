import json
import os
import subprocess
import sys

import pytest

from crowdbench.bench import RunPlan, run_suite
from crowdbench.cli import OUT_ENV, UsageError, cli_parse, main
from crowdbench.scenario import SuiteSpec, generate_suite


@pytest.fixture(scope="module")
def suite_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("suite")
    assert main(["generate", "--seed", "42", "--out", str(d)]) == 0
    return d


def test_generate_writes_suite(suite_dir):
    files = [p for p in suite_dir.iterdir() if p.name != "manifest.json"]
    assert len(files) == 100
    manifest = json.loads((suite_dir / "manifest.json").read_text())
    assert manifest["master_seed"] == 42 and len(manifest["scenarios"]) == 100


def test_run_plan_with_three_controllers(suite_dir):
    cmd, plan = cli_parse(["run", "--suite", str(suite_dir), "--controllers", "baseline,dwa,rvo", "--jobs", "4"])
    assert cmd == "run" and plan.controllers == ("baseline", "dwa", "rvo") and plan.jobs == 4
    assert len(plan.tasks()) == 300 + 3


def test_low_density_filter(suite_dir):
    _, plan = cli_parse(["run", "--suite", str(suite_dir), "--controllers", "baseline", "--density", "50"])
    assert len(plan.suite) == 25 and len(plan.tasks()) == 26


@pytest.mark.parametrize("argv", [
    ["run"],
    ["run", "--suite", "x", "--bogus"],
    ["frobnicate"],
    [],
    ["generate", "--seed", "abc", "--out", "x"],
])
def test_usage_errors(argv, capsys):
    assert main(argv) == 1
    assert "usage" in capsys.readouterr().err


@pytest.mark.parametrize("extra", [
    ["--controllers", "baseline,teleport"],
    ["--controllers", "dwa,dwa"],
    ["--controllers", ""],
    ["--jobs", "0"],
    ["--density", "75"],
    ["--flow", "3D"],
    ["--density", "50", "--crowd", "nonexistent"],
])
def test_contradictory_or_invalid(suite_dir, extra):
    with pytest.raises(UsageError):
        cli_parse(["run", "--suite", str(suite_dir), *extra])
    assert main(["run", "--suite", str(suite_dir), *extra]) == 1


def test_missing_suite_dir(tmp_path):
    assert main(["run", "--suite", str(tmp_path)]) == 1


def test_default_out_from_env(suite_dir, monkeypatch, tmp_path):
    monkeypatch.setenv(OUT_ENV, str(tmp_path / "envout"))
    _, plan = cli_parse(["run", "--suite", str(suite_dir)])
    assert str(plan.out_dir) == str(tmp_path / "envout")


def test_small_run_and_report(suite_dir, tmp_path):
    out = tmp_path / "out"
    argv = ["run", "--suite", str(suite_dir), "--controllers", "baseline", "--density", "50",
            "--flow", "1D+", "--crowd", "rvo15-r", "--records", "full", "--out", str(out)]
    assert main(argv) == 0
    for name in ("runs.csv", "events.csv", "radar.csv", "histogram.csv", "summary.json", "plan.json"):
        assert (out / name).exists()
    assert len(list((out / "records").iterdir())) == 2  # the crowd run plus the solo run
    before = {p.name: p.read_bytes() for p in out.iterdir() if p.is_file()}
    assert main(["report", "--in", str(out)]) == 0
    after = {p.name: p.read_bytes() for p in out.iterdir() if p.is_file()}
    assert before == after


def test_report_without_runs(tmp_path):
    assert main(["report", "--in", str(tmp_path)]) == 1


def test_failed_run_gives_exit_two(tmp_path):
    suite = generate_suite(1)
    bad = next(s for s in suite.scenarios if s.id == "1Dp_050_rvo15-r")
    bad.agents[0].velocity[:] = float("nan")
    code = run_suite(RunPlan(SuiteSpec([bad], 1), ("baseline",), tmp_path))
    assert code == 2
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["failed"] == ["1Dp_050_rvo15-r/baseline"]
    assert "failed" in (tmp_path / "runs.csv").read_text()


def test_module_entry_point(tmp_path):
    env = {**os.environ}
    r = subprocess.run([sys.executable, "-m", "crowdbench", "generate", "--seed", "5", "--out", str(tmp_path / "s")],
                       capture_output=True, text=True, env=env)
    assert r.returncode == 0, r.stderr
    r = subprocess.run([sys.executable, "-m", "crowdbench", "run"], capture_output=True, text=True, env=env)
    assert r.returncode == 1 and "usage" in r.stderr
