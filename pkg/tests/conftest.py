import shutil
import sys
from pathlib import Path

import pytest

TESTS = Path(__file__).resolve().parent
FIXTURE = TESTS / "fixtures" / "pipeline"
sys.path.insert(0, str(TESTS))

from vid2dialog.cli import cmd_eval, load_config, run_pipeline  # noqa: E402
from vid2dialog.dataset import read_dataset  # noqa: E402


@pytest.fixture(scope="session")
def fixture_dir():
    return FIXTURE


def fixture_config(run_dir, **overrides):
    return load_config(FIXTURE / "config.toml", {"run_dir": str(run_dir), "jobs": 1, **overrides})


@pytest.fixture(scope="session")
def fixture_run(tmp_path_factory):
    """The bundled fixture taken through every stage and the benchmark in replay mode."""
    run_dir = tmp_path_factory.mktemp("fixture_run")
    cfg = fixture_config(run_dir)
    summary = run_pipeline(cfg)
    summary["eval"] = cmd_eval(cfg)
    return cfg, summary


@pytest.fixture(scope="session")
def fixture_sessions(fixture_run):
    cfg, _ = fixture_run
    return read_dataset(cfg.dataset_path)


@pytest.fixture
def copy_fixture(tmp_path):
    dst = tmp_path / "fixture"
    shutil.copytree(FIXTURE, dst, ignore=shutil.ignore_patterns("__pycache__"))
    return dst


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(mod.RESULTS, key=lambda s: int(s.split()[1])):
        terminalreporter.write_line(line)
