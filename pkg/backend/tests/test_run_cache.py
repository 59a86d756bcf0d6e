import os
import time
from datetime import datetime

import pytest

from app.services.cleanup_service import CleanupService
from app.services.run_cache import RunCache
from app.services.scenario import LandingReport

REPORT = LandingReport(
    touchdown=True,
    touchdown_speed_mps=0.18,
    touchdown_inclination_error_rad=0.001,
    steps_elapsed=9000,
    success=True,
    degraded=False,
    seed=3,
)


@pytest.fixture
def cache(tmp_path):
    return RunCache(str(tmp_path / "runs.sqlite3"))


def test_save_and_get(cache, tmp_path):
    assert cache.save_run("abc", {"seed": 3}, REPORT, str(tmp_path / "abc"))
    assert cache.get_report("abc") == REPORT
    assert cache.get_trace_dir("abc") == tmp_path / "abc"
    assert cache.count() == 1


def test_unknown_run(cache):
    assert cache.get_report("nope") is None
    assert cache.get_trace_dir("nope") is None


def test_save_replaces_existing(cache):
    cache.save_run("abc", {}, REPORT)
    cache.save_run("abc", {}, REPORT.model_copy(update={"success": False}))
    assert cache.count() == 1
    assert cache.get_report("abc").success is False
    assert cache.get_trace_dir("abc") is None


def test_clear_trace_dir_keeps_report(cache, tmp_path):
    cache.save_run("abc", {}, REPORT, str(tmp_path))
    cache.clear_trace_dir("abc")
    assert cache.get_trace_dir("abc") is None
    assert cache.get_report("abc") == REPORT


def test_list_runs(cache):
    cache.save_run("one", {}, REPORT)
    cache.save_run("two", {}, REPORT, "/tmp/two")
    runs = {run["run_id"]: run for run in cache.list_runs()}
    assert set(runs) == {"one", "two"}
    assert runs["two"]["has_trace"] and not runs["one"]["has_trace"]
    assert runs["one"]["report"]["steps_elapsed"] == 9000


def _age(path, seconds):
    old = time.time() - seconds
    os.utime(path, (old, old))


def test_cleanup_removes_only_expired_inactive_runs(cache, tmp_path):
    runs_dir = tmp_path / "runs"
    for name in ("old", "busy", "fresh"):
        (runs_dir / name).mkdir(parents=True)
        (runs_dir / name / "trace.csv").write_text("step\n")
        cache.save_run(name, {}, REPORT, str(runs_dir / name))
    _age(runs_dir / "old", 7200)
    _age(runs_dir / "busy", 7200)

    service = CleanupService(runs_dir=str(runs_dir), run_max_age_minutes=60, run_cache=cache)
    service.add_active_run("busy")
    assert service.cleanup_runs(datetime.now()) == 1
    assert not (runs_dir / "old").exists()
    assert (runs_dir / "busy").exists() and (runs_dir / "fresh").exists()
    assert cache.get_trace_dir("old") is None
    assert cache.get_report("old") == REPORT

    service.remove_active_run("busy")
    assert service.cleanup_runs() == 1
    assert service.get_status()["active_runs"] == []


def test_cleanup_without_runs_dir(tmp_path):
    assert CleanupService(runs_dir=str(tmp_path / "missing")).cleanup_runs() == 0
