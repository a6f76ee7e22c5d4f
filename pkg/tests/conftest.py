"""Shared fixtures and the per-criterion acceptance summary."""

from __future__ import annotations

from pathlib import Path

import pytest

from predbeam.harness.config import load_config
from predbeam.harness.runner import datasets_for, run_point

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"
DESK_SEEDS = (0, 1, 2)

_CRITERIA: dict = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    n, title = mark.args
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        status = "PASS" if rep.passed else ("SKIP" if rep.skipped else "FAIL")
        prev = _CRITERIA.get(n, (title, "PASS"))[1]
        _CRITERIA[n] = (title, "FAIL" if "FAIL" in (prev, status) else status)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        title, status = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n:2d} {status}: {title}")


@pytest.fixture(scope="session")
def desk_cfg():
    return load_config(CONFIGS / "desk.ini")


class PointCache:
    """Memoised harness runs so several criteria can share one training run."""

    def __init__(self, cfg):
        self.cfg = cfg
        self._runs = {}

    def run(self, axis: str, value: float, seed: int, methods: tuple):
        key = (axis, value, seed, methods)
        if key not in self._runs:
            cfg = self.cfg.replace(axis=axis, values=(value,), methods=methods)
            self._runs[key] = run_point(cfg, value, seed)
        return self._runs[key]

    def rates(self, axis, value, seed, methods) -> dict:
        res = self.run(axis, value, seed, methods)
        return {r.method: r.mean_sum_rate for r in res.rows}

    def test_set(self, axis: str, value: float, seed: int):
        cfg = self.cfg.replace(axis=axis, values=(value,))
        p, pos = cfg.point(value)
        return p, datasets_for(cfg, p, pos, seed)[1]


@pytest.fixture(scope="session")
def desk_runs(desk_cfg):
    return PointCache(desk_cfg)
