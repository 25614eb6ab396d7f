import functools

import pytest
from hypothesis import settings

from eigconc.ensembles import make_preset
from eigconc.experiments import ExperimentConfig, run_trials

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@functools.lru_cache(maxsize=None)
def cached_records(preset: str, n: int, trials: int, statistics: tuple, seed: int = 0,
                   params: tuple = ()):
    """Trial records for a preset run; trials are per-index deterministic, so
    a prefix of a longer cached run is reused for shorter requests."""
    for (key, recs) in list(_runs.items()):
        if key[:2] == (preset, n) and key[3:] == (statistics, seed, params) and key[2] >= trials:
            return recs[:trials]
    spec = make_preset(preset, n, seed, **dict(params))
    cfg = ExperimentConfig(spec=spec, trials=trials, statistics=statistics)
    recs, _ = run_trials(cfg)
    _runs[(preset, n, trials, statistics, seed, params)] = recs
    return recs


_runs: dict = {}


@pytest.fixture(scope="session")
def records():
    return cached_records


_acceptance_lines: list[str] = []


@pytest.fixture(scope="session")
def acceptance_log():
    def log(number, ok: bool, detail: str) -> None:
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} | {detail}"
        _acceptance_lines.append(line)
        print(line)

    return log


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)
