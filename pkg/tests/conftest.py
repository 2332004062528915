import os
import sys
import warnings
from functools import lru_cache
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
SHIPPED = sorted(p.stem for p in CONFIGS.glob("*.toml"))

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE_LINES = {}


def record_criterion(key, status, detail):
    ACCEPTANCE_LINES[key] = f"criterion {key:>2}: {status:<5} {detail}"
    print(ACCEPTANCE_LINES[key])


@lru_cache(maxsize=None)
def load_config(name):
    from toadfront import config

    return config.load(CONFIGS / f"{name}.toml")


@lru_cache(maxsize=None)
def simulation(name):
    """``(result, companion)`` for a shipped config, computed once per session."""
    from toadfront import pipeline

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        return pipeline.simulate(load_config(name))


@lru_cache(maxsize=None)
def spectrum(name):
    from toadfront import pipeline

    return pipeline.spectrum(load_config(name))


@pytest.fixture(scope="session")
def sim():
    return simulation


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES, key=lambda k: int(k)):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
