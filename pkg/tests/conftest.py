import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from gapcert.chains import random_form

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@st.composite
def forms(draw, min_n=2, max_n=8, killing=False):
    """Random connected forms drawn through a seeded generator."""
    seed = draw(st.integers(0, 2**32 - 1))
    n = draw(st.integers(min_n, max_n))
    extra = draw(st.sampled_from([0.0, 0.3, 0.8]))
    return random_form(np.random.default_rng(seed), n, extra_edges=extra, killing=killing)


ACCEPTANCE_LINES: dict = {}


@pytest.fixture
def criterion():
    """Record one summary line per acceptance criterion."""

    def record(number: int, checks: dict, seconds: float):
        failed = [name for name, ok in checks.items() if not ok]
        status = "PASS" if not failed else "FAIL"
        detail = f"{len(checks) - len(failed)}/{len(checks)} checks, {seconds:.2f} s"
        if failed:
            detail += "; failed: " + ", ".join(failed)
        ACCEPTANCE_LINES[number] = f"criterion {number}: {status} ({detail})"
        print(ACCEPTANCE_LINES[number])
        return failed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[number])
