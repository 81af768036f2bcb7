import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def grid_argmin(fun, lo, hi, step=1e-3, refine=4):
    """Minimize a 1-D function by grid search with successive refinement."""
    for _ in range(refine + 1):
        t = np.arange(lo, hi + step / 2, step)
        i = int(np.argmin(fun(t)))
        c = t[i]
        lo, hi, step = c - 2 * step, c + 2 * step, step / 50
    return c


ACCEPTANCE = {}


def record_criterion(number, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
    ACCEPTANCE[number] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.write_sep("=", "acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
