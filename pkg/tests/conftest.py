import sys

import numpy as np
import pytest

from bigworld.models import PolicySpec, init_policy, init_value


def make_instance(seed, d=4, width=8, depth=2, activation="linear", bias=True, jitter=0.1):
    rng = np.random.default_rng(seed)
    pol = init_policy(PolicySpec(d, width, depth, activation, bias), rng.integers(2**32))
    pol = pol.with_flat([p + jitter * rng.normal(size=p.shape) for p in pol.flat()])
    W = init_value(d, rng.integers(2**32)).W + 0.1 * rng.normal(size=(d, d))
    b = rng.normal(size=d)
    return pol, b, W


@pytest.fixture
def instance():
    return make_instance(0)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])
