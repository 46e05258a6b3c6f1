import numpy as np
import pytest

from rcmperc.graph import build_graph
from rcmperc.models import BooleanModel
from rcmperc.pointprocess import Dirac, Region, sample_ppp


def boolean_strip_graph(rho, ell, seed, radius=0.5, T=2.0):
    cfg = sample_ppp(Region.strip(ell, 2, truncation=T), rho, Dirac(radius), seed)
    return build_graph(cfg, BooleanModel(), seed)


@pytest.fixture
def strip_graph():
    return boolean_strip_graph


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def accept(request):
    """Record one acceptance line; all lines are echoed in the terminal summary."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def record(k, name, ok, detail):
        lines.append((k, f"criterion {k:>2} {name}: {'PASS' if ok else 'FAIL'} ({detail})"))
        return ok
    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
