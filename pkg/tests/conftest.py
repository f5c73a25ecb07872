import numpy as np
import pytest

from clearnet import fixtures as fx
from clearnet.resilience import default_margin, insolvency_margin

GOLDEN = __import__("pathlib").Path(__file__).parent / "golden"


@pytest.fixture
def toy():
    return fx.toy()


@pytest.fixture
def toy2():
    return fx.toy2()


@pytest.fixture
def ring3():
    return fx.ring3()


@pytest.fixture
def golden_dir():
    return GOLDEN


def interesting_networks(seed, count, n_range=(2, 9), m_range=(1, 6), short_every=0):
    """Random no-nominal-default networks whose margins are finite and distinct in both norms."""
    rng = np.random.default_rng(seed)
    out = []
    k = 0
    while len(out) < count:
        n = int(rng.integers(*n_range))
        m = int(rng.integers(*m_range))
        short = 0.25 if short_every and k % short_every == 0 else 0.0
        net = fx.random_network(rng, n, m, short_fraction=short)
        k += 1
        ok = True
        for norm in ("linf", "l1"):
            es = default_margin(net, norm).epsilon_star
            eu = insolvency_margin(net, norm)
            if not np.isfinite(es) or eu - es <= 1e-6 * eu:
                ok = False
        if ok:
            out.append(net)
    return out


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in mod.RESULTS:
            terminalreporter.write_line(line)
