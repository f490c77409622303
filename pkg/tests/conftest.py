import numpy as np
import pytest

from rhosim import DiscreteSpace, SeedSpec

COIN = DiscreteSpace(("heads", "tails"))


@pytest.fixture
def seeds():
    return SeedSpec(20241018)


def coin_flips(n, seed=1):
    """iid fair bits from an RNG that shares nothing with rhosim.streams."""
    return np.random.default_rng(seed).integers(0, 2, size=n)


def uniform_system(lo=0.0, hi=2.0, bins=4):
    from rhosim import ContinuousSpace, Part, RhoSystem

    return RhoSystem(
        "uniform rod lengths",
        ContinuousSpace(lo, hi, bins),
        Part("uniform", lambda s: s.uniform(0)),
        Part("rod", lambda idx, u: lo + (hi - lo) * u),
        Part("ruler", lambda x: x),
    )


def coin_system():
    from rhosim import Part, RhoSystem

    return RhoSystem(
        "fair coin",
        COIN,
        Part("flip", lambda s: s.uniform(0)),
        Part("coin", lambda idx, u: (u >= 0.5).astype(np.int64)),
        Part("eye", lambda x: x),
    )


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
