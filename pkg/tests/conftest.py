import pytest

from supou import CdfGrid, OUParams, simulate_daily_extrema

# Canonical simulation-study parameters used throughout the suite.
THETA0 = OUParams(beta=47.5, mu=22.0, l=0.02)

# One long stationary sample shared by every test that needs the brute-force
# supremum-law oracle; seeded once, never mutated.
ORACLE_SEED = 20240601
ORACLE_DAYS = 100_000


@pytest.fixture(scope="session")
def theta0():
    return THETA0

@pytest.fixture(scope="session")
def oracle_extrema():
    """Daily extrema of a 1e5-day stationary path at theta0 (dt=1e-3)."""
    return simulate_daily_extrema(THETA0, ORACLE_DAYS, dt=1e-3, seed=ORACLE_SEED)


@pytest.fixture(scope="session")
def default_grid():
    return CdfGrid()


@pytest.fixture(scope="session")
def fast_grid():
    return CdfGrid.fast()
