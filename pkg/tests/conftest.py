"""Shared fixtures; the full-length case-study runs are session-scoped
because several test modules slice the same traces."""
import pytest

import mmcsim as m


@pytest.fixture(scope="session")
def table1():
    return m.SystemParams()


@pytest.fixture(scope="session")
def paper_v1fc_trace():
    """Full-length staircase scenario under the constrained algorithm."""
    return m.run_scenario(m.paper_config("v1fc"))


@pytest.fixture(scope="session")
def paper_all6_v1fc_trace():
    """Full-length scenario with the budget pinned at 6, constrained algorithm."""
    cfg = m.paper_config("v1fc", nsw_schedule=m.constant_schedule(2.6, 6))
    return m.run_scenario(cfg)


@pytest.fixture(scope="session")
def paper_all6_v1f2_trace():
    """Full-length scenario under the conventional algorithm."""
    cfg = m.paper_config("v1f2", nsw_schedule=m.constant_schedule(2.6, 6))
    return m.run_scenario(cfg)


@pytest.fixture(scope="session")
def fast_v1fc_trace():
    return m.run_scenario(m.fast_config("v1fc"))
