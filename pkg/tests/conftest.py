"""Shared fixtures: small synthetic instances reused across test modules."""

import sys

import pytest

from flexbid.synthetic import SyntheticSpec, generate_instance


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Echo the verdict lines the acceptance module collected."""
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "LINES", []) if mod else []
    if lines:
        terminalreporter.section("acceptance checks")
        for line in lines:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def small_bundle():
    """12 buildings on a 2-deep feeder over 16 days; 4 heat pumps."""
    spec = SyntheticSpec(
        n_buildings=12, hp_share_pct=30.0, n_days=16, seed=7,
        branching=3, depth=2,
    )
    return generate_instance(spec)


@pytest.fixture(scope="session")
def stressed_bundle():
    """30 buildings at a 60 % heat-pump share: cheap hours congest the substation."""
    spec = SyntheticSpec(n_buildings=30, hp_share_pct=60.0, n_days=14, seed=3)
    return generate_instance(spec)
