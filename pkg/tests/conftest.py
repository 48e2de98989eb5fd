from __future__ import annotations

import pytest

from pulseboard.sim import load_scenario, run_scenario


@pytest.fixture(scope="session")
def dyad_result(tmp_path_factory):
    """One recorded run of the bundled dyad lesson, shared across tests."""
    out = tmp_path_factory.mktemp("traces") / "dyad.jsonl"
    scenario = load_scenario("lesson_dyad")
    result = run_scenario(scenario, record=True, out_path=str(out))
    assert result.exit_status == 0, result.report
    return result


@pytest.fixture(scope="session")
def dyad_trace_path(dyad_result) -> str:
    return dyad_result.trace_path
