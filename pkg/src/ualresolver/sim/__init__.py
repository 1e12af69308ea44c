"""Deterministic in-process simulation of deployment scenarios."""

from .harness import (
    CallResult,
    OwnerStub,
    RelayStub,
    ScenarioReport,
    load_spread_report,
    run_scenario,
    seeded_ids,
)
from .scenario import SCHEMA, Scenario, load_scenario

__all__ = [
    "SCHEMA", "CallResult", "OwnerStub", "RelayStub", "Scenario", "ScenarioReport",
    "load_scenario", "load_spread_report", "run_scenario", "seeded_ids",
]
