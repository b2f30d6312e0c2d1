"""Scenario runner, strategy sweeps and the claim checker."""

from etlc.harness.claims import ALL_CHECKS, CLAIMS, PROPERTIES, ClaimReport, check_claims
from etlc.harness.scenario import Scenario, Transcript, bundled_scenarios, load_scenario, run_scenario
from etlc.harness.sweep import Corpus, sweep

__all__ = [
    "ALL_CHECKS", "CLAIMS", "PROPERTIES", "ClaimReport", "check_claims",
    "Scenario", "Transcript", "bundled_scenarios", "load_scenario", "run_scenario",
    "Corpus", "sweep",
]
