"""Scenario runner, operation counts, benchmarks and the CLI."""

from pepsi.harness.bench import BenchReport, bench
from pepsi.harness.counting import STEPS, compare_table2, count_ops
from pepsi.harness.scenario import Scenario, ScenarioError, ScenarioResult, parse_scenario, random_scenario, run_scenario

__all__ = [
    "BenchReport",
    "bench",
    "STEPS",
    "compare_table2",
    "count_ops",
    "Scenario",
    "ScenarioError",
    "ScenarioResult",
    "parse_scenario",
    "random_scenario",
    "run_scenario",
]
