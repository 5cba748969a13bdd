"""Scenario registry, pipeline runner, CSV output and command line."""

from .config import IodMethod, IodSource, ScenarioConfig
from .runner import ScenarioResult, run_scenario

__all__ = ["IodMethod", "IodSource", "ScenarioConfig", "ScenarioResult", "run_scenario"]
