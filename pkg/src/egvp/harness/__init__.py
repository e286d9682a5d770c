"""Scenario configuration, seeded sweeps and the command line."""
from .config import ConfigError, ScenarioConfig, load_config
from .runner import ResultRow, add_sampling_noise, emit_results, run_scenario, simulate

__all__ = ["ConfigError", "ScenarioConfig", "load_config", "ResultRow", "add_sampling_noise", "emit_results", "run_scenario", "simulate"]
