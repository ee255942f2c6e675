"""Orchestration: guarantee loop, experiments, budget sweeps, reports and the command line."""

from .config import ConfigError, RunConfig, ScenarioSource, derive_seed, load_config
from .pipeline import (
    ExperimentReport,
    ExperimentRow,
    GuaranteeLoopExhausted,
    GuaranteeRun,
    SweepReport,
    run_experiments,
    run_with_guarantee,
    select,
    sweep_budget,
)
from .reports import emit_experiments, emit_sweep

__all__ = [
    "ConfigError", "ExperimentReport", "ExperimentRow", "GuaranteeLoopExhausted", "GuaranteeRun",
    "RunConfig", "ScenarioSource", "SweepReport", "derive_seed", "emit_experiments", "emit_sweep",
    "load_config", "run_experiments", "run_with_guarantee", "select", "sweep_budget",
]
