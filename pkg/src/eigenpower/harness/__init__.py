"""Experiment configs, registry, density diagnostics, run orchestration, CLI."""

from .config import (ArchitectureConfig, ExperimentConfig, OutputsConfig,
                     ProblemConfig, TrainingSection, config_from_dict,
                     config_to_dict, load_config, save_config, validate_config)
from .density import compare_densities, density_histogram
from .registry import registry
from .runner import RunReport, fdm_vs_nn_sweep, run

__all__ = [
    "ArchitectureConfig",
    "ExperimentConfig",
    "OutputsConfig",
    "ProblemConfig",
    "TrainingSection",
    "RunReport",
    "compare_densities",
    "config_from_dict",
    "config_to_dict",
    "density_histogram",
    "fdm_vs_nn_sweep",
    "load_config",
    "registry",
    "run",
    "save_config",
    "validate_config",
]
