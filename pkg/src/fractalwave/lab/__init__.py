"""Experiment drivers, reporting, plotting and the command-line interface."""

from .experiments import (
    run_convergence,
    run_kernel_fit,
    run_mollified_decay,
    run_oscillation_demo,
    run_propagation_probe,
)
from .report import ExperimentReport, validate_report, write_report

__all__ = [
    "ExperimentReport",
    "run_convergence",
    "run_kernel_fit",
    "run_mollified_decay",
    "run_oscillation_demo",
    "run_propagation_probe",
    "validate_report",
    "write_report",
]
