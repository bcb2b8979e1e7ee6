"""Simulator and reliability tools for summation-checked ReRAM crossbars."""

from .accel import (
    DEFAULT_TRACE_SUITE,
    AcceleratorConfig,
    InputTrace,
    RunReport,
    SweepAxis,
    run_trace,
    sweep,
)
from .dataprep import SumMode, ValueLayout, storage_overhead
from .errors import ConfigurationError, DomainError, EnumerationTooLarge, FatPimError
from .faults import FIT_LEVELS, FaultEvent, FaultScenario, Placement, inject, make_multibit_pattern
from .pipeline import AdcSpec, conversion_timeline, sum_check
from .xbar import CrossbarConfig, CrossbarState, apply_inputs, program_crossbar

__version__ = "0.1.0"

__all__ = [
    "AcceleratorConfig",
    "AdcSpec",
    "ConfigurationError",
    "CrossbarConfig",
    "CrossbarState",
    "DEFAULT_TRACE_SUITE",
    "DomainError",
    "EnumerationTooLarge",
    "FIT_LEVELS",
    "FatPimError",
    "FaultEvent",
    "FaultScenario",
    "InputTrace",
    "Placement",
    "RunReport",
    "SumMode",
    "SweepAxis",
    "ValueLayout",
    "apply_inputs",
    "conversion_timeline",
    "inject",
    "make_multibit_pattern",
    "program_crossbar",
    "run_trace",
    "storage_overhead",
    "sum_check",
    "sweep",
]
