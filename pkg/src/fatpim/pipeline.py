"""Digitisation and sum checking.

One ADC converts one bitline per cycle. The running adder folds every data
bitline output into a total while the conversions stream past, so the only
extra work FAT-PIM adds to a readout is converting the sum bitlines plus one
comparator cycle.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DomainError
from .xbar import CrossbarConfig


@dataclass(frozen=True)
class AdcSpec:
    resolution_bits: int = 9
    samples_per_second: float = 1.28e9
    count_per_ima: int = 4

    def __post_init__(self):
        if self.resolution_bits < 1:
            raise ConfigurationError("ADC resolution must be at least one bit")
        if self.samples_per_second <= 0:
            raise ConfigurationError("ADC sample rate must be positive")
        if self.count_per_ima < 1:
            raise ConfigurationError("an IMA needs at least one ADC")

    @property
    def sample_ns(self) -> float:
        return 1e9 / self.samples_per_second

    @property
    def max_code(self) -> int:
        return (1 << self.resolution_bits) - 1

    def validate_for(self, crossbar: CrossbarConfig) -> None:
        need = required_adc_bits(crossbar.rows, crossbar.bits_per_cell)
        if self.resolution_bits < need:
            raise ConfigurationError(
                f"a {crossbar.rows}-row crossbar of {crossbar.bits_per_cell}-bit cells needs "
                f"{need} ADC bits, got {self.resolution_bits}"
            )


def required_adc_bits(rows: int, bits_per_cell: int) -> int:
    return math.ceil(math.log2(rows * ((1 << bits_per_cell) - 1) + 1))


def quantize(current, resolution_bits: int):
    """Nearest ADC code (ties round up), clamped to the converter's range.

    Accepts a scalar or an array of currents.
    """
    top = (1 << resolution_bits) - 1
    codes = np.clip(np.floor(np.asarray(current, dtype=np.float64) + 0.5), 0, top).astype(np.int64)
    return int(codes) if codes.ndim == 0 else codes


def shift_and_add(cell_outputs, m: int) -> int:
    total = 0
    for out in cell_outputs:
        total = (total << m) + int(out)
    return total


@dataclass(frozen=True)
class CheckResult:
    data_sum: int
    stored_sum: int
    abs_diff: int
    flagged: bool
    threshold: int


def sum_check(data_bitline_outputs, sum_cell_outputs, m: int, delta: int = 0) -> CheckResult:
    """Compare the running sum of data bitlines against the decoded stored sum."""
    data_sum = int(np.sum(np.asarray(data_bitline_outputs, dtype=np.int64)))
    stored = shift_and_add(sum_cell_outputs, m)
    diff = abs(data_sum - stored)
    return CheckResult(data_sum, stored, diff, diff > delta, delta)


def default_threshold(rows: int, sigma: float) -> int:
    """Comparator threshold in ADC codes.

    Zero while the worst-case accumulated write noise stays under half a
    quantisation step; otherwise the crossbar-size bound ``12 * n * sigma``.
    """
    if sigma * rows < 0.5:
        return 0
    return math.ceil(12 * rows * sigma)


@dataclass(frozen=True)
class ConversionTimeline:
    cycles_for_data: int
    cycles_for_sum: int
    checker_cycles: int
    cycle_ns: float

    @property
    def total_cycles(self) -> int:
        return self.cycles_for_data + self.cycles_for_sum + self.checker_cycles

    @property
    def adc_busy_cycles(self) -> int:
        # the comparator cycle overlaps the next readout's first conversion
        return self.cycles_for_data + self.cycles_for_sum

    @property
    def total_ns(self) -> float:
        return self.total_cycles * self.cycle_ns


def conversion_timeline(w: int, sum_cols: int, adc: AdcSpec, fatpim_enabled: bool = True) -> ConversionTimeline:
    if w < 1 or sum_cols < 0:
        raise DomainError("need w >= 1 and sum_cols >= 0")
    return ConversionTimeline(
        cycles_for_data=w,
        cycles_for_sum=sum_cols if fatpim_enabled else 0,
        checker_cycles=1 if fatpim_enabled else 0,
        cycle_ns=adc.sample_ns,
    )
