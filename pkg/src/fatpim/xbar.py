"""Memristor crossbar model.

Cell conductances are dimensionless integer levels ``0 .. 2**m - 1``. Write
noise is Gaussian in the same level units and is drawn once, when a cell is
programmed. Bitline currents are the input-weighted column sums of the
programmed values; inputs are single bits applied one cycle at a time.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DomainError

# Programmed values are snapped to this grid (in level units). With at most
# 2**12 rows and levels below 2**4 every partial bitline sum stays exactly
# representable in a float64, so currents do not depend on summation order.
CONDUCTANCE_GRID = 2.0 ** -36


@dataclass(frozen=True)
class CrossbarConfig:
    rows: int = 128
    data_cols: int = 128
    sum_cols: int = 5
    bits_per_cell: int = 2
    write_noise_sigma: float = 0.0

    def __post_init__(self):
        if self.rows < 1 or self.data_cols < 1:
            raise ConfigurationError("crossbar needs at least one row and one data column")
        if self.rows > 4096:
            raise ConfigurationError("at most 4096 rows are supported")
        if self.sum_cols < 0:
            raise ConfigurationError("sum_cols must be >= 0")
        if not 1 <= self.bits_per_cell <= 4:
            raise ConfigurationError("bits_per_cell must be in 1..4")
        if self.write_noise_sigma < 0:
            raise ConfigurationError("write_noise_sigma must be >= 0")

    @property
    def cols(self) -> int:
        return self.data_cols + self.sum_cols

    @property
    def max_level(self) -> int:
        return (1 << self.bits_per_cell) - 1

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)


@dataclass
class CrossbarState:
    """Programmed contents of one crossbar.

    ``ideal_levels`` holds the intended integer levels, ``programmed`` the
    analog values actually written. Only fault injection and re-programming
    should mutate an existing state.
    """

    config: CrossbarConfig
    ideal_levels: np.ndarray
    programmed: np.ndarray
    permanently_faulty: bool = False
    version: int = field(default=0, compare=False)

    @property
    def data_levels(self) -> np.ndarray:
        return self.ideal_levels[:, : self.config.data_cols]

    @property
    def sum_levels(self) -> np.ndarray:
        return self.ideal_levels[:, self.config.data_cols:]

    def copy(self) -> "CrossbarState":
        return CrossbarState(
            self.config,
            self.ideal_levels.copy(),
            self.programmed.copy(),
            self.permanently_faulty,
            self.version,
        )


@dataclass(frozen=True)
class AnalogReadout:
    currents: np.ndarray
    cycle_index: int = 0

    @property
    def data(self) -> np.ndarray:
        return self.currents


def _snap(values: np.ndarray) -> np.ndarray:
    return np.round(values / CONDUCTANCE_GRID) * CONDUCTANCE_GRID


def write_cells(levels: np.ndarray, sigma: float, rng: np.random.Generator | None) -> np.ndarray:
    """Return analog values for freshly written cells at ``levels``."""
    values = np.asarray(levels, dtype=np.float64)
    if sigma == 0:
        return values.copy()
    if rng is None:
        raise DomainError("a random generator is required when write noise is enabled")
    # conductance cannot go negative
    return _snap(np.maximum(values + rng.normal(0.0, sigma, size=values.shape), 0.0))


def _check_levels(config: CrossbarConfig, levels: np.ndarray) -> np.ndarray:
    levels = np.asarray(levels)
    if levels.shape != config.shape:
        raise ConfigurationError(
            f"levels have shape {levels.shape}, crossbar expects {config.shape}"
        )
    if not np.issubdtype(levels.dtype, np.integer):
        if not np.all(np.mod(levels, 1) == 0):
            raise DomainError("cell levels must be integers")
    levels = levels.astype(np.int64)
    if levels.size and (levels.min() < 0 or levels.max() > config.max_level):
        raise DomainError(f"cell levels must lie in [0, {config.max_level}]")
    return levels


def program_crossbar(config: CrossbarConfig, levels, rng_seed=None) -> CrossbarState:
    """Write ``levels`` into a crossbar, adding independent write noise per cell.

    ``rng_seed`` may be an integer seed or an existing ``numpy.random.Generator``.
    The same seed always produces the same programmed values.
    """
    levels = _check_levels(config, levels)
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    programmed = write_cells(levels, config.write_noise_sigma, rng)
    return CrossbarState(config, levels, programmed)


def _check_bits(bits, n: int) -> np.ndarray:
    bits = np.asarray(bits)
    if bits.ndim != 1 or bits.shape[0] != n:
        raise DomainError(f"expected {n} input bits, got shape {bits.shape}")
    if bits.size and not np.all((bits == 0) | (bits == 1)):
        raise DomainError("inputs must be single bits (0 or 1)")
    return bits.astype(np.float64)


def apply_inputs(state: CrossbarState, input_bits, cycle_index: int = 0) -> AnalogReadout:
    """Drive the wordlines with one bit each and read every bitline current."""
    bits = _check_bits(input_bits, state.config.rows)
    return AnalogReadout(bits @ state.programmed, cycle_index)


def apply_input_planes(state: CrossbarState, planes: np.ndarray) -> np.ndarray:
    """Bitline currents for a stack of input bit-planes, shape ``(cycles, cols)``.

    Row ``c`` equals ``apply_inputs(state, planes[c]).currents``.
    """
    planes = np.asarray(planes, dtype=np.float64)
    if planes.ndim != 2 or planes.shape[1] != state.config.rows:
        raise DomainError(f"bit-planes must have shape (cycles, {state.config.rows})")
    return planes @ state.programmed


def ideal_dot_product(levels, input_bits) -> np.ndarray:
    """Exact integer column sums of ``levels`` weighted by ``input_bits``."""
    levels = np.asarray(levels)
    bits = np.asarray(input_bits)
    if levels.ndim != 2 or bits.ndim != 1 or bits.shape[0] != levels.shape[0]:
        raise DomainError(
            f"cannot apply {bits.shape} inputs to a {levels.shape} level matrix"
        )
    return bits.astype(np.int64) @ levels.astype(np.int64)
