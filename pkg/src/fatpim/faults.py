"""Soft-error generation and injection.

Retention failures are abrupt level changes, so a fault simply moves a cell
to a different level. Faults accumulated after programming are drawn per
cell from a Poisson process with rate ``fit_per_cell_per_hour``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError
from .xbar import CrossbarConfig, CrossbarState, write_cells


@dataclass(frozen=True)
class FaultScenario:
    fit_per_cell_per_hour: float = 0.0
    delay_after_programming: float = 0.0
    inject_during_run: bool = False
    rng_seed: int = 0

    def __post_init__(self):
        if self.fit_per_cell_per_hour < 0:
            raise DomainError("failure rate must be >= 0")
        if self.delay_after_programming < 0:
            raise DomainError("delay must be >= 0")

    @property
    def mean_faults_per_cell(self) -> float:
        return self.fit_per_cell_per_hour * self.delay_after_programming


# Named rate levels used in the correction-overhead experiments.
FIT_LEVELS = {"FIT-A": 1.6e-3, "FIT-B": 1.6e-2, "FIT-C": 1.6e-1, "FIT-D": 1.6}


@dataclass(frozen=True)
class FaultEvent:
    crossbar_id: int
    row: int
    col: int
    new_level: int
    time: float = 0.0


@dataclass
class FaultArrays:
    """Column-oriented fault events, used where there can be millions of them."""

    crossbar_id: np.ndarray
    row: np.ndarray
    col: np.ndarray
    new_level: np.ndarray
    raw_events: int = 0

    def __len__(self):
        return int(self.row.size)

    def events(self, time: float = 0.0) -> list[FaultEvent]:
        return [
            FaultEvent(int(x), int(r), int(c), int(v), time)
            for x, r, c, v in zip(self.crossbar_id, self.row, self.col, self.new_level)
        ]

    def for_crossbar(self, crossbar_id: int) -> "FaultArrays":
        sel = self.crossbar_id == crossbar_id
        return FaultArrays(self.crossbar_id[sel], self.row[sel], self.col[sel], self.new_level[sel])


def _other_level(old: np.ndarray, bits_per_cell: int, rng: np.random.Generator) -> np.ndarray:
    # uniform over the 2**m - 1 levels that differ from ``old``
    offset = rng.integers(1, 1 << bits_per_cell, size=old.shape)
    return (old + offset) % (1 << bits_per_cell)


def sample_faults(
    mean_per_cell: float,
    levels: Sequence[np.ndarray],
    bits_per_cell: int,
    rng: np.random.Generator,
    crossbar_ids: Sequence[int] | None = None,
) -> FaultArrays:
    """Draw accumulated faults for each crossbar's level matrix."""
    ids = list(range(len(levels))) if crossbar_ids is None else list(crossbar_ids)
    parts = []
    raw = 0
    for xid, lv in zip(ids, levels):
        lv = np.asarray(lv)
        if mean_per_cell <= 0:
            continue
        counts = rng.poisson(mean_per_cell, size=lv.shape)
        raw += int(counts.sum())
        rows, cols = np.nonzero(counts)
        new = _other_level(lv[rows, cols], bits_per_cell, rng)
        parts.append((np.full(rows.size, xid, dtype=np.int64), rows, cols, new))
    if not parts:
        empty = np.zeros(0, dtype=np.int64)
        return FaultArrays(empty, empty, empty, empty, raw)
    cat = [np.concatenate([p[i] for p in parts]).astype(np.int64) for i in range(4)]
    return FaultArrays(*cat, raw_events=raw)


def accumulate_faults(
    scenario: FaultScenario,
    levels: Sequence[np.ndarray],
    bits_per_cell: int = 2,
) -> list[FaultEvent]:
    """Faults present when operation starts ``delay_after_programming`` hours in.

    ``levels`` holds one ideal-level matrix per crossbar; a cell hit by several
    failures keeps only one event whose level differs from the programmed one.
    """
    rng = np.random.default_rng(scenario.rng_seed)
    arrays = sample_faults(scenario.mean_faults_per_cell, levels, bits_per_cell, rng)
    return arrays.events(time=scenario.delay_after_programming)


def inject(state: CrossbarState, events: Iterable[FaultEvent], rng: np.random.Generator | None = None) -> CrossbarState:
    """Apply fault events to ``state`` in order (a later event on a cell wins)."""
    rows, cols = state.config.shape
    touched = False
    for ev in events:
        if not (0 <= ev.row < rows and 0 <= ev.col < cols):
            raise DomainError(f"fault at ({ev.row}, {ev.col}) is outside a {rows}x{cols} crossbar")
        if not 0 <= ev.new_level <= state.config.max_level:
            raise DomainError(f"fault level {ev.new_level} out of range")
        state.ideal_levels[ev.row, ev.col] = ev.new_level
        state.programmed[ev.row, ev.col] = write_cells(
            np.array([ev.new_level]), state.config.write_noise_sigma, rng
        )[0]
        touched = True
    if touched:
        state.version += 1
    return state


def inject_arrays(state: CrossbarState, faults: FaultArrays, rng: np.random.Generator | None = None) -> CrossbarState:
    """Vectorised :func:`inject` for one crossbar's :class:`FaultArrays`."""
    if len(faults) == 0:
        return state
    state.ideal_levels[faults.row, faults.col] = faults.new_level
    state.programmed[faults.row, faults.col] = write_cells(
        faults.new_level, state.config.write_noise_sigma, rng
    )
    state.version += 1
    return state


class Placement(str, enum.Enum):
    SAME_BITLINE = "same_bitline"
    SAME_WORDLINE = "same_wordline"
    RANDOM = "random"
    DATA_AND_SUM = "data_and_sum"


def make_multibit_pattern(
    n_faults: int,
    placement: Placement | str,
    crossbar: CrossbarConfig,
    rng_seed,
    levels: np.ndarray | None = None,
    crossbar_id: int = 0,
) -> list[FaultEvent]:
    """Pick ``n_faults`` distinct cells obeying ``placement`` and a new level for each.

    When ``levels`` is omitted every cell is assumed to sit at level 0.
    """
    placement = Placement(placement)
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    n, w, s = crossbar.rows, crossbar.data_cols, crossbar.sum_cols
    cols_total = crossbar.cols
    if n_faults < 1:
        raise DomainError("need at least one fault")

    if placement is Placement.SAME_BITLINE:
        if n_faults > n:
            raise DomainError(f"a bitline has only {n} cells")
        col = int(rng.integers(cols_total))
        cells = [(int(r), col) for r in rng.choice(n, size=n_faults, replace=False)]
    elif placement is Placement.SAME_WORDLINE:
        if n_faults > cols_total:
            raise DomainError(f"a wordline has only {cols_total} cells")
        row = int(rng.integers(n))
        cells = [(row, int(c)) for c in rng.choice(cols_total, size=n_faults, replace=False)]
    elif placement is Placement.RANDOM:
        if n_faults > n * cols_total:
            raise DomainError("more faults than cells")
        flat = rng.choice(n * cols_total, size=n_faults, replace=False)
        cells = [(int(f // cols_total), int(f % cols_total)) for f in flat]
    else:
        if s == 0:
            raise DomainError("crossbar has no sum region")
        if n_faults < 2:
            raise DomainError("a data-and-sum pattern needs at least two faults")
        if n_faults > n * cols_total:
            raise DomainError("more faults than cells")
        data_cell = int(rng.integers(n * w))
        sum_cell = int(rng.integers(n * s))
        chosen = {(data_cell // w, data_cell % w), (sum_cell // s, w + sum_cell % s)}
        while len(chosen) < n_faults:
            f = int(rng.integers(n * cols_total))
            chosen.add((f // cols_total, f % cols_total))
        cells = sorted(chosen, key=lambda rc: (rc[1] >= w, rc))

    base = np.zeros(crossbar.shape, dtype=np.int64) if levels is None else np.asarray(levels)
    old = np.array([base[r, c] for r, c in cells], dtype=np.int64)
    new = _other_level(old, crossbar.bits_per_cell, rng)
    return [FaultEvent(crossbar_id, r, c, int(v)) for (r, c), v in zip(cells, new)]
