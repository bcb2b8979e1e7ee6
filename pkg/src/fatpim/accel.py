"""Trace-driven simulation of a chip / tile / IMA / crossbar hierarchy.

Each IMA is simulated on its own with a small discrete-event loop: crossbars
read one input bit-plane per read window, finished readouts wait in their
sample-and-hold until one of the IMA's ADCs is free, and every converted
readout is sum-checked. A flagged readout squashes the crossbar's in-flight
work and takes that crossbar out of service while it is re-programmed from
its staged golden copy; the other crossbars keep the ADCs busy, and the
squashed input vectors are replayed afterwards.

Time is kept in nanoseconds. Reported cycles use the reference clock of
:class:`AcceleratorConfig` (by default the 1.28 GS/s ADC sample period).
"""
from __future__ import annotations

import enum
import heapq
import logging
import math
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from typing import Iterable, Sequence

import numpy as np

from . import dataprep
from .dataprep import EccStatus, StagingBuffer, SumMode, ValueLayout
from .errors import ConfigurationError, DomainError
from .faults import FaultEvent, FaultScenario, inject, inject_arrays, sample_faults
from .pipeline import AdcSpec, default_threshold, quantize
from .xbar import CrossbarConfig, CrossbarState, program_crossbar, write_cells

log = logging.getLogger(__name__)

NS_PER_HOUR = 3.6e12


@dataclass(frozen=True)
class AcceleratorConfig:
    chips: int = 8
    tiles_per_chip: int = 16
    imas_per_tile: int = 12
    crossbars_per_ima: int = 12
    crossbar: CrossbarConfig = field(default_factory=CrossbarConfig)
    layout: ValueLayout = field(default_factory=ValueLayout)
    adc: AdcSpec = field(default_factory=AdcSpec)
    read_latency_ns: float = 100.0
    write_latency_ns: float = 200.0
    fatpim_enabled: bool = True
    correction_enabled: bool = True
    reprogram_retry_limit: int = 3
    clock_hz: float = 1.28e9
    threshold: int | None = None
    check_inputs: bool = True
    # IMAs receive their first inputs at seeded offsets in [0, this) cycles
    start_stagger_cycles: int = 8192

    def __post_init__(self):
        for name in ("chips", "tiles_per_chip", "imas_per_tile", "crossbars_per_ima"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be >= 1")
        if self.layout.data_cols != self.crossbar.data_cols:
            raise ConfigurationError("layout and crossbar disagree on data_cols")
        if self.layout.bits_per_cell != self.crossbar.bits_per_cell:
            raise ConfigurationError("layout and crossbar disagree on bits_per_cell")
        if self.read_latency_ns <= 0 or self.write_latency_ns < 0 or self.clock_hz <= 0:
            raise ConfigurationError("latencies and clock must be positive")
        if self.reprogram_retry_limit < 1:
            raise ConfigurationError("reprogram_retry_limit must be >= 1")
        if self.start_stagger_cycles < 0:
            raise ConfigurationError("start_stagger_cycles must be >= 0")
        if self.threshold is not None and self.threshold < 0:
            raise ConfigurationError("threshold must be >= 0")
        self.adc.validate_for(self.crossbar)

    @property
    def imas(self) -> int:
        return self.chips * self.tiles_per_chip * self.imas_per_tile

    @property
    def cycle_ns(self) -> float:
        return 1e9 / self.clock_hz

    @property
    def delta(self) -> int:
        if self.threshold is not None:
            return self.threshold
        return default_threshold(self.crossbar.rows, self.crossbar.write_noise_sigma)

    @property
    def converted_bitlines(self) -> int:
        return self.crossbar.data_cols + (self.crossbar.sum_cols if self.fatpim_enabled else 0)

    @property
    def conversion_ns(self) -> float:
        return self.converted_bitlines / self.adc.samples_per_second * 1e9

    @property
    def checker_ns(self) -> float:
        return self.adc.sample_ns if self.fatpim_enabled else 0.0

    @property
    def reprogram_ns(self) -> float:
        # one write per wordline
        return self.crossbar.rows * self.write_latency_ns

    @property
    def reprogram_cycles(self) -> float:
        return self.reprogram_ns / self.cycle_ns

    def scaled(self, **changes) -> "AcceleratorConfig":
        return replace(self, **changes)


@dataclass(frozen=True)
class InputTrace:
    """Input supply pattern ``App_X_Y``: ``Y`` idle cycles after every ``X``.

    ``total_cycles`` is the measurement horizon; ``vectors_per_crossbar``
    bounds the input supply (``None`` means inputs never run out). At least
    one of the two must be set.
    """

    burst_length: int = 0
    gap_length: int = 0
    total_cycles: int | None = 200_000
    input_value_bits: int = 16
    vectors_per_crossbar: int | None = None

    def __post_init__(self):
        if self.gap_length < 0 or self.burst_length < 0:
            raise DomainError("burst and gap lengths must be >= 0")
        if self.gap_length > 0 and self.burst_length < 1:
            raise DomainError("a trace with gaps needs burst_length >= 1")
        if self.input_value_bits < 1 or self.input_value_bits > 32:
            raise DomainError("input_value_bits must be in 1..32")
        if self.total_cycles is None and self.vectors_per_crossbar is None:
            raise DomainError("need a horizon or a finite input supply")
        if self.total_cycles is not None and self.total_cycles < 1:
            raise DomainError("total_cycles must be >= 1")

    @property
    def name(self) -> str:
        return f"App_{self.burst_length}_{self.gap_length}"

    @property
    def period(self) -> int:
        return self.burst_length + self.gap_length

    def is_active(self, cycle: int) -> bool:
        return self.gap_length == 0 or cycle % self.period < self.burst_length

    def next_active(self, cycle: int) -> int:
        if self.is_active(cycle):
            return cycle
        return (cycle // self.period + 1) * self.period


DEFAULT_TRACE_SUITE = ((0, 0), (100, 10), (100, 40), (1000, 100), (1000, 400))


@dataclass
class RunReport:
    completed_results: int = 0
    flagged_results: int = 0
    truly_faulty_results: int = 0
    missed_detections: int = 0
    false_positives: int = 0
    correction_events: int = 0
    stall_cycles: float = 0.0
    total_cycles: float = 0.0
    flagged_cycles: int = 0
    host_interrupts: int = 0
    permanently_faulty_crossbars: int = 0
    readouts: int = 0
    values_per_result: int = 0

    @property
    def throughput(self) -> float:
        return self.completed_results / self.total_cycles if self.total_cycles else 0.0

    @property
    def finished_results(self) -> int:
        return self.completed_results + self.flagged_results

    @property
    def flagged_fraction(self) -> float:
        done = self.finished_results
        return self.flagged_results / done if done else 0.0

    def merge(self, other: "RunReport") -> None:
        for f in fields(self):
            if f.name in ("total_cycles", "values_per_result"):
                setattr(self, f.name, max(getattr(self, f.name), getattr(other, f.name)))
            else:
                setattr(self, f.name, getattr(self, f.name) + getattr(other, f.name))


# --- functional path ----------------------------------------------------------

def reconstruct_result(codes: np.ndarray, layout: ValueLayout) -> np.ndarray:
    """Shift-and-add over cells, then over input bits (MSB first).

    ``codes`` holds one row of digitised bitline outputs per input-bit cycle.
    """
    per_bit = dataprep.recompose_matrix(codes[:, : layout.data_cols], layout)
    weights = np.int64(1) << np.arange(codes.shape[0] - 1, -1, -1, dtype=np.int64)
    return weights @ per_bit


@dataclass(frozen=True)
class GemvResult:
    values: np.ndarray
    flagged_cycles: np.ndarray


def pipeline_gemv(state: CrossbarState, layout: ValueLayout, inputs: np.ndarray, input_bits: int,
                  adc: AdcSpec | None = None, delta: int = 0) -> GemvResult:
    """One input vector through crossbar, ADC, sum check and shift-and-add.

    Returns the reconstructed dot products and which input-bit cycles the
    checker flagged. The stored sum is compared modulo its width when the
    crossbar has fewer sum columns than the layout needs.
    """
    adc = adc or AdcSpec()
    xb = state.config
    inputs = np.asarray(inputs, dtype=np.int64)
    if inputs.shape != (xb.rows,):
        raise DomainError(f"expected {xb.rows} input values")
    if inputs.size and (inputs.min() < 0 or inputs.max() >= 1 << input_bits):
        raise DomainError(f"inputs must fit in {input_bits} bits")
    shifts = np.arange(input_bits - 1, -1, -1, dtype=np.int64)
    planes = ((inputs[None, :] >> shifts[:, None]) & 1).astype(np.float64)
    codes = quantize(planes @ state.programmed, adc.resolution_bits)
    flagged = _check_codes(codes, layout, xb, delta)
    return GemvResult(reconstruct_result(codes, layout), flagged)


def _check_codes(codes: np.ndarray, layout: ValueLayout, xb: CrossbarConfig, delta: int) -> np.ndarray:
    w, m = xb.data_cols, xb.bits_per_cell
    if layout.sum_mode is SumMode.CELL:
        data_sum = codes[:, :w].sum(axis=1)
    else:
        data_sum = dataprep.recompose_matrix(codes[:, :w], layout).sum(axis=1)
    sum_weights = np.int64(1) << (m * np.arange(xb.sum_cols - 1, -1, -1, dtype=np.int64))
    diff = np.abs(data_sum - codes[:, w:] @ sum_weights)
    if xb.sum_cols < layout.sum_cols:
        modulus = 1 << (m * xb.sum_cols)
        diff %= modulus
        diff = np.minimum(diff, modulus - diff)
    return diff > delta


# --- per-IMA simulation -------------------------------------------------------

_READ_DONE, _ADC_DONE, _VERDICT, _WAKE = range(4)


class _Attempt:
    __slots__ = ("values", "planes", "expected", "codes", "codes_version", "next_bit",
                 "checked", "flagged", "readout_faulty", "epoch", "flags", "wrong")

    def __init__(self, values, planes, expected, epoch):
        self.values = values
        self.planes = planes
        self.expected = expected
        self.codes = None
        self.codes_version = -1
        self.next_bit = 0
        self.checked = 0
        self.flagged = False
        self.readout_faulty = False
        self.epoch = epoch
        self.flags = None
        self.wrong = None


class CrossbarUnit:
    """Runtime bookkeeping for one crossbar inside an IMA."""

    def __init__(self, index, state, weights, golden, input_rng, vectors):
        self.index = index
        self.state = state
        self.weights = weights
        self.golden = golden
        self.input_rng = input_rng
        self.vectors_left = vectors
        self.retries = 0
        self.permanently_faulty = False
        self.idle = False
        self.epoch = 0
        self.reading = False
        self.held = False          # sample-and-hold occupied, not yet converting
        self.waiting = False       # a wake-up event is pending
        self.stall_until = 0.0     # re-programming in progress until then
        self.pending: deque[_Attempt] = deque()
        self.current: _Attempt | None = None
        self.replay: deque[np.ndarray] = deque()
        self.persistent: list[FaultEvent] = []
        self.golden_data: np.ndarray | None = None
        self.next_fault_ns = math.inf

    @property
    def schedulable(self) -> bool:
        return not (self.permanently_faulty or self.idle)


class ImaSimulator:
    """One IMA: its crossbars, ADC pool, checker, and correction logic."""

    def __init__(self, config: AcceleratorConfig, trace: InputTrace, scenario: FaultScenario,
                 weights_seed: int, inputs_seed: int, ima_index: int = 0,
                 persistent_faults: dict[int, Sequence[FaultEvent]] | None = None):
        self.config = config
        self.trace = trace
        self.scenario = scenario
        self.ima_index = ima_index
        self.layout = config.layout
        self.report = RunReport(values_per_result=config.layout.values_per_wordline)
        xb = config.crossbar
        m = xb.bits_per_cell
        self.delta = config.delta
        self.w = xb.data_cols

        self.noise_rng = np.random.default_rng(np.random.SeedSequence([weights_seed, 3, ima_index]))
        weight_rng = np.random.default_rng(np.random.SeedSequence([weights_seed, 0, ima_index]))
        fault_rng = np.random.default_rng(np.random.SeedSequence([scenario.rng_seed, 2, ima_index]))
        self.fault_rng = fault_rng
        self.fault_rate_per_ns = scenario.fit_per_cell_per_hour * xb.rows * xb.cols / NS_PER_HOUR

        persistent_faults = persistent_faults or {}
        self.crossbars: list[CrossbarUnit] = []
        v = self.layout.values_per_wordline
        for x in range(config.crossbars_per_ima):
            weights = weight_rng.integers(0, 1 << self.layout.value_bits, size=(xb.rows, v), dtype=np.int64)
            levels = self.levels_for(weights)
            state = program_crossbar(xb, levels, self.noise_rng)
            unit = CrossbarUnit(
                x, state, weights, StagingBuffer(weights, self.layout.value_bits),
                np.random.default_rng(np.random.SeedSequence([inputs_seed, 1, ima_index, x])),
                trace.vectors_per_crossbar,
            )
            unit.persistent = list(persistent_faults.get(x, ()))
            # shadow oracle: what every readout should digitise to
            unit.golden_data = levels[:, : xb.data_cols].copy()
            self.crossbars.append(unit)

        # faults accumulated between programming and the start of operation
        accumulated = sample_faults(
            scenario.mean_faults_per_cell, [u.state.ideal_levels for u in self.crossbars], m, fault_rng
        )
        for unit in self.crossbars:
            inject_arrays(unit.state, accumulated.for_crossbar(unit.index), self.noise_rng)
            if unit.persistent:
                inject(unit.state, unit.persistent, self.noise_rng)
            if scenario.inject_during_run and self.fault_rate_per_ns > 0:
                unit.next_fault_ns = fault_rng.exponential(1.0 / self.fault_rate_per_ns)

        self.adc_free = config.adc.count_per_ima
        self.queue: deque = deque()
        self.events: list = []
        self.seq = 0
        self.now = 0.0
        stagger = config.start_stagger_cycles
        start_rng = np.random.default_rng(np.random.SeedSequence([inputs_seed, 4, ima_index]))
        self.start_ns = int(start_rng.integers(stagger)) * config.cycle_ns if stagger else 0.0
        self.horizon_ns = math.inf if trace.total_cycles is None else trace.total_cycles * config.cycle_ns
        self.last_event_ns = 0.0

    # -- data preparation --------------------------------------------------

    def levels_for(self, weights: np.ndarray) -> np.ndarray:
        xb = self.config.crossbar
        cells = dataprep.decompose_matrix(weights, self.layout)
        data = np.zeros((xb.rows, xb.data_cols), dtype=np.int64)
        data[:, : cells.shape[1]] = cells
        sums = dataprep.sum_region(data, self.layout, xb.sum_cols)
        return np.hstack([data, sums])

    def _fetch_vector(self, unit: CrossbarUnit) -> np.ndarray | None:
        if unit.replay:
            return unit.replay.popleft()
        if unit.vectors_left is not None:
            if unit.vectors_left == 0:
                return None
            unit.vectors_left -= 1
        k = self.trace.input_value_bits
        values = unit.input_rng.integers(0, 1 << k, size=self.config.crossbar.rows, dtype=np.int64)
        if self.config.check_inputs and 64 % k == 0:
            # inputs travel through the ECC-protected staging buffer
            staged = StagingBuffer(values, k)
            checked, status = staged.read()
            if status is EccStatus.UNCORRECTABLE:
                self.report.host_interrupts += 1
            values = checked
        return values

    def _new_attempt(self, unit: CrossbarUnit, values: np.ndarray) -> _Attempt:
        k = self.trace.input_value_bits
        shifts = np.arange(k - 1, -1, -1, dtype=np.int64)
        planes = ((values[None, :] >> shifts[:, None]) & 1).astype(np.float64)
        # exact: every partial sum is a small integer
        expected = (planes @ unit.golden_data).astype(np.int64)
        return _Attempt(values, planes, expected, unit.epoch)

    def _codes(self, unit: CrossbarUnit, attempt: _Attempt, bit: int) -> None:
        """Digitise the bit-planes from ``bit`` onwards against the current cell state."""
        currents = attempt.planes[bit:] @ unit.state.programmed
        codes = quantize(currents, self.config.adc.resolution_bits)
        if attempt.codes is None:
            attempt.codes = np.zeros((attempt.planes.shape[0], codes.shape[1]), dtype=np.int64)
        attempt.codes[bit:] = codes
        attempt.codes_version = unit.state.version
        if attempt.flags is None:
            attempt.flags = np.zeros(attempt.planes.shape[0], dtype=bool)
            attempt.wrong = np.zeros(attempt.planes.shape[0], dtype=bool)
        if self.config.fatpim_enabled:
            attempt.flags[bit:] = self._check_many(codes)
        attempt.wrong[bit:] = np.any(codes[:, : self.w] != attempt.expected[bit:], axis=1)

    # -- event plumbing ------------------------------------------------------

    def _push(self, t, kind, a=None, b=None):
        self.seq += 1
        heapq.heappush(self.events, (t, self.seq, kind, a, b))

    def _cycle_of(self, t) -> int:
        return int(math.floor(t / self.config.cycle_ns + 1e-9))

    def _try_read(self, unit: CrossbarUnit, t: float) -> None:
        if not unit.schedulable or unit.reading or unit.held or unit.waiting:
            return
        if t < unit.stall_until:
            unit.waiting = True
            self._push(unit.stall_until, _WAKE, unit)
            return
        cycle = self._cycle_of(t)
        if not self.trace.is_active(cycle):
            unit.waiting = True
            self._push(self.trace.next_active(cycle) * self.config.cycle_ns, _WAKE, unit)
            return
        attempt = unit.current
        if attempt is None or attempt.next_bit >= self.trace.input_value_bits:
            values = self._fetch_vector(unit)
            if values is None:
                return
            attempt = self._new_attempt(unit, values)
            unit.current = attempt
            unit.pending.append(attempt)
        self._inject_runtime_faults(unit, t)
        bit = attempt.next_bit
        attempt.next_bit += 1
        unit.reading = True
        self._push(t + self.config.read_latency_ns, _READ_DONE, unit, (attempt, bit))

    def _inject_runtime_faults(self, unit: CrossbarUnit, t: float) -> None:
        xb = self.config.crossbar
        while unit.next_fault_ns <= t:
            r = int(self.fault_rng.integers(xb.rows))
            c = int(self.fault_rng.integers(xb.cols))
            old = int(unit.state.ideal_levels[r, c])
            new = (old + int(self.fault_rng.integers(1, 1 << xb.bits_per_cell))) % (1 << xb.bits_per_cell)
            inject(unit.state, [FaultEvent(unit.index, r, c, new, unit.next_fault_ns)], self.noise_rng)
            unit.next_fault_ns += self.fault_rng.exponential(1.0 / self.fault_rate_per_ns)

    def _dispatch(self, t: float) -> None:
        while self.adc_free and self.queue:
            unit, attempt, bit = self.queue.popleft()
            unit.held = False
            if attempt.epoch != unit.epoch:
                self._try_read(unit, t)
                continue
            self.adc_free -= 1
            self._push(t + self.config.conversion_ns, _ADC_DONE, unit, (attempt, bit))
            # the crossbar starts its next read as soon as conversion begins
            self._try_read(unit, t)

    def _on_read_done(self, t, unit, attempt, bit):
        unit.reading = False
        if attempt.epoch != unit.epoch:
            self._try_read(unit, t)
            return
        if attempt.codes is None or attempt.codes_version != unit.state.version:
            self._codes(unit, attempt, bit)
        unit.held = True
        self.queue.append((unit, attempt, bit))
        self._dispatch(t)

    def _on_adc_done(self, t, unit, attempt, bit):
        self.adc_free += 1
        if attempt.epoch == unit.epoch:
            if self.config.checker_ns:
                self._push(t + self.config.checker_ns, _VERDICT, unit, (attempt, bit))
            else:
                self._on_verdict(t, unit, attempt, bit)
        self._dispatch(t)

    def _check_many(self, codes: np.ndarray) -> np.ndarray:
        """Checker verdicts for a stack of readouts, one per row of ``codes``."""
        return _check_codes(codes, self.layout, self.config.crossbar, self.delta)

    def _on_verdict(self, t, unit, attempt, bit):
        if attempt.epoch != unit.epoch or t >= self.horizon_ns:
            return
        self.last_event_ns = max(self.last_event_ns, t)
        rep = self.report
        rep.readouts += 1
        if attempt.wrong[bit]:
            attempt.readout_faulty = True
        attempt.checked = bit + 1
        if attempt.flags[bit]:
            rep.flagged_cycles += 1
            if not attempt.flagged:
                attempt.flagged = True
                if self.config.correction_enabled:
                    self._finish(unit, attempt, complete=False)
                    self._squash(unit, t)
                    return
        if bit == self.trace.input_value_bits - 1:
            self._finish(unit, attempt, complete=True)

    def _finish(self, unit, attempt, complete: bool):
        rep = self.report
        if unit.pending and unit.pending[0] is attempt:
            unit.pending.popleft()
        if complete:
            # a wrong digit can still cancel out, so compare whole results
            faulty = bool(attempt.wrong.any()) and not np.array_equal(
                self.reconstruct(attempt.codes), attempt.values @ unit.weights
            )
        else:
            faulty = attempt.readout_faulty
        rep.truly_faulty_results += int(faulty)
        if attempt.flagged:
            rep.flagged_results += 1
            rep.false_positives += int(not faulty)
        else:
            rep.completed_results += 1
            rep.missed_detections += int(faulty)
            unit.retries = 0

    def reconstruct(self, codes: np.ndarray) -> np.ndarray:
        return reconstruct_result(codes, self.layout)

    def _squash(self, unit: CrossbarUnit, t: float) -> None:
        unit.epoch += 1
        replay = [a.values for a in unit.pending]
        unit.pending.clear()
        unit.current = None
        unit.replay.extendleft(reversed(replay))
        stall = correct_crossbar(self, unit.index, self.config, t)
        if stall:
            unit.stall_until = t + stall * self.config.cycle_ns
            self._try_read(unit, t)

    # -- main loop -----------------------------------------------------------

    def run(self) -> RunReport:
        for unit in self.crossbars:
            if self.start_ns:
                unit.waiting = True
                self._push(self.start_ns, _WAKE, unit)
            else:
                self._try_read(unit, 0.0)
        while self.events:
            t, _, kind, a, b = heapq.heappop(self.events)
            # results are counted over the half-open window [0, horizon)
            if t >= self.horizon_ns:
                break
            self.now = t
            if kind == _READ_DONE:
                self._on_read_done(t, a, *b)
            elif kind == _ADC_DONE:
                self._on_adc_done(t, a, *b)
            elif kind == _VERDICT:
                self._on_verdict(t, a, *b)
            elif kind == _WAKE:
                a.waiting = False
                self._try_read(a, t)
        rep = self.report
        end_ns = self.horizon_ns if math.isfinite(self.horizon_ns) else self.last_event_ns
        rep.total_cycles = end_ns / self.config.cycle_ns
        rep.permanently_faulty_crossbars = sum(u.permanently_faulty for u in self.crossbars)
        return rep


def correct_crossbar(ima: ImaSimulator, crossbar_id: int, config: AcceleratorConfig, t: float = 0.0) -> float:
    """Handle a flagged crossbar; returns its stall in reference cycles.

    The crossbar is rewritten from its ECC-checked golden copy. Once the
    consecutive-flag count reaches ``reprogram_retry_limit`` the crossbar is
    declared permanently faulty and dropped from scheduling instead.
    """
    unit = ima.crossbars[crossbar_id]
    rep = ima.report
    unit.retries += 1
    if unit.retries >= config.reprogram_retry_limit:
        unit.permanently_faulty = True
        unit.state.permanently_faulty = True
        log.debug("IMA %d crossbar %d marked permanently faulty", ima.ima_index, crossbar_id)
        return 0.0
    weights, status = unit.golden.read()
    if status is EccStatus.UNCORRECTABLE:
        rep.host_interrupts += 1
        unit.idle = True
        return 0.0
    levels = ima.levels_for(weights)
    unit.state.ideal_levels[:] = levels
    unit.state.programmed[:] = write_cells(levels, config.crossbar.write_noise_sigma, ima.noise_rng)
    unit.state.version += 1
    if unit.persistent:
        inject(unit.state, unit.persistent, ima.noise_rng)
    stall = config.reprogram_cycles
    rep.correction_events += 1
    rep.stall_cycles += stall
    return stall


def _simulate_ima(args) -> RunReport:
    config, trace, scenario, weights_seed, inputs_seed, ima_index, persistent = args
    sim = ImaSimulator(config, trace, scenario, weights_seed, inputs_seed, ima_index, persistent)
    return sim.run()


def run_trace(
    config: AcceleratorConfig,
    trace: InputTrace,
    scenario: FaultScenario | None = None,
    weights_seed: int = 0,
    inputs_seed: int = 1,
    workers: int = 1,
    persistent_faults: dict[int, Sequence[FaultEvent]] | None = None,
) -> RunReport:
    """Simulate every IMA of the accelerator and aggregate the counts.

    ``persistent_faults`` maps a global crossbar index
    (``ima * crossbars_per_ima + local``) to faults that come back after every
    re-program. The aggregate does not depend on ``workers``.
    """
    scenario = scenario or FaultScenario()
    per_ima: dict[int, dict[int, list[FaultEvent]]] = {}
    for gid, evs in (persistent_faults or {}).items():
        ima, local = divmod(gid, config.crossbars_per_ima)
        if ima >= config.imas:
            raise DomainError(f"crossbar {gid} does not exist")
        per_ima.setdefault(ima, {})[local] = list(evs)
    jobs = [
        (config, trace, scenario, weights_seed, inputs_seed, i, per_ima.get(i))
        for i in range(config.imas)
    ]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(_simulate_ima, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        reports = [_simulate_ima(j) for j in jobs]
    total = RunReport(values_per_result=config.layout.values_per_wordline)
    for r in reports:
        total.merge(r)
    return total


class SweepAxis(str, enum.Enum):
    ADC_RATE = "adc_rate"
    SUM_COLS = "sum_cols"
    TRACE = "trace"
    FIT = "fit"


def apply_axis(config: AcceleratorConfig, trace: InputTrace, scenario: FaultScenario,
               axis: SweepAxis | str, value):
    """Return ``(config, trace, scenario)`` with one parameter replaced."""
    axis = SweepAxis(axis)
    if axis is SweepAxis.ADC_RATE:
        return replace(config, adc=replace(config.adc, samples_per_second=float(value))), trace, scenario
    if axis is SweepAxis.SUM_COLS:
        return replace(config, crossbar=replace(config.crossbar, sum_cols=int(value))), trace, scenario
    if axis is SweepAxis.TRACE:
        x, y = value
        return config, replace(trace, burst_length=int(x), gap_length=int(y)), scenario
    return config, trace, replace(scenario, fit_per_cell_per_hour=float(value))


@dataclass
class SweepRow:
    value: object
    report: RunReport | None
    error: str | None = None


def sweep(
    config: AcceleratorConfig,
    axis: SweepAxis | str,
    values: Iterable,
    trace: InputTrace | None = None,
    scenario: FaultScenario | None = None,
    weights_seed: int = 0,
    inputs_seed: int = 1,
    workers: int = 1,
) -> list[SweepRow]:
    """One run per value with everything else (including seeds) held fixed.

    A value whose run fails produces a row carrying the error message; the
    sweep carries on with the remaining values.
    """
    trace = trace or InputTrace()
    scenario = scenario or FaultScenario()
    rows = []
    for value in values:
        try:
            cfg, tr, sc = apply_axis(config, trace, scenario, axis, value)
            rows.append(SweepRow(value, run_trace(cfg, tr, sc, weights_seed, inputs_seed, workers)))
        except (ConfigurationError, DomainError) as exc:
            log.warning("sweep value %r failed: %s", value, exc)
            rows.append(SweepRow(value, None, str(exc)))
    return rows
