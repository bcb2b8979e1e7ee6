import dataclasses

import numpy as np
import pytest

from fatpim import dataprep
from fatpim.accel import (
    AcceleratorConfig,
    ImaSimulator,
    InputTrace,
    RunReport,
    SweepAxis,
    pipeline_gemv,
    run_trace,
    sweep,
)
from fatpim.dataprep import ValueLayout
from fatpim.errors import ConfigurationError, DomainError
from fatpim.faults import FaultEvent, FaultScenario
from fatpim.pipeline import AdcSpec
from fatpim.xbar import CrossbarConfig, program_crossbar

ONE_IMA = AcceleratorConfig(chips=1, tiles_per_chip=1, imas_per_tile=1)
NO_STAGGER = dataclasses.replace(ONE_IMA, start_stagger_cycles=0)


def counts(rep: RunReport) -> dict:
    return dataclasses.asdict(rep)


# --- configuration --------------------------------------------------------------

def test_default_config_arithmetic():
    cfg = AcceleratorConfig()
    assert cfg.imas == 8 * 16 * 12
    assert cfg.cycle_ns == pytest.approx(0.78125)
    # one write per wordline: 128 * 200 ns, in 1.28 GHz cycles
    assert cfg.reprogram_ns == 25_600.0
    assert cfg.reprogram_cycles == 32_768.0
    assert cfg.converted_bitlines == 133
    assert cfg.conversion_ns == pytest.approx(133 / 1.28)
    assert dataclasses.replace(cfg, fatpim_enabled=False).conversion_ns == pytest.approx(100.0)
    assert cfg.delta == 0


@pytest.mark.parametrize("changes", [
    dict(chips=0), dict(reprogram_retry_limit=0), dict(start_stagger_cycles=-1),
    dict(threshold=-1), dict(read_latency_ns=0),
    dict(layout=ValueLayout(data_cols=64)),
    dict(adc=AdcSpec(resolution_bits=8)),
])
def test_config_errors(changes):
    with pytest.raises(ConfigurationError):
        dataclasses.replace(AcceleratorConfig(), **changes)


def test_trace_pattern():
    tr = InputTrace(100, 40)
    assert tr.name == "App_100_40" and tr.period == 140
    assert tr.is_active(0) and tr.is_active(99) and not tr.is_active(100) and not tr.is_active(139)
    assert tr.next_active(100) == 140 and tr.next_active(50) == 50
    always = InputTrace(0, 0)
    assert all(always.is_active(c) for c in (0, 1, 10**6))
    with pytest.raises(DomainError):
        InputTrace(0, 10)
    with pytest.raises(DomainError):
        InputTrace(total_cycles=None)
    with pytest.raises(DomainError):
        InputTrace(input_value_bits=0)


# --- functional pipeline ------------------------------------------------------

def programmed_values(rng, layout: ValueLayout, rows: int, sigma=0.0, seed=0):
    v = layout.values_per_wordline
    weights = rng.integers(0, 1 << layout.value_bits, size=(rows, v))
    data = dataprep.decompose_matrix(weights, layout)
    levels = np.hstack([data, dataprep.sum_region(data, layout)])
    cfg = CrossbarConfig(rows=rows, data_cols=layout.data_cols, sum_cols=layout.sum_cols,
                         write_noise_sigma=sigma)
    return weights, levels, program_crossbar(cfg, levels, rng_seed=seed)


def test_pipeline_gemv_matches_integer_oracle():
    rng = np.random.default_rng(2023)
    for case in range(64):
        mode = ("cell", "value")[case % 2]
        layout = ValueLayout(sum_mode=mode)
        weights, _, state = programmed_values(rng, layout, 128)
        x = rng.integers(0, 1 << 16, size=128)
        res = pipeline_gemv(state, layout, x, 16)
        oracle = [sum(int(a) * int(b) for a, b in zip(x, weights[:, j])) for j in range(weights.shape[1])]
        assert res.values.tolist() == oracle
        assert not res.flagged_cycles.any()


def test_pipeline_gemv_flags_a_faulty_cell():
    rng = np.random.default_rng(4)
    layout = ValueLayout()
    weights, levels, state = programmed_values(rng, layout, 128)
    bad = levels.copy()
    bad[10, 20] = (bad[10, 20] + 1) % 4
    state = program_crossbar(state.config, bad)
    x = np.zeros(128, dtype=np.int64)
    x[10] = 0b1000_0000_0000_0001
    res = pipeline_gemv(state, layout, x, 16)
    assert res.flagged_cycles.tolist() == [True] + [False] * 14 + [True]
    assert not np.array_equal(res.values, x @ weights)
    with pytest.raises(DomainError):
        pipeline_gemv(state, layout, np.full(128, 1 << 16), 16)


# --- simulator --------------------------------------------------------------

def test_clean_run_has_no_flags_and_matches_oracle():
    rep = run_trace(ONE_IMA, InputTrace(total_cycles=20_000))
    assert rep.completed_results > 0
    assert rep.flagged_results == rep.truly_faulty_results == rep.missed_detections == 0
    assert rep.correction_events == 0 and rep.stall_cycles == 0
    assert rep.values_per_result == 16
    assert rep.total_cycles == 20_000


def test_finite_supply_is_conserved():
    trace = InputTrace(total_cycles=None, vectors_per_crossbar=5)
    on = run_trace(ONE_IMA, trace)
    off = run_trace(dataclasses.replace(ONE_IMA, fatpim_enabled=False), trace)
    assert on.completed_results == off.completed_results == 12 * 5
    assert on.readouts == 12 * 5 * 16
    # the FAT-PIM run needs longer to drain the same work
    assert on.total_cycles > off.total_cycles


def test_persistent_fault_exhausts_retries():
    sim = ImaSimulator(NO_STAGGER, InputTrace(total_cycles=150_000), FaultScenario(), 0, 1)
    old = int(sim.crossbars[3].golden_data[5, 7])
    fault = {3: [FaultEvent(3, 5, 7, (old + 1) % 4)]}
    rep = run_trace(NO_STAGGER, InputTrace(total_cycles=150_000), persistent_faults=fault)
    # two re-programs, then the third flag retires the crossbar
    assert rep.correction_events == 2
    assert rep.stall_cycles == 2 * 32_768
    assert rep.permanently_faulty_crossbars == 1
    assert rep.missed_detections == 0 and rep.false_positives == 0
    assert rep.flagged_results == 3


def test_detection_without_correction():
    fault = {0: [FaultEvent(0, 0, 0, 3)], 1: [FaultEvent(1, 0, 0, 0)]}
    cfg = dataclasses.replace(NO_STAGGER, correction_enabled=False)
    rep = run_trace(cfg, InputTrace(total_cycles=20_000), persistent_faults=fault)
    assert rep.correction_events == 0 and rep.stall_cycles == 0
    assert rep.flagged_results > 0
    assert rep.missed_detections == 0
    # every flag here comes from a real wrong digit
    assert rep.false_positives == 0


def test_fatpim_off_misses_everything():
    fault = {0: [FaultEvent(0, 0, 0, 3)], 1: [FaultEvent(1, 0, 0, 0)]}
    cfg = dataclasses.replace(NO_STAGGER, fatpim_enabled=False, correction_enabled=False)
    rep = run_trace(cfg, InputTrace(total_cycles=20_000), persistent_faults=fault)
    assert rep.flagged_results == 0
    assert rep.missed_detections == rep.truly_faulty_results > 0


def test_unknown_crossbar_is_rejected():
    with pytest.raises(DomainError):
        run_trace(ONE_IMA, InputTrace(total_cycles=100), persistent_faults={12: []})


def test_seeded_runs_are_deterministic_across_workers():
    cfg = dataclasses.replace(ONE_IMA, imas_per_tile=3)
    scen = FaultScenario(1e-4, 1.0, rng_seed=5)
    trace = InputTrace(100, 10, total_cycles=30_000)
    a = run_trace(cfg, trace, scen, weights_seed=3, inputs_seed=4)
    b = run_trace(cfg, trace, scen, weights_seed=3, inputs_seed=4, workers=2)
    assert counts(a) == counts(b)
    c = run_trace(cfg, trace, scen, weights_seed=3, inputs_seed=9)
    assert counts(a) != counts(c)


def test_throughput_drops_with_longer_gaps():
    cfg = dataclasses.replace(ONE_IMA, tiles_per_chip=2)
    thr = [run_trace(cfg, InputTrace(1000, y, total_cycles=60_000)).throughput for y in (0, 100, 400, 1000)]
    assert all(a >= b for a, b in zip(thr, thr[1:]))
    assert thr[-1] < thr[0]


def test_faster_adc_never_hurts():
    rows = sweep(ONE_IMA, SweepAxis.ADC_RATE, [1.0e9, 1.28e9, 1.33e9, 2.0e9],
                 trace=InputTrace(total_cycles=40_000))
    thr = [r.report.throughput for r in rows]
    assert all(a <= b for a, b in zip(thr, thr[1:]))
    assert thr[0] < thr[-1]


def test_sum_cols_sweep_and_bad_values():
    rows = sweep(ONE_IMA, "sum_cols", [0, 1, 3, 5, 7], trace=InputTrace(total_cycles=40_000))
    assert all(r.error is None for r in rows)
    assert all(r.report.flagged_results == 0 for r in rows)
    thr = [r.report.throughput for r in rows]
    assert all(a >= b for a, b in zip(thr, thr[1:]))
    bad = sweep(ONE_IMA, "adc_rate", [0.0, 1.28e9], trace=InputTrace(total_cycles=1_000))
    assert bad[0].report is None and bad[0].error
    assert bad[1].report is not None


def test_truncated_sum_columns_still_catch_single_faults():
    cfg = dataclasses.replace(NO_STAGGER, crossbar=CrossbarConfig(sum_cols=2), correction_enabled=False)
    fault = {0: [FaultEvent(0, 0, 0, 3)], 1: [FaultEvent(1, 0, 0, 0)]}
    rep = run_trace(cfg, InputTrace(total_cycles=20_000), persistent_faults=fault)
    assert rep.flagged_results > 0 and rep.missed_detections == 0


def test_merge_keeps_longest_horizon():
    a = RunReport(completed_results=3, total_cycles=10)
    a.merge(RunReport(completed_results=4, total_cycles=7, flagged_results=1))
    assert (a.completed_results, a.flagged_results, a.total_cycles) == (7, 1, 10)
    assert a.flagged_fraction == pytest.approx(1 / 8)
