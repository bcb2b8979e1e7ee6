"""
Throughput cost of checking every conversion
============================================

The sum columns have to pass through the shared ADCs along with the data
bitlines, so each readout takes 133 ADC samples instead of 128. This script
runs the synthetic input traces on a small accelerator, with and without the
check, and then shows that a slightly faster ADC recovers the loss.
"""

import dataclasses

from fatpim.accel import DEFAULT_TRACE_SUITE, AcceleratorConfig, InputTrace, run_trace
from fatpim.pipeline import AdcSpec

config = AcceleratorConfig(chips=1, tiles_per_chip=1)     # 12 IMAs
baseline = dataclasses.replace(config, fatpim_enabled=False)
horizon = 200_000

print("%-14s %12s %12s %8s" % ("trace", "baseline", "checked", "loss"))
for x, y in DEFAULT_TRACE_SUITE:
    trace = InputTrace(x, y, total_cycles=horizon)
    base = run_trace(baseline, trace).throughput
    fat = run_trace(config, trace).throughput
    print("%-14s %12.5f %12.5f %7.2f%%" % (trace.name, base, fat, 100 * (1 - fat / base)))

###############################################################################
# At 1.33 GS/s the 133 samples take as long as 128 samples at 1.28 GS/s.

trace = InputTrace(0, 0, total_cycles=horizon)
fast = dataclasses.replace(config, adc=AdcSpec(samples_per_second=1.33e9))
print("baseline at 1.28 GS/s:", run_trace(baseline, trace).completed_results, "results")
print("checked at 1.33 GS/s: ", run_trace(fast, trace).completed_results, "results")
