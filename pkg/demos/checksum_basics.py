"""
Catching a corrupted cell with a wordline sum
=============================================

A crossbar stores weights as 2-bit cell levels. Next to the data bitlines
sit a few extra columns holding, for every wordline, the sum of that row's
levels. Reading the crossbar with any binary input vector then yields two
numbers that must agree: the total of the data bitlines and the decoded sum
columns.
"""

import numpy as np

from fatpim.dataprep import ValueLayout, decompose_matrix, storage_overhead, sum_region
from fatpim.pipeline import quantize, sum_check
from fatpim.xbar import CrossbarConfig, apply_inputs, program_crossbar

rng = np.random.default_rng(0)
layout = ValueLayout(value_bits=16, bits_per_cell=2, data_cols=128, sum_mode="cell")
print("sum columns per wordline:", layout.sum_cols)
print("storage overhead: %.4f%%" % (100 * storage_overhead(layout).fraction))

###############################################################################
# Program 16 values of 16 bits on each of the 128 wordlines.

weights = rng.integers(0, 1 << 16, size=(128, layout.values_per_wordline))
data = decompose_matrix(weights, layout)
levels = np.hstack([data, sum_region(data, layout)])
config = CrossbarConfig(rows=128, data_cols=128, sum_cols=layout.sum_cols)
state = program_crossbar(config, levels)

bits = rng.integers(0, 2, size=128)
codes = quantize(apply_inputs(state, bits).currents, 9)
clean = sum_check(codes[:128], codes[128:], 2)
print("clean read: data total %d, stored sum %d, flagged %s"
      % (clean.data_sum, clean.stored_sum, clean.flagged))

###############################################################################
# Now one cell drifts by a single level. Any input that drives its row
# exposes the difference.

bad = levels.copy()
bad[17, 40] = (bad[17, 40] + 1) % 4
faulty = program_crossbar(config, bad)
bits[17] = 1
codes = quantize(apply_inputs(faulty, bits).currents, 9)
check = sum_check(codes[:128], codes[128:], 2)
print("faulty read: data total %d, stored sum %d, flagged %s"
      % (check.data_sum, check.stored_sum, check.flagged))
