"""
Sizing the comparator threshold
===============================

Write noise perturbs every programmed conductance, so the two totals never
agree exactly on real hardware. The comparator therefore tolerates a
difference up to a threshold. This script shows how large a crossbar a given
threshold supports, checks the false-positive rate by simulation, and counts
the rare multi-cell faults that cancel out in the sums.
"""

from fatpim.dataprep import ValueLayout
from fatpim.reliability import (
    FaultCase,
    brute_force_missed_detection,
    detection_monte_carlo,
    false_positive_bound,
    lemma_max_n,
    missed_detection_probability,
)
from fatpim.xbar import CrossbarConfig

print("largest crossbar for delta=0.5e-3, sigma=1e-9:", lemma_max_n(0.5e-3, 1e-9))

###############################################################################
# With the threshold at 12 n sigma, false positives are a few in a billion.

n, sigma = 100, 1e-3
delta = 12 * n * sigma
result = detection_monte_carlo(n, sigma, delta, 200_000, injected_error_magnitude=2 * delta)
print("false positives: %d of %d (bound %.2e)" % (result.false_positives, result.trials,
                                                   false_positive_bound(n, sigma, delta)))
print("detection rate for an error of 2 delta:", result.detection_rate)

###############################################################################
# Two faulty cells can change the data total and the stored sum by the same
# amount. On a 4x4 crossbar every such pair can be enumerated.

config = CrossbarConfig(rows=4, data_cols=4, sum_cols=2)
layout = ValueLayout(value_bits=4, bits_per_cell=2, data_cols=4)
exact = brute_force_missed_detection(config, layout, N=2, i=2)
_, formula = missed_detection_probability(1.0, 2, 4, 2, 2, 2, FaultCase.SAME_BITLINE)
print("enumerated %d cases, %d missed: %.4f (formula %.4f)"
      % (exact.total, exact.missed, exact.exact_conditional_probability, formula))
for case, (missed, total) in sorted(exact.by_case.items()):
    print("  %-14s %.4f" % (case, missed / total))
