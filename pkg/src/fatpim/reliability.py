"""Reliability calculators for the sum check.

Write noise makes both the data-bitline total and the decoded wordline sum
Gaussian. The data total accumulates noise from every cell it touches, so
its spread grows with ``n`` while the sum column's grows with ``sqrt(n)``;
the comparator threshold has to cover both at the chosen confidence.

The missed-detection helpers cover the other failure mode: several faulty
cells whose changes cancel in the totals.
"""
from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass

import numpy as np

from .dataprep import SumMode, ValueLayout, recompose_matrix, sum_region
from .errors import DomainError, EnumerationTooLarge
from .pipeline import quantize, required_adc_bits, sum_check
from .xbar import CrossbarConfig, apply_inputs, program_crossbar


# --- crossbar-size bound ---------------------------------------------------

@dataclass(frozen=True)
class LemmaQuery:
    delta: float
    sigma: float
    confidence_sigmas: float = 6.0

    def __post_init__(self):
        if not self.delta > 0 or not self.sigma > 0:
            raise DomainError("delta and sigma must be positive")
        if not self.confidence_sigmas > 0:
            raise DomainError("confidence_sigmas must be positive")


def lemma_max_n(delta: float, sigma: float, confidence_sigmas: float = 6.0) -> int:
    """Largest crossbar dimension whose noise stays inside ``delta``.

    Uses the loose bound ``sum(A_i**2) <= n``, giving ``n <= delta / (2 c sigma)``.
    """
    q = LemmaQuery(delta, sigma, confidence_sigmas)
    # guard against 41666.99999 style float error before flooring
    ratio = q.delta / (2 * q.confidence_sigmas * q.sigma)
    return int(math.floor(ratio * (1 + 1e-12)))


def tight_threshold(inputs, sigma: float, confidence_sigmas: float = 6.0) -> float:
    """Threshold needed for one specific input vector (no ``sum(A**2) <= n`` step)."""
    a = np.asarray(inputs, dtype=np.float64)
    n = a.size
    s2 = float(np.sum(a * a))
    return confidence_sigmas * sigma * (math.sqrt(s2) + math.sqrt(n * s2))


def loose_threshold(n: int, sigma: float, confidence_sigmas: float = 6.0) -> float:
    return 2 * confidence_sigmas * n * sigma


def lemma_confidence(confidence_sigmas: float = 6.0) -> float:
    """Probability that a Gaussian stays within ``confidence_sigmas`` of its mean."""
    return 1.0 - math.erfc(confidence_sigmas / math.sqrt(2))


def false_positive_bound(n: int, sigma: float, delta: float, inputs=None) -> float:
    """Exact flag probability with no error present.

    ``D - DS`` has variance ``(n + 1) * sum(A**2) * sigma**2``; with ``inputs``
    omitted the all-ones vector (worst case) is used.
    """
    s2 = float(n) if inputs is None else float(np.sum(np.asarray(inputs, dtype=np.float64) ** 2))
    if s2 == 0:
        return 0.0
    std = sigma * math.sqrt((n + 1) * s2)
    return math.erfc(delta / (std * math.sqrt(2)))


# --- Monte Carlo ----------------------------------------------------------

@dataclass(frozen=True)
class MonteCarloResult:
    trials: int
    false_positives: int
    detections: int

    @property
    def false_positive_rate(self) -> float:
        return self.false_positives / self.trials

    @property
    def detection_rate(self) -> float:
        return self.detections / self.trials


def _chunks(total: int, size: int):
    done = 0
    while done < total:
        step = min(size, total - done)
        yield step
        done += step


def detection_monte_carlo(
    n: int,
    sigma: float,
    delta: float,
    trials: int,
    injected_error_magnitude: float = 0.0,
    rng_seed: int = 0,
    chunk: int = 20_000,
) -> MonteCarloResult:
    """Flag rates of the sum check under write noise.

    Each trial draws fresh binary inputs with one designated row forced
    active, noise for every data cell and every sum cell, and evaluates
    ``|D - DS|`` with and without ``injected_error_magnitude`` added to one data
    cell of that row. The noiseless parts of ``D`` and ``DS`` are equal, so
    only the noise and the injected error enter. Noise of the ``n`` data cells
    of a row is drawn as its row total, which has the same distribution as
    summing per-cell draws.
    """
    if n < 1 or trials < 1:
        raise DomainError("need n >= 1 and trials >= 1")
    if sigma < 0 or delta < 0:
        raise DomainError("sigma and delta must be >= 0")
    rng = np.random.default_rng(rng_seed)
    fp = det = 0
    for size in _chunks(trials, chunk):
        a = rng.integers(0, 2, size=(size, n)).astype(np.float64)
        row = rng.integers(n, size=size)
        a[np.arange(size), row] = 1.0
        data_noise = rng.normal(0.0, sigma * math.sqrt(n), size=(size, n))
        sum_noise = rng.normal(0.0, sigma, size=(size, n))
        diff = np.einsum("ij,ij->i", a, data_noise - sum_noise)
        fp += int(np.count_nonzero(np.abs(diff) > delta))
        det += int(np.count_nonzero(np.abs(diff + injected_error_magnitude) > delta))
    return MonteCarloResult(trials, fp, det)


@dataclass(frozen=True)
class VarianceCheck:
    trials: int
    measured: float
    predicted: float

    @property
    def relative_error(self) -> float:
        return abs(self.measured - self.predicted) / self.predicted


def _fixed_inputs(n: int, rng: np.random.Generator) -> np.ndarray:
    a = rng.integers(0, 2, size=n).astype(np.float64)
    a[0] = 1.0
    return a


def sum_column_variance(n: int, sigma: float, trials: int, rng_seed: int = 0,
                        chunk: int = 10_000) -> VarianceCheck:
    """Sample variance of ``DS = sum_i A_i GS_i`` over independent noise draws.

    Inputs are fixed for the experiment; predicted value ``sum(A**2) sigma**2``.
    """
    rng = np.random.default_rng(rng_seed)
    a = _fixed_inputs(n, rng)
    samples = np.concatenate([
        rng.normal(0.0, sigma, size=(size, n)) @ a for size in _chunks(trials, chunk)
    ])
    return VarianceCheck(trials, float(np.var(samples, ddof=1)), float(a @ a) * sigma**2)


def data_total_variance(n: int, sigma: float, trials: int, rng_seed: int = 0,
                        chunk: int = 200) -> VarianceCheck:
    """Sample variance of ``D = sum_j sum_i A_i G_ij`` with a draw for every cell.

    Predicted value ``n * sum(A**2) sigma**2``.
    """
    rng = np.random.default_rng(rng_seed)
    a = _fixed_inputs(n, rng)
    out = []
    for size in _chunks(trials, chunk):
        noise = rng.normal(0.0, sigma, size=(size, n, n))
        out.append(np.einsum("i,tij->t", a, noise))
    samples = np.concatenate(out)
    return VarianceCheck(trials, float(np.var(samples, ddof=1)), n * float(a @ a) * sigma**2)


# --- missed detection -----------------------------------------------------

class FaultCase(str, enum.Enum):
    SAME_BITLINE = "same_bitline"
    SAME_WORDLINE = "same_wordline"
    CROSS_REGION = "cross_region"

    @classmethod
    def parse(cls, text) -> "FaultCase":
        if isinstance(text, cls):
            return text
        key = str(text).strip().lower().replace("-", "_")
        aliases = {"samebitline": cls.SAME_BITLINE, "samewordline": cls.SAME_WORDLINE,
                   "crossregion": cls.CROSS_REGION}
        try:
            return aliases.get(key.replace("_", ""), None) or cls(key)
        except ValueError:
            raise DomainError(f"unknown fault case {text!r}") from None


@dataclass(frozen=True)
class MissedDetectionQuery:
    p: float
    m: int
    w: int
    i: int
    N: int
    s: int
    case: FaultCase = FaultCase.SAME_BITLINE

    def __post_init__(self):
        object.__setattr__(self, "case", FaultCase.parse(self.case))
        if not 0 <= self.p <= 1:
            raise DomainError("p must lie in [0, 1]")
        if self.N < 2:
            raise DomainError("a multi-cell error needs N >= 2")
        if self.m < 1 or self.w < 1 or self.i < 1 or self.s < 1:
            raise DomainError("m, w, i and s must be positive")


def missed_detection_probability(p: float, m: int, w: int, i: int, N: int, s: int,
                                 case: FaultCase | str = FaultCase.SAME_BITLINE) -> tuple[float, float]:
    """Returns ``(p**2 * p_star, p_star)``.

    ``p_star`` is the chance a multi-cell error escapes: the disturbed sum
    lands on its old value (one in ``(2**m - 1) w`` for a shared bitline, one
    in ``(2**s - 1) w`` otherwise) and the inputs at the faulty rows repeat
    for all ``i`` cycles.
    """
    q = MissedDetectionQuery(p, m, w, i, N, s, case)
    width = q.m if q.case is FaultCase.SAME_BITLINE else q.s
    p_star = 1.0 / (((1 << width) - 1) * q.w) * 2.0 ** (-q.N * q.i)
    return q.p**2 * p_star, p_star


def classify_pair(cells, data_cols: int) -> FaultCase | None:
    """Case of a two-cell pattern, or ``None`` for different rows and columns in one region."""
    (r0, c0), (r1, c1) = cells
    if (c0 < data_cols) != (c1 < data_cols):
        return FaultCase.CROSS_REGION
    if c0 == c1:
        return FaultCase.SAME_BITLINE
    if r0 == r1:
        return FaultCase.SAME_WORDLINE
    return None


@dataclass
class BruteForceResult:
    undetected: int = 0
    missed: int = 0
    total: int = 0
    disagreements: int = 0
    by_case: dict = None

    @property
    def exact_conditional_probability(self) -> float:
        return self.missed / self.total if self.total else 0.0


def enumeration_size(config: CrossbarConfig, N: int, i: int) -> int:
    cells = config.rows * config.cols
    return math.comb(cells, N) * ((1 << config.bits_per_cell) - 1) ** N * (1 << (config.rows * i))


def brute_force_missed_detection(
    config: CrossbarConfig,
    layout: ValueLayout,
    N: int = 2,
    i: int = 2,
    base_levels: np.ndarray | None = None,
    rng_seed: int = 0,
    budget: int = 5_000_000,
) -> BruteForceResult:
    """Exhaustive missed-detection count on a tiny noiseless crossbar.

    Every ``N``-cell subset, every combination of new levels, and every
    ``i``-cycle sequence of input bit vectors is tried. A case is undetected
    when the pipeline flags no cycle, and missed when it is also wrong, i.e.
    the reconstructed result differs from the fault-free GEMV. Each
    single-cycle verdict of the pipeline is cross-checked against an
    algebraic verdict computed from the level changes alone; mismatches are
    counted in ``disagreements``.
    """
    if config.write_noise_sigma != 0:
        raise DomainError("the exhaustive oracle assumes a noiseless crossbar")
    if layout.data_cols != config.data_cols or layout.bits_per_cell != config.bits_per_cell:
        raise DomainError("layout does not match the crossbar")
    if N < 1 or i < 1:
        raise DomainError("need N >= 1 and i >= 1")
    size = enumeration_size(config, N, i)
    if size > budget:
        raise EnumerationTooLarge(size, budget)

    n, w, sc, m = config.rows, config.data_cols, config.sum_cols, config.bits_per_cell
    levels_count = 1 << m
    if base_levels is None:
        rng = np.random.default_rng(rng_seed)
        data = rng.integers(0, levels_count, size=(n, w))
        base_levels = np.hstack([data, sum_region(data, layout, sc)])
    base_levels = np.asarray(base_levels, dtype=np.int64)
    adc_bits = required_adc_bits(n, m)
    sum_weights = np.int64(1) << (m * np.arange(sc - 1, -1, -1, dtype=np.int64))

    vectors = np.array(list(itertools.product((0, 1), repeat=n)), dtype=np.int64)
    in_weights = np.int64(1) << np.arange(i - 1, -1, -1, dtype=np.int64)
    sequences = list(itertools.product(range(len(vectors)), repeat=i))
    golden = recompose_matrix(vectors @ base_levels[:, :w], layout)     # per-vector result digits

    cells = [(r, c) for r in range(n) for c in range(config.cols)]
    result = BruteForceResult(by_case={})
    for subset in itertools.combinations(cells, N):
        case = classify_pair(subset, w) if N == 2 else None
        key = case.value if case else "other"
        bucket = result.by_case.setdefault(key, [0, 0])
        olds = [int(base_levels[r, c]) for r, c in subset]
        options = [[v for v in range(levels_count) if v != o] for o in olds]
        for new in itertools.product(*options):
            levels = base_levels.copy()
            delta = np.zeros_like(levels)
            for (r, c), v, o in zip(subset, new, olds):
                levels[r, c] = v
                delta[r, c] = v - o
            state = program_crossbar(config, levels, rng_seed=0)
            flags = np.zeros(len(vectors), dtype=bool)
            digits = np.zeros((len(vectors), layout.values_per_wordline), dtype=np.int64)
            if layout.sum_mode is SumMode.CELL:
                row_change = delta[:, :w].sum(axis=1)
            else:
                row_change = recompose_matrix(delta[:, :w], layout).sum(axis=1)
            stored_change = delta[:, w:] @ sum_weights
            for idx, bits in enumerate(vectors):
                codes = quantize(apply_inputs(state, bits).currents, adc_bits)
                digits[idx] = recompose_matrix(codes[:w], layout)
                checked = codes[:w] if layout.sum_mode is SumMode.CELL else digits[idx]
                flags[idx] = sum_check(checked, codes[w:], m).flagged
                # algebraic verdict from the level changes alone
                expect = int(bits @ row_change) != int(bits @ stored_change)
                result.disagreements += int(expect != flags[idx])
            for seq in sequences:
                result.total += 1
                bucket[1] += 1
                if flags[list(seq)].any():
                    continue
                result.undetected += 1
                got = in_weights @ digits[list(seq)]
                want = in_weights @ golden[list(seq)]
                if not np.array_equal(got, want):
                    result.missed += 1
                    bucket[0] += 1
    return result
