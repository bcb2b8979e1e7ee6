"""The preparator: value layout, wordline sums, and ECC-protected staging.

Values of ``k`` bits are split into ``k/m`` cells of ``m`` bits, most
significant chunk first. Each wordline additionally stores a checksum, the
sum of either its raw cell levels (``CellSum``) or its reconstructed values
(``ValueSum``), spread over ``sum_cols`` cells with the same radix-``2**m``
positional encoding.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DomainError


class SumMode(str, enum.Enum):
    VALUE = "value"
    CELL = "cell"

    @classmethod
    def parse(cls, text) -> "SumMode":
        if isinstance(text, cls):
            return text
        key = str(text).strip().lower()
        aliases = {"value": cls.VALUE, "valuesum": cls.VALUE, "cell": cls.CELL, "cellsum": cls.CELL}
        try:
            return aliases[key]
        except KeyError:
            raise ConfigurationError(f"unknown sum mode {text!r}; use 'value' or 'cell'") from None


@dataclass(frozen=True)
class ValueLayout:
    value_bits: int = 16
    bits_per_cell: int = 2
    data_cols: int = 128
    sum_mode: SumMode = SumMode.CELL

    def __post_init__(self):
        object.__setattr__(self, "sum_mode", SumMode.parse(self.sum_mode))
        if self.value_bits < 1 or self.bits_per_cell < 1 or self.data_cols < 1:
            raise ConfigurationError("layout widths must be positive")
        if self.value_bits % self.bits_per_cell:
            raise ConfigurationError(
                f"value_bits={self.value_bits} is not a multiple of bits_per_cell={self.bits_per_cell}"
            )
        if self.values_per_wordline < 1:
            raise ConfigurationError("a wordline must hold at least one value")

    @property
    def cells_per_value(self) -> int:
        return self.value_bits // self.bits_per_cell

    @property
    def values_per_wordline(self) -> int:
        # leftover cells at the end of a wordline stay unused
        return self.data_cols // self.cells_per_value

    @property
    def max_sum(self) -> int:
        if self.sum_mode is SumMode.CELL:
            return self.data_cols * ((1 << self.bits_per_cell) - 1)
        return self.values_per_wordline * ((1 << self.value_bits) - 1)

    @property
    def sum_value_bits(self) -> int:
        """Width of the stored wordline sum.

        ``ValueSum`` keeps the coarse ``log2(v * 2**k)`` sizing; ``CellSum`` uses
        the exact bound for the largest reachable sum. Both are wide enough to
        hold every reachable sum.
        """
        if self.sum_mode is SumMode.VALUE:
            return math.ceil(math.log2(self.values_per_wordline) + self.value_bits)
        return math.ceil(math.log2(self.max_sum + 1))

    @property
    def sum_cols(self) -> int:
        return math.ceil(self.sum_value_bits / self.bits_per_cell)


def _radix_digits(value: int, digits: int, m: int) -> list[int]:
    mask = (1 << m) - 1
    return [(value >> (m * (digits - 1 - d))) & mask for d in range(digits)]


def recompose(cells, bits_per_cell: int) -> int:
    """Radix-``2**m`` shift-and-add, most significant cell first."""
    total = 0
    for c in cells:
        total = (total << bits_per_cell) + int(c)
    return total


def decompose_value(value: int, layout: ValueLayout) -> np.ndarray:
    if not 0 <= value < (1 << layout.value_bits):
        raise DomainError(f"{value} does not fit in {layout.value_bits} bits")
    return np.array(_radix_digits(int(value), layout.cells_per_value, layout.bits_per_cell), dtype=np.int64)


def decompose_matrix(values: np.ndarray, layout: ValueLayout) -> np.ndarray:
    """Vectorised :func:`decompose_value` for an ``(rows, v)`` value matrix.

    Returns cell levels of shape ``(rows, v * k/m)``; unused trailing cells of
    a wordline are not included.
    """
    values = np.asarray(values, dtype=np.int64)
    if values.size and (values.min() < 0 or values.max() >= (1 << layout.value_bits)):
        raise DomainError(f"values must fit in {layout.value_bits} bits")
    m = layout.bits_per_cell
    shifts = m * np.arange(layout.cells_per_value - 1, -1, -1, dtype=np.int64)
    cells = (values[..., None] >> shifts) & ((1 << m) - 1)
    return cells.reshape(values.shape[0], -1)


def recompose_matrix(cells: np.ndarray, layout: ValueLayout) -> np.ndarray:
    """Inverse of :func:`decompose_matrix`; also works on digitised bitline outputs."""
    cells = np.asarray(cells, dtype=np.int64)
    cpv = layout.cells_per_value
    used = layout.values_per_wordline * cpv
    grouped = cells[..., :used].reshape(*cells.shape[:-1], layout.values_per_wordline, cpv)
    weights = np.int64(1) << (layout.bits_per_cell * np.arange(cpv - 1, -1, -1, dtype=np.int64))
    return grouped @ weights


def encode_sum(total: int, sum_cols: int, bits_per_cell: int) -> np.ndarray:
    """Spread ``total`` over ``sum_cols`` cells, MSB first.

    With fewer cells than the sum needs only the low-order digits are kept, so
    the stored value is ``total mod 2**(m * sum_cols)``.
    """
    return np.array(_radix_digits(int(total), sum_cols, bits_per_cell), dtype=np.int64)


def wordline_sum(row_cell_levels, layout: ValueLayout) -> int:
    row = np.asarray(row_cell_levels, dtype=np.int64)
    if layout.sum_mode is SumMode.CELL:
        return int(row.sum())
    return int(recompose_matrix(row[None, :], layout).sum())


def compute_wordline_sums(row_cell_levels, layout: ValueLayout, sum_cols: int | None = None) -> np.ndarray:
    """Checksum cells for one wordline of ``data_cols`` cell levels."""
    row = np.asarray(row_cell_levels, dtype=np.int64)
    if row.shape != (layout.data_cols,):
        raise DomainError(f"expected {layout.data_cols} cell levels, got shape {row.shape}")
    if row.size and (row.min() < 0 or row.max() >= (1 << layout.bits_per_cell)):
        raise DomainError("cell level out of range")
    cols = layout.sum_cols if sum_cols is None else sum_cols
    return encode_sum(wordline_sum(row, layout), cols, layout.bits_per_cell)


def sum_region(data_levels: np.ndarray, layout: ValueLayout, sum_cols: int | None = None) -> np.ndarray:
    """Checksum cells for every wordline of a data region, shape ``(rows, sum_cols)``."""
    data_levels = np.asarray(data_levels, dtype=np.int64)
    cols = layout.sum_cols if sum_cols is None else sum_cols
    if layout.sum_mode is SumMode.CELL:
        sums = data_levels.sum(axis=1)
    else:
        sums = recompose_matrix(data_levels, layout).sum(axis=1)
    m = layout.bits_per_cell
    shifts = m * np.arange(cols - 1, -1, -1, dtype=np.int64)
    return (sums[:, None] >> shifts) & ((1 << m) - 1)


@dataclass(frozen=True)
class Overhead:
    values_per_wordline: int
    sum_value_bits: int
    sum_cols: int
    fraction: float
    unrounded_fraction: float


def storage_overhead(layout: ValueLayout) -> Overhead:
    """Extra cells per wordline spent on the checksum.

    ``fraction`` counts whole cells (``sum_cols / w``); ``unrounded_fraction``
    is ``b / (m * w)`` before rounding up to whole cells.
    """
    w, m = layout.data_cols, layout.bits_per_cell
    return Overhead(
        values_per_wordline=layout.values_per_wordline,
        sum_value_bits=layout.sum_value_bits,
        sum_cols=layout.sum_cols,
        fraction=layout.sum_cols / w,
        unrounded_fraction=layout.sum_value_bits / (m * w),
    )


# --- SECDED (72,64) --------------------------------------------------------
#
# Extended Hamming code. Data bits occupy the non-power-of-two positions
# 3, 5, 6, 7, 9, ... of a 1-based 71-bit Hamming word; check bit k (k < 7)
# covers positions with bit k set, check bit 7 is overall parity.

class EccStatus(str, enum.Enum):
    CLEAN = "clean"
    CORRECTED = "corrected"
    UNCORRECTABLE = "uncorrectable"


_DATA_POSITIONS = [p for p in range(1, 72) if p & (p - 1)][:64]
_POSITION_OF_DATA_BIT = {pos: bit for bit, pos in enumerate(_DATA_POSITIONS)}
_CHECK_MASKS = [
    sum(1 << bit for bit, pos in enumerate(_DATA_POSITIONS) if pos >> k & 1) for k in range(7)
]
_MASK64 = (1 << 64) - 1


def _parity(x: int) -> int:
    return bin(x).count("1") & 1


@dataclass(frozen=True)
class StagedWord:
    data: int
    check_bits: int

    def flip(self, bit: int) -> "StagedWord":
        """Flip one of the 72 stored bits (0-63 data, 64-71 check)."""
        if not 0 <= bit < 72:
            raise DomainError("bit index must be in 0..71")
        if bit < 64:
            return StagedWord(self.data ^ (1 << bit), self.check_bits)
        return StagedWord(self.data, self.check_bits ^ (1 << (bit - 64)))


def _hamming_checks(data: int) -> int:
    checks = 0
    for k, mask in enumerate(_CHECK_MASKS):
        checks |= _parity(data & mask) << k
    return checks


def encode_staged_word(data: int) -> StagedWord:
    if not 0 <= data <= _MASK64:
        raise DomainError("staged words carry 64-bit unsigned payloads")
    checks = _hamming_checks(data)
    overall = _parity(data) ^ _parity(checks)
    return StagedWord(data, checks | overall << 7)


def decode_staged_word(word: StagedWord) -> tuple[int, EccStatus]:
    data, stored = word.data, word.check_bits
    syndrome = _hamming_checks(data) ^ (stored & 0x7F)
    parity_error = (_parity(data) ^ _parity(stored)) & 1
    if syndrome == 0 and not parity_error:
        return data, EccStatus.CLEAN
    if not parity_error:
        return data, EccStatus.UNCORRECTABLE
    if syndrome == 0 or syndrome & (syndrome - 1) == 0:
        # the flipped bit was a check bit; payload is intact
        return data, EccStatus.CORRECTED
    bit = _POSITION_OF_DATA_BIT.get(syndrome)
    if bit is None:
        return data, EccStatus.UNCORRECTABLE
    return data ^ (1 << bit), EccStatus.CORRECTED


# Vectorised form used by the simulator's staging buffers.

_CHECK_MASKS_U64 = np.array(_CHECK_MASKS, dtype=np.uint64)


def _parity_u64(x: np.ndarray) -> np.ndarray:
    return (np.bitwise_count(x) & 1).astype(np.uint8)


def encode_words(data: np.ndarray) -> np.ndarray:
    """Check bytes for an array of 64-bit payloads (same code as :func:`encode_staged_word`)."""
    data = np.asarray(data, dtype=np.uint64)
    checks = np.zeros(data.shape, dtype=np.uint8)
    for k in range(7):
        checks |= _parity_u64(data & _CHECK_MASKS_U64[k]) << np.uint8(k)
    overall = _parity_u64(data) ^ (np.bitwise_count(checks) & 1).astype(np.uint8)
    return checks | (overall << np.uint8(7))


def decode_words(data: np.ndarray, checks: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Decode arrays of staged words.

    Returns the corrected payloads and a status code per word:
    0 clean, 1 corrected, 2 uncorrectable.
    """
    data = np.asarray(data, dtype=np.uint64).copy()
    checks = np.asarray(checks, dtype=np.uint8)
    syndrome = (encode_words(data) ^ checks) & np.uint8(0x7F)
    parity_error = (_parity_u64(data) ^ (np.bitwise_count(checks) & 1).astype(np.uint8)).astype(bool)
    status = np.zeros(data.shape, dtype=np.int8)
    status[(syndrome != 0) & ~parity_error] = 2
    single = parity_error
    if single.any():
        status[single] = 1
        for idx in np.flatnonzero(single):
            s = int(syndrome.flat[idx])
            if s == 0 or s & (s - 1) == 0:
                continue
            bit = _POSITION_OF_DATA_BIT.get(s)
            if bit is None:
                status.flat[idx] = 2
            else:
                data.flat[idx] ^= np.uint64(1 << bit)
    return data, status


def pack_values(values: np.ndarray, value_bits: int) -> np.ndarray:
    """Pack unsigned values into 64-bit staging words, little-endian within a word."""
    values = np.asarray(values, dtype=np.uint64).ravel()
    if 64 % value_bits:
        raise ConfigurationError("value_bits must divide 64 for staging")
    per_word = 64 // value_bits
    pad = (-values.size) % per_word
    if pad:
        values = np.concatenate([values, np.zeros(pad, dtype=np.uint64)])
    grouped = values.reshape(-1, per_word)
    shifts = (np.arange(per_word, dtype=np.uint64) * np.uint64(value_bits))
    return np.bitwise_or.reduce(grouped << shifts, axis=1)


def unpack_values(words: np.ndarray, value_bits: int, count: int) -> np.ndarray:
    words = np.asarray(words, dtype=np.uint64)
    per_word = 64 // value_bits
    shifts = np.arange(per_word, dtype=np.uint64) * np.uint64(value_bits)
    mask = np.uint64((1 << value_bits) - 1) if value_bits < 64 else np.uint64(_MASK64)
    values = (words[:, None] >> shifts) & mask
    return values.ravel()[:count].astype(np.int64)


class StagingBuffer:
    """An eDRAM region holding values with a SECDED code per 64-bit word."""

    def __init__(self, values: np.ndarray, value_bits: int):
        values = np.asarray(values, dtype=np.int64)
        self.shape = values.shape
        self.value_bits = value_bits
        self.words = pack_values(values, value_bits)
        self.checks = encode_words(self.words)

    def flip_bit(self, word: int, bit: int) -> None:
        if bit < 64:
            self.words[word] ^= np.uint64(1 << bit)
        else:
            self.checks[word] ^= np.uint8(1 << (bit - 64))

    def read(self) -> tuple[np.ndarray, EccStatus]:
        """Decode the whole buffer; the status is the worst seen over all words."""
        data, status = decode_words(self.words, self.checks)
        worst = int(status.max()) if status.size else 0
        values = unpack_values(data, self.value_bits, int(np.prod(self.shape))).reshape(self.shape)
        return values, [EccStatus.CLEAN, EccStatus.CORRECTED, EccStatus.UNCORRECTABLE][worst]
