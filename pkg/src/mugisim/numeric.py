"""BF16 and INT4 number formats, mantissa rounding and exponent scanning.

Scalar types (:class:`Bf16`, :class:`Int4`, :class:`SplitInput`) describe a
single value; the ``*_array`` helpers operate on numpy arrays of raw 16-bit
patterns and are what the datapath models use.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum, IntEnum
from typing import Iterable, NamedTuple

import numpy as np

from . import kernels

BF16_BIAS = 127
MANTISSA_BITS = 7
INDEX_BITS = 3
EXP_FIELD_MAX = 0xFF

BF16_POS_INF = 0x7F80
BF16_NEG_INF = 0xFF80
BF16_NAN = 0x7FC0
BF16_ONE = 0x3F80


class Bf16Class(Enum):
    ZERO = "zero"
    SUBNORMAL = "subnormal"
    NORMAL = "normal"
    INF = "inf"
    NAN = "nan"


class Special(IntEnum):
    """Special-value tag carried alongside a split input."""

    NONE = 0
    ZERO = 1
    INF = 2
    NAN = 3


@dataclass(frozen=True)
class Bf16:
    """A bfloat16 value held as its three bit fields."""

    sign: int
    exponent: int  # biased, 0..255
    mantissa: int  # 7-bit fraction

    def __post_init__(self) -> None:
        if self.sign not in (0, 1):
            raise ValueError(f"sign must be 0 or 1, got {self.sign}")
        if not 0 <= self.exponent <= EXP_FIELD_MAX:
            raise ValueError(f"biased exponent out of range: {self.exponent}")
        if not 0 <= self.mantissa < (1 << MANTISSA_BITS):
            raise ValueError(f"mantissa field out of range: {self.mantissa}")

    @classmethod
    def from_bits(cls, bits: int) -> "Bf16":
        bits = int(bits)
        if not 0 <= bits <= 0xFFFF:
            raise ValueError(f"not a 16-bit pattern: {bits:#x}")
        return cls((bits >> 15) & 1, (bits >> 7) & 0xFF, bits & 0x7F)

    @classmethod
    def from_float(cls, x: float) -> "Bf16":
        """Round a float to the nearest BF16 (ties to even)."""
        return cls.from_bits(int(float_to_bf16_bits(np.float64(x))))

    @property
    def bits(self) -> int:
        return (self.sign << 15) | (self.exponent << 7) | self.mantissa

    @property
    def kind(self) -> Bf16Class:
        if self.exponent == EXP_FIELD_MAX:
            return Bf16Class.NAN if self.mantissa else Bf16Class.INF
        if self.exponent == 0:
            return Bf16Class.SUBNORMAL if self.mantissa else Bf16Class.ZERO
        return Bf16Class.NORMAL

    @property
    def unbiased_exponent(self) -> int:
        return self.exponent - BF16_BIAS

    @property
    def value(self) -> float:
        return float(bf16_bits_to_float(np.uint16(self.bits)))

    def __float__(self) -> float:
        return self.value


def decode_bf16(bits: int) -> Bf16:
    return Bf16.from_bits(bits)


def encode_bf16(x: Bf16) -> int:
    return x.bits


@dataclass(frozen=True)
class Int4:
    """Signed 4-bit integer in [-8, 7]."""

    value: int

    def __post_init__(self) -> None:
        if not -8 <= self.value <= 7:
            raise ValueError(f"Int4 out of range: {self.value}")

    @property
    def sign(self) -> int:
        return 1 if self.value < 0 else 0

    @property
    def magnitude(self) -> int:
        # -8 has no 3-bit magnitude; clamp to the symmetric range
        return min(abs(self.value), 7)

    @property
    def bits(self) -> int:
        return self.value & 0xF

    @classmethod
    def from_bits(cls, bits: int) -> "Int4":
        bits = int(bits) & 0xF
        return cls(bits - 16 if bits & 0x8 else bits)


@dataclass(frozen=True)
class SplitInput:
    """Sign, rounded 3-bit mantissa index and unbiased exponent of an input."""

    sign: int
    mantissa_index: int
    exponent: int
    special: Special = Special.NONE

    def reconstruct(self) -> float:
        """Value represented by the rounded fields (specials map to their value)."""
        if self.special is Special.ZERO:
            return -0.0 if self.sign else 0.0
        if self.special is Special.INF:
            return float("-inf") if self.sign else float("inf")
        if self.special is Special.NAN:
            return float("nan")
        mag = (1.0 + self.mantissa_index / 8.0) * 2.0 ** self.exponent
        return -mag if self.sign else mag


def round_mantissa(mantissa7: int, exponent: int) -> tuple[int, int]:
    """Round a 7-bit mantissa field to 3 bits, ties to even, carrying into the exponent."""
    top = mantissa7 >> 4
    rem = mantissa7 & 0xF
    if rem > 8 or (rem == 8 and top & 1):
        top += 1
    if top == 8:
        return 0, exponent + 1
    return top, exponent


def split_and_round(x: Bf16 | int) -> SplitInput:
    if not isinstance(x, Bf16):
        x = Bf16.from_bits(x)
    kind = x.kind
    if kind in (Bf16Class.ZERO, Bf16Class.SUBNORMAL):
        return SplitInput(x.sign, 0, 0, Special.ZERO)
    if kind is Bf16Class.INF:
        return SplitInput(x.sign, 0, 0, Special.INF)
    if kind is Bf16Class.NAN:
        return SplitInput(x.sign, 0, 0, Special.NAN)
    m, e = round_mantissa(x.mantissa, x.unbiased_exponent)
    return SplitInput(x.sign, m, e)


def exponent_stats(xs: Iterable[SplitInput]) -> tuple[int, int] | None:
    """Min and max exponent over non-special inputs; None when there are none."""
    exps = [x.exponent for x in xs if x.special is Special.NONE]
    if not exps:
        return None
    return min(exps), max(exps)


# ---------------------------------------------------------------------------
# array helpers


class SplitFields(NamedTuple):
    sign: np.ndarray
    mantissa_index: np.ndarray
    exponent: np.ndarray
    special: np.ndarray


def float_to_bf16_bits(x) -> np.ndarray:
    """Round float64 values to BF16 bit patterns with a single RNE rounding."""
    arr = np.asarray(x, dtype=np.float64)
    flat = np.ascontiguousarray(arr.reshape(-1))
    return kernels.round_bf16(flat).reshape(arr.shape)


def bf16_bits_to_float(bits) -> np.ndarray:
    """Widen BF16 bit patterns to float32 (exact)."""
    b = np.asarray(bits, dtype=np.uint16)
    return (b.astype(np.uint32) << 16).view(np.float32)


def as_bf16_bits(xs) -> np.ndarray:
    """Accept BF16 patterns (uint16) or floats (rounded to BF16)."""
    arr = np.asarray(xs)
    if arr.dtype == np.uint16:
        return arr
    if arr.dtype.kind in "iub":
        raise TypeError("integer input is ambiguous; pass uint16 bit patterns or floats")
    return float_to_bf16_bits(arr.astype(np.float64))


def split_fields(bits) -> SplitFields:
    """Vectorised :func:`split_and_round` over an array of BF16 patterns."""
    b = np.asarray(bits, dtype=np.uint16).astype(np.int32)
    sign = (b >> 15) & 1
    efield = (b >> 7) & 0xFF
    mant = b & 0x7F
    top = mant >> 4
    rem = mant & 0xF
    up = (rem > 8) | ((rem == 8) & ((top & 1) == 1))
    top = top + up
    exp = efield - BF16_BIAS + (top == 8)
    top = np.where(top == 8, 0, top)
    special = np.zeros(b.shape, dtype=np.int8)
    special[efield == 0] = Special.ZERO
    special[(efield == EXP_FIELD_MAX) & (mant == 0)] = Special.INF
    special[(efield == EXP_FIELD_MAX) & (mant != 0)] = Special.NAN
    normal = special == Special.NONE
    top = np.where(normal, top, 0)
    exp = np.where(normal, exp, 0)
    return SplitFields(sign.astype(np.int8), top.astype(np.int8), exp.astype(np.int16), special)


def exponent_stats_array(bits) -> tuple[int, int] | None:
    f = split_fields(bits)
    ok = f.special == Special.NONE
    if not ok.any():
        return None
    e = f.exponent[ok]
    return int(e.min()), int(e.max())


def bf16_ulp(value: float) -> float:
    """Spacing of BF16 values at ``value`` (smallest normal spacing near zero)."""
    v = abs(float(value))
    if v == 0.0 or not np.isfinite(v):
        return 2.0 ** (-126 - MANTISSA_BITS)
    e = max(int(np.floor(np.log2(v))), -126)
    # guard against log2 rounding at exact powers of two
    if 2.0 ** (e + 1) <= v:
        e += 1
    return 2.0 ** (e - MANTISSA_BITS)
