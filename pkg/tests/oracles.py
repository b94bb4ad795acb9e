"""Independent scalar reference implementations used by the tests.

Nothing here imports the package's numeric code paths: BF16 decoding goes
through ``struct`` widening and rounding uses exact rational arithmetic.
"""
from __future__ import annotations

import math
import struct
from fractions import Fraction

import numpy as np

INF = float("inf")


def decode(bits: int) -> float:
    """BF16 pattern -> float by widening to IEEE float32."""
    return struct.unpack(">f", struct.pack(">HH", bits & 0xFFFF, 0))[0]


def round_to_bf16(x: float) -> int:
    """Nearest BF16 pattern to ``x`` (ties to even) via exact rationals."""
    if math.isnan(x):
        return 0x7FC0
    sign = 0x8000 if math.copysign(1.0, x) < 0 else 0
    a = abs(x)
    if a == INF:
        return sign | 0x7F80
    if a == 0:
        return sign
    fa = Fraction(a)
    e = math.floor(math.log2(a))
    # fix up floating log2 near powers of two
    while Fraction(2) ** e > fa:
        e -= 1
    while Fraction(2) ** (e + 1) <= fa:
        e += 1
    unit_exp = max(e, -126) - 7  # weight of the last significand bit
    q = fa / Fraction(2) ** unit_exp
    n = math.floor(q)
    rem = q - n
    if rem > Fraction(1, 2) or (rem == Fraction(1, 2) and n % 2 == 1):
        n += 1
    if e < -126:
        return sign | n  # subnormal encoding; n == 128 is the smallest normal
    bits = ((e + 127) << 7) + (n - 128)
    return sign | min(bits, 0x7F80)


def split_round(bits: int) -> tuple[str, int, int, int]:
    """(special, sign, mantissa index, exponent) with round-half-even on the value."""
    v = decode(bits)
    sign = (bits >> 15) & 1
    if math.isnan(v):
        return "nan", sign, 0, 0
    if math.isinf(v):
        return "inf", sign, 0, 0
    efield = (bits >> 7) & 0xFF
    if efield == 0:
        return "zero", sign, 0, 0
    a = Fraction(abs(v))
    e = efield - 127
    frac8 = (a / Fraction(2) ** e - 1) * 8  # in [0, 8)
    idx = round(frac8)  # Fraction rounding is half-to-even
    if idx == 8:
        return "none", sign, 0, e + 1
    return "none", sign, idx, e


def _erf_gelu(x: float) -> float:
    return 0.5 * x * (1.0 + math.erf(x / math.sqrt(2.0)))


def _gelu_tanh(x: float) -> float:
    return 0.5 * x * (1.0 + math.tanh(math.sqrt(2.0 / math.pi) * (x + 0.044715 * x**3)))


def _gelu_fast(x: float) -> float:
    return 0.5 * x * (1.0 + math.tanh(0.7978845608 * x * (1.0 + 0.044715 * x * x)))


def _silu(x: float) -> float:
    try:
        return x / (1.0 + math.exp(-x))
    except OverflowError:
        return -0.0 if x < 0 else 0.0


def _exp(x: float) -> float:
    try:
        return math.exp(x)
    except OverflowError:
        return INF


FUNCS = {"exp": _exp, "silu": _silu, "gelu": _erf_gelu, "gelu_tanh": _gelu_tanh, "gelu_fast": _gelu_fast}


def approx_bits(bits: int, kind: str, base: int) -> int:
    """Expected output of the LUT datapath for one input and window base."""
    special, s, m, e = split_round(bits)
    f = FUNCS[kind]
    if special == "nan":
        return 0x7FC0
    if special == "inf":
        return 0x7F80 if s == 0 else 0x0000
    if special == "zero":
        return round_to_bf16(f(0.0))
    col = e - base
    if kind == "exp":
        ec = min(max(e, base), base + 7)
        return round_to_bf16(f((-1) ** s * (1 + m / 8) * 2.0**ec))
    if col < 0:
        return 0x0000
    if col > 7:
        return bits if s == 0 else 0x0000
    return round_to_bf16(f((-1) ** s * (1 + m / 8) * 2.0**e))


def gemm_triple_loop(a: np.ndarray, b: np.ndarray, scales: np.ndarray, group: int) -> np.ndarray:
    """Brute-force grouped INT4 x BF16 GEMM in float32.

    ``a`` (B, M, K) ints, ``b`` (B, K, N) float32, ``scales`` (B, M, K // group)
    float32; the leading axis is a batch of independent instances evaluated
    element-wise, so every scalar operation below is one IEEE float32 op.
    Products use a direct multiply (exact for |a| <= 7), the sign is applied
    after the magnitude product.
    """
    nb, m_dim, k_dim = a.shape
    n_dim = b.shape[2]
    out = np.zeros((nb, m_dim, n_dim), dtype=np.float32)
    mag = np.minimum(np.abs(a), 7).astype(np.float32)
    neg = a < 0
    for i in range(m_dim):
        for j in range(n_dim):
            acc = np.zeros(nb, dtype=np.float32)
            for g in range(k_dim // group):
                part = np.zeros(nb, dtype=np.float32)
                for k in range(g * group, (g + 1) * group):
                    prod = mag[:, i, k] * b[:, k, j]
                    part = part + np.where(neg[:, i, k], -prod, prod)
                acc = acc + scales[:, i, g] * part
            out[:, i, j] = acc
    return out


def f32_to_bf16_bits(x: np.ndarray) -> np.ndarray:
    """Round float32 values to BF16 with the integer add-and-truncate trick."""
    u = np.ascontiguousarray(x, dtype=np.float32).view(np.uint32).astype(np.uint64)
    rounded = ((u + 0x7FFF + ((u >> 16) & 1)) >> 16).astype(np.uint16)
    nan = np.isnan(x)
    return np.where(nan, np.uint16(0x7FC0), rounded).astype(np.uint16)
