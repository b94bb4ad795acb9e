"""Functional model of the value-level-parallel datapath.

Covers temporal conversion and accumulation, LUT subscription for the
nonlinear functions, softmax with FP32 accumulation, and the INT4 x BF16
GEMM realised through temporal accumulation.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from . import kernels
from .lut import (
    WINDOW_COLUMNS,
    Lut,
    NonlinearKind,
    SlidingWindow,
    WindowPolicy,
    select_window,
    window_base,
)
from .numeric import (
    Bf16,
    Special,
    as_bf16_bits,
    bf16_bits_to_float,
    float_to_bf16_bits,
    split_fields,
)

ARRAY_COLUMNS = WINDOW_COLUMNS
DEFAULT_HEIGHT = 256


@dataclass(frozen=True)
class TemporalSignal:
    spike_cycle: int
    bits: int

    @property
    def window(self) -> int:
        return 1 << self.bits

    def train(self) -> np.ndarray:
        t = np.zeros(self.window, dtype=bool)
        t[self.spike_cycle] = True
        return t


def temporal_encode(magnitude: int, bits: int = 3) -> TemporalSignal:
    if not 0 <= magnitude < (1 << bits):
        raise ValueError(f"magnitude {magnitude} does not fit in {bits} bits")
    return TemporalSignal(int(magnitude), bits)


def temporal_multiply(i: int, w, bits: int = 4) -> np.float32:
    """Multiply by accumulating ``w`` once per cycle and latching at the spike of ``i``."""
    spike = temporal_encode(i, bits).spike_cycle
    w32 = np.float32(w.value if isinstance(w, Bf16) else w)
    acc = np.float32(0.0)
    latched = np.float32(0.0)
    for cycle in range(1 << bits):
        if cycle == spike:
            latched = acc
            break
        acc = np.float32(acc + w32)
    return latched


class Path(IntEnum):
    LUT = kernels.PATH_LUT
    SPECIAL = kernels.PATH_SPECIAL
    CLAMP = kernels.PATH_CLAMP


@dataclass(frozen=True)
class ApproxResult:
    value: Bf16
    subscription_cycle: int  # -1 when no LUT access happens
    path: Path

    @property
    def elapsed_cycles(self) -> int:
        return self.subscription_cycle + 1


@dataclass(frozen=True)
class Approximation:
    """Results for a grid or stream of inputs, held as parallel arrays."""

    bits: np.ndarray
    cycles: np.ndarray
    paths: np.ndarray
    window: SlidingWindow | None = field(default=None, repr=False)

    def __getitem__(self, idx) -> ApproxResult:
        return ApproxResult(
            Bf16.from_bits(int(self.bits[idx])), int(self.cycles[idx]), Path(int(self.paths[idx]))
        )

    @property
    def shape(self) -> tuple[int, ...]:
        return self.bits.shape

    def values(self) -> np.ndarray:
        return bf16_bits_to_float(self.bits)


def _lookup(bits: np.ndarray, lut: Lut, bases: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    flat = np.ascontiguousarray(bits.reshape(-1), dtype=np.uint16)
    out, cyc, path = kernels.approx_lookup(
        flat, lut.table, lut.sign_slot, lut.window.min_exp, bases, lut.kind.exp_like
    )
    if (path == kernels.PATH_MISSING_SIGN).any():
        bad = int(flat[np.argmax(path == kernels.PATH_MISSING_SIGN)])
        raise ValueError(
            f"{lut.kind.value} LUT stores only sign {lut.signs}; input 0x{bad:04x} needs a signed table"
        )
    return out.reshape(bits.shape), cyc.reshape(bits.shape), path.reshape(bits.shape)


def approximate(
    xs, lut: Lut, policy: WindowPolicy = WindowPolicy.ALIGN_MAX
) -> Approximation:
    """Approximate one mapping: an (H, 8) grid sharing a single sliding window."""
    bits = as_bf16_bits(xs)
    if bits.ndim != 2 or bits.shape[1] != ARRAY_COLUMNS:
        raise ValueError(f"mapping grid must be (H, {ARRAY_COLUMNS}), got {bits.shape}")
    f = split_fields(bits)
    ok = f.special == Special.NONE
    stats = (int(f.exponent[ok].min()), int(f.exponent[ok].max())) if ok.any() else None
    sw = select_window(lut, stats, policy)
    bases = np.full(bits.size, sw.base_exp, dtype=np.int64)
    out, cyc, path = _lookup(bits, lut, bases)
    return Approximation(out, cyc, path, sw)


def mapping_bases(bits: np.ndarray, lut: Lut, height: int, policy: WindowPolicy) -> np.ndarray:
    """Per-mapping window base exponent for a flat stream of inputs."""
    per = height * ARRAY_COLUMNS
    n = bits.size
    chunks = -(-n // per)
    f = split_fields(bits)
    ok = f.special == Special.NONE
    pad = chunks * per - n
    exp = np.pad(f.exponent.astype(np.int32), (0, pad))
    okp = np.pad(ok, (0, pad)).reshape(chunks, per)
    e = exp.reshape(chunks, per)
    hi = np.where(okp, e, np.iinfo(np.int32).min).max(axis=1)
    lo = np.where(okp, e, np.iinfo(np.int32).max).min(axis=1)
    any_ok = okp.any(axis=1)
    top = lut.window.max_exp
    bases = np.array(
        [
            window_base(lut.window, (int(l), int(h)) if a else (top, top), policy)
            for l, h, a in zip(lo, hi, any_ok)
        ],
        dtype=np.int64,
    )
    return bases


def approximate_stream(
    xs, lut: Lut, height: int = DEFAULT_HEIGHT, policy: WindowPolicy = WindowPolicy.ALIGN_MAX
) -> Approximation:
    """Approximate a flat stream, chunked into mappings of ``height * 8`` inputs.

    Each mapping selects its own sliding window.
    """
    bits = as_bf16_bits(xs).reshape(-1)
    if bits.size == 0:
        empty = np.zeros(0, dtype=np.uint16)
        return Approximation(empty, np.zeros(0, np.int16), np.zeros(0, np.uint8))
    per = height * ARRAY_COLUMNS
    bases = np.repeat(mapping_bases(bits, lut, height, policy), per)[: bits.size]
    out, cyc, path = _lookup(bits, lut, bases)
    return Approximation(out, cyc, path)


def softmax(
    xs, lut: Lut, height: int = DEFAULT_HEIGHT, policy: WindowPolicy = WindowPolicy.ALIGN_MAX
) -> np.ndarray:
    """Softmax returning BF16 bit patterns.

    Max subtraction is exact up to the BF16 rounding of the difference; exp
    results are accumulated sequentially in FP32 and scaled by the FP32
    reciprocal of the sum.
    """
    if lut.kind is not NonlinearKind.EXP:
        raise ValueError(f"softmax needs an exp LUT, got {lut.kind.value}")
    bits = as_bf16_bits(xs).reshape(-1)
    if bits.size == 0:
        raise ValueError("softmax of an empty vector")
    vals = bf16_bits_to_float(bits).astype(np.float64)
    if np.isnan(vals).any() or np.isposinf(vals).any():
        raise ValueError("softmax inputs must be finite or -inf")
    if np.isneginf(vals).all():
        raise ValueError("degenerate softmax: every input is -inf")
    shifted = float_to_bf16_bits(vals - vals.max())
    e = approximate_stream(shifted, lut, height, policy).values()
    total = np.cumsum(e, dtype=np.float32)[-1]
    recip = np.float32(1.0) / total
    return float_to_bf16_bits((e * recip).astype(np.float64))


# ---------------------------------------------------------------------------
# GEMM


@dataclass
class GemmTile:
    """One output-stationary tile: up to H weight rows by 8 input columns."""

    weights: np.ndarray  # (rows, K) int8
    inputs: np.ndarray  # (K, cols) float32, BF16-valued
    scales: np.ndarray  # (rows, K // group_size) float32, BF16-valued
    group_size: int
    partials: np.ndarray | None = None  # (rows, cols) float32 after run()

    def run(self) -> np.ndarray:
        self.partials = kernels.gemm_accumulate(self.weights, self.scales, self.inputs, self.group_size)
        return self.partials


def _check_weights(a) -> np.ndarray:
    a = np.asarray(a)
    if a.dtype.kind not in "iu":
        raise TypeError("weights must be an integer array of INT4 values")
    if a.size and (a.min() < -8 or a.max() > 7):
        raise ValueError("weights outside the INT4 range [-8, 7]")
    return a.astype(np.int8)


def gemm(
    weights,
    inputs,
    scales=None,
    group_size: int | None = None,
    array_height: int = DEFAULT_HEIGHT,
) -> np.ndarray:
    """Grouped INT4 weights (M, K) times BF16 inputs (K, N) -> BF16 bits (M, N).

    ``scales`` has shape (M, K // group_size); it defaults to ones. The
    computation is tiled over ``array_height`` rows and 8 columns, which does
    not change the result.
    """
    a = _check_weights(weights)
    if a.ndim != 2:
        raise ValueError("weights must be 2-D (M, K)")
    b_bits = as_bf16_bits(inputs)
    if b_bits.ndim != 2 or b_bits.shape[0] != a.shape[1]:
        raise ValueError(f"dimension mismatch: weights {a.shape} vs inputs {b_bits.shape}")
    m_dim, k_dim = a.shape
    n_dim = b_bits.shape[1]
    group = k_dim if group_size is None else int(group_size)
    if group < 1 or k_dim % group:
        raise ValueError(f"group size {group} must divide K={k_dim}")
    groups = k_dim // group
    if scales is None:
        s32 = np.ones((m_dim, groups), dtype=np.float32)
    else:
        s_bits = as_bf16_bits(scales)
        if s_bits.shape != (m_dim, groups):
            raise ValueError(f"scales must have shape {(m_dim, groups)}, got {s_bits.shape}")
        s32 = bf16_bits_to_float(s_bits)
    b32 = bf16_bits_to_float(b_bits)
    if array_height < 1:
        raise ValueError("array height must be positive")

    acc = np.zeros((m_dim, n_dim), dtype=np.float32)
    for r0 in range(0, m_dim, array_height):
        r1 = min(r0 + array_height, m_dim)
        for c0 in range(0, n_dim, ARRAY_COLUMNS):
            c1 = min(c0 + ARRAY_COLUMNS, n_dim)
            tile = GemmTile(a[r0:r1], b32[:, c0:c1], s32[r0:r1], group)
            acc[r0:r1, c0:c1] = tile.run()
    return float_to_bf16_bits(acc.astype(np.float64))
