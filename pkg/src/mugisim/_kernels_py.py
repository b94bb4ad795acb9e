"""Pure numpy implementations of the hot kernels.

These define the reference semantics; the compiled core in ``_kernels.pyx``
must agree with them bit for bit.
"""
from __future__ import annotations

import numpy as np

PATH_LUT = 0
PATH_SPECIAL = 1
PATH_CLAMP = 2
PATH_MISSING_SIGN = 255


def round_bf16(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    out = np.zeros(x.shape, dtype=np.uint16)
    sign = np.signbit(x).astype(np.uint16) << 15
    a = np.abs(x)
    nan = np.isnan(x)
    inf = np.isinf(a)
    fin = ~(nan | inf) & (a != 0)
    if fin.any():
        af = a[fin]
        _, e2 = np.frexp(af)
        e = e2.astype(np.int64) - 1  # af in [2^e, 2^(e+1))
        sub = e < -126
        shift = np.where(sub, 133, 7 - e)
        n = np.rint(np.ldexp(af, shift)).astype(np.int64)
        normal_bits = ((e + 127) << 7) + (n - 128)  # carry from n == 256 propagates
        bits = np.where(sub, n, normal_bits)
        bits = np.where(e > 127, 0x7F80, np.minimum(bits, 0x7F80))
        out[fin] = bits.astype(np.uint16)
    out[inf] = 0x7F80
    out |= sign
    out[nan] = 0x7FC0
    return out


def approx_lookup(bits, table, sign_slot, lut_min, bases, exp_like):
    """Per-element LUT subscription.

    Returns (output bits, subscription cycle, path code). Cycle is -1 when
    no LUT access happens.
    """
    b = np.asarray(bits, dtype=np.uint16).astype(np.int32)
    n = b.size
    sign = (b >> 15) & 1
    ef = (b >> 7) & 0xFF
    mant = b & 0x7F
    top = mant >> 4
    rem = mant & 0xF
    top = top + ((rem > 8) | ((rem == 8) & ((top & 1) == 1)))
    exp = ef - 127 + (top == 8)
    top = np.where(top == 8, 0, top)

    out = np.zeros(n, dtype=np.uint16)
    cycle = np.full(n, -1, dtype=np.int16)
    path = np.full(n, PATH_SPECIAL, dtype=np.uint8)

    nan = (ef == 0xFF) & (mant != 0)
    inf = (ef == 0xFF) & (mant == 0)
    zero = ef == 0
    out[inf & (sign == 0)] = 0x7F80
    out[zero] = 0x3F80 if exp_like else 0
    out[nan] = 0x7FC0

    normal = ~(nan | inf | zero)
    slot = np.asarray(sign_slot, dtype=np.int64)[sign]
    missing = normal & (slot < 0)
    path[missing] = PATH_MISSING_SIGN
    ok = normal & ~missing
    if not ok.any():
        return out, cycle, path

    bases = np.asarray(bases, dtype=np.int64)
    col = exp - bases
    off = bases - lut_min
    slot_c = np.where(slot < 0, 0, slot)
    inwin = ok & (col >= 0) & (col <= 7)
    under = ok & (col < 0)
    over = ok & (col > 7)
    if exp_like:
        colc = np.clip(col, 0, 7)
        vals = table[slot_c[ok], top[ok], (off + colc)[ok]]
        out[ok] = vals
        cycle[ok] = (top + colc)[ok]
        path[inwin] = PATH_LUT
        path[under | over] = PATH_CLAMP
    else:
        vals = table[slot_c[inwin], top[inwin], (off + col)[inwin]]
        out[inwin] = vals
        cycle[inwin] = (top + col)[inwin]
        path[inwin] = PATH_LUT
        out[under] = 0
        pos_over = over & (sign == 0)
        out[pos_over] = b[pos_over].astype(np.uint16)
        out[over & (sign == 1)] = 0
        path[under | over] = PATH_CLAMP
    return out, cycle, path


def gemm_accumulate(a, scales, b, group):
    """Temporal-reuse INT4 x BF16 GEMM accumulation in float32.

    ``a`` int8 (M, K), ``scales`` float32 (M, K // group), ``b`` float32 (K, N).
    """
    a = np.asarray(a, dtype=np.int8)
    b = np.asarray(b, dtype=np.float32)
    scales = np.asarray(scales, dtype=np.float32)
    m_dim, k_dim = a.shape
    n_dim = b.shape[1]
    mag = np.minimum(np.abs(a.astype(np.int16)), 7)
    neg = a < 0
    # value reuse: the 8 multiples of each weight-side operand by repeated addition
    mult = np.zeros((8, k_dim, n_dim), dtype=np.float32)
    for c in range(1, 8):
        mult[c] = mult[c - 1] + b
    acc = np.zeros((m_dim, n_dim), dtype=np.float32)
    for g in range(k_dim // group):
        p = np.zeros((m_dim, n_dim), dtype=np.float32)
        for k in range(g * group, (g + 1) * group):
            v = mult[mag[:, k], k, :]
            p = p + np.where(neg[:, k, None], -v, v)
        acc = acc + scales[:, g, None] * p
    return acc
