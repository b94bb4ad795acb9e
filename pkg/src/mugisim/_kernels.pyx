# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels; semantics mirror ``_kernels_py`` exactly."""
import numpy as np
cimport numpy as cnp
from libc.math cimport frexp, ldexp, rint, isnan, isinf, fabs, signbit
from libc.stdint cimport uint16_t, int16_t, uint8_t, int8_t, int32_t, int64_t

cnp.import_array()

cdef enum:
    PATH_LUT = 0
    PATH_SPECIAL = 1
    PATH_CLAMP = 2
    PATH_MISSING_SIGN = 255


cdef inline uint16_t _round_one(double x) nogil:
    cdef uint16_t s = 0x8000 if signbit(x) else 0
    cdef double a
    cdef int e2
    cdef int64_t e, n, bits
    if isnan(x):
        return 0x7FC0
    a = fabs(x)
    if isinf(a):
        return s | 0x7F80
    if a == 0.0:
        return s
    frexp(a, &e2)
    e = e2 - 1
    if e < -126:
        n = <int64_t>rint(ldexp(a, 133))
        return s | <uint16_t>n
    if e > 127:
        return s | 0x7F80
    n = <int64_t>rint(ldexp(a, <int>(7 - e)))
    bits = ((e + 127) << 7) + (n - 128)
    if bits > 0x7F80:
        bits = 0x7F80
    return s | <uint16_t>bits


def round_bf16(const double[::1] x):
    cdef Py_ssize_t i, n = x.shape[0]
    out = np.empty(n, dtype=np.uint16)
    cdef uint16_t[::1] o = out
    with nogil:
        for i in range(n):
            o[i] = _round_one(x[i])
    return out


def approx_lookup(bits, table, sign_slot, int lut_min, bases, bint exp_like):
    cdef const uint16_t[::1] b = np.ascontiguousarray(bits, dtype=np.uint16)
    cdef const uint16_t[:, :, ::1] t = np.ascontiguousarray(table, dtype=np.uint16)
    cdef const int64_t[::1] slots = np.ascontiguousarray(sign_slot, dtype=np.int64)
    cdef const int64_t[::1] bs = np.ascontiguousarray(bases, dtype=np.int64)
    cdef Py_ssize_t i, n = b.shape[0]
    out = np.zeros(n, dtype=np.uint16)
    cyc = np.full(n, -1, dtype=np.int16)
    pth = np.full(n, PATH_SPECIAL, dtype=np.uint8)
    cdef uint16_t[::1] o = out
    cdef int16_t[::1] c = cyc
    cdef uint8_t[::1] p = pth
    cdef int32_t v, sign, ef, mant, top, rem, exp, col, colc, off
    cdef int64_t slot
    with nogil:
        for i in range(n):
            v = b[i]
            sign = (v >> 15) & 1
            ef = (v >> 7) & 0xFF
            mant = v & 0x7F
            if ef == 0xFF:
                if mant != 0:
                    o[i] = 0x7FC0
                elif sign == 0:
                    o[i] = 0x7F80
                continue
            if ef == 0:
                o[i] = 0x3F80 if exp_like else 0
                continue
            slot = slots[sign]
            if slot < 0:
                p[i] = PATH_MISSING_SIGN
                continue
            top = mant >> 4
            rem = mant & 0xF
            if rem > 8 or (rem == 8 and (top & 1)):
                top += 1
            exp = ef - 127
            if top == 8:
                top = 0
                exp += 1
            col = exp - <int32_t>bs[i]
            off = <int32_t>bs[i] - lut_min
            if 0 <= col <= 7:
                o[i] = t[slot, top, off + col]
                c[i] = <int16_t>(top + col)
                p[i] = PATH_LUT
            elif exp_like:
                colc = 0 if col < 0 else 7
                o[i] = t[slot, top, off + colc]
                c[i] = <int16_t>(top + colc)
                p[i] = PATH_CLAMP
            else:
                p[i] = PATH_CLAMP
                if col > 7 and sign == 0:
                    o[i] = v
    return out, cyc, pth


def gemm_accumulate(a, scales, b, int group):
    cdef const int8_t[:, ::1] A = np.ascontiguousarray(a, dtype=np.int8)
    cdef const float[:, ::1] S = np.ascontiguousarray(scales, dtype=np.float32)
    cdef const float[:, ::1] B = np.ascontiguousarray(b, dtype=np.float32)
    cdef Py_ssize_t M = A.shape[0], K = A.shape[1], N = B.shape[1]
    cdef Py_ssize_t m, n, k, g, cc, G = K // group
    mult_arr = np.zeros((K, N, 8), dtype=np.float32)
    cdef float[:, :, ::1] mult = mult_arr
    out = np.zeros((M, N), dtype=np.float32)
    cdef float[:, ::1] O = out
    cdef float acc, part, val, prod
    cdef int mag
    with nogil:
        for k in range(K):
            for n in range(N):
                for cc in range(1, 8):
                    mult[k, n, cc] = mult[k, n, cc - 1] + B[k, n]
        for m in range(M):
            for n in range(N):
                acc = 0.0
                for g in range(G):
                    part = 0.0
                    for k in range(g * group, (g + 1) * group):
                        mag = A[m, k]
                        if mag < 0:
                            mag = -mag
                            if mag > 7:
                                mag = 7
                            val = -mult[k, n, mag]
                        else:
                            val = mult[k, n, mag]
                        part = part + val
                    prod = S[m, g] * part
                    acc = acc + prod
                O[m, n] = acc
    return out
