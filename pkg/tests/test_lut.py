import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from mugisim.lut import (
    DEFAULT_WINDOW,
    ClampStatus,
    Lut,
    LutWindow,
    NonlinearKind,
    WindowPolicy,
    build_lut,
    clamp_exponent,
    load_lut,
    lut_from_bytes,
    lut_to_bytes,
    reference,
    select_window,
    window_base,
)
from mugisim.numeric import Special, SplitInput

KINDS = list(NonlinearKind)


@pytest.mark.parametrize("kind", KINDS)
@pytest.mark.parametrize("signed", [False, True])
def test_entries_match_scalar_oracle(kind, signed):
    window = LutWindow(-6, 5, signed)
    lut = build_lut(kind, window)
    assert lut.table.shape == (2 if signed else 1, 8, 12)
    for (s, m), row in lut.rows.items():
        for col, e in enumerate(window.exponents):
            x = (-1) ** s * (1 + m / 8) * 2.0 ** int(e)
            assert int(row[col]) == oracles.round_to_bf16(oracles.FUNCS[kind.value](x)), (s, m, e)


def test_unsigned_tables_store_natural_sign():
    assert build_lut(NonlinearKind.EXP).signs == (1,)
    assert build_lut(NonlinearKind.SILU).signs == (0,)
    with pytest.raises(ValueError):
        build_lut(NonlinearKind.EXP).row(0, 0)


def test_smallest_magnitude_exp_row():
    lut = build_lut(NonlinearKind.EXP, LutWindow(-3, 4))
    assert lut.entry(1, 0, -3) == oracles.round_to_bf16(math.exp(-(2.0**-3)))


def test_exp_rows_monotone():
    lut = build_lut(NonlinearKind.EXP, LutWindow(-6, 5, True))
    vals = oracles.decode
    for m in range(8):
        neg = [vals(int(v)) for v in lut.row(1, m)]
        pos = [vals(int(v)) for v in lut.row(0, m)]
        assert all(a >= b for a, b in zip(neg, neg[1:]))
        assert all(a <= b for a, b in zip(pos, pos[1:]))


def test_table_is_read_only():
    lut = build_lut(NonlinearKind.SILU)
    with pytest.raises(ValueError):
        lut.table[0, 0, 0] = 0


def test_reference_functions():
    x = np.array([-2.0, 0.0, 1.5])
    assert np.allclose(reference(NonlinearKind.EXP, x), np.exp(x))
    assert np.allclose(reference(NonlinearKind.SILU, x), x / (1 + np.exp(-x)))
    g = reference(NonlinearKind.GELU, x)
    assert np.allclose(g, [0.5 * v * (1 + math.erf(v / math.sqrt(2))) for v in x])
    assert np.allclose(reference(NonlinearKind.GELU_TANH, x), g, atol=1e-3)
    assert np.allclose(reference(NonlinearKind.GELU_FAST, x), reference(NonlinearKind.GELU_TANH, x), atol=1e-8)


class TestWindow:
    def test_align_max_from_wide_table(self):
        assert window_base(DEFAULT_WINDOW, (-2, 4), WindowPolicy.ALIGN_MAX) == -3

    def test_exact_fit(self):
        assert window_base(LutWindow(-3, 4), (-3, 4), WindowPolicy.ALIGN_MAX) == -3

    def test_clamped_to_table_top(self):
        assert window_base(LutWindow(0, 7), (5, 12), WindowPolicy.ALIGN_MAX) == 0

    def test_clamped_to_table_bottom(self):
        assert window_base(DEFAULT_WINDOW, (-20, -15), WindowPolicy.ALIGN_MAX) == -6

    def test_align_min(self):
        assert window_base(DEFAULT_WINDOW, (-5, 0), WindowPolicy.ALIGN_MIN) == -5
        assert window_base(DEFAULT_WINDOW, (3, 3), WindowPolicy.ALIGN_MIN) == -2

    def test_narrow_table_rejected(self):
        with pytest.raises(ValueError):
            window_base(LutWindow(0, 3), (0, 3), WindowPolicy.ALIGN_MAX)

    def test_select_window_view(self):
        lut = build_lut(NonlinearKind.EXP, DEFAULT_WINDOW)
        sw = select_window(lut, (-1, 4))
        assert list(sw.exponents) == list(range(-3, 5))
        assert np.array_equal(sw.entries, lut.table[:, :, 3:11])

    def test_no_finite_inputs(self):
        lut = build_lut(NonlinearKind.EXP, DEFAULT_WINDOW)
        assert select_window(lut, None).top_exp == 5

    @settings(max_examples=200, deadline=None)
    @given(st.integers(-10, 2), st.integers(0, 12), st.integers(-30, 30), st.integers(0, 20),
           st.sampled_from(list(WindowPolicy)))
    def test_window_inside_table(self, lo, extra, emin, span, policy):
        w = LutWindow(lo, lo + 7 + extra)
        base = window_base(w, (emin, emin + span), policy)
        assert w.min_exp <= base <= w.max_exp - 7
        anchor = emin + span - 7 if policy is WindowPolicy.ALIGN_MAX else emin
        if w.min_exp <= anchor <= w.max_exp - 7:
            assert base == anchor


class TestClamp:
    sw = select_window(build_lut(NonlinearKind.EXP, LutWindow(-3, 4, True)), (-3, 4))

    def test_in_window(self):
        c = clamp_exponent(SplitInput(0, 3, 2), self.sw, NonlinearKind.EXP)
        assert (c.status, c.column) == (ClampStatus.IN_WINDOW, 5)

    def test_silu_underflow(self):
        c = clamp_exponent(SplitInput(0, 0, -5), self.sw, NonlinearKind.SILU)
        assert (c.status, c.column) == (ClampStatus.UNDERFLOW, -1)

    def test_exp_overflow_reads_last_column(self):
        c = clamp_exponent(SplitInput(1, 0, 6), self.sw, NonlinearKind.EXP)
        assert (c.status, c.column) == (ClampStatus.OVERFLOW, 7)
        entry = int(self.sw.entries[1, 0, c.column])
        assert entry == oracles.round_to_bf16(math.exp(-(2.0**4)))

    def test_exp_underflow_reads_first_column(self):
        c = clamp_exponent(SplitInput(1, 0, -9), self.sw, NonlinearKind.EXP)
        assert (c.status, c.column) == (ClampStatus.UNDERFLOW, 0)

    def test_special_rejected(self):
        with pytest.raises(ValueError):
            clamp_exponent(SplitInput(0, 0, 0, Special.ZERO), self.sw, NonlinearKind.EXP)


class TestSerialization:
    @pytest.mark.parametrize("kind", KINDS)
    @pytest.mark.parametrize("suffix", [".lut", ".json"])
    def test_round_trip(self, tmp_path, kind, suffix):
        from mugisim.lut import save_lut

        lut = build_lut(kind, LutWindow(-4, 6, kind is NonlinearKind.SILU))
        path = tmp_path / f"t{suffix}"
        save_lut(lut, path)
        back = load_lut(path)
        assert back == lut and hash(back) == hash(lut)

    def test_bad_magic(self):
        data = bytearray(lut_to_bytes(build_lut(NonlinearKind.EXP)))
        data[0] ^= 0xFF
        with pytest.raises(ValueError, match="magic"):
            lut_from_bytes(bytes(data))

    def test_truncated(self):
        data = lut_to_bytes(build_lut(NonlinearKind.EXP))
        with pytest.raises(ValueError):
            lut_from_bytes(data[:-2])
        with pytest.raises(ValueError):
            lut_from_bytes(data[:5])

    def test_little_endian_layout(self):
        lut = build_lut(NonlinearKind.EXP, LutWindow(-3, 4))
        body = lut_to_bytes(lut)[14:]  # 8-byte magic, kind, signed, two int16 exponents
        first = int(lut.table[0, 0, 0])
        assert body[:2] == bytes([first & 0xFF, first >> 8])

    def test_shape_checked(self):
        with pytest.raises(ValueError):
            Lut(NonlinearKind.EXP, LutWindow(-3, 4), np.zeros((1, 8, 7), np.uint16))
