"""Value-centric lookup tables for exp, SiLU and GELU.

A table row is indexed by (sign, 3-bit mantissa index) and holds one BF16
result per exponent of the table window. Per mapping an 8-column sliding
window is cut out of the full table.
"""
from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .numeric import SplitInput, Special, float_to_bf16_bits

WINDOW_COLUMNS = 8
ROWS_PER_SIGN = 8

GELU_TANH_COEFF = 0.044715
SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)


class NonlinearKind(Enum):
    EXP = "exp"
    SILU = "silu"
    GELU = "gelu"
    GELU_TANH = "gelu_tanh"
    GELU_FAST = "gelu_fast"

    @property
    def exp_like(self) -> bool:
        """Exp clamps to LUT entries; the others flush or pass through."""
        return self is NonlinearKind.EXP

    @property
    def natural_sign(self) -> int:
        """Sign stored by an unsigned table (exp sees inputs <= 0 after max subtraction)."""
        return 1 if self is NonlinearKind.EXP else 0


_KIND_CODES = {k: i for i, k in enumerate(NonlinearKind)}
_CODE_KINDS = {i: k for k, i in _KIND_CODES.items()}

_erf = np.frompyfunc(math.erf, 1, 1)


def reference(kind: NonlinearKind, x) -> np.ndarray:
    """Double-precision reference function."""
    x = np.asarray(x, dtype=np.float64)
    with np.errstate(over="ignore", invalid="ignore"):
        if kind is NonlinearKind.EXP:
            return np.exp(x)
        if kind is NonlinearKind.SILU:
            return x / (1.0 + np.exp(-x))
        if kind is NonlinearKind.GELU:
            return 0.5 * x * (1.0 + _erf(x / math.sqrt(2.0)).astype(np.float64))
        if kind is NonlinearKind.GELU_TANH:
            return 0.5 * x * (1.0 + np.tanh(SQRT_2_OVER_PI * (x + GELU_TANH_COEFF * x**3)))
        if kind is NonlinearKind.GELU_FAST:
            return 0.5 * x * (1.0 + np.tanh(0.7978845608 * x * (1.0 + GELU_TANH_COEFF * x * x)))
    raise ValueError(f"unknown kind {kind}")


def reference_at_zero(kind: NonlinearKind) -> float:
    return 1.0 if kind is NonlinearKind.EXP else 0.0


@dataclass(frozen=True)
class LutWindow:
    min_exp: int
    max_exp: int
    signed: bool = False

    def __post_init__(self) -> None:
        if self.max_exp < self.min_exp:
            raise ValueError(f"empty LUT window [{self.min_exp}, {self.max_exp}]")

    @property
    def width(self) -> int:
        return self.max_exp - self.min_exp + 1

    @property
    def exponents(self) -> np.ndarray:
        return np.arange(self.min_exp, self.max_exp + 1)


DEFAULT_WINDOW = LutWindow(-6, 5)


class WindowPolicy(Enum):
    ALIGN_MAX = "align_max"
    ALIGN_MIN = "align_min"


@dataclass(frozen=True, eq=False)
class Lut:
    """Immutable table of BF16 results, shape (signs, 8, window width)."""

    kind: NonlinearKind
    window: LutWindow
    table: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        expected = (len(self.signs), ROWS_PER_SIGN, self.window.width)
        if self.table.shape != expected or self.table.dtype != np.uint16:
            raise ValueError(f"table must be uint16 {expected}, got {self.table.dtype} {self.table.shape}")
        self.table.flags.writeable = False

    @property
    def signs(self) -> tuple[int, ...]:
        return (0, 1) if self.window.signed else (self.kind.natural_sign,)

    @property
    def sign_slot(self) -> np.ndarray:
        """Table slot for sign 0 and 1 (-1 when the sign is not stored)."""
        slot = np.full(2, -1, dtype=np.int64)
        for i, s in enumerate(self.signs):
            slot[s] = i
        return slot

    @property
    def row_count(self) -> int:
        return self.table.shape[0] * ROWS_PER_SIGN

    def row(self, sign: int, mantissa_index: int) -> np.ndarray:
        slot = int(self.sign_slot[sign])
        if slot < 0:
            raise ValueError(f"{self.kind.value} LUT does not store sign {sign}")
        return self.table[slot, mantissa_index]

    @property
    def rows(self) -> dict[tuple[int, int], np.ndarray]:
        return {(s, m): self.row(s, m) for s in self.signs for m in range(ROWS_PER_SIGN)}

    def entry(self, sign: int, mantissa_index: int, exponent: int) -> int:
        if not self.window.min_exp <= exponent <= self.window.max_exp:
            raise ValueError(f"exponent {exponent} outside LUT window")
        return int(self.row(sign, mantissa_index)[exponent - self.window.min_exp])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Lut):
            return NotImplemented
        return (
            self.kind is other.kind
            and self.window == other.window
            and np.array_equal(self.table, other.table)
        )

    def __hash__(self) -> int:
        return hash((self.kind, self.window, self.table.tobytes()))


def lut_inputs(window: LutWindow, signs: tuple[int, ...]) -> np.ndarray:
    """Input value for every table cell, shape (signs, 8, width), float64."""
    s = np.array([(-1.0) ** sg for sg in signs])[:, None, None]
    m = (1.0 + np.arange(ROWS_PER_SIGN) / 8.0)[None, :, None]
    e = np.ldexp(1.0, window.exponents)[None, None, :]
    return s * m * e


def build_lut(kind: NonlinearKind, window: LutWindow = DEFAULT_WINDOW) -> Lut:
    signs = (0, 1) if window.signed else (kind.natural_sign,)
    vals = reference(kind, lut_inputs(window, signs))
    return Lut(kind, window, float_to_bf16_bits(vals).astype(np.uint16))


@dataclass(frozen=True)
class SlidingWindow:
    base_exp: int
    entries: np.ndarray = field(repr=False)  # (signs, 8, 8) view into the table

    @property
    def exponents(self) -> range:
        return range(self.base_exp, self.base_exp + WINDOW_COLUMNS)

    @property
    def top_exp(self) -> int:
        return self.base_exp + WINDOW_COLUMNS - 1


def window_base(window: LutWindow, stats: tuple[int, int], policy: WindowPolicy) -> int:
    if window.width < WINDOW_COLUMNS:
        raise ValueError(f"LUT window width {window.width} is narrower than {WINDOW_COLUMNS} columns")
    lo, hi = stats
    want = hi - (WINDOW_COLUMNS - 1) if policy is WindowPolicy.ALIGN_MAX else lo
    return int(min(max(want, window.min_exp), window.max_exp - (WINDOW_COLUMNS - 1)))


def select_window(
    lut: Lut, stats: tuple[int, int] | None, policy: WindowPolicy = WindowPolicy.ALIGN_MAX
) -> SlidingWindow:
    """Pick the 8 exponent columns used for one mapping.

    With no finite inputs (``stats`` None) the window sits at the top of the
    table, which only matters for bookkeeping since every input is special.
    """
    if stats is None:
        stats = (lut.window.max_exp, lut.window.max_exp)
    base = window_base(lut.window, stats, policy)
    off = base - lut.window.min_exp
    return SlidingWindow(base, lut.table[:, :, off : off + WINDOW_COLUMNS])


class ClampStatus(Enum):
    IN_WINDOW = "in_window"
    UNDERFLOW = "underflow"
    OVERFLOW = "overflow"


@dataclass(frozen=True)
class Clamp:
    status: ClampStatus
    column: int  # column read from the window; -1 when no LUT access happens


def clamp_exponent(x: SplitInput, sw: SlidingWindow, kind: NonlinearKind) -> Clamp:
    if x.special is not Special.NONE:
        raise ValueError("special inputs bypass exponent clamping")
    col = x.exponent - sw.base_exp
    if 0 <= col < WINDOW_COLUMNS:
        return Clamp(ClampStatus.IN_WINDOW, col)
    if col < 0:
        return Clamp(ClampStatus.UNDERFLOW, 0 if kind.exp_like else -1)
    return Clamp(ClampStatus.OVERFLOW, WINDOW_COLUMNS - 1 if kind.exp_like else -1)


# ---------------------------------------------------------------------------
# serialization

_MAGIC = b"MUGILUT1"
_HEADER = struct.Struct("<8sBBhh")


def lut_to_bytes(lut: Lut) -> bytes:
    head = _HEADER.pack(
        _MAGIC, _KIND_CODES[lut.kind], int(lut.window.signed), lut.window.min_exp, lut.window.max_exp
    )
    return head + lut.table.astype("<u2").tobytes(order="C")


def lut_from_bytes(data: bytes) -> Lut:
    if len(data) < _HEADER.size:
        raise ValueError("truncated LUT header")
    magic, code, signed, lo, hi = _HEADER.unpack_from(data)
    if magic != _MAGIC:
        raise ValueError("not a LUT file (bad magic)")
    if code not in _CODE_KINDS:
        raise ValueError(f"unknown LUT kind code {code}")
    window = LutWindow(lo, hi, bool(signed))
    kind = _CODE_KINDS[code]
    n_signs = 2 if window.signed else 1
    count = n_signs * ROWS_PER_SIGN * window.width
    body = data[_HEADER.size :]
    if len(body) != 2 * count:
        raise ValueError(f"LUT body has {len(body)} bytes, expected {2 * count}")
    table = np.frombuffer(body, dtype="<u2").astype(np.uint16).reshape(n_signs, ROWS_PER_SIGN, window.width)
    return Lut(kind, window, table.copy())


def lut_to_json(lut: Lut) -> str:
    doc = {
        "kind": lut.kind.value,
        "min_exp": lut.window.min_exp,
        "max_exp": lut.window.max_exp,
        "signed": lut.window.signed,
        "signs": list(lut.signs),
        "rows": [[f"0x{int(v):04x}" for v in row] for row in lut.table.reshape(-1, lut.window.width)],
    }
    return json.dumps(doc, indent=1)


def lut_from_json(text: str) -> Lut:
    doc = json.loads(text)
    window = LutWindow(int(doc["min_exp"]), int(doc["max_exp"]), bool(doc["signed"]))
    kind = NonlinearKind(doc["kind"])
    n_signs = 2 if window.signed else 1
    rows = np.array([[int(v, 16) for v in row] for row in doc["rows"]], dtype=np.uint16)
    return Lut(kind, window, rows.reshape(n_signs, ROWS_PER_SIGN, window.width))


def save_lut(lut: Lut, path: str | Path) -> None:
    path = Path(path)
    if path.suffix == ".json":
        path.write_text(lut_to_json(lut))
    else:
        path.write_bytes(lut_to_bytes(lut))


def load_lut(path: str | Path) -> Lut:
    path = Path(path)
    if path.suffix == ".json":
        return lut_from_json(path.read_text())
    return lut_from_bytes(path.read_bytes())
