"""Closed-form timing for value-level-parallel arrays and baseline designs.

Every formula here has an event-driven counterpart in :mod:`mugisim.eventsim`;
the two agree cycle for cycle on small shapes.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Union

from .workload import Op, OpGraph, OpKind

ARRAY_COLUMNS = 8
MANTISSA_PHASE = 8
EXPONENT_PHASE = 8
COLUMN_STAGGER = ARRAY_COLUMNS - 1
LOAD_CYCLES = 8
KB = 1024


def ceil_div(a: int, b: int) -> int:
    return -(-a // b)


class Bound(Enum):
    COMPUTE = "compute"
    MEMORY = "memory"


@dataclass(frozen=True)
class ArrayConfig:
    """A value-level-parallel node: H rows by 8 columns plus a small vector unit."""

    height: int = 256
    width: int = ARRAY_COLUMNS
    isram_bytes: int = 64 * KB
    wsram_bytes: int = 64 * KB
    osram_bytes: int = 64 * KB
    input_word_bits: int = 16
    weight_word_bits: int = 4
    frequency_hz: float = 400e6
    pipeline_depth: int = 4
    vector_lanes: int = 8
    name: str = ""

    def __post_init__(self) -> None:
        if self.width != ARRAY_COLUMNS:
            raise ValueError(f"array width is fixed at {ARRAY_COLUMNS} columns, got {self.width}")
        if self.height < 1:
            raise ValueError("array height must be positive")
        if self.pipeline_depth < 0 or self.vector_lanes < 1:
            raise ValueError("pipeline depth must be >= 0 and vector lanes >= 1")

    @property
    def label(self) -> str:
        return self.name or f"Mugi({self.height})"

    @property
    def lanes(self) -> int:
        return self.height * self.width

    @property
    def nonlinear_depth(self) -> int:
        return MANTISSA_PHASE + EXPONENT_PHASE + COLUMN_STAGGER + self.pipeline_depth

    @property
    def gemm_depth(self) -> int:
        return COLUMN_STAGGER + self.pipeline_depth


class BaselineKind(Enum):
    SYSTOLIC = "systolic"
    SIMD = "simd"
    SYSTOLIC_FIGNA = "systolic_figna"
    SIMD_FIGNA = "simd_figna"
    TENSOR_CORE = "tensor_core"
    CARAT = "carat"
    PRECISE_VECTOR = "precise_vector"
    PWL_VECTOR = "pwl_vector"
    TAYLOR_VECTOR = "taylor_vector"
    MUGI_L = "mugi_l"

    @property
    def is_vector(self) -> bool:
        return self in (BaselineKind.PRECISE_VECTOR, BaselineKind.PWL_VECTOR, BaselineKind.TAYLOR_VECTOR)

    @property
    def weight_stationary(self) -> bool:
        return self in (
            BaselineKind.SYSTOLIC, BaselineKind.SIMD, BaselineKind.SYSTOLIC_FIGNA, BaselineKind.SIMD_FIGNA
        )

    @property
    def tree_reduced(self) -> bool:
        return self in (BaselineKind.SIMD, BaselineKind.SIMD_FIGNA)


_DEFAULT_COMPANION = {
    BaselineKind.SYSTOLIC: BaselineKind.PRECISE_VECTOR,
    BaselineKind.SIMD: BaselineKind.PRECISE_VECTOR,
    BaselineKind.SYSTOLIC_FIGNA: BaselineKind.PRECISE_VECTOR,
    BaselineKind.SIMD_FIGNA: BaselineKind.PRECISE_VECTOR,
    BaselineKind.TENSOR_CORE: BaselineKind.PRECISE_VECTOR,
    BaselineKind.CARAT: BaselineKind.PWL_VECTOR,
    BaselineKind.MUGI_L: BaselineKind.MUGI_L,
}

TENSOR_BLOCK = (8, 16, 16)  # M, N, K per cycle


@dataclass(frozen=True)
class BaselineConfig:
    """A comparison design.

    ``height`` is the array dimension (H x H for systolic/SIMD, H rows for
    Carat and Mugi-L). ``lanes`` sizes the vector array, either standalone
    (vector kinds) or as the nonlinear companion of a GEMM array, whose kind
    is ``nonlinear``.
    """

    kind: BaselineKind
    height: int = 16
    lanes: int = 16
    nonlinear: BaselineKind | None = None
    precise_cycles: int = 44
    pwl_segments: int = 22
    taylor_degree: int = 9
    pipeline_depth: int = 4
    lut_latency: int = 2
    tensor_fill: int = 0
    isram_bytes: int = 64 * KB
    wsram_bytes: int = 64 * KB
    osram_bytes: int = 64 * KB
    input_word_bits: int = 16
    weight_word_bits: int = 4
    frequency_hz: float = 400e6
    name: str = ""

    def __post_init__(self) -> None:
        if self.height < 1 or self.lanes < 1:
            raise ValueError("height and lanes must be positive")
        comp = self.companion
        if comp is not None and not (comp.is_vector or comp is BaselineKind.MUGI_L):
            raise ValueError(f"{comp.value} cannot serve as a nonlinear unit")

    @property
    def label(self) -> str:
        if self.name:
            return self.name
        short = {
            BaselineKind.SYSTOLIC: "SA", BaselineKind.SIMD: "SD", BaselineKind.SYSTOLIC_FIGNA: "SA-F",
            BaselineKind.SIMD_FIGNA: "SD-F", BaselineKind.TENSOR_CORE: "Tensor", BaselineKind.CARAT: "Carat",
            BaselineKind.PRECISE_VECTOR: "VA", BaselineKind.PWL_VECTOR: "PWL", BaselineKind.TAYLOR_VECTOR: "Taylor",
            BaselineKind.MUGI_L: "Mugi-L",
        }[self.kind]
        size = self.lanes if self.kind.is_vector else self.height
        return short if self.kind is BaselineKind.TENSOR_CORE else f"{short}({size})"

    @property
    def companion(self) -> BaselineKind | None:
        if self.kind.is_vector:
            return None
        return self.nonlinear or _DEFAULT_COMPANION[self.kind]

    def per_element_cycles(self, kind: BaselineKind | None = None) -> int:
        """Latency of one element through a vector unit of ``kind``."""
        kind = kind or self.kind
        if kind is BaselineKind.PRECISE_VECTOR:
            return self.precise_cycles
        if kind is BaselineKind.PWL_VECTOR:
            # segment search as a comparator tree, then one multiply-add
            return 1 + math.ceil(math.log2(self.pwl_segments))
        if kind is BaselineKind.TAYLOR_VECTOR:
            return self.taylor_degree
        if kind is BaselineKind.MUGI_L:
            return self.lut_latency
        raise ValueError(f"{kind.value} is not a nonlinear unit")

    @property
    def drain_cycles(self) -> int:
        if self.kind.tree_reduced:
            return math.ceil(math.log2(self.height)) + 1 if self.height > 1 else 1
        return self.height

    def as_vlp_array(self) -> ArrayConfig:
        """GEMM geometry of the VLP-style baselines (Carat, Mugi-L)."""
        return ArrayConfig(
            height=self.height, pipeline_depth=self.pipeline_depth, vector_lanes=self.lanes,
            isram_bytes=self.isram_bytes, wsram_bytes=self.wsram_bytes, osram_bytes=self.osram_bytes,
            frequency_hz=self.frequency_hz, weight_word_bits=self.weight_word_bits,
        )


Design = Union[ArrayConfig, BaselineConfig]

NOC_SHAPES = {(1, 1), (2, 1), (2, 2), (4, 4), (8, 8)}


@dataclass(frozen=True)
class NocConfig:
    rows: int = 1
    cols: int = 1
    frequency_hz: float = 400e6
    offchip_bandwidth: float = 256e9  # bytes/s
    link_bytes_per_cycle: float | None = None  # None: report the requirement only

    def __post_init__(self) -> None:
        if (self.rows, self.cols) not in NOC_SHAPES:
            raise ValueError(f"mesh {self.rows}x{self.cols} not one of {sorted(NOC_SHAPES)}")
        if self.offchip_bandwidth <= 0:
            raise ValueError("off-chip bandwidth must be positive")

    @property
    def nodes(self) -> int:
        return self.rows * self.cols

    @property
    def mean_hops(self) -> float:
        return 0.0 if self.nodes == 1 else (self.rows + self.cols) / 2.0


@dataclass
class OpTiming:
    name: str
    cycles: int
    busy_cycles: int
    utilization: float
    column_utilization: float = 1.0
    mem_bytes_read: int = 0
    mem_bytes_written: int = 0
    bound: Bound = Bound.COMPUTE
    compute_cycles: int = 0
    transfer_cycles: int = 0
    nodes_active: int = 1
    noc_ok: bool = True
    noc_bytes_per_cycle: float = 0.0
    buffers_fit: bool = True
    category: str = ""
    shape: dict = field(default_factory=dict)
    events: Counter = field(default_factory=Counter)
    unmodeled: bool = False

    def __post_init__(self) -> None:
        if not self.compute_cycles:
            self.compute_cycles = self.cycles

    def to_record(self) -> dict:
        return {
            "name": self.name,
            "category": self.category,
            "shape": dict(self.shape),
            "cycles": self.cycles,
            "compute_cycles": self.compute_cycles,
            "transfer_cycles": self.transfer_cycles,
            "busy_cycles": self.busy_cycles,
            "utilization": self.utilization,
            "column_utilization": self.column_utilization,
            "bound": self.bound.value,
            "mem_bytes_read": self.mem_bytes_read,
            "mem_bytes_written": self.mem_bytes_written,
            "nodes_active": self.nodes_active,
            "noc_ok": self.noc_ok,
            "noc_bytes_per_cycle": self.noc_bytes_per_cycle,
            "buffers_fit": self.buffers_fit,
            "unmodeled": self.unmodeled,
            "events": dict(sorted(self.events.items())),
        }


# ---------------------------------------------------------------------------
# value-level-parallel array


def nonlinear_cycles(cfg: ArrayConfig, elements: int, softmax: bool = False, name: str = "nonlinear") -> OpTiming:
    """Mappings of H x 8 elements enter every 8 cycles; softmax adds vector passes."""
    if elements < 1:
        raise ValueError("elements must be >= 1")
    per = cfg.lanes
    mappings = ceil_div(elements, per)
    busy = MANTISSA_PHASE * mappings
    cycles = busy + cfg.nonlinear_depth
    ev = Counter(
        tc_convert=elements,
        subscribe=2 * elements,
        or_tree=elements,
        pp_select=elements,
        sram_read_bits=elements * cfg.input_word_bits + mappings * 8 * ARRAY_COLUMNS * 16,
        sram_write_bits=elements * cfg.input_word_bits,
    )
    if softmax:
        vec = ceil_div(elements, cfg.vector_lanes)
        cycles += 2 * vec + 1
        ev.update(oacc=elements, vec_op=2 * elements + 1)
    return OpTiming(
        name, cycles, busy, elements / (mappings * per), 1.0, category="nonlinear",
        shape={"elements": elements}, events=ev,
    )


def _group_lengths(k: int, group: int) -> list[tuple[int, int]]:
    """(length, multiplicity) of the quantisation groups along K."""
    full, rem = divmod(k, group)
    out = [(group, full)] if full else []
    if rem:
        out.append((rem, 1))
    return out


def _split_sizes(total: int, size: int) -> list[tuple[int, int]]:
    """(tile extent, number of tiles) for a dimension cut into ``size`` pieces."""
    full, rem = divmod(total, size)
    out = [(size, full)] if full else []
    if rem:
        out.append((rem, 1))
    return out


def dequant_cycles(cfg: ArrayConfig, rows: int, cols: int) -> int:
    return ceil_div(rows * cols, cfg.vector_lanes)


def tile_busy_cycles(cfg: ArrayConfig, rows: int, cols: int, k: int, group: int) -> int:
    """One 8-cycle window per K step; each group's scale pass overlaps its windows."""
    v = dequant_cycles(cfg, rows, cols)
    return sum(mult * max(MANTISSA_PHASE * length, v) for length, mult in _group_lengths(k, group))


def gemm_cycles(
    cfg: ArrayConfig,
    m: int,
    n: int,
    k: int,
    count: int = 1,
    group_size: int | None = None,
    weight_bits: int | None = None,
    name: str = "gemm",
) -> OpTiming:
    """Output-stationary tiling: weights on rows, up to 8 input columns per tile."""
    if min(m, n, k, count) < 1:
        raise ValueError("GEMM dimensions must be >= 1")
    group = k if group_size is None else min(group_size, k)
    wb = cfg.weight_word_bits if weight_bits is None else weight_bits
    h = cfg.height
    rt, ct = ceil_div(m, h), ceil_div(n, ARRAY_COLUMNS)
    tiles = rt * ct * count
    busy = active = col_active = 0
    for rows, nr in _split_sizes(m, h):
        for cols, nc in _split_sizes(n, ARRAY_COLUMNS):
            t = tile_busy_cycles(cfg, rows, cols, k, group) * nr * nc * count
            busy += t
            active += rows * cols * t
            col_active += cols * t
    cycles = busy + tiles * cfg.gemm_depth
    groups = ceil_div(k, group)
    ev = Counter(
        tc_convert=ct * m * k * count,
        subscribe=m * n * k * count,
        or_tree=m * n * k * count,
        oacc=m * n * k * count,
        col_acc=ARRAY_COLUMNS * k * rt * n * count,
        vec_op=m * n * groups * count,
        sram_read_bits=(ct * m * k * wb + rt * n * k * cfg.input_word_bits + ct * m * groups * 16) * count,
        sram_write_bits=m * n * cfg.input_word_bits * count,
    )
    return OpTiming(
        name, cycles, busy, active / (busy * cfg.lanes), col_active / (busy * ARRAY_COLUMNS),
        category="gemm", shape={"m": m, "n": n, "k": k, "count": count, "tiles": tiles}, events=ev,
    )


# ---------------------------------------------------------------------------
# baselines


def weight_stationary_cycles(cfg: BaselineConfig, m: int, n: int, k: int, count: int = 1,
                             name: str = "gemm") -> OpTiming:
    """H x H weight tiles with double-buffered loads; N input vectors stream per tile."""
    h = cfg.height
    tiles = ceil_div(k, h) * ceil_div(m, h) * count
    interval = max(h, n)
    cycles = h + (tiles - 1) * interval + n + cfg.drain_cycles
    busy = tiles * interval
    macs = m * n * k * count
    util = macs / (busy * h * h)
    mac_event = {
        BaselineKind.SYSTOLIC: "sa_mac", BaselineKind.SIMD: "sd_mac",
        BaselineKind.SYSTOLIC_FIGNA: "figna_mac", BaselineKind.SIMD_FIGNA: "figna_mac",
    }[cfg.kind]
    ev = Counter({
        mac_event: macs,
        "acc_op": m * n * ceil_div(k, h) * count,
        "sram_read_bits": tiles * h * h * cfg.weight_word_bits + tiles * n * h * cfg.input_word_bits,
        "sram_write_bits": m * n * cfg.input_word_bits * count,
    })
    return OpTiming(name, cycles, busy, util, util, category="gemm",
                    shape={"m": m, "n": n, "k": k, "count": count, "tiles": tiles}, events=ev)


def tensor_core_cycles(cfg: BaselineConfig, m: int, n: int, k: int, count: int = 1,
                       name: str = "gemm") -> OpTiming:
    bm, bn, bk = TENSOR_BLOCK
    blocks = ceil_div(m, bm) * ceil_div(n, bn) * ceil_div(k, bk) * count
    macs = m * n * k * count
    util = macs / (blocks * bm * bn * bk)
    ev = Counter(
        tensor_mac=macs,
        sram_read_bits=(m * k * cfg.weight_word_bits + k * n * cfg.input_word_bits) * count,
        sram_write_bits=m * n * cfg.input_word_bits * count,
    )
    return OpTiming(name, blocks + cfg.tensor_fill, blocks, util, util, category="gemm",
                    shape={"m": m, "n": n, "k": k, "count": count, "blocks": blocks}, events=ev)


_UNIT_EVENT = {
    BaselineKind.PRECISE_VECTOR: "precise_op",
    BaselineKind.PWL_VECTOR: "pwl_op",
    BaselineKind.TAYLOR_VECTOR: "taylor_op",
    BaselineKind.MUGI_L: "lut_read",
}


def vector_unit_cycles(cfg: BaselineConfig, unit: BaselineKind, elements: int, softmax: bool = False,
                       name: str = "nonlinear") -> OpTiming:
    """Elementwise nonlinear on a lane array.

    The precise unit is iterative (a lane is held for its full latency); PWL,
    Taylor and LUT units are pipelined at one element per lane per cycle.
    Softmax adds a max-subtract pass and a normalise pass at one element per
    lane per cycle plus a one-cycle sum store.
    """
    if elements < 1:
        raise ValueError("elements must be >= 1")
    lanes = cfg.height if unit is BaselineKind.MUGI_L else cfg.lanes
    latency = cfg.per_element_cycles(unit)
    waves = ceil_div(elements, lanes)
    if unit is BaselineKind.PRECISE_VECTOR:
        busy = waves * latency
        cycles = busy
    else:
        busy = waves
        cycles = waves - 1 + latency
    count = elements * (cfg.taylor_degree if unit is BaselineKind.TAYLOR_VECTOR else 1)
    ev = Counter({
        _UNIT_EVENT[unit]: count,
        "sram_read_bits": elements * cfg.input_word_bits,
        "sram_write_bits": elements * cfg.input_word_bits,
    })
    if softmax:
        vec_lanes = cfg.lanes
        cycles += 2 * ceil_div(elements, vec_lanes) + 1
        ev.update(oacc=elements, vec_op=2 * elements + 1)
    return OpTiming(name, cycles, busy, elements / (waves * lanes), 1.0, category="nonlinear",
                    shape={"elements": elements}, events=ev)


def baseline_cycles(cfg: BaselineConfig, op: Op) -> OpTiming:
    if op.kind is OpKind.UNMODELED:
        return unmodeled_timing(op)
    if op.is_gemm:
        if cfg.kind.is_vector:
            raise ValueError(f"{cfg.kind.value} array cannot run GEMM {op.name}")
        if cfg.kind.weight_stationary:
            return weight_stationary_cycles(cfg, op.m, op.n, op.k, op.count, name=op.name)
        if cfg.kind is BaselineKind.TENSOR_CORE:
            return tensor_core_cycles(cfg, op.m, op.n, op.k, op.count, name=op.name)
        return gemm_cycles(cfg.as_vlp_array(), op.m, op.n, op.k, op.count, op.group_size,
                           op.weight_bits, name=op.name)
    unit = cfg.kind if cfg.kind.is_vector else cfg.companion
    return vector_unit_cycles(cfg, unit, op.elements, softmax=op.kind is OpKind.SOFTMAX, name=op.name)


def unmodeled_timing(op: Op) -> OpTiming:
    return OpTiming(op.name, 0, 0, 0.0, 0.0, category=op.category, shape={"elements": op.elements},
                    unmodeled=True)


def op_timing(design: Design, op: Op) -> OpTiming:
    """Single-node compute timing of one op (all ``count`` instances)."""
    if isinstance(design, BaselineConfig):
        t = baseline_cycles(design, op)
    elif op.kind is OpKind.UNMODELED:
        t = unmodeled_timing(op)
    elif op.is_gemm:
        t = gemm_cycles(design, op.m, op.n, op.k, op.count, op.group_size, op.weight_bits, name=op.name)
    else:
        t = nonlinear_cycles(design, op.elements, softmax=op.kind is OpKind.SOFTMAX, name=op.name)
    t.category = op.category
    t.mem_bytes_read = op.bytes_read()
    t.mem_bytes_written = op.bytes_written()
    return t


# ---------------------------------------------------------------------------
# buffers, memory and mesh


def sram_sizes(design: Design) -> dict[str, int]:
    return {"isram": design.isram_bytes, "wsram": design.wsram_bytes, "osram": design.osram_bytes}


def working_set(design: Design, op: Op) -> dict[str, int]:
    """Bytes one buffer half must hold; double buffering needs twice this."""
    ab = op.act_bits // 8
    if op.kind is OpKind.UNMODELED:
        return {"isram": 0, "wsram": 0, "osram": 0}
    if not op.is_gemm:
        if isinstance(design, ArrayConfig):
            rows = design.height
        elif design.companion is BaselineKind.MUGI_L or design.kind is BaselineKind.MUGI_L:
            rows = design.height
        else:
            rows = design.lanes
        chunk = min(op.elements, rows * ARRAY_COLUMNS) * ab
        return {"isram": 0, "wsram": 0, "osram": chunk}
    if isinstance(design, BaselineConfig) and design.kind.weight_stationary:
        h = design.height
        rows, cols, kk = min(h, op.m), op.n, min(h, op.k)
    elif isinstance(design, BaselineConfig) and design.kind is BaselineKind.TENSOR_CORE:
        rows, cols, kk = min(TENSOR_BLOCK[0], op.m), min(TENSOR_BLOCK[1], op.n), min(TENSOR_BLOCK[2], op.k)
    else:
        rows, cols, kk = min(design.height, op.m), min(ARRAY_COLUMNS, op.n), min(op.group_size, op.k)
    return {
        "wsram": ceil_div(rows * kk * op.weight_bits, 8) + rows * ab,
        "isram": kk * cols * ab,
        "osram": rows * cols * ab,
    }


def buffers_fit(design: Design, op: Op) -> bool:
    need = working_set(design, op)
    have = sram_sizes(design)
    return all(2 * need[k] <= have[k] for k in need)


def transfer_cycles(nbytes: int, frequency_hz: float, bandwidth: float) -> int:
    return math.ceil(nbytes * frequency_hz / bandwidth) if nbytes else 0


def _lanes_for_reduction(design: Design) -> int:
    return design.vector_lanes if isinstance(design, ArrayConfig) else design.lanes


def partition_op(design: Design, op: Op, nodes: int) -> tuple[Op, int, int]:
    """Even split of one op over ``nodes``.

    Returns the per-node op, the number of active nodes and the inter-node
    reduction cycles. Independent instances are spread first; a single large
    GEMM is cut along M (output stationary) and, when that wastes rows, K with
    a reduction tree across nodes.
    """
    if nodes == 1 or op.kind is OpKind.UNMODELED:
        return op, 1, 0
    if not op.is_gemm:
        per = ceil_div(op.elements, nodes)
        return replace(op, elements=per), min(nodes, op.elements), 0
    if op.count >= nodes:
        return replace(op, count=ceil_div(op.count, nodes)), nodes, 0
    per_instance = nodes // op.count
    best = None
    for sm in range(1, per_instance + 1):
        if per_instance % sm:
            continue
        sk = per_instance // sm
        if sm > op.m or sk > op.k:
            continue
        mk = ceil_div(op.m, sm)
        kk = ceil_div(op.k, sk)
        sub = replace(op, m=mk, k=kk, count=1, group_size=min(op.group_size, kk))
        red = 0 if sk == 1 else math.ceil(math.log2(sk)) * ceil_div(mk * op.n, _lanes_for_reduction(design))
        total = op_timing(design, sub).cycles + red
        key = (total, sk)
        if best is None or key < best[0]:
            best = (key, sub, op.count * sm * sk, red)
    if best is None:
        return replace(op, count=1), op.count, 0
    return best[1], best[2], best[3]


@dataclass
class Schedule:
    """Timed ops of one layer on one design and mesh."""

    design: Design
    noc: NocConfig
    graph: OpGraph
    ops: list[OpTiming]

    @property
    def layer_cycles(self) -> int:
        return sum(t.cycles for t in self.ops)

    @property
    def total_cycles(self) -> int:
        return self.layer_cycles * self.graph.layers

    @property
    def seconds(self) -> float:
        return self.total_cycles / self.design.frequency_hz

    def events(self) -> Counter:
        total: Counter = Counter()
        for t in self.ops:
            for key, val in t.events.items():
                total[key] += val * self.graph.layers
        return total

    def category_cycles(self) -> dict[str, int]:
        out: dict[str, int] = {"proj": 0, "attn": 0, "ffn": 0, "nonlinear": 0}
        for t in self.ops:
            if t.category in out:
                out[t.category] += t.cycles * self.graph.layers
        return out

    def tokens_per_second(self) -> float:
        from .workload import tokens_per_second

        return tokens_per_second(self.graph.run.batch, self.total_cycles, self.design.frequency_hz)


def schedule_op(noc: NocConfig, design: Design, op: Op) -> OpTiming:
    node_op, active, reduction = partition_op(design, op, noc.nodes)
    node = op_timing(design, node_op)
    if node.unmodeled:
        return node
    compute = node.cycles + reduction
    nbytes_r, nbytes_w = op.bytes_read(), op.bytes_written()
    transfer = transfer_cycles(nbytes_r + nbytes_w, design.frequency_hz, noc.offchip_bandwidth)
    fits = buffers_fit(design, node_op)
    cycles = max(compute, transfer) if fits else compute + transfer
    bound = Bound.MEMORY if transfer > compute else Bound.COMPUTE
    events = Counter({key: val * active for key, val in node.events.items()})
    events["dram_byte"] += nbytes_r + nbytes_w
    if noc.nodes > 1:
        events["noc_byte_hop"] += round((nbytes_r + nbytes_w) * noc.mean_hops)
        events["noc_reduce"] += reduction * active
    need = (nbytes_r + nbytes_w) / active / compute if compute else 0.0
    ok = noc.link_bytes_per_cycle is None or need <= noc.link_bytes_per_cycle
    return OpTiming(
        op.name, cycles, node.busy_cycles, node.utilization, node.column_utilization,
        mem_bytes_read=nbytes_r, mem_bytes_written=nbytes_w, bound=bound, compute_cycles=compute,
        transfer_cycles=transfer, nodes_active=active, noc_ok=ok, noc_bytes_per_cycle=need,
        buffers_fit=fits, category=op.category, shape=dict(node.shape, **{"node_m": node_op.m, "node_k": node_op.k})
        if op.is_gemm else dict(node.shape), events=events,
    )


def noc_schedule(noc: NocConfig, graph: OpGraph, design: Design) -> Schedule:
    return Schedule(design, noc, graph, [schedule_op(noc, design, op) for op in graph.ops])
