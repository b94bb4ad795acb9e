"""Discrete-event simulation of the same designs timed in :mod:`mugisim.perf`.

Resources (loaders, buffers, the temporal converter, the vector unit) are
modelled explicitly and advanced by a time-ordered event queue. Intended for
cross-checking the closed forms on small shapes; large LLM layers should use
the analytical model.
"""
from __future__ import annotations

import heapq
import itertools
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable

from .perf import (
    ARRAY_COLUMNS,
    COLUMN_STAGGER,
    EXPONENT_PHASE,
    LOAD_CYCLES,
    MANTISSA_PHASE,
    TENSOR_BLOCK,
    ArrayConfig,
    BaselineConfig,
    BaselineKind,
    Design,
    _group_lengths,
    ceil_div,
)
from .workload import Op, OpKind


class EventQueue:
    def __init__(self) -> None:
        self.now = 0
        self._heap: list = []
        self._seq = itertools.count()
        self.processed = 0

    def at(self, time: int, fn: Callable, *args) -> None:
        if time < self.now:
            raise ValueError("cannot schedule an event in the past")
        heapq.heappush(self._heap, (time, next(self._seq), fn, args))

    def after(self, delay: int, fn: Callable, *args) -> None:
        self.at(self.now + delay, fn, *args)

    def run(self) -> int:
        while self._heap:
            time, _, fn, args = heapq.heappop(self._heap)
            self.now = time
            self.processed += 1
            fn(*args)
        return self.now


@dataclass
class SimResult:
    cycles: int
    busy_cycles: int = 0
    events: Counter = field(default_factory=Counter)
    processed: int = 0


def _vector_passes(q: EventQueue, waves: int, then: Callable) -> None:
    """Run ``waves`` one-cycle vector waves back to back, then call ``then``."""
    def step(left: int) -> None:
        if left == 0:
            then()
        else:
            q.after(1, step, left - 1)
    step(waves)


def simulate_mugi_nonlinear(cfg: ArrayConfig, elements: int, softmax: bool = False) -> SimResult:
    per = cfg.lanes
    n_map = ceil_div(elements, per)
    q = EventQueue()
    ev: Counter = Counter()
    st = {"next_load": 0, "loader": False, "slots": 2, "tc": False, "next_issue": 0, "busy": 0, "end": 0}
    ready: set[int] = set()
    vec_waves = ceil_div(elements, cfg.vector_lanes)

    def active(m: int) -> int:
        return min(per, elements - m * per)

    def try_load() -> None:
        if not st["loader"] and st["slots"] and st["next_load"] < n_map:
            st["loader"] = True
            st["slots"] -= 1
            m = st["next_load"]
            st["next_load"] += 1
            q.after(LOAD_CYCLES, load_done, m)

    def load_done(m: int) -> None:
        st["loader"] = False
        ready.add(m)
        try_issue()
        try_load()

    def try_issue() -> None:
        m = st["next_issue"]
        if not st["tc"] and m in ready:
            ready.discard(m)
            st["tc"] = True
            st["next_issue"] += 1
            st["busy"] += MANTISSA_PHASE
            ev["tc_convert"] += active(m)
            ev["subscribe"] += active(m)
            q.after(MANTISSA_PHASE, mantissa_done, m)

    def mantissa_done(m: int) -> None:
        st["tc"] = False
        st["slots"] += 1
        q.after(EXPONENT_PHASE, exponent_done, m)
        try_issue()
        try_load()

    def exponent_done(m: int) -> None:
        ev["subscribe"] += active(m)
        ev["or_tree"] += active(m)
        ev["pp_select"] += active(m)
        q.after(COLUMN_STAGGER + cfg.pipeline_depth, drained, m)

    def drained(m: int) -> None:
        if m == n_map - 1:
            if softmax:
                ev["oacc"] += elements
                q.after(1, lambda: _vector_passes(q, vec_waves, finish))
            else:
                finish()

    def finish() -> None:
        st["end"] = q.now

    def start_array() -> None:
        try_load()

    if softmax:
        _vector_passes(q, vec_waves, start_array)
    else:
        start_array()
    q.run()
    return SimResult(st["end"], st["busy"], ev, q.processed)


def simulate_mugi_gemm(
    cfg: ArrayConfig, m: int, n: int, k: int, count: int = 1, group_size: int | None = None
) -> SimResult:
    h = cfg.height
    group = k if group_size is None else min(group_size, k)
    groups = [length for length, mult in _group_lengths(k, group) for _ in range(mult)]
    tiles = [
        (min(h, m - r0), min(ARRAY_COLUMNS, n - c0))
        for _ in range(count)
        for r0 in range(0, m, h)
        for c0 in range(0, n, ARRAY_COLUMNS)
    ]
    q = EventQueue()
    ev: Counter = Counter()
    st = {"tile": 0, "group": 0, "pending": 0, "busy": 0, "group_start": 0, "end": 0}

    def start_tile() -> None:
        if st["tile"] == len(tiles):
            st["end"] = q.now
            return
        st["group"] = 0
        start_group()

    def start_group() -> None:
        rows, cols = tiles[st["tile"]]
        length = groups[st["group"]]
        st["pending"] = 2
        st["group_start"] = q.now
        window(rows, cols, length)
        q.after(ceil_div(rows * cols, cfg.vector_lanes), join)

    def window(rows: int, cols: int, left: int) -> None:
        # one K step: every row spikes once, each column streams its 8 multiples
        ev["tc_convert"] += rows
        ev["subscribe"] += rows * cols
        ev["or_tree"] += rows * cols
        ev["oacc"] += rows * cols
        ev["col_acc"] += ARRAY_COLUMNS * cols
        if left == 1:
            q.after(MANTISSA_PHASE, join)
        else:
            q.after(MANTISSA_PHASE, window, rows, cols, left - 1)

    def join() -> None:
        st["pending"] -= 1
        if st["pending"]:
            return
        rows, cols = tiles[st["tile"]]
        ev["vec_op"] += rows * cols
        st["busy"] += q.now - st["group_start"]
        st["group"] += 1
        if st["group"] < len(groups):
            start_group()
        else:
            q.after(cfg.gemm_depth, tile_done)

    def tile_done() -> None:
        st["tile"] += 1
        start_tile()

    start_tile()
    q.run()
    return SimResult(st["end"], st["busy"], ev, q.processed)


def simulate_weight_stationary(cfg: BaselineConfig, m: int, n: int, k: int, count: int = 1) -> SimResult:
    h = cfg.height
    n_tiles = ceil_div(k, h) * ceil_div(m, h) * count
    q = EventQueue()
    st = {"next_load": 0, "loader": False, "free": 2, "streamer": False, "next_stream": 0, "end": 0,
          "first": None, "last": 0}
    loaded: set[int] = set()

    def try_load() -> None:
        if not st["loader"] and st["free"] and st["next_load"] < n_tiles:
            st["loader"] = True
            st["free"] -= 1
            t = st["next_load"]
            st["next_load"] += 1
            q.after(h, load_done, t)

    def load_done(t: int) -> None:
        st["loader"] = False
        loaded.add(t)
        try_stream()
        try_load()

    def try_stream() -> None:
        t = st["next_stream"]
        if not st["streamer"] and t in loaded:
            loaded.discard(t)
            st["streamer"] = True
            st["next_stream"] += 1
            if st["first"] is None:
                st["first"] = q.now
            q.after(n, stream_done, t)

    def stream_done(t: int) -> None:
        st["streamer"] = False
        st["free"] += 1
        st["last"] = q.now
        if t == n_tiles - 1:
            q.after(cfg.drain_cycles, finish)
        try_stream()
        try_load()

    def finish() -> None:
        st["end"] = q.now

    try_load()
    q.run()
    ev = Counter(macs=m * n * k * count)
    return SimResult(st["end"], st["last"] - st["first"], ev, q.processed)


def simulate_tensor_core(cfg: BaselineConfig, m: int, n: int, k: int, count: int = 1) -> SimResult:
    bm, bn, bk = TENSOR_BLOCK
    blocks = ceil_div(m, bm) * ceil_div(n, bn) * ceil_div(k, bk) * count
    q = EventQueue()
    st = {"end": 0}

    def issue(b: int) -> None:
        q.after(1 + cfg.tensor_fill, done)
        if b + 1 < blocks:
            q.after(1, issue, b + 1)

    def done() -> None:
        st["end"] = max(st["end"], q.now)

    q.at(0, issue, 0)
    q.run()
    return SimResult(st["end"], blocks, Counter(tensor_mac=m * n * k * count), q.processed)


def simulate_vector(cfg: BaselineConfig, unit: BaselineKind, elements: int, softmax: bool = False) -> SimResult:
    lanes = cfg.height if unit is BaselineKind.MUGI_L else cfg.lanes
    latency = cfg.per_element_cycles(unit)
    waves = ceil_div(elements, lanes)
    vec_waves = ceil_div(elements, cfg.lanes)
    pipelined = unit is not BaselineKind.PRECISE_VECTOR
    q = EventQueue()
    st = {"left": waves, "end": 0, "busy": 0}

    def issue(w: int) -> None:
        # iterative units hold their lanes for the whole latency
        hold = 1 if pipelined else latency
        st["busy"] += hold
        q.after(latency, complete)
        if w + 1 < waves:
            q.after(hold, issue, w + 1)

    def complete() -> None:
        st["left"] -= 1
        if st["left"] == 0:
            if softmax:
                q.after(1, lambda: _vector_passes(q, vec_waves, finish))
            else:
                finish()

    def finish() -> None:
        st["end"] = q.now

    if softmax:
        _vector_passes(q, vec_waves, lambda: issue(0))
    else:
        issue(0)
    q.run()
    return SimResult(st["end"], st["busy"], Counter(), q.processed)


def simulate_op(design: Design, op: Op) -> SimResult:
    if op.kind is OpKind.UNMODELED:
        return SimResult(0)
    softmax = op.kind is OpKind.SOFTMAX
    if isinstance(design, ArrayConfig):
        if op.is_gemm:
            return simulate_mugi_gemm(design, op.m, op.n, op.k, op.count, op.group_size)
        return simulate_mugi_nonlinear(design, op.elements, softmax)
    if op.is_gemm:
        if design.kind.is_vector:
            raise ValueError(f"{design.kind.value} array cannot run GEMM {op.name}")
        if design.kind.weight_stationary:
            return simulate_weight_stationary(design, op.m, op.n, op.k, op.count)
        if design.kind is BaselineKind.TENSOR_CORE:
            return simulate_tensor_core(design, op.m, op.n, op.k, op.count)
        return simulate_mugi_gemm(design.as_vlp_array(), op.m, op.n, op.k, op.count, op.group_size)
    unit = design.kind if design.kind.is_vector else design.companion
    return simulate_vector(design, unit, op.elements, softmax)
