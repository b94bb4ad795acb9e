"""Area, energy, power and carbon accounting.

Area comes from per-design instance counts times per-instance area; energy
from event counts of a timed schedule times per-event energy, plus leakage
over wall time. The shipped cost table is a placeholder (see its header).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Mapping

import yaml

from .perf import (
    ARRAY_COLUMNS,
    COLUMN_STAGGER,
    TENSOR_BLOCK,
    ArrayConfig,
    BaselineConfig,
    BaselineKind,
    Design,
    NocConfig,
    Schedule,
)

PJ = 1e-12
MW = 1e-3

# per-row output buffering, in bits
MUGI_ROW_BUFFER_BITS = ARRAY_COLUMNS * 16  # one leaned output FIFO
CARAT_ROW_BUFFER_BITS = (
    ARRAY_COLUMNS * 2 * 16  # double-buffered BF16 input pipeline registers
    + 2 * ARRAY_COLUMNS * 16  # two output FIFOs behind the OR tree
    + ARRAY_COLUMNS * 8  # FP8 weight FIFO
)
# column-stagger input staging shared by all rows
INPUT_STAGING_BITS = ARRAY_COLUMNS * COLUMN_STAGGER * 16
LUT_FIFO_BITS = 8 * ARRAY_COLUMNS * 16  # one 8x8 BF16 sliding window

EVENT_COMPONENT = {
    "tc_convert": "tc",
    "subscribe": "pe",
    "pp_select": "pp",
    "vec_op": "vec_lane",
    "noc_reduce": "vec_lane",
    "sa_mac": "sa_pe",
    "sd_mac": "sd_pe",
    "figna_mac": "figna_pe",
    "acc_op": "acc",
    "precise_op": "precise_lane",
    "pwl_op": "pwl_lane",
    "taylor_op": "taylor_lane",
    "lut_read": "lut",
    "sram_read_bits": "sram_read_bit",
    "sram_write_bits": "sram_write_bit",
}

_UNIT_LANE = {
    BaselineKind.PRECISE_VECTOR: "precise_lane",
    BaselineKind.PWL_VECTOR: "pwl_lane",
    BaselineKind.TAYLOR_VECTOR: "taylor_lane",
}


@dataclass(frozen=True)
class ComponentCost:
    area_mm2: float = 0.0
    energy_pj: float = 0.0
    leakage_mw: float = 0.0

    def __post_init__(self) -> None:
        if min(self.area_mm2, self.energy_pj, self.leakage_mw) < 0:
            raise ValueError("component costs must be non-negative")


@dataclass(frozen=True)
class CostTable:
    components: Mapping[str, ComponentCost]
    label: str = ""

    def get(self, name: str) -> ComponentCost:
        try:
            return self.components[name]
        except KeyError:
            raise ValueError(f"cost table {self.label!r} has no entry for component {name!r}") from None

    @classmethod
    def from_mapping(cls, doc: Mapping) -> "CostTable":
        unknown = set(doc) - {"label", "components"}
        if unknown:
            raise ValueError(f"unknown cost table key(s): {sorted(unknown)}")
        comps = {}
        for name, rec in (doc.get("components") or {}).items():
            bad = set(rec) - {"area_mm2", "energy_pj", "leakage_mw"}
            if bad:
                raise ValueError(f"component {name!r}: unknown field(s) {sorted(bad)}")
            comps[name] = ComponentCost(**{k: float(v) for k, v in rec.items()})
        return cls(comps, str(doc.get("label", "")))

    @classmethod
    def load(cls, path: str | Path) -> "CostTable":
        return cls.from_mapping(yaml.safe_load(Path(path).read_text()) or {})


def default_cost_table() -> CostTable:
    text = resources.files("mugisim").joinpath("data/default_cost_table.yaml").read_text()
    return CostTable.from_mapping(yaml.safe_load(text))


@dataclass(frozen=True)
class CarbonParams:
    ci_g_per_j: float  # operational carbon intensity
    cpa_g_per_mm2: float  # embodied carbon per area

    def __post_init__(self) -> None:
        if not (self.ci_g_per_j > 0 and self.cpa_g_per_mm2 > 0):
            raise ValueError("carbon intensity and carbon per area must be positive")


def carbon_of(energy_j: float, area_mm2: float, params: CarbonParams) -> tuple[float, float]:
    """(operational, embodied) grams CO2-equivalent."""
    return energy_j * params.ci_g_per_j, area_mm2 * params.cpa_g_per_mm2


# ---------------------------------------------------------------------------
# area


def buffer_bits(design: Design) -> int:
    """Per-row operand/result buffering of a VLP array (zero for other designs)."""
    if isinstance(design, ArrayConfig):
        return design.height * MUGI_ROW_BUFFER_BITS
    if design.kind is BaselineKind.CARAT:
        return design.height * CARAT_ROW_BUFFER_BITS
    if design.kind is BaselineKind.MUGI_L:
        return design.height * MUGI_ROW_BUFFER_BITS
    return 0


def instance_counts(design: Design) -> dict[str, dict[str, float]]:
    """Component instances grouped by area category."""
    sram = {"sram_byte": design.isram_bytes + design.wsram_bytes + design.osram_bytes}
    if isinstance(design, ArrayConfig) or design.kind in (BaselineKind.CARAT, BaselineKind.MUGI_L):
        h = design.height
        rows = {"tc": h, "pe": h * ARRAY_COLUMNS, "or_tree": h, "oacc": h}
        vlp_nonlinear = isinstance(design, ArrayConfig)
        if vlp_nonlinear:
            rows.update(pp=h, mproc=h)
        groups = {
            "array": rows,
            "columns": {"col_acc": ARRAY_COLUMNS},
            "buffers": {"fifo_bit": buffer_bits(design)},
            "input_staging": {"fifo_bit": INPUT_STAGING_BITS},
            "vector": {"vec_lane": design.vector_lanes if vlp_nonlinear else design.lanes},
            "sram": sram,
        }
        if vlp_nonlinear:
            groups["nonlinear_ctrl"] = {"eproc": 1, "sliding_window": 1}
        elif design.kind is BaselineKind.MUGI_L:
            groups["nonlinear_unit"] = {"fifo_bit": h * LUT_FIFO_BITS, "mproc": h}
        else:
            groups["nonlinear_unit"] = {_UNIT_LANE[design.companion]: design.lanes}
        return groups
    if design.kind.is_vector:
        return {"nonlinear_unit": {_UNIT_LANE[design.kind]: design.lanes}, "sram": sram}
    if design.kind is BaselineKind.TENSOR_CORE:
        bm, bn, bk = TENSOR_BLOCK
        array = {"tensor_mac": bm * bn * bk}
    else:
        pe = {
            BaselineKind.SYSTOLIC: "sa_pe", BaselineKind.SIMD: "sd_pe",
            BaselineKind.SYSTOLIC_FIGNA: "figna_pe", BaselineKind.SIMD_FIGNA: "figna_pe",
        }[design.kind]
        array = {pe: design.height ** 2}
    unit = design.companion
    lane = "fifo_bit" if unit is BaselineKind.MUGI_L else _UNIT_LANE[unit]
    return {"array": array, "nonlinear_unit": {lane: design.lanes}, "sram": sram}


def area_breakdown(design: Design, table: CostTable) -> dict[str, float]:
    return {
        group: sum(n * table.get(name).area_mm2 for name, n in comps.items())
        for group, comps in instance_counts(design).items()
    }


def area_of(design: Design, table: CostTable) -> float:
    """Single-node area in mm2."""
    return sum(area_breakdown(design, table).values())


def row_area(design: ArrayConfig, table: CostTable) -> float:
    """Area of everything replicated per row (array cells plus row buffers)."""
    counts = instance_counts(design)
    rows = sum(n * table.get(name).area_mm2 for name, n in counts["array"].items())
    return rows + counts["buffers"]["fifo_bit"] * table.get("fifo_bit").area_mm2


def buffer_area(design: Design, table: CostTable) -> float:
    return buffer_bits(design) * table.get("fifo_bit").area_mm2


def chip_area(design: Design, noc: NocConfig, table: CostTable) -> float:
    router = table.get("noc_router").area_mm2 if noc.nodes > 1 else 0.0
    return noc.nodes * (area_of(design, table) + router)


def leakage_w(design: Design, table: CostTable, noc: NocConfig | None = None) -> float:
    per_node = sum(
        n * table.get(name).leakage_mw for comps in instance_counts(design).values() for name, n in comps.items()
    )
    nodes = 1 if noc is None else noc.nodes
    router = table.get("noc_router").leakage_mw if nodes > 1 else 0.0
    return nodes * (per_node + router) * MW


# ---------------------------------------------------------------------------
# energy


@dataclass
class Trace:
    """Event counts and wall time of a run on one design."""

    design: Design
    cycles: int
    events: Mapping[str, float] = field(default_factory=dict)
    noc: NocConfig = field(default_factory=NocConfig)

    @property
    def seconds(self) -> float:
        return self.cycles / self.design.frequency_hz

    @classmethod
    def from_schedule(cls, sched: Schedule) -> "Trace":
        return cls(sched.design, sched.total_cycles, dict(sched.events()), sched.noc)


def dynamic_energy(events: Mapping[str, float], table: CostTable) -> float:
    return sum(n * table.get(EVENT_COMPONENT.get(name, name)).energy_pj for name, n in events.items()) * PJ


def energy_of(trace: Trace, table: CostTable) -> float:
    """Dynamic energy of all events plus leakage over the trace's wall time (J)."""
    return dynamic_energy(trace.events, table) + leakage_w(trace.design, table, trace.noc) * trace.seconds


@dataclass(frozen=True)
class CostReport:
    area_mm2: float
    array_area_mm2: float
    energy_j: float  # one token step (all layers, whole batch)
    avg_power_w: float
    throughput: float  # tokens/s
    energy_eff: float  # tokens/s per uJ per token
    power_eff: float  # tokens/s per W
    operational_g: float
    embodied_g: float

    def to_record(self) -> dict:
        return dict(self.__dict__)


def cost_report(sched: Schedule, table: CostTable, carbon: CarbonParams) -> CostReport:
    trace = Trace.from_schedule(sched)
    energy = energy_of(trace, table)
    seconds = trace.seconds
    power = energy / seconds if seconds else 0.0
    tput = sched.tokens_per_second()
    per_token_uj = energy / sched.graph.run.batch * 1e6
    area = chip_area(sched.design, sched.noc, table)
    op_g, emb_g = carbon_of(energy, area, carbon)
    return CostReport(
        area_mm2=area,
        array_area_mm2=area_breakdown(sched.design, table).get("array", 0.0),
        energy_j=energy,
        avg_power_w=power,
        throughput=tput,
        energy_eff=tput / per_token_uj if per_token_uj else 0.0,
        power_eff=tput / power if power else 0.0,
        operational_g=op_g,
        embodied_g=emb_g,
    )
