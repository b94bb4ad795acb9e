import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mugisim.cost import (
    CARAT_ROW_BUFFER_BITS,
    MUGI_ROW_BUFFER_BITS,
    CarbonParams,
    ComponentCost,
    CostTable,
    Trace,
    area_breakdown,
    area_of,
    buffer_area,
    carbon_of,
    chip_area,
    cost_report,
    default_cost_table,
    dynamic_energy,
    energy_of,
    leakage_w,
    row_area,
)
from mugisim.perf import ArrayConfig, BaselineConfig, BaselineKind, NocConfig, gemm_cycles, noc_schedule
from mugisim.workload import MODELS, RunSpec, build_graph

TABLE = default_cost_table()
pos = st.floats(1e-6, 1e6, allow_nan=False)


def test_default_table_labelled_placeholder():
    assert "NOT AUTHORITATIVE" in TABLE.label.upper() or "placeholder" in TABLE.label.lower()


def test_missing_component():
    with pytest.raises(ValueError, match="no entry"):
        CostTable({}).get("pe")


def test_table_validation():
    with pytest.raises(ValueError):
        CostTable.from_mapping({"components": {"pe": {"area": 1}}})
    with pytest.raises(ValueError):
        CostTable.from_mapping({"extra": 1})
    with pytest.raises(ValueError):
        ComponentCost(area_mm2=-1)


def test_table_load(tmp_path):
    p = tmp_path / "t.yaml"
    p.write_text("label: x\ncomponents:\n  pe: {area_mm2: 2, energy_pj: 1}\n")
    t = CostTable.load(p)
    assert t.get("pe") == ComponentCost(2.0, 1.0, 0.0)


class TestArea:
    def test_row_components_linear_in_height(self):
        assert row_area(ArrayConfig(height=256), TABLE) == pytest.approx(2 * row_area(ArrayConfig(height=128), TABLE),
                                                                         rel=1e-12)

    def test_systolic_pe_grid_quadratic(self):
        a16 = area_breakdown(BaselineConfig(BaselineKind.SYSTOLIC, height=16), TABLE)["array"]
        a32 = area_breakdown(BaselineConfig(BaselineKind.SYSTOLIC, height=32), TABLE)["array"]
        assert a32 == pytest.approx(4 * a16, rel=1e-12)

    def test_buffer_ratio(self):
        assert CARAT_ROW_BUFFER_BITS / MUGI_ROW_BUFFER_BITS == 4.5
        for h in (32, 128, 256):
            carat = buffer_area(BaselineConfig(BaselineKind.CARAT, height=h), TABLE)
            mugi = buffer_area(ArrayConfig(height=h), TABLE)
            assert carat / mugi == pytest.approx(4.5, rel=1e-12)

    def test_area_is_sum_of_groups(self):
        for d in (ArrayConfig(), BaselineConfig(BaselineKind.SIMD), BaselineConfig(BaselineKind.TENSOR_CORE),
                  BaselineConfig(BaselineKind.PWL_VECTOR), BaselineConfig(BaselineKind.MUGI_L, height=64)):
            assert area_of(d, TABLE) == pytest.approx(sum(area_breakdown(d, TABLE).values()))
            assert area_of(d, TABLE) > 0

    def test_mesh_area(self):
        d = ArrayConfig()
        one = chip_area(d, NocConfig(), TABLE)
        assert one == area_of(d, TABLE)
        assert chip_area(d, NocConfig(2, 2), TABLE) == pytest.approx(4 * (one + TABLE.get("noc_router").area_mm2))


class TestEnergy:
    def test_two_by_two_gemm_event_counts(self):
        ev = gemm_cycles(ArrayConfig(height=8), 2, 2, 2).events
        assert ev["tc_convert"] == 4
        assert ev["subscribe"] == 8
        assert ev["col_acc"] == 32
        want = sum(n * TABLE.get(c).energy_pj for c, n in
                   [("tc", 4), ("pe", 8), ("or_tree", 8), ("oacc", 8), ("col_acc", 32), ("vec_lane", 4)]) * 1e-12
        sram = (ev["sram_read_bits"] * TABLE.get("sram_read_bit").energy_pj
                + ev["sram_write_bits"] * TABLE.get("sram_write_bit").energy_pj) * 1e-12
        assert dynamic_energy(ev, TABLE) == pytest.approx(want + sram, rel=1e-12)

    def test_empty_trace_is_leakage_only(self):
        d = ArrayConfig()
        t = Trace(d, cycles=4000)
        assert energy_of(t, TABLE) == pytest.approx(leakage_w(d, TABLE) * 1e-5)
        assert energy_of(Trace(d, 0), TABLE) == 0.0

    def test_duration_adds_leakage(self):
        d = BaselineConfig(BaselineKind.SYSTOLIC)
        ev = {"sa_mac": 1000, "acc_op": 10}
        a, b = energy_of(Trace(d, 100, ev), TABLE), energy_of(Trace(d, 300, ev), TABLE)
        assert b - a == pytest.approx(leakage_w(d, TABLE) * 200 / d.frequency_hz, rel=1e-9)

    def test_report(self):
        graph = build_graph(RunSpec(MODELS["llama2-7b"], batch=4, seq_len=256))
        sched = noc_schedule(NocConfig(), graph, ArrayConfig(height=128))
        rep = cost_report(sched, TABLE, CarbonParams(1e-4, 2.0))
        assert rep.throughput == pytest.approx(sched.tokens_per_second())
        assert rep.avg_power_w == pytest.approx(rep.energy_j / sched.seconds)
        assert rep.power_eff == pytest.approx(rep.throughput / rep.avg_power_w)
        assert rep.embodied_g == pytest.approx(rep.area_mm2 * 2.0)
        assert rep.operational_g == pytest.approx(rep.energy_j * 1e-4)
        assert set(rep.to_record()) >= {"area_mm2", "energy_j", "throughput"}


class TestCarbon:
    def test_examples(self):
        assert carbon_of(2.0, 0.0, CarbonParams(0.5, 1.0))[0] == 1.0
        assert carbon_of(0.0, 3.0, CarbonParams(0.5, 2.0))[1] == 6.0
        assert carbon_of(0.0, 1.0, CarbonParams(123.0, 1.0))[0] == 0.0

    def test_positive_params(self):
        with pytest.raises(ValueError):
            CarbonParams(0.0, 1.0)

    @settings(max_examples=100, deadline=None)
    @given(pos, pos, pos, pos, st.floats(0.01, 100))
    def test_linear(self, e, a, ci, cpa, k):
        p = CarbonParams(ci, cpa)
        op, emb = carbon_of(e, a, p)
        assert op == e * ci and emb == a * cpa
        op2, emb2 = carbon_of(k * e, k * a, p)
        assert op2 == pytest.approx(k * op, rel=1e-12) and emb2 == pytest.approx(k * emb, rel=1e-12)
