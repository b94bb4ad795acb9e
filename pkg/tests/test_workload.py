import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mugisim.perf import ArrayConfig, op_timing
from mugisim.workload import (
    MODELS,
    ModelSpec,
    Op,
    OpKind,
    Phase,
    RunSpec,
    build_graph,
    kv_cache_bytes,
    tokens_per_second,
    with_kv_heads,
)

PROJ_FFN = (OpKind.PROJ, OpKind.FFN)


def op(graph, name):
    return next(o for o in graph.ops if o.name == name)


@pytest.mark.parametrize("name", sorted(MODELS))
@pytest.mark.parametrize("batch", [1, 8, 32])
def test_weight_macs_match_parameters(name, batch):
    g = build_graph(RunSpec(MODELS[name], batch=batch))
    assert g.layer_macs(PROJ_FFN) == MODELS[name].layer_params() * batch


def test_70b_parameter_count():
    m = MODELS["llama2-70b"]
    # about 68.5e9 weights outside embeddings
    assert 6.8e10 < m.layers * m.layer_params() < 6.9e10
    assert (m.head_dim, m.group_size) == (128, 8)


@pytest.mark.parametrize("batch,seq", [(1, 128), (8, 4096)])
def test_decode_attention_macs(batch, seq):
    m = MODELS["llama2-70b"]
    g = build_graph(RunSpec(m, batch=batch, seq_len=seq))
    attn = g.layer_macs((OpKind.ATTN_QK, OpKind.ATTN_PV))
    assert attn == 2 * batch * m.attn_heads * seq * m.head_dim
    assert g.softmax_elements() == batch * m.attn_heads * seq


def test_prefill_shapes():
    m = MODELS["llama2-7b"]
    g = build_graph(RunSpec(m, batch=2, phase=Phase.PREFILL, seq_len=64))
    assert op(g, "q_proj").n == 2 * 64
    assert op(g, "softmax").elements == 2 * 32 * 64 * 64
    assert op(g, "attn_qk").n == 64 and op(g, "attn_qk").count == 2 * 32


def test_gqa_widens_attention():
    gqa = build_graph(RunSpec(MODELS["llama2-70b"], batch=8))
    mha = build_graph(RunSpec(MODELS["llama2-70b-mha"], batch=8))
    for name in ("attn_qk", "attn_pv"):
        assert (op(gqa, name).n, op(gqa, name).count) == (8, 64)
        assert (op(mha, name).n, op(mha, name).count) == (1, 512)
        assert op(gqa, name).macs == op(mha, name).macs
    cfg = ArrayConfig(height=256)
    assert op_timing(cfg, op(gqa, "attn_qk")).column_utilization == 1.0
    assert op_timing(cfg, op(mha, "attn_qk")).column_utilization == 0.125


def test_batch_one_gemv():
    g = build_graph(RunSpec(MODELS["llama2-7b"], batch=1))
    assert op(g, "attn_qk").n == 1 and op(g, "q_proj").n == 1


def test_unmodeled_ops_listed():
    g = build_graph(RunSpec(MODELS["llama2-7b"]))
    names = {o.name for o in g.unmodeled_ops}
    assert {"attn_norm", "rope", "attn_residual", "ffn_norm", "gate_mul", "ffn_residual"} == names
    assert all(o.kind is not OpKind.UNMODELED for o in g.modeled_ops)


def test_gelu_models_use_two_ffn_matrices():
    m = ModelSpec("toy", 2, 4, 4, 64, 256, activation="gelu")
    g = build_graph(RunSpec(m, batch=1))
    assert [o.name for o in g.ops if o.kind is OpKind.FFN] == ["ffn_up", "ffn_down"]
    assert op(g, "gelu").elements == 256


def test_kv_cache_and_quantised_bytes():
    run = RunSpec(MODELS["llama2-70b"], batch=8, seq_len=4096)
    assert kv_cache_bytes(run) == 2 * 8 * 128 * 4096 * 8 // 2
    g = build_graph(run)
    qk = op(g, "attn_qk")
    assert qk.weight_source == "kv_cache" and qk.weight_bits == 4
    proj = op(g, "q_proj")
    assert proj.weight_bytes() == 8192 * 8192 // 2 + 8192 * 64 * 2


def test_tokens_per_second():
    assert tokens_per_second(1, 400e6, 400e6) == 1.0
    assert tokens_per_second(8, 400e6, 400e6) == 8.0
    with pytest.raises(ValueError):
        tokens_per_second(1, 0, 400e6)


def test_validation():
    with pytest.raises(ValueError):
        RunSpec(MODELS["llama2-7b"], batch=33)
    with pytest.raises(ValueError):
        ModelSpec("bad", 1, 6, 4, 64, 64)
    with pytest.raises(ValueError):
        ModelSpec("bad", 1, 4, 4, 64, 64, activation="relu")


def test_with_kv_heads():
    m = with_kv_heads(MODELS["llama2-7b"], 8)
    assert m.group_size == 4 and m.name.endswith("kv8")


def test_json_round_trip():
    g = build_graph(RunSpec(MODELS["llama2-13b"], batch=2))
    doc = json.loads(g.to_json())
    assert doc["layers"] == 40 and len(doc["ops"]) == len(g.ops)
    assert Op(**{**doc["ops"][1], "kind": OpKind(doc["ops"][1]["kind"])}) == g.ops[1]


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 32), st.integers(1, 4096), st.sampled_from(sorted(MODELS)))
def test_graph_scales_linearly_in_batch(batch, seq, name):
    g = build_graph(RunSpec(MODELS[name], batch=batch, seq_len=seq))
    one = build_graph(RunSpec(MODELS[name], batch=1, seq_len=seq))
    assert g.layer_macs() == batch * one.layer_macs()
    assert g.softmax_elements() == batch * one.softmax_elements()
