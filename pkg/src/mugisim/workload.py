"""LLM operation graphs.

Builds the per-layer GEMM and nonlinear operations of a decoder-only
transformer from its model dimensions, batch and phase. GEMM shapes follow
the array convention used throughout the simulator: ``M`` is the weight (or
KV-cache) side mapped to rows, ``N`` the activation columns, ``K`` the
reduction dimension.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, replace
from enum import Enum


class Phase(Enum):
    PREFILL = "prefill"
    DECODE = "decode"


class OpKind(Enum):
    PROJ = "proj"
    ATTN_QK = "attn_qk"
    ATTN_PV = "attn_pv"
    FFN = "ffn"
    SOFTMAX = "softmax"
    SILU = "silu"
    GELU = "gelu"
    UNMODELED = "unmodeled"

    @property
    def is_gemm(self) -> bool:
        return self in (OpKind.PROJ, OpKind.ATTN_QK, OpKind.ATTN_PV, OpKind.FFN)

    @property
    def is_nonlinear(self) -> bool:
        return self in (OpKind.SOFTMAX, OpKind.SILU, OpKind.GELU)

    @property
    def category(self) -> str:
        if self in (OpKind.ATTN_QK, OpKind.ATTN_PV):
            return "attn"
        if self.is_nonlinear:
            return "nonlinear"
        return self.value


@dataclass(frozen=True)
class ModelSpec:
    name: str
    layers: int
    attn_heads: int
    kv_heads: int
    hidden_dim: int
    ffn_dim: int
    seq_len: int = 4096
    activation: str = "silu"

    def __post_init__(self) -> None:
        for f in ("layers", "attn_heads", "kv_heads", "hidden_dim", "ffn_dim", "seq_len"):
            if getattr(self, f) < 1:
                raise ValueError(f"{f} must be positive")
        if self.attn_heads % self.kv_heads:
            raise ValueError(f"attn_heads {self.attn_heads} not divisible by kv_heads {self.kv_heads}")
        if self.hidden_dim % self.attn_heads:
            raise ValueError(f"hidden_dim {self.hidden_dim} not divisible by attn_heads {self.attn_heads}")
        if self.activation not in ("silu", "gelu"):
            raise ValueError(f"unsupported activation {self.activation!r}")

    @property
    def head_dim(self) -> int:
        return self.hidden_dim // self.attn_heads

    @property
    def group_size(self) -> int:
        return self.attn_heads // self.kv_heads

    @property
    def gated_ffn(self) -> bool:
        return self.activation == "silu"

    def layer_params(self) -> int:
        """Weight parameters of one layer's projections and FFN."""
        h, kvd = self.hidden_dim, self.kv_heads * self.head_dim
        ffn_mats = 3 if self.gated_ffn else 2
        return 2 * h * h + 2 * kvd * h + ffn_mats * h * self.ffn_dim


MODELS: dict[str, ModelSpec] = {
    "llama2-7b": ModelSpec("llama2-7b", 32, 32, 32, 4096, 11008),
    "llama2-13b": ModelSpec("llama2-13b", 40, 40, 40, 5120, 13824),
    "llama2-70b": ModelSpec("llama2-70b", 80, 64, 8, 8192, 28672),
    "llama2-70b-mha": ModelSpec("llama2-70b-mha", 80, 64, 64, 8192, 28672),
}


@dataclass(frozen=True)
class QuantSpec:
    weight_bits: int = 4
    kv_bits: int = 4
    group_size: int = 128
    act_bits: int = 16


@dataclass(frozen=True)
class RunSpec:
    model: ModelSpec
    batch: int = 8
    phase: Phase = Phase.DECODE
    seq_len: int | None = None
    quant: QuantSpec = QuantSpec()
    name: str = ""

    def __post_init__(self) -> None:
        if not 1 <= self.batch <= 32:
            raise ValueError(f"batch {self.batch} outside [1, 32]")
        if self.seq_len is not None and self.seq_len < 1:
            raise ValueError("seq_len must be positive")

    @property
    def seq(self) -> int:
        return self.seq_len if self.seq_len is not None else self.model.seq_len

    @property
    def label(self) -> str:
        return self.name or f"{self.model.name}-b{self.batch}-s{self.seq}-{self.phase.value}"


@dataclass(frozen=True)
class Op:
    name: str
    kind: OpKind
    m: int = 0
    n: int = 0
    k: int = 0
    elements: int = 0
    count: int = 1
    row_len: int = 0  # softmax normalisation length
    weight_bits: int = 4
    act_bits: int = 16
    group_size: int = 128
    weight_source: str = "weights"  # "weights" or "kv_cache"

    @property
    def is_gemm(self) -> bool:
        return self.kind.is_gemm

    @property
    def category(self) -> str:
        return self.kind.category

    @property
    def macs(self) -> int:
        return self.m * self.n * self.k * self.count if self.is_gemm else 0

    def weight_bytes(self) -> int:
        if not self.is_gemm:
            return 0
        groups = -(-self.k // self.group_size)
        packed = self.m * self.k * self.weight_bits // 8
        scales = self.m * groups * self.act_bits // 8
        return (packed + scales) * self.count

    def bytes_read(self) -> int:
        if self.is_gemm:
            return self.weight_bytes() + self.k * self.n * self.count * self.act_bits // 8
        if self.kind.is_nonlinear:
            return self.elements * self.act_bits // 8
        return 0

    def bytes_written(self) -> int:
        if self.is_gemm:
            return self.m * self.n * self.count * self.act_bits // 8
        if self.kind.is_nonlinear:
            return self.elements * self.act_bits // 8
        return 0

    def to_record(self) -> dict:
        d = asdict(self)
        d["kind"] = self.kind.value
        return d


@dataclass(frozen=True)
class OpGraph:
    """Ops of one transformer layer; the whole step repeats them ``layers`` times."""

    run: RunSpec
    ops: tuple[Op, ...]
    layers: int

    @property
    def modeled_ops(self) -> tuple[Op, ...]:
        return tuple(op for op in self.ops if op.kind is not OpKind.UNMODELED)

    @property
    def unmodeled_ops(self) -> tuple[Op, ...]:
        return tuple(op for op in self.ops if op.kind is OpKind.UNMODELED)

    def layer_macs(self, kinds: tuple[OpKind, ...] | None = None) -> int:
        return sum(op.macs for op in self.ops if kinds is None or op.kind in kinds)

    def softmax_elements(self) -> int:
        return sum(op.elements for op in self.ops if op.kind is OpKind.SOFTMAX)

    def to_dict(self) -> dict:
        return {
            "run": self.run.label,
            "model": asdict(self.run.model),
            "batch": self.run.batch,
            "phase": self.run.phase.value,
            "seq_len": self.run.seq,
            "layers": self.layers,
            "ops": [op.to_record() for op in self.ops],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)


def build_graph(run: RunSpec) -> OpGraph:
    mdl, q = run.model, run.quant
    b, s = run.batch, run.seq
    h, hd, kv, heads = mdl.hidden_dim, mdl.head_dim, mdl.kv_heads, mdl.attn_heads
    grp = mdl.group_size
    tokens = b if run.phase is Phase.DECODE else b * s
    queries = grp if run.phase is Phase.DECODE else grp * s  # per (sequence, kv head)
    rows_per_seq = 1 if run.phase is Phase.DECODE else s

    def gemm(name: str, kind: OpKind, m: int, n: int, k: int, count: int = 1, kvc: bool = False) -> Op:
        return Op(
            name, kind, m=m, n=n, k=k, count=count,
            weight_bits=q.kv_bits if kvc else q.weight_bits,
            act_bits=q.act_bits,
            group_size=min(q.group_size, k),
            weight_source="kv_cache" if kvc else "weights",
        )

    def elementwise(name: str, kind: OpKind, elements: int, row_len: int = 0) -> Op:
        return Op(name, kind, elements=elements, row_len=row_len, act_bits=q.act_bits)

    ops = [
        elementwise("attn_norm", OpKind.UNMODELED, tokens * h),
        gemm("q_proj", OpKind.PROJ, h, tokens, h),
        gemm("k_proj", OpKind.PROJ, kv * hd, tokens, h),
        gemm("v_proj", OpKind.PROJ, kv * hd, tokens, h),
        elementwise("rope", OpKind.UNMODELED, tokens * (h + kv * hd)),
        gemm("attn_qk", OpKind.ATTN_QK, s, queries, hd, count=b * kv, kvc=True),
        elementwise("softmax", OpKind.SOFTMAX, heads * b * rows_per_seq * s, row_len=s),
        gemm("attn_pv", OpKind.ATTN_PV, hd, queries, s, count=b * kv, kvc=True),
        gemm("o_proj", OpKind.PROJ, h, tokens, h),
        elementwise("attn_residual", OpKind.UNMODELED, tokens * h),
        elementwise("ffn_norm", OpKind.UNMODELED, tokens * h),
    ]
    if mdl.gated_ffn:
        ops += [
            gemm("ffn_gate", OpKind.FFN, mdl.ffn_dim, tokens, h),
            gemm("ffn_up", OpKind.FFN, mdl.ffn_dim, tokens, h),
            elementwise("silu", OpKind.SILU, mdl.ffn_dim * tokens),
            elementwise("gate_mul", OpKind.UNMODELED, mdl.ffn_dim * tokens),
        ]
    else:
        ops += [
            gemm("ffn_up", OpKind.FFN, mdl.ffn_dim, tokens, h),
            elementwise("gelu", OpKind.GELU, mdl.ffn_dim * tokens),
        ]
    ops += [
        gemm("ffn_down", OpKind.FFN, h, tokens, mdl.ffn_dim),
        elementwise("ffn_residual", OpKind.UNMODELED, tokens * h),
    ]
    return OpGraph(run, tuple(ops), mdl.layers)


def kv_cache_bytes(run: RunSpec) -> int:
    """KV-cache bytes read per layer in one decode step."""
    mdl = run.model
    return 2 * mdl.kv_heads * mdl.head_dim * run.seq * run.batch * run.quant.kv_bits // 8


def tokens_per_second(batch: int, cycles_per_step: float, frequency_hz: float) -> float:
    if cycles_per_step <= 0:
        raise ValueError("cycles per token step must be positive")
    return batch * frequency_hz / cycles_per_step


def with_kv_heads(model: ModelSpec, kv_heads: int) -> ModelSpec:
    return replace(model, kv_heads=kv_heads, name=f"{model.name}-kv{kv_heads}")
