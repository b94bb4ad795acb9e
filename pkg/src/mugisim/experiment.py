"""Experiment configuration, sweeps and report emission."""
from __future__ import annotations

import csv
import io
import itertools
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Mapping

import numpy as np
import yaml

from .cost import CarbonParams, CostTable, cost_report, default_cost_table
from .lut import LutWindow, NonlinearKind, WindowPolicy, build_lut, reference
from .numeric import as_bf16_bits, bf16_bits_to_float, float_to_bf16_bits
from .perf import ArrayConfig, BaselineConfig, BaselineKind, Design, NocConfig, noc_schedule
from .vlpfunc import approximate_stream, gemm, softmax
from .workload import MODELS, ModelSpec, Phase, QuantSpec, RunSpec, build_graph


class ConfigError(ValueError):
    """Invalid experiment configuration; ``key`` names the offending entry."""

    def __init__(self, key: str, message: str) -> None:
        super().__init__(f"{key}: {message}")
        self.key = key


# ---------------------------------------------------------------------------
# parsing helpers


def _check_keys(doc: Mapping, allowed: set[str], where: str) -> None:
    if not isinstance(doc, Mapping):
        raise ConfigError(where, f"expected a mapping, got {type(doc).__name__}")
    for key in doc:
        if key not in allowed:
            raise ConfigError(f"{where}.{key}" if where else str(key), "unknown key")


def _build(cls, doc: Mapping, where: str, skip: set[str] = frozenset(), convert: Mapping | None = None):
    names = {f.name for f in fields(cls)} - set(skip)
    _check_keys(doc, names | set(skip), where)
    kwargs = {}
    for key, val in doc.items():
        if key in skip:
            continue
        if convert and key in convert:
            try:
                val = convert[key](val)
            except (ValueError, KeyError) as exc:
                raise ConfigError(f"{where}.{key}", f"invalid value {val!r}") from exc
        kwargs[key] = val
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(where, str(exc)) from exc


DESIGN_TYPES = {"mugi": None, **{k.value: k for k in BaselineKind}}


def parse_design(doc: Mapping, where: str) -> tuple[str, Design]:
    if "id" not in doc or "type" not in doc:
        raise ConfigError(where, "design needs 'id' and 'type'")
    typ = doc["type"]
    if typ not in DESIGN_TYPES:
        raise ConfigError(f"{where}.type", f"unknown design type {typ!r} (choose from {sorted(DESIGN_TYPES)})")
    if typ == "mugi":
        design = _build(ArrayConfig, doc, where, skip={"id", "type"})
    else:
        design = _build(
            BaselineConfig, dict(doc, kind=typ), where, skip={"id", "type"},
            convert={"kind": BaselineKind, "nonlinear": BaselineKind},
        )
    return str(doc["id"]), design


def parse_model(val: Any, where: str) -> ModelSpec:
    if isinstance(val, str):
        if val not in MODELS:
            raise ConfigError(where, f"unknown model preset {val!r} (choose from {sorted(MODELS)})")
        return MODELS[val]
    return _build(ModelSpec, val, where)


def parse_run(doc: Mapping, where: str) -> tuple[str, RunSpec]:
    _check_keys(doc, {"id", "model", "batch", "phase", "seq_len", "quant"}, where)
    if "model" not in doc:
        raise ConfigError(where, "run needs 'model'")
    model = parse_model(doc["model"], f"{where}.model")
    quant = _build(QuantSpec, doc.get("quant", {}), f"{where}.quant")
    try:
        phase = Phase(doc.get("phase", "decode"))
    except ValueError:
        raise ConfigError(f"{where}.phase", f"unknown phase {doc.get('phase')!r}") from None
    try:
        run = RunSpec(model, int(doc.get("batch", 8)), phase, doc.get("seq_len"), quant)
    except (TypeError, ValueError) as exc:
        raise ConfigError(where, str(exc)) from exc
    return str(doc.get("id", run.label)), run


@dataclass(frozen=True)
class ErrorCurveSpec:
    kind: NonlinearKind = NonlinearKind.EXP
    min_exp: int = -3
    max_exp: int = 4
    signed: bool = False
    lo: float = -16.0
    hi: float = 0.0
    samples: int = 4001

    def __post_init__(self) -> None:
        if self.samples < 2:
            raise ValueError("error curve needs at least 2 samples")

    @property
    def window(self) -> LutWindow:
        return LutWindow(self.min_exp, self.max_exp, self.signed)


@dataclass(frozen=True)
class ExperimentConfig:
    designs: tuple[tuple[str, Design], ...]
    runs: tuple[tuple[str, RunSpec], ...]
    noc: NocConfig = NocConfig()
    cost_table: CostTable = field(default_factory=default_cost_table)
    carbon: CarbonParams | None = None
    baseline: str | None = None
    output_dir: str = "out"
    seed: int = 0
    workers: int = 1
    functional_check: int = 0
    error_curves: tuple[ErrorCurveSpec, ...] = ()


TOP_KEYS = {
    "designs", "runs", "noc", "cost_table", "carbon", "baseline", "output_dir", "seed", "workers",
    "sweep", "functional_check", "error_curves",
}


def _expand_sweep(designs, runs, sweep: Mapping) -> tuple[list, list]:
    _check_keys(sweep, {"batch", "seq_len", "height"}, "sweep")
    for axis, vals in sweep.items():
        if not isinstance(vals, list) or not vals:
            raise ConfigError(f"sweep.{axis}", "expected a non-empty list")
    if "height" in sweep:
        out = []
        for did, d in designs:
            # only row-scalable arrays; fixed comparison designs keep their geometry
            if isinstance(d, ArrayConfig) or d.kind in (BaselineKind.CARAT, BaselineKind.MUGI_L):
                out += [(f"{did}-h{h}", replace(d, height=int(h))) for h in sweep["height"]]
            else:
                out.append((did, d))
        designs = out
    batches = sweep.get("batch", [None])
    seqs = sweep.get("seq_len", [None])
    if "batch" in sweep or "seq_len" in sweep:
        out = []
        for rid, r in runs:
            for b, s in itertools.product(batches, seqs):
                rr = replace(r, batch=int(b) if b is not None else r.batch, seq_len=int(s) if s is not None else r.seq_len)
                suffix = "".join(
                    [f"-b{rr.batch}" if b is not None else "", f"-s{rr.seq}" if s is not None else ""]
                )
                out.append((rid + suffix, rr))
        runs = out
    return designs, runs


def _checked_sweep(designs, runs, sweep: Mapping) -> tuple[list, list]:
    try:
        return _expand_sweep(designs, runs, sweep)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError("sweep", str(exc)) from exc


def parse_config(doc: Mapping | None, base_dir: Path | None = None) -> ExperimentConfig:
    doc = doc or {}
    _check_keys(doc, TOP_KEYS, "")
    designs = [parse_design(d, f"designs[{i}]") for i, d in enumerate(doc.get("designs") or [])]
    runs = [parse_run(r, f"runs[{i}]") for i, r in enumerate(doc.get("runs") or [])]
    designs, runs = _checked_sweep(designs, runs, doc.get("sweep") or {})
    for label, items in (("designs", designs), ("runs", runs)):
        ids = [i for i, _ in items]
        dup = {i for i in ids if ids.count(i) > 1}
        if dup:
            raise ConfigError(label, f"duplicate id(s) {sorted(dup)}")
    noc = _build(NocConfig, doc.get("noc", {}), "noc")
    table_ref = doc.get("cost_table", "default")
    if table_ref == "default":
        table = default_cost_table()
    else:
        path = Path(table_ref)
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        if not path.exists():
            raise ConfigError("cost_table", f"file not found: {path}")
        try:
            table = CostTable.load(path)
        except ValueError as exc:
            raise ConfigError("cost_table", str(exc)) from exc
    carbon = None
    if runs:
        if "carbon" not in doc:
            raise ConfigError("carbon", "ci_g_per_j and cpa_g_per_mm2 are required (no defaults)")
        carbon = _build(CarbonParams, doc["carbon"], "carbon")
    baseline = doc.get("baseline")
    if baseline is not None and baseline not in {i for i, _ in designs}:
        raise ConfigError("baseline", f"unknown design id {baseline!r}")
    curves = tuple(
        _build(ErrorCurveSpec, c, f"error_curves[{i}]", convert={"kind": NonlinearKind})
        for i, c in enumerate(doc.get("error_curves") or [])
    )
    for key, typ in (("seed", int), ("workers", int), ("functional_check", int)):
        if key in doc and (not isinstance(doc[key], int) or doc[key] < 0):
            raise ConfigError(key, "expected a non-negative integer")
    if doc.get("workers", 1) < 1:
        raise ConfigError("workers", "must be >= 1")
    # every design must be able to run every op of every run
    for did, d in designs:
        if isinstance(d, BaselineConfig) and d.kind.is_vector and runs:
            raise ConfigError(f"designs[{did}]", "vector-only designs cannot run full LLM graphs")
    return ExperimentConfig(
        tuple(designs), tuple(runs), noc, table, carbon, baseline,
        str(doc.get("output_dir", "out")), int(doc.get("seed", 0)), int(doc.get("workers", 1)),
        int(doc.get("functional_check", 0)), curves,
    )


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text())
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError("config", f"not valid YAML: {exc}") from exc
    return parse_config(doc, path.parent)


# ---------------------------------------------------------------------------
# running


E2E_COLUMNS = [
    "design", "run", "model", "batch", "seq_len", "phase", "nodes", "cycles_per_step", "latency_s",
    "tokens_per_s", "area_mm2", "array_area_mm2", "energy_j", "avg_power_w", "energy_eff", "power_eff",
    "operational_g", "embodied_g", "baseline", "norm_throughput", "norm_energy_eff", "norm_power_eff",
    "norm_area", "norm_operational", "norm_embodied",
]
BREAKDOWN_COLUMNS = [
    "design", "run", "proj_cycles", "attn_cycles", "ffn_cycles", "nonlinear_cycles",
    "proj_share", "attn_share", "ffn_share", "nonlinear_share", "unmodeled_ops",
]
CARBON_COLUMNS = [
    "design", "run", "operational_g", "embodied_g", "total_g", "norm_operational", "norm_embodied",
]
FUNCTIONAL_COLUMNS = ["check", "case", "shape", "ok", "detail"]
NORMALISED = {
    "norm_throughput": "tokens_per_s", "norm_energy_eff": "energy_eff", "norm_power_eff": "power_eff",
    "norm_area": "area_mm2", "norm_operational": "operational_g", "norm_embodied": "embodied_g",
}


@dataclass
class PointResult:
    design_id: str
    run_id: str
    row: dict
    breakdown: dict
    ops: list[dict]


def run_point(args: tuple) -> PointResult:
    did, design, rid, run, noc, table, carbon = args
    graph = build_graph(run)
    sched = noc_schedule(noc, graph, design)
    rep = cost_report(sched, table, carbon)
    row = {
        "design": did, "run": rid, "model": run.model.name, "batch": run.batch, "seq_len": run.seq,
        "phase": run.phase.value, "nodes": noc.nodes, "cycles_per_step": sched.total_cycles,
        "latency_s": sched.seconds, "tokens_per_s": rep.throughput, "area_mm2": rep.area_mm2,
        "array_area_mm2": rep.array_area_mm2, "energy_j": rep.energy_j, "avg_power_w": rep.avg_power_w,
        "energy_eff": rep.energy_eff, "power_eff": rep.power_eff, "operational_g": rep.operational_g,
        "embodied_g": rep.embodied_g,
    }
    cats = sched.category_cycles()
    total = sum(cats.values()) or 1
    breakdown = {"design": did, "run": rid}
    for c, v in cats.items():
        breakdown[f"{c}_cycles"] = v
    for c, v in cats.items():
        breakdown[f"{c}_share"] = v / total
    breakdown["unmodeled_ops"] = ";".join(op.name for op in graph.unmodeled_ops)
    ops = [t.to_record() for t in sched.ops]
    return PointResult(did, rid, row, breakdown, ops)


def _fmt(v: Any) -> Any:
    if isinstance(v, float):
        return repr(v)
    return v


def _write_csv(path: Path, columns: list[str], rows: list[dict]) -> None:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: _fmt(r.get(k, "")) for k in columns})
    path.write_text(buf.getvalue())


def normalise(rows: list[dict], baseline: str | None) -> None:
    by_run = {r["run"]: r for r in rows if r["design"] == baseline}
    for r in rows:
        base = by_run.get(r["run"])
        r["baseline"] = baseline or ""
        for col, raw in NORMALISED.items():
            r[col] = r[raw] / base[raw] if base and base[raw] else ""


def functional_rows(n_cases: int, seed: int) -> list[dict]:
    """Seeded self-check of the functional datapath against scalar references."""
    rng = np.random.default_rng(seed)
    exp_lut = build_lut(NonlinearKind.EXP)
    rows = []
    for case in range(n_cases):
        m, n, k = (int(v) for v in rng.integers(1, 17, size=3))
        a = rng.integers(-7, 8, size=(m, k))
        b = float_to_bf16_bits(rng.standard_normal((k, n)))
        got = gemm(a, b, array_height=8)
        want = reference_gemm(a, b)
        rows.append({"check": "gemm", "case": case, "shape": f"{m}x{n}x{k}",
                     "ok": bool(np.array_equal(got, want)), "detail": ""})
        length = int(rng.integers(2, 513))
        x = rng.standard_normal(length) * float(rng.uniform(0.5, 8.0))
        s = bf16_bits_to_float(softmax(x, exp_lut)).astype(np.float64)
        total = float(s.sum())
        rows.append({"check": "softmax", "case": case, "shape": str(length),
                     "ok": bool(abs(total - 1.0) <= 2.0**-6 and (s >= 0).all()), "detail": repr(total)})
    return rows


def reference_gemm(a, b_bits, scales=None, group_size=None) -> np.ndarray:
    """Scalar-loop INT4 x BF16 GEMM with the same accumulation order as the array."""
    a = np.asarray(a)
    b = bf16_bits_to_float(as_bf16_bits(b_bits))
    m_dim, k_dim = a.shape
    g = k_dim if group_size is None else group_size
    sc = np.ones((m_dim, k_dim // g), np.float32) if scales is None else bf16_bits_to_float(as_bf16_bits(scales))
    out = np.zeros((m_dim, b.shape[1]), np.float32)
    for i in range(m_dim):
        for j in range(b.shape[1]):
            acc = np.float32(0)
            for grp in range(k_dim // g):
                part = np.float32(0)
                for kk in range(grp * g, (grp + 1) * g):
                    w = int(a[i, kk])
                    mag = min(abs(w), 7)
                    prod = np.float32(0)
                    for _ in range(mag):
                        prod = np.float32(prod + b[kk, j])
                    part = np.float32(part + (-prod if w < 0 else prod))
                acc = np.float32(acc + np.float32(sc[i, grp] * part))
            out[i, j] = acc
    return float_to_bf16_bits(out.astype(np.float64))


@dataclass
class ErrorCurve:
    x: np.ndarray  # requested sample points
    x_bf16: np.ndarray  # BF16-rounded inputs (float64 values)
    approx: np.ndarray
    reference: np.ndarray
    rel_error: np.ndarray
    path: np.ndarray
    cycles: np.ndarray

    def rows(self) -> list[dict]:
        return [
            {"x": float(a), "x_bf16": float(b), "approx": float(c), "reference": float(d),
             "rel_error": float(e), "path": int(p)}
            for a, b, c, d, e, p in zip(self.x, self.x_bf16, self.approx, self.reference, self.rel_error, self.path)
        ]


ERROR_CURVE_COLUMNS = ["x", "x_bf16", "approx", "reference", "rel_error", "path"]


def error_curve(spec: ErrorCurveSpec, policy: WindowPolicy = WindowPolicy.ALIGN_MAX) -> ErrorCurve:
    """Relative error of the LUT approximation against double precision.

    Each sample is its own mapping so the sliding window depends only on the
    LUT window; flushed outputs report an error of exactly 1 (100%).
    """
    lut = build_lut(spec.kind, spec.window)
    x = np.linspace(spec.lo, spec.hi, spec.samples)
    bits = float_to_bf16_bits(x)
    xb = bf16_bits_to_float(bits).astype(np.float64)
    # one 1x8 mapping per sample, so each sample selects its own window
    res = approximate_stream(np.repeat(bits, 8), lut, height=1, policy=policy)
    approx = res.values()[::8].astype(np.float64)
    path, cycles = res.paths[::8], res.cycles[::8]
    ref = reference(spec.kind, xb)
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.abs(approx - ref) / np.abs(ref)
    rel = np.where(ref == 0, np.where(approx == 0, 0.0, np.inf), rel)
    return ErrorCurve(x, xb, approx, ref, rel, path, cycles)


def write_error_curve(curve: ErrorCurve, path: Path) -> None:
    _write_csv(path, ERROR_CURVE_COLUMNS, curve.rows())


def run_experiment(cfg: ExperimentConfig, out_dir: str | Path | None = None) -> dict[str, Path]:
    out = Path(out_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    points = [
        (did, d, rid, r, cfg.noc, cfg.cost_table, cfg.carbon)
        for rid, r in cfg.runs
        for did, d in cfg.designs
    ]
    if cfg.workers > 1 and len(points) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(run_point, points))
    else:
        results = [run_point(p) for p in points]
    rows = [r.row for r in results]
    normalise(rows, cfg.baseline)
    carbon_rows = [
        {"design": r["design"], "run": r["run"], "operational_g": r["operational_g"],
         "embodied_g": r["embodied_g"], "total_g": r["operational_g"] + r["embodied_g"],
         "norm_operational": r["norm_operational"], "norm_embodied": r["norm_embodied"]}
        for r in rows
    ]
    files = {
        "e2e": out / "e2e.csv",
        "breakdown": out / "breakdown.csv",
        "carbon": out / "carbon.csv",
        "ops": out / "ops.json",
    }
    _write_csv(files["e2e"], E2E_COLUMNS, rows)
    _write_csv(files["breakdown"], BREAKDOWN_COLUMNS, [r.breakdown for r in results])
    _write_csv(files["carbon"], CARBON_COLUMNS, carbon_rows)
    files["ops"].write_text(json.dumps(
        [{"design": r.design_id, "run": r.run_id, "ops": r.ops} for r in results], indent=1, sort_keys=True
    ))
    if cfg.functional_check:
        files["functional"] = out / "functional.csv"
        _write_csv(files["functional"], FUNCTIONAL_COLUMNS, functional_rows(cfg.functional_check, cfg.seed))
    for i, spec in enumerate(cfg.error_curves):
        key = f"error_curve_{i}"
        files[key] = out / f"error_curve_{i}_{spec.kind.value}.csv"
        write_error_curve(error_curve(spec), files[key])
    return files
