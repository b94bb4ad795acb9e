"""Command-line entry point.

Exit codes: 0 success, 1 configuration error, 2 runtime error.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .experiment import (
    ConfigError,
    ErrorCurveSpec,
    error_curve,
    load_config,
    run_experiment,
    write_error_curve,
)
from .lut import LutWindow, NonlinearKind, build_lut, save_lut
from .workload import MODELS, Phase, RunSpec, build_graph

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mugisim", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="verb", required=True)

    def common(sp: argparse.ArgumentParser, config_required: bool) -> None:
        sp.add_argument("--config", required=config_required, help="experiment YAML file")
        sp.add_argument("--out", help="output directory or file")
        sp.add_argument("--workers", type=int, help="parallel sweep workers")
        sp.add_argument("--seed", type=int, help="seed for stochastic inputs")

    common(sub.add_parser("validate", help="check a config file"), True)
    common(sub.add_parser("run", help="run every design x run point and write reports"), True)

    ec = sub.add_parser("error-curve", help="relative-error curve of a LUT approximation")
    common(ec, False)
    ec.add_argument("--kind", default="exp", choices=[k.value for k in NonlinearKind])
    ec.add_argument("--min-exp", type=int, default=-3)
    ec.add_argument("--max-exp", type=int, default=4)
    ec.add_argument("--signed", action="store_true")
    ec.add_argument("--lo", type=float, default=-16.0)
    ec.add_argument("--hi", type=float, default=0.0)
    ec.add_argument("--samples", type=int, default=4001)

    dl = sub.add_parser("dump-lut", help="write a LUT as binary (.lut) or JSON (.json)")
    common(dl, False)
    dl.add_argument("--kind", default="exp", choices=[k.value for k in NonlinearKind])
    dl.add_argument("--min-exp", type=int, default=-6)
    dl.add_argument("--max-exp", type=int, default=5)
    dl.add_argument("--signed", action="store_true")

    dg = sub.add_parser("dump-graph", help="print the op graph of a model run as JSON")
    common(dg, False)
    dg.add_argument("--model", default="llama2-70b", choices=sorted(MODELS))
    dg.add_argument("--batch", type=int, default=8)
    dg.add_argument("--seq-len", type=int, default=None)
    dg.add_argument("--phase", default="decode", choices=[p.value for p in Phase])
    return p


def _load(args):
    cfg = load_config(args.config)
    if args.workers is not None:
        if args.workers < 1:
            raise ConfigError("--workers", "must be >= 1")
        cfg = replace(cfg, workers=args.workers)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    return cfg


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.verb == "validate":
            cfg = _load(args)
            print(f"ok: {len(cfg.designs)} design(s), {len(cfg.runs)} run(s)")
        elif args.verb == "run":
            cfg = _load(args)
            files = run_experiment(cfg, args.out)
            for name, path in files.items():
                print(f"{name}: {path}")
        elif args.verb == "error-curve":
            try:
                spec = ErrorCurveSpec(
                    NonlinearKind(args.kind), args.min_exp, args.max_exp, args.signed, args.lo, args.hi, args.samples
                )
                spec.window  # validates the exponent range
            except ValueError as exc:
                raise ConfigError("error-curve", str(exc)) from exc
            curve = error_curve(spec)
            out = Path(args.out or f"error_curve_{spec.kind.value}.csv")
            write_error_curve(curve, out)
            print(f"error curve: {out}")
        elif args.verb == "dump-lut":
            try:
                window = LutWindow(args.min_exp, args.max_exp, args.signed)
            except ValueError as exc:
                raise ConfigError("dump-lut", str(exc)) from exc
            lut = build_lut(NonlinearKind(args.kind), window)
            out = Path(args.out or f"{args.kind}.lut")
            save_lut(lut, out)
            print(f"lut: {out}")
        elif args.verb == "dump-graph":
            try:
                run = RunSpec(MODELS[args.model], args.batch, Phase(args.phase), args.seq_len)
            except ValueError as exc:
                raise ConfigError("dump-graph", str(exc)) from exc
            _emit(build_graph(run).to_json() + "\n", args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - any failure past validation is a runtime error
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
