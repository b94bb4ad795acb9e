"""Compare the compiled and pure-Python kernel backends.

    python benchmarks/bench_kernels.py [--repeat 5] [--json out.json]

Each kernel runs on identical inputs under both backends; outputs are checked
for bitwise equality before timings are reported.
"""
from __future__ import annotations

import argparse
import json
import sys
import timeit

import numpy as np

from mugisim import kernels
from mugisim.lut import LutWindow, NonlinearKind, build_lut


def cases(rng: np.random.Generator) -> dict[str, tuple]:
    lut = build_lut(NonlinearKind.EXP, LutWindow(-6, 5, True))
    pats = rng.integers(0, 1 << 16, 1 << 20).astype(np.uint16)
    bases = np.full(pats.size, -2, dtype=np.int64)
    xs = rng.standard_normal(1 << 20) * 1e3
    a = rng.integers(-8, 8, (256, 1024)).astype(np.int8)
    b = rng.standard_normal((1024, 8)).astype(np.float32)
    s = rng.uniform(-2, 2, (256, 8)).astype(np.float32)
    return {
        "round_bf16 (1M)": ("round_bf16", (xs,)),
        "approx_lookup (1M)": ("approx_lookup", (pats, lut.table, lut.sign_slot, lut.window.min_exp, bases, True)),
        "gemm_accumulate (256x1024x8)": ("gemm_accumulate", (a, s, b, 128)),
    }


def _same(x, y) -> bool:
    if isinstance(x, tuple):
        return all(_same(p, q) for p, q in zip(x, y))
    return np.array_equal(np.asarray(x).view(np.uint8), np.asarray(y).view(np.uint8))


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", help="write timings to this file")
    args = ap.parse_args(argv)

    backends = kernels.available_backends()
    if "compiled" not in backends:
        print("compiled backend not built; only the Python fallback is available", file=sys.stderr)
    rng = np.random.default_rng(0)
    results = []
    print(f"{'kernel':32s} " + " ".join(f"{name:>12s}" for name in backends) + "     speedup")
    for label, (fn, fargs) in cases(rng).items():
        outs, times = {}, {}
        for name, mod in backends.items():
            f = getattr(mod, fn)
            outs[name] = f(*fargs)
            times[name] = min(timeit.repeat(lambda: f(*fargs), number=1, repeat=args.repeat))
        if "compiled" in outs and not _same(outs["python"], outs["compiled"]):
            print(f"{label}: backends disagree", file=sys.stderr)
            return 1
        speedup = times["python"] / times["compiled"] if "compiled" in times else float("nan")
        print(f"{label:32s} " + " ".join(f"{times[n] * 1e3:10.2f}ms" for n in backends) + f"  {speedup:9.1f}x")
        results.append({"kernel": label, **{f"{n}_s": t for n, t in times.items()}, "speedup": speedup})
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(results, fh, indent=1)
    return 0


if __name__ == "__main__":
    sys.exit(main())
