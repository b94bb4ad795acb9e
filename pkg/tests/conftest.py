from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from mugisim import kernels  # noqa: E402

ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture(params=sorted(kernels.available_backends()))
def backend(request, monkeypatch):
    """Route the kernel entry points through one backend for the test's duration."""
    mod = kernels.backend_module(request.param)
    for fn in ("round_bf16", "approx_lookup", "gemm_accumulate"):
        monkeypatch.setattr(kernels, fn, getattr(mod, fn))
    return request.param


@pytest.fixture
def record_acceptance():
    def record(n: int, ok: bool, detail: str) -> None:
        # parametrised criteria record once per case; the summary joins them
        if n in ACCEPTANCE:
            prev_ok, prev = ACCEPTANCE[n]
            ACCEPTANCE[n] = (prev_ok and bool(ok), f"{prev} | {detail}")
        else:
            ACCEPTANCE[n] = (bool(ok), detail)
        print(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
