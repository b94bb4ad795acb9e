"""Kernel backend selection.

The compiled core is used when it imports; set ``MUGISIM_PURE=1`` to force
the numpy fallback. ``BACKEND`` names the active implementation.
"""
from __future__ import annotations

import os
from types import ModuleType

from . import _kernels_py

PATH_LUT = _kernels_py.PATH_LUT
PATH_SPECIAL = _kernels_py.PATH_SPECIAL
PATH_CLAMP = _kernels_py.PATH_CLAMP
PATH_MISSING_SIGN = _kernels_py.PATH_MISSING_SIGN


def _load_compiled() -> ModuleType | None:
    if os.environ.get("MUGISIM_PURE", "") not in ("", "0"):
        return None
    try:
        from . import _kernels  # type: ignore[attr-defined]
    except ImportError:
        return None
    return _kernels


_compiled = _load_compiled()
BACKEND = "compiled" if _compiled is not None else "python"


def available_backends() -> dict[str, ModuleType]:
    found = {"python": _kernels_py}
    try:
        from . import _kernels  # type: ignore[attr-defined]

        found["compiled"] = _kernels
    except ImportError:
        pass
    return found


def backend_module(name: str | None = None) -> ModuleType:
    if name is None:
        return _compiled if _compiled is not None else _kernels_py
    mods = available_backends()
    if name not in mods:
        raise ValueError(f"kernel backend {name!r} not available (have {sorted(mods)})")
    return mods[name]


_active = backend_module()
round_bf16 = _active.round_bf16
approx_lookup = _active.approx_lookup
gemm_accumulate = _active.gemm_accumulate
