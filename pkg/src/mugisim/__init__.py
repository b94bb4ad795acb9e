"""Simulator for value-level-parallel nonlinear and GEMM accelerator arrays."""
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
