"""Kernel backend selection.

The hot trip loop exists twice: a Cython extension (``_speedups``) linked
against numpy's random distribution library, and a pure-numpy fallback.  Both
consume the identical draw sequence and produce identical trajectories.  The
compiled kernel is preferred when importable; the VALUESIM_BACKEND
environment variable ("compiled", "python", "auto") or an explicit backend
argument overrides.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Callable

from . import py_kernel
from .plan import KernelPlan, ModeTable, TripsOut, build_mode_table

try:
    from . import _speedups

    HAVE_COMPILED = True
except ImportError:
    _speedups = None
    HAVE_COMPILED = False


@dataclass(frozen=True)
class Backend:
    name: str
    run_trips: Callable


_PYTHON = Backend("python", py_kernel.run_trips)
_COMPILED = Backend("compiled", _speedups.run_trips) if HAVE_COMPILED else None


def available_backends() -> tuple[str, ...]:
    return ("compiled", "python") if HAVE_COMPILED else ("python",)


def get_backend(name: str | None = None) -> Backend:
    """Resolve a backend by name, env var, or availability."""
    if name is None:
        name = os.environ.get("VALUESIM_BACKEND", "auto")
    name = name.lower()
    if name == "auto":
        return _COMPILED if _COMPILED is not None else _PYTHON
    if name == "python":
        return _PYTHON
    if name == "compiled":
        if _COMPILED is None:
            raise RuntimeError("compiled backend requested but the extension is not importable")
        return _COMPILED
    raise ValueError(f"unknown backend {name!r}; expected compiled, python, or auto")
