"""Kernel backend selection: compiled Cython extension when available,
pure-Python fallback otherwise.

Set ``STABINDEX_BACKEND=python`` (or ``compiled``) to force one side; the
``bench`` CLI subcommand compares the two on the same workload.
"""

from __future__ import annotations

import os

from . import _kernel_py

try:
    from . import _kernel  # type: ignore[attr-defined]

    HAVE_COMPILED = True
except ImportError:
    _kernel = None
    HAVE_COMPILED = False


def get_kernel(name: str | None = None):
    """Return the kernel module for ``name`` in {None, 'compiled', 'python'};
    None resolves via STABINDEX_BACKEND, then to compiled when built."""
    if name is None:
        name = os.environ.get("STABINDEX_BACKEND", "").strip() or None
    if name in (None, "compiled"):
        if HAVE_COMPILED:
            return _kernel
        if name == "compiled":
            raise RuntimeError("compiled kernel requested but the extension is not built")
        return _kernel_py
    if name == "python":
        return _kernel_py
    raise ValueError(f"unknown backend {name!r}")


def backend_name(kernel=None) -> str:
    kernel = kernel or get_kernel()
    return "compiled" if getattr(kernel, "COMPILED", False) else "python"
