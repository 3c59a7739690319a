"""Backend selection: compiled kernel when available, NumPy otherwise."""

from __future__ import annotations

import os

from . import _kernel_py

try:
    from . import _kernel  # compiled extension, optional

    HAVE_COMPILED = True
except ImportError:  # pragma: no cover - depends on build environment
    _kernel = None
    HAVE_COMPILED = False

DEFAULT_BACKEND = "compiled" if HAVE_COMPILED else "numpy"


def get_kernel(backend: str | None = None):
    """Resolve a backend name to its kernel module.

    ``None`` picks the compiled kernel when the extension imported,
    otherwise the NumPy fallback.
    """
    if backend is None:
        backend = DEFAULT_BACKEND
    if backend == "compiled":
        if not HAVE_COMPILED:
            raise RuntimeError(
                "compiled kernel requested but the extension is not built; "
                "reinstall with a C toolchain or use backend='numpy'"
            )
        return _kernel
    if backend == "numpy":
        return _kernel_py
    raise ValueError(f"unknown backend {backend!r}; expected 'compiled' or 'numpy'")


def resolve_threads(n_threads: int | None = None) -> int:
    """Worker thread count: explicit value, else VALOR_THREADS, else all cores."""
    if n_threads is not None:
        if n_threads < 1:
            raise ValueError(f"n_threads must be >= 1, got {n_threads}")
        return int(n_threads)
    env = os.environ.get("VALOR_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1
