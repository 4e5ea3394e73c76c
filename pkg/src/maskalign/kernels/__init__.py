"""Backend selection for the fused per-video forward/backward kernel.

Two interchangeable implementations exist: a Cython extension
(`maskalign.kernels._fast`) and a pure NumPy fallback
(`maskalign.kernels.pure`). The compiled one is used when importable
unless the environment variable MASKALIGN_PURE is set to a non-empty
value other than "0". Both expose `video_loss_grad` with an identical
signature; `benchmarks/bench_kernels.py` compares their speed.
"""

from __future__ import annotations

import os

from . import pure

# integer codes shared by both backends
GAUSSIAN, CAUCHY, HARD_BINARY = 0, 1, 2
POOL_PLAIN, POOL_WEIGHTED = 0, 1

try:
    from . import _fast
    if not hasattr(_fast, "video_loss_grad"):
        _fast = None
except ImportError:  # built without the extension
    _fast = None

if os.environ.get("MASKALIGN_PURE", "") not in ("", "0") or _fast is None:
    _active = pure
    BACKEND = "pure"
else:
    _active = _fast
    BACKEND = "compiled"


def backend_names() -> list[str]:
    """Importable backend names, the active one first."""
    names = ["compiled", "pure"] if _fast is not None else ["pure"]
    if BACKEND == "pure" and "compiled" in names:
        names.remove("compiled")
        names.append("compiled")
    return names


def get_kernel(backend: str | None = None):
    """Return the `video_loss_grad` callable for a backend name.

    None or "auto" picks the active backend.
    """
    if backend in (None, "auto"):
        return _active.video_loss_grad
    if backend == "pure":
        return pure.video_loss_grad
    if backend == "compiled":
        if _fast is None:
            raise RuntimeError("compiled kernel backend is not available")
        return _fast.video_loss_grad
    raise ValueError(f"unknown backend {backend!r}")
