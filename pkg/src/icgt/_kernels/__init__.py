"""Kernel backend selection.

The hot per-step operations (neighbor averaging, probabilistic quantization)
have a compiled Cython core and a pure-numpy fallback.  The backend is chosen
at import time: the compiled extension when present, numpy otherwise.  Set
``ICGT_BACKEND=py`` or ``ICGT_BACKEND=compiled`` to force one; ``use()``
switches at runtime (used by tests and the kernel benchmark).
"""

from __future__ import annotations

import os

import numpy as np

from . import py_impl

try:
    from . import _accel as compiled_impl
except ImportError:
    compiled_impl = None

_BACKENDS = {"py": py_impl}
if compiled_impl is not None:
    _BACKENDS["compiled"] = compiled_impl

_requested = os.environ.get("ICGT_BACKEND", "auto")
if _requested not in ("auto", "py", "compiled"):
    raise RuntimeError(f"ICGT_BACKEND must be auto|py|compiled, got {_requested!r}")
if _requested == "compiled" and compiled_impl is None:
    raise RuntimeError("ICGT_BACKEND=compiled but the extension is not built")

_active = _BACKENDS.get(_requested) or _BACKENDS.get("compiled") or py_impl


def available_backends() -> tuple[str, ...]:
    return tuple(sorted(_BACKENDS))


def backend_name() -> str:
    return _active.NAME


def use(name: str) -> None:
    """Switch the active backend ('py' or 'compiled')."""
    global _active
    if name not in _BACKENDS:
        raise ValueError(f"backend {name!r} not available; have {available_backends()}")
    _active = _BACKENDS[name]


def mix(W: np.ndarray, X: np.ndarray) -> np.ndarray:
    """W @ X for a mixing matrix W (n, n) and stacked block X (n, d)."""
    W = np.ascontiguousarray(W, dtype=np.float64)
    X = np.ascontiguousarray(X, dtype=np.float64)
    return _active.mix(W, X)


def prob_quantize(x: np.ndarray, delta_p: int, u: np.ndarray) -> np.ndarray:
    """Unbiased randomized rounding of ``x`` to the 1/delta_p grid."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    u = np.ascontiguousarray(u, dtype=np.float64)
    if x.shape != u.shape:
        raise ValueError("x and u must have the same shape")
    flat = _active.prob_quantize(x.ravel(), float(delta_p), u.ravel())
    return np.asarray(flat).reshape(x.shape)
