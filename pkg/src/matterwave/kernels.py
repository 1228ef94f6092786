"""Backend selection for the hot loops.

The compiled extension is used when importable; set ``MATTERWAVE_PURE_PYTHON=1``
to force the numpy fallback. Results agree between backends to rounding, and
each backend is bit-reproducible for any thread count.
"""
from __future__ import annotations

import contextlib
import os

import numpy as np

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

_backends = {"python": _pykernels}
if _ckernels is not None:
    _backends["cython"] = _ckernels

_active = "python" if os.environ.get("MATTERWAVE_PURE_PYTHON") or _ckernels is None else "cython"
_threads = os.cpu_count() or 1


def available_backends() -> list[str]:
    return list(_backends)


def backend() -> str:
    return _active


def set_backend(name: str) -> None:
    global _active
    if name not in _backends:
        raise ValueError(f"backend {name!r} not available; have {available_backends()}")
    _active = name


def threads() -> int:
    return _threads


def set_threads(n: int | None) -> None:
    global _threads
    _threads = max(1, int(n)) if n else (os.cpu_count() or 1)


@contextlib.contextmanager
def using(backend_name: str | None = None, n_threads: int | None = None):
    old = (_active, _threads)
    try:
        if backend_name is not None:
            set_backend(backend_name)
        if n_threads is not None:
            set_threads(n_threads)
        yield
    finally:
        set_backend(old[0])
        set_threads(old[1])


def _f64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def fresnel_sum(x_out, x_in, f_in, k: float) -> np.ndarray:
    """out[i] = sum_j f_in[j] exp(i k (x_out[i] - x_in[j])^2)"""
    return _backends[_active].fresnel_sum(
        _f64(x_out), _f64(x_in), np.ascontiguousarray(f_in, dtype=np.complex128), float(k), _threads
    )


def slit_source_intensity(x_det, x_src, scale_src, w_src, first_edge: float, period: float, width: float,
                          c_slit, alpha: float) -> np.ndarray:
    """Weighted incoherent sum over point sources of |multi-slit amplitude|^2
    for equally spaced slits [first_edge + j period, ... + width]."""
    return _backends[_active].slit_source_intensity(
        _f64(x_det), _f64(x_src), _f64(scale_src), _f64(w_src),
        float(first_edge), float(period), float(width), _f64(c_slit), float(alpha), _threads,
    )
