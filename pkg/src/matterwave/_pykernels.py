"""Numpy implementations of the compiled kernels (same signatures).

Used when the extension is not built, or when forced with
MATTERWAVE_PURE_PYTHON=1. ``threads`` is accepted and ignored.
"""
import numpy as np
from scipy.special import fresnel

_CHUNK = 1 << 22  # complex elements per temporary block


def fresnel_sum(x_out, x_in, f_in, k, threads=1):
    x_out = np.asarray(x_out, dtype=float)
    x_in = np.asarray(x_in, dtype=float)
    f_in = np.asarray(f_in, dtype=complex)
    out = np.empty(x_out.size, dtype=complex)
    step = max(1, _CHUNK // max(x_in.size, 1))
    for start in range(0, x_out.size, step):
        d = x_out[start:start + step, None] - x_in[None, :]
        out[start:start + step] = np.exp(1j * k * d * d) @ f_in
    return out


def slit_source_intensity(x_det, x_src, scale_src, w_src, first_edge, period, width, c_slit, alpha, threads=1):
    x_det = np.asarray(x_det, dtype=float)
    x_src = np.asarray(x_src, dtype=float)
    scale_src = np.asarray(scale_src, dtype=float)
    w_src = np.asarray(w_src, dtype=float)
    c_slit = np.asarray(c_slit, dtype=float)
    lo = first_edge + period * np.arange(c_slit.size)
    hi = lo + width
    out = np.zeros(x_det.size)
    step = max(1, _CHUNK // max(x_det.size * lo.size, 1))
    for start in range(0, x_src.size, step):
        xs = x_src[start:start + step, None]
        sc = scale_src[start:start + step, None, None]
        m = (alpha * xs + (1.0 - alpha) * x_det[None, :])[:, :, None]
        s1, c1 = fresnel((lo - m) * sc)
        s2, c2 = fresnel((hi - m) * sc)
        re = ((c2 - c1) * c_slit).sum(axis=2)
        im = ((s2 - s1) * c_slit).sum(axis=2)
        out += w_src[start:start + step] @ (re * re + im * im)
    return out
