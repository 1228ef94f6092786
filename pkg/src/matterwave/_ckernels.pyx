# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops.

Parallelism is over output samples only; every output value is a sum taken
in a fixed order, so results do not depend on the thread count.
"""
import numpy as np

from cython.parallel cimport prange
from libc.math cimport cos, sin
from scipy.special.cython_special cimport fresnel


def fresnel_sum(const double[::1] x_out, const double[::1] x_in,
                const double complex[::1] f_in, double k, int threads=1):
    """out[i] = sum_j f_in[j] * exp(1j * k * (x_out[i] - x_in[j])**2)"""
    cdef Py_ssize_t n_out = x_out.shape[0], n_in = x_in.shape[0]
    cdef Py_ssize_t i, j
    cdef double d, ph, re, im, fr, fi, c, s
    out = np.empty(n_out, dtype=np.complex128)
    cdef double complex[::1] o = out
    with nogil:
        for i in prange(n_out, num_threads=threads, schedule="static"):
            re = 0.0
            im = 0.0
            for j in range(n_in):
                d = x_out[i] - x_in[j]
                ph = k * d * d
                c = cos(ph)
                s = sin(ph)
                fr = f_in[j].real
                fi = f_in[j].imag
                re = re + fr * c - fi * s
                im = im + fr * s + fi * c
            o[i] = re + 1j * im
    return out


cdef double PI = 3.141592653589793
cdef double T_ASYM = 6.0
cdef int N_ASYM = 9
# (4k-1)!! and (4k+1)!! with alternating signs, k = 0..8
cdef double F_COEF[9]
cdef double G_COEF[9]
_f, _g = 1.0, 1.0
for _k in range(9):
    F_COEF[_k] = (-1) ** _k * _f
    G_COEF[_k] = (-1) ** _k * _g
    _f *= (4 * _k + 1) * (4 * _k + 3)
    _g *= (4 * _k + 3) * (4 * _k + 5)


cdef inline void fresnel_e(double t, double er, double ei, double *c, double *s) noexcept nogil:
    """C(t), S(t) given E = exp(i pi t^2 / 2) = er + i ei.

    Asymptotic auxiliary functions f, g for |t| >= T_ASYM, where the series
    is converged to rounding; scipy's routine below that.
    """
    cdef double at, u, u2, p, fs, gs, sg
    cdef int k
    if t < T_ASYM and t > -T_ASYM:
        fresnel(t, s, c)
        return
    at = t if t > 0 else -t
    sg = 1.0 if t > 0 else -1.0
    u = 1.0 / (PI * at * at)
    u2 = u * u
    fs = 0.0
    gs = 0.0
    p = 1.0
    for k in range(N_ASYM):
        fs = fs + F_COEF[k] * p
        gs = gs + G_COEF[k] * p
        p = p * u2
    fs = fs / (PI * at)
    gs = gs * u / (PI * at)
    # F = (1 + i)/2 - (g + i f) E
    c[0] = sg * (0.5 - (gs * er - fs * ei))
    s[0] = sg * (0.5 - (gs * ei + fs * er))


def slit_source_intensity(const double[::1] x_det, const double[::1] x_src,
                          const double[::1] scale_src, const double[::1] w_src,
                          double first_edge, double period, double width,
                          const double[::1] c_slit, double alpha, int threads=1):
    """Incoherent sum over point sources of coherent multi-slit amplitudes.

    Slit j spans [first_edge + j period, first_edge + j period + width].
    For source s and detector point x the stationary point of the combined
    chirp is m = alpha * x_src[s] + (1 - alpha) * x; each slit contributes
    c_slit[j] * (F(t_hi) - F(t_lo)), t = (edge - m) * scale_src[s], with
    F = C + iS. Edge phases exp(i pi t^2 / 2) advance by recurrence since
    the edges are equally spaced.
    out[i] = sum_s w_src[s] * |sum_j ...|^2
    """
    cdef Py_ssize_t n_det = x_det.shape[0], n_src = x_src.shape[0], n_slit = c_slit.shape[0]
    cdef Py_ssize_t i, s, j
    cdef double m, sc, re, im, acc, tl, th, dt, ph
    cdef double el_r, el_i, eh_r, eh_i, rl_r, rl_i, rh_r, rh_i, q_r, q_i, tmp
    cdef double cl, sl, ch, shh
    out = np.empty(n_det, dtype=np.float64)
    cdef double[::1] o = out
    with nogil:
        for i in prange(n_det, num_threads=threads, schedule="static"):
            acc = 0.0
            # written only through pointers below; assign here so prange makes them private
            cl = 0.0
            sl = 0.0
            ch = 0.0
            shh = 0.0
            for s in range(n_src):
                m = alpha * x_src[s] + (1.0 - alpha) * x_det[i]
                sc = scale_src[s]
                dt = period * sc
                q_r = cos(PI * dt * dt)
                q_i = sin(PI * dt * dt)
                tl = (first_edge - m) * sc
                th = tl + width * sc
                ph = 0.5 * PI * tl * tl
                el_r = cos(ph)
                el_i = sin(ph)
                ph = 0.5 * PI * (2.0 * tl * dt + dt * dt)
                rl_r = cos(ph)
                rl_i = sin(ph)
                ph = 0.5 * PI * th * th
                eh_r = cos(ph)
                eh_i = sin(ph)
                ph = 0.5 * PI * (2.0 * th * dt + dt * dt)
                rh_r = cos(ph)
                rh_i = sin(ph)
                re = 0.0
                im = 0.0
                for j in range(n_slit):
                    fresnel_e(tl + j * dt, el_r, el_i, &cl, &sl)
                    fresnel_e(th + j * dt, eh_r, eh_i, &ch, &shh)
                    re = re + c_slit[j] * (ch - cl)
                    im = im + c_slit[j] * (shh - sl)
                    # E <- E R, R <- R Q
                    tmp = el_r * rl_r - el_i * rl_i
                    el_i = el_r * rl_i + el_i * rl_r
                    el_r = tmp
                    tmp = rl_r * q_r - rl_i * q_i
                    rl_i = rl_r * q_i + rl_i * q_r
                    rl_r = tmp
                    tmp = eh_r * rh_r - eh_i * rh_i
                    eh_i = eh_r * rh_i + eh_i * rh_r
                    eh_r = tmp
                    tmp = rh_r * q_r - rh_i * q_i
                    rh_i = rh_r * q_i + rh_i * q_r
                    rh_r = tmp
                acc = acc + w_src[s] * (re * re + im * im)
            o[i] = acc
    return out
