"""Adaptive Gauss-Legendre quadrature for integrands g(x) exp(i phi(x)).

Panels are bisected until the phase varies by less than pi/4 across each of
them, then until the difference between two Gauss-Legendre orders meets the
tolerance. Ends where phi diverges (slit walls) are handled by stopping at a
distance s from the end where the remaining piece is provably negligible:
|int_0^s g e^{i phi}| <= max|g| * min(s, 2 / |phi'(s)|) for monotone phi'.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ConvergenceError

MAX_PHASE_STEP = np.pi / 4

_GL_HI = np.polynomial.legendre.leggauss(16)
_GL_LO = np.polynomial.legendre.leggauss(8)


@dataclass(frozen=True)
class QuadResult:
    values: np.ndarray  # one complex value per amplitude
    error: float  # estimated absolute error, tail bounds included
    n_panels: int
    end_cutoffs: tuple[float, float]  # excluded length at each end
    tail_bound: float


def _tail_stop(phase, end, direction, scale, tol, amp_max):
    """Distance from ``end`` below which the integrand may be dropped."""
    target = tol * scale
    s = scale / 4
    while s > scale * 1e-300:
        x0 = end + direction * s
        x1 = end + direction * s * (1 + 1e-3)
        with np.errstate(all="ignore"):
            dphi = abs(float(phase(np.array([x1]))[0] - phase(np.array([x0]))[0])) / (s * 1e-3)
        bound = s if not np.isfinite(dphi) or dphi == 0 else min(s, 2.0 / dphi)
        if bound <= target:
            return s, bound * amp_max
        s /= 2
    raise ConvergenceError(f"cannot bound the integrand tail near x = {end:g}")


def _phase_variation(phase, left, right):
    t = np.linspace(0.0, 1.0, 5)
    x = left[:, None] + (right - left)[:, None] * t[None, :]
    with np.errstate(all="ignore"):
        ph = phase(x)
    tv = np.abs(np.diff(ph, axis=1)).sum(axis=1)
    return np.where(np.isfinite(tv), tv, np.inf)


def _gl(amplitudes, phase, left, right, rule):
    nodes, weights = rule
    half = 0.5 * (right - left)
    x = 0.5 * (right + left)[:, None] + half[:, None] * nodes[None, :]
    e = np.exp(1j * phase(x))
    return np.stack([((amp(x) * e) @ weights) * half for amp in amplitudes])


def oscillatory_quad(
    amplitudes: Sequence[Callable[[np.ndarray], np.ndarray]],
    phase: Callable[[np.ndarray], np.ndarray],
    lo: float,
    hi: float,
    *,
    singular: tuple[bool, bool] = (False, False),
    tol: float = 1e-11,
    max_step: float | None = None,
    max_panels: int = 2_000_000,
) -> QuadResult:
    """Integrate amp_k(x) exp(i phase(x)) over [lo, hi] for every amplitude.

    All amplitudes share one panel set. ``tol`` is relative to (hi - lo) times
    the largest amplitude magnitude.
    """
    scale = hi - lo
    if not scale > 0:
        raise ValueError("need lo < hi")
    probe = np.linspace(lo, hi, 257)[1:-1]
    amp_max = max(float(np.max(np.abs(a(probe)))) for a in amplitudes)
    amp_max = max(amp_max, max(abs(float(a(np.array([lo]))[0])) + abs(float(a(np.array([hi]))[0])) for a in amplitudes))
    abs_tol = tol * scale * max(amp_max, 1e-300)

    cut = [0.0, 0.0]
    tail = 0.0
    if singular[0]:
        cut[0], b = _tail_stop(phase, lo, +1, scale, tol, amp_max)
        tail += b
    if singular[1]:
        cut[1], b = _tail_stop(phase, hi, -1, scale, tol, amp_max)
        tail += b
    a, b = lo + cut[0], hi - cut[1]

    step = max_step if max_step is not None else scale / 16
    n0 = max(1, int(np.ceil((b - a) / step)))
    edges = [np.linspace(a, b, n0 + 1)]
    for k, (s, end, direction) in enumerate(((cut[0], lo, 1), (cut[1], hi, -1))):
        if singular[k]:
            n_grade = max(0, int(np.ceil(np.log2(scale / (4 * s)))))
            grading = s * 2.0 ** np.arange(n_grade)
            grading = grading[grading < scale / 4]
            edges.append(end + direction * grading)
    edges = np.unique(np.concatenate(edges))
    edges = edges[(edges >= a) & (edges <= b)]
    left, right = edges[:-1], edges[1:]

    for _ in range(400):
        bad = _phase_variation(phase, left, right) > MAX_PHASE_STEP
        if not bad.any():
            break
        mid = 0.5 * (left[bad] + right[bad])
        left = np.concatenate([left[~bad], left[bad], mid])
        right = np.concatenate([right[~bad], mid, right[bad]])
        if left.size > max_panels:
            raise ConvergenceError(f"phase refinement exceeded {max_panels} panels")
    else:
        raise ConvergenceError("phase refinement did not terminate")

    for _ in range(60):
        hi_q = _gl(amplitudes, phase, left, right, _GL_HI)
        lo_q = _gl(amplitudes, phase, left, right, _GL_LO)
        err = np.max(np.abs(hi_q - lo_q), axis=0)
        if err.sum() <= abs_tol:
            break
        bad = err > abs_tol * (right - left) / scale
        if not bad.any():
            bad = err >= np.sort(err)[-max(1, err.size // 10)]
        mid = 0.5 * (left[bad] + right[bad])
        left = np.concatenate([left[~bad], left[bad], mid])
        right = np.concatenate([right[~bad], mid, right[bad]])
        if left.size > max_panels:
            raise ConvergenceError(f"error refinement exceeded {max_panels} panels")
    else:
        raise ConvergenceError(f"quadrature error {err.sum():.3g} above tolerance {abs_tol:.3g}")

    order = np.argsort(left, kind="stable")
    values = hi_q[:, order]
    # fixed-order pairwise summation along x
    total = np.array([np.sum(v) for v in values])
    return QuadResult(total, float(err.sum() + tail), int(left.size), (cut[0], cut[1]), tail)
