"""Slit wavefunctions, Fresnel propagation and far-field patterns.

Conventions
-----------
The field behind the grating is a superposition of identical single-slit
wavefunctions centred at ``(n - (N - 1) / 2) * D``; each is normalized to unit
integral. Free propagation over a distance L uses

    psi(x, L) = (lambda L)^(-1/2) * int exp[i pi (x - x')^2 / (lambda L)] psi(x', 0) dx'

which omits the constant phase exp(ikL); intensities are unaffected.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING, Callable, Sequence

import numpy as np

from . import kernels
from .errors import ConfigError, DomainError, ResolutionError
from .quadrature import MAX_PHASE_STEP, oscillatory_quad

if TYPE_CHECKING:
    from .interaction import MaterialSpec, PhaseProfile

SQRT_2PI = math.sqrt(2 * math.pi)
_GAUSS_SUPPORT = 12.0  # amplitude exp(-36) at the cut
FAR_FIELD_LHAT = 50.0
FAR_FIELD_WINDOW = 10.0


@dataclass(frozen=True)
class SlitProfile:
    """Single-slit wavefunction, normalized to unit integral.

    ``kind`` is ``"rectangular"`` (1/a on the open interval) or ``"gaussian"``
    (exp[-x^2 / (4 sigma^2)] with sigma = a / (2 sqrt(2 pi)) unless given).
    """

    kind: str
    width: float
    sigma: float | None = None

    def __post_init__(self):
        if self.kind not in ("rectangular", "gaussian"):
            raise ConfigError(f"unknown slit profile {self.kind!r}")
        if not self.width > 0:
            raise ConfigError("slit width must be positive")
        if self.sigma is None:
            object.__setattr__(self, "sigma", self.width / (2 * SQRT_2PI))
        if not self.sigma > 0:
            raise ConfigError("gaussian sigma must be positive")

    @property
    def half_support(self) -> float:
        if self.kind == "rectangular":
            return self.width / 2
        return _GAUSS_SUPPORT * self.sigma

    def amplitude(self, xi):
        xi = np.asarray(xi, dtype=float)
        if self.kind == "rectangular":
            return np.where(np.abs(xi) <= self.width / 2, 1.0 / self.width, 0.0)
        return np.exp(-(xi**2) / (4 * self.sigma**2)) / (2 * self.sigma * math.sqrt(math.pi))

    def envelope(self, q):
        """Fourier transform int psi(xi) exp(i q xi) dxi for the bare profile."""
        q = np.asarray(q, dtype=float)
        if self.kind == "rectangular":
            return np.sinc(q * self.width / (2 * math.pi)).astype(complex)
        return np.exp(-(self.sigma * q) ** 2).astype(complex)


@dataclass(frozen=True)
class GratingSpec:
    """N identical slits of open width ``profile.width`` (the narrow side, a_m).

    For trapezoidal bars of thickness ``thickness`` and wedge angle
    ``wedge_angle`` the exit width is a_M = a_m + 2 delta tan(beta).
    """

    n_slits: int
    period: float
    profile: SlitProfile
    thickness: float = 0.0
    wedge_angle: float = 0.0
    material: "MaterialSpec | None" = None
    weights: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.n_slits < 1:
            raise ConfigError("need at least one slit")
        if self.thickness < 0 or self.wedge_angle < 0:
            raise ConfigError("thickness and wedge angle must be non-negative")
        if self.wedge_angle >= math.pi / 2:
            raise ConfigError("wedge angle must be below 90 degrees")
        if self.n_slits > 1 and not self.period > self.max_width:
            raise ConfigError("period must exceed slit width")
        if self.weights is not None and len(self.weights) != self.n_slits:
            raise ConfigError("one weight per slit required")

    @property
    def width(self) -> float:
        return self.profile.width

    @property
    def min_width(self) -> float:
        return self.profile.width

    @property
    def max_width(self) -> float:
        return self.profile.width + 2 * self.thickness * math.tan(self.wedge_angle)

    @property
    def open_fraction(self) -> float:
        return self.width / self.period

    @property
    def centers(self) -> np.ndarray:
        return (np.arange(self.n_slits) - (self.n_slits - 1) / 2) * self.period

    @property
    def slit_weights(self) -> np.ndarray:
        if self.weights is None:
            return np.ones(self.n_slits)
        return np.asarray(self.weights, dtype=float)

    def with_width(self, width: float) -> "GratingSpec":
        return replace(self, profile=replace(self.profile, width=width, sigma=None))

    def transmission(self, x) -> np.ndarray:
        """Open (1) / blocked (0) mask of the rectangular aperture."""
        x = np.asarray(x, dtype=float)
        c = self.centers
        if c.size == 1:
            return (np.abs(x - c[0]) <= self.width / 2).astype(float)
        k = np.clip(np.rint((x - c[0]) / self.period), 0, c.size - 1).astype(np.intp)
        return (np.abs(x - c[k]) <= self.width / 2).astype(float)


@dataclass(frozen=True)
class ComplexWavefield:
    """Complex amplitude sampled at x0 + k dx, k = 0..M-1."""

    x0: float
    dx: float
    amplitude: np.ndarray
    wavelength: float
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.dx > 0:
            raise DomainError("grid spacing must be positive")
        if not self.wavelength > 0:
            raise DomainError("wavelength must be positive")

    @property
    def x(self) -> np.ndarray:
        return self.x0 + self.dx * np.arange(self.amplitude.size)

    @property
    def intensity(self) -> np.ndarray:
        return np.abs(self.amplitude) ** 2

    def norm(self) -> float:
        """int |psi|^2 dx by the trapezoidal rule."""
        return float(np.trapezoid(self.intensity, dx=self.dx))


@dataclass(frozen=True)
class ScaledCoordinates:
    """Dimensionless x/sigma, D/sigma and L lambda / (4 pi sigma^2)."""

    x: np.ndarray
    period: float
    distance: float
    sigma: float

    @classmethod
    def from_physical(cls, x, period, distance, wavelength, sigma) -> "ScaledCoordinates":
        if min(period, distance, wavelength, sigma) <= 0:
            raise DomainError("sigma, D, L and lambda must be positive")
        return cls(
            np.asarray(x, dtype=float) / sigma,
            period / sigma,
            distance * wavelength / (4 * math.pi * sigma**2),
            sigma,
        )


@dataclass(frozen=True)
class IntensityPattern:
    x: np.ndarray
    intensity: np.ndarray
    stderr: np.ndarray | None = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if np.any(self.intensity < 0):
            raise DomainError("intensity must be non-negative")

    def scaled(self, k: float) -> "IntensityPattern":
        err = None if self.stderr is None else self.stderr * k
        return replace(self, intensity=self.intensity * k, stderr=err)


# ---------------------------------------------------------------- construction


def _cell_average(profile, phase, c, x_cells, dx):
    """Cell averages of psi(xi) e^{i phi(xi)} over cells centred at x_cells."""
    h = profile.width / 2
    lim = h - phase.r_min
    xi = x_cells - c
    left = np.maximum(xi - dx / 2, -lim)
    right = np.minimum(xi + dx / 2, lim)
    out = np.zeros(xi.size, dtype=complex)
    inside = right > left
    if not inside.any():
        return out
    t = np.linspace(0, 1, 5)
    pts = left[:, None] + (right - left)[:, None] * t
    with np.errstate(all="ignore"):
        ph = phase(pts)
    tv = np.abs(np.diff(ph, axis=1)).sum(axis=1)
    edge = (xi - dx / 2 < -lim) | (xi + dx / 2 > lim)
    hard = inside & (edge | ~np.isfinite(tv) | (tv > MAX_PHASE_STEP / 2))
    easy = inside & ~hard
    with np.errstate(all="ignore"):
        out[easy] = profile.amplitude(xi[easy]) * np.exp(1j * phase(xi[easy]))
    amp = profile.amplitude
    for k in np.flatnonzero(hard):
        touches = (left[k] <= -h + 1e-15 * h, right[k] >= h - 1e-15 * h)
        res = oscillatory_quad([amp], phase, left[k], right[k], singular=touches, tol=1e-10)
        out[k] = res.values[0] / dx
    return out


def build_grating_field(
    grating: GratingSpec,
    wavelength: float,
    dx: float | None = None,
    phase: "PhaseProfile | None" = None,
    pad: float = 0.0,
) -> ComplexWavefield:
    """Field just behind the grating: sum_n C_n psi_0(x - x_n) e^{i phi(x - x_n)}.

    Rectangular slits are sampled as cell averages, so slit edges need not sit
    on grid points and every slit integrates to exactly C_n. With a phase
    mask, cells where the phase is not resolved (walls) are averaged by
    adaptive quadrature.
    """
    prof = grating.profile
    if phase is not None and not math.isclose(2 * phase.half_width, prof.width, rel_tol=1e-9):
        raise ConfigError(
            f"phase profile spans {2 * phase.half_width:g} m but the slit is {prof.width:g} m wide"
        )
    if dx is None:
        dx = prof.width / 64 if prof.kind == "rectangular" else prof.sigma / 8
    centers = grating.centers
    # two empty samples beyond the support keep the trapezoid end weights off the field
    half = prof.half_support + pad + 2 * dx
    lo, hi = centers[0] - half, centers[-1] + half
    n = int(math.ceil((hi - lo) / dx)) + 1
    x = lo + dx * np.arange(n)
    psi = np.zeros(n, dtype=complex)
    for c, w in zip(centers, grating.slit_weights):
        if phase is not None:
            psi += w * _cell_average(prof, phase, c, x, dx)
        elif prof.kind == "rectangular":
            a = prof.width
            overlap = np.clip(np.minimum(x + dx / 2, c + a / 2) - np.maximum(x - dx / 2, c - a / 2), 0, None)
            psi += w * overlap / (dx * a)
        else:
            psi += w * prof.amplitude(x - c)
    meta = {"sigma": prof.sigma, "support": (centers[0] - prof.half_support, centers[-1] + prof.half_support)}
    return ComplexWavefield(float(lo), float(dx), psi, float(wavelength), meta)


# ---------------------------------------------------------------- propagation


def _support(field: ComplexWavefield, rel: float = 1e-13) -> tuple[float, float]:
    a = np.abs(field.amplitude)
    idx = np.flatnonzero(a > rel * a.max())
    x = field.x
    return float(x[idx[0]]), float(x[idx[-1]])


def _spread(field: ComplexWavefield, distance: float) -> float:
    """Expected rms diffraction spread after ``distance``: sigma sqrt(1 + Lhat^2)."""
    sigma = field.meta.get("sigma")
    lam = field.wavelength
    if sigma is None:
        psi = field.amplitude
        grad = np.gradient(psi, field.dx)
        k_rms = math.sqrt(np.sum(np.abs(grad) ** 2) / max(np.sum(np.abs(psi) ** 2), 1e-300))
        sigma = 1 / (2 * max(k_rms, 1e-300))
    lhat = distance * lam / (4 * math.pi * sigma**2)
    return sigma * math.sqrt(1 + lhat**2)


def output_grid(field: ComplexWavefield, distance: float, pad_spreads: float = 6.0, n: int | None = None) -> np.ndarray:
    """Default observation grid: input support padded by ``pad_spreads`` spreads,
    spacing fine enough that the output chirp advances < pi/4 per sample."""
    lo, hi = _support(field)
    pad = pad_spreads * _spread(field, distance)
    x_lo, x_hi = lo - pad, hi + pad
    if n is None:
        reach = max(x_hi - lo, hi - x_lo)
        step = min(field.wavelength * distance / (8 * reach), pad / 8)
        n = int(math.ceil((x_hi - x_lo) / step)) + 1
    return np.linspace(x_lo, x_hi, n)


def _max_phase_step(x_in_support, x_out, dx, wavelength, distance):
    reach = max(abs(x_out[-1] - x_in_support[0]), abs(x_in_support[1] - x_out[0]))
    return 2 * math.pi * reach * dx / (wavelength * distance), reach


def fresnel_propagate(
    field: ComplexWavefield,
    distance: float,
    x_out: np.ndarray | None = None,
    estimate_error: bool = True,
) -> ComplexWavefield:
    """Propagate ``field`` by ``distance`` with the Fresnel kernel.

    Trapezoidal quadrature on the input grid, evaluated by the compiled
    kernel. Raises ResolutionError if the kernel phase advances by more than
    pi/4 between input samples anywhere in the support. With
    ``estimate_error`` the sum is repeated on every second sample and
    ``meta["error_estimate"]`` holds max|psi_h - psi_2h| / max|psi_h|.
    """
    if not distance > 0:
        raise DomainError(f"propagation distance must be positive, got {distance}")
    lam = field.wavelength
    if x_out is None:
        x_out = output_grid(field, distance)
    x_out = np.asarray(x_out, dtype=float)
    sup = _support(field)
    step, reach = _max_phase_step(sup, np.sort(x_out), field.dx, lam, distance)
    if step > MAX_PHASE_STEP:
        need = int(math.ceil((sup[1] - sup[0]) * 8 * reach / (lam * distance))) + 1
        raise ResolutionError(
            f"Fresnel kernel phase advances {step:.3g} rad per input sample (limit pi/4)",
            required_samples=need,
            max_dx=lam * distance / (8 * reach),
        )
    x_in = field.x
    k = math.pi / (lam * distance)
    w = np.full(x_in.size, field.dx)
    w[0] = w[-1] = field.dx / 2
    pref = 1 / math.sqrt(lam * distance)
    out = pref * kernels.fresnel_sum(x_out, x_in, field.amplitude * w, k)
    meta = {"distance": distance, "phase_step": step}
    if estimate_error and x_in.size >= 5:
        sl = slice(0, x_in.size if x_in.size % 2 else x_in.size - 1, 2)
        x2 = x_in[sl]
        w2 = np.full(x2.size, 2 * field.dx)
        w2[0] = w2[-1] = field.dx
        coarse = pref * kernels.fresnel_sum(x_out, x2, field.amplitude[sl] * w2, k)
        meta["error_estimate"] = float(np.max(np.abs(out - coarse)) / max(np.max(np.abs(out)), 1e-300))
    x0 = float(x_out[0])
    dxo = float(x_out[1] - x_out[0]) if x_out.size > 1 else field.dx
    if x_out.size > 2 and not np.allclose(np.diff(x_out), dxo, rtol=1e-9, atol=0):
        raise ConfigError("output grid must be uniform")
    return ComplexWavefield(x0, dxo, out, lam, meta)


# ---------------------------------------------------------------- analytic forms


def gaussian_slits_field(x, centers, sigma, wavelength, distance, weights=None) -> np.ndarray:
    """Closed-form free evolution of sum_n C_n exp[-(x - x_n)^2 / (4 sigma^2)],
    propagated with the same kernel and prefactor as ``fresnel_propagate``."""
    x = np.asarray(x, dtype=float)
    centers = np.atleast_1d(np.asarray(centers, dtype=float))
    weights = np.ones(centers.size) if weights is None else np.asarray(weights, dtype=float)
    lhat = distance * wavelength / (4 * math.pi * sigma**2)
    z = 1 + 1j * lhat
    d = x[:, None] - centers[None, :]
    amp = np.exp(-(d**2) / (4 * sigma**2 * z)) @ weights
    # (lambda L)^(-1/2) times the Gaussian integral
    return amp / np.sqrt(lhat - 1j) if lhat > 0 else amp


def analytic_two_slit_intensity(coords: ScaledCoordinates) -> IntensityPattern:
    """I = F+ + F- + 2 sqrt(F+ F-) cos[Lhat x D / (2 (1 + Lhat^2))] for two
    Gaussian slits at -+D/2 with equal weights (overall constants dropped)."""
    x, d, lh = coords.x, coords.period, coords.distance
    den = 1 + lh**2
    fp = np.exp(-((x + d / 2) ** 2) / (2 * den))
    fm = np.exp(-((x - d / 2) ** 2) / (2 * den))
    inten = fp + fm + 2 * np.sqrt(fp * fm) * np.cos(lh * x * d / (2 * den))
    inten = np.clip(inten, 0.0, None)
    return IntensityPattern(x * coords.sigma, inten, meta={"Lhat": lh, "Dhat": d})


def fraunhofer_envelope(
    profile: SlitProfile,
    x,
    wavelength: float,
    distance: float,
    phase: "PhaseProfile | None" = None,
    tol: float = 1e-10,
) -> np.ndarray:
    """psi_hat(x) = int psi(xi) e^{i phi(xi)} exp(i 2 pi x xi / (lambda L)) dxi.

    Closed form without a phase; with a phase mask each point is an adaptive
    oscillatory quadrature over the open slit (walls treated as singular).
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    q = 2 * math.pi * x / (wavelength * distance)
    if phase is None:
        return profile.envelope(q)
    h = profile.width / 2
    lim = h - phase.r_min
    singular = (phase.r_min == 0, phase.r_min == 0)
    out = np.empty(q.size, dtype=complex)
    for i, qi in enumerate(q):
        res = oscillatory_quad(
            [profile.amplitude], lambda xi, qi=qi: phase(xi) + qi * xi, -lim, lim, singular=singular, tol=tol
        )
        out[i] = res.values[0]
    return out


def classical_double_slit(x, a: float, period: float, wavelength: float, distance: float) -> IntensityPattern:
    """Classical Fraunhofer double slit: sinc^2(pi a x / (lambda L)) [1 + cos(2 pi D x / (lambda L))]."""
    x = np.asarray(x, dtype=float)
    u = x / (wavelength * distance)
    inten = np.sinc(a * u) ** 2 * (1 + np.cos(2 * math.pi * period * u))
    return IntensityPattern(x, inten, meta={"kind": "classical-double-slit"})


def is_far_field(sigma: float, period: float, distance: float, wavelength: float, window_half: float) -> bool:
    """Fraunhofer switch: Lhat > 50 and the observation window much wider
    (10x) than the slit separation, both in units of sigma."""
    lhat = distance * wavelength / (4 * math.pi * sigma**2)
    return lhat > FAR_FIELD_LHAT and window_half / sigma >= FAR_FIELD_WINDOW * period / sigma


def fraunhofer_pattern(
    grating: GratingSpec,
    x,
    wavelength: float,
    distance: float,
    envelope: Callable[[np.ndarray], np.ndarray] | None = None,
) -> np.ndarray:
    """Far-field N-slit intensity (1/(lambda L)) |psi_hat|^2 |sum_n C_n e^{-i q x_n}|^2,
    q = 2 pi x / (lambda L). ``envelope`` maps q to psi_hat (defaults to the bare profile)."""
    x = np.asarray(x, dtype=float)
    q = 2 * math.pi * x / (wavelength * distance)
    env = grating.profile.envelope(-q) if envelope is None else envelope(-q)
    s = np.exp(-1j * np.multiply.outer(q, grating.centers)) @ grating.slit_weights
    return np.abs(env) ** 2 * np.abs(s) ** 2 / (wavelength * distance)


def propagate_slits(
    grating: GratingSpec,
    x,
    wavelength: float,
    distance: float,
    source_x: Sequence[float] | float = 0.0,
    source_distance: float = math.inf,
    source_weights: Sequence[float] | None = None,
) -> np.ndarray:
    """Exact Fresnel intensity behind rectangular slits lit by point sources.

    A source at (x_s, -y_s) illuminates the grating with exp[i pi (xi - x_s)^2
    / (lambda y_s)] (unit modulus; y_s = inf is a plane wave). The chirps of
    illumination and propagation combine into one, so each slit integral is a
    difference of Fresnel integrals. Returns the weighted incoherent sum of
    |psi(x)|^2 over sources, with psi normalized as in ``fresnel_propagate``.
    """
    if grating.profile.kind != "rectangular":
        raise ConfigError("closed-form slit propagation needs rectangular slits")
    x = np.asarray(x, dtype=float)
    xs = np.atleast_1d(np.asarray(source_x, dtype=float))
    lam = np.broadcast_to(np.asarray(wavelength, dtype=float), xs.shape)
    w = np.ones(xs.size) if source_weights is None else np.asarray(source_weights, dtype=float)
    return slit_source_intensity(grating, x, xs, lam, w, source_distance, distance)


def slit_source_intensity(grating, x, x_src, lam_src, w_src, source_distance, distance) -> np.ndarray:
    u1 = 0.0 if math.isinf(source_distance) else 1.0 / source_distance
    u2 = 1.0 / distance
    a = grating.width
    first = grating.centers[0] - a / 2
    c = grating.slit_weights / a
    scale = np.sqrt(2 * (u1 + u2) / np.asarray(lam_src, dtype=float))
    raw = kernels.slit_source_intensity(x, x_src, scale, w_src, first, grating.period, a, c, u1 / (u1 + u2))
    return raw * u2 / (2 * (u1 + u2))
