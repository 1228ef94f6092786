"""Incoherent averaging over source position and speed, decay culling and
fringe contrast.

Each Monte Carlo sample is an independent point source at (x_s, -y_s) with
its own speed. Random numbers come from a counter-based generator keyed by
(seed, point index), and the three streams (position, speed, decay) are
always drawn in full, so runs that differ only in a spread parameter share
their random numbers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigError, DomainError, EmptyEnsembleError
from .physics import BeamKinematics, ParticleSpecies
from .wavefield import GratingSpec, IntensityPattern, is_far_field, slit_source_intensity

_CHUNK = 1 << 22


@dataclass(frozen=True)
class BeamModel:
    """Nominal kinematics plus classical spreads.

    Source positions are uniform over [-source_extent / 2, source_extent / 2]
    at distance ``source_distance`` upstream (inf: plane wave). At most one of
    ``speed_sigma`` [m/s] and ``energy_sigma`` [J] may be non-zero.
    """

    kinematics: BeamKinematics
    source_extent: float = 0.0
    source_distance: float = math.inf
    speed_sigma: float = 0.0
    energy_sigma: float = 0.0
    coherence_length: float | None = None

    def __post_init__(self):
        if self.source_extent < 0:
            raise ConfigError("source extent must be non-negative")
        if not self.source_distance > 0:
            raise ConfigError("source distance must be positive")
        if self.speed_sigma < 0 or self.energy_sigma < 0:
            raise ConfigError("spreads must be non-negative")
        if self.speed_sigma > 0 and self.energy_sigma > 0:
            raise ConfigError("give a speed spread or an energy spread, not both")
        if self.source_extent > 0 and math.isinf(self.source_distance):
            raise ConfigError("an extended source needs a finite source distance")

    @property
    def monochromatic(self) -> bool:
        return self.speed_sigma == 0 and self.energy_sigma == 0


@dataclass(frozen=True)
class MCConfig:
    samples: int = 100_000
    seed: int = 0
    decay_culling: bool = False
    batches: int = 20

    def __post_init__(self):
        if self.samples < 1:
            raise ConfigError("sample count must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.batches < 2:
            raise ConfigError("need at least two batches for error estimates")


@dataclass(frozen=True)
class SampleSet:
    x_src: np.ndarray
    speed: np.ndarray
    wavelength: np.ndarray
    keep: np.ndarray  # valid and surviving
    n_drawn: int
    n_invalid: int
    survival_fraction: float
    u_pos: np.ndarray  # the uniform draws behind x_src


@dataclass(frozen=True)
class ContrastPoint:
    contrast: float
    x_max: float
    degenerate: bool = False


@dataclass(frozen=True)
class ContrastCurve:
    parameter: str
    values: np.ndarray
    contrast: np.ndarray
    error: np.ndarray
    mode: str = "quantum"
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        c = np.asarray(self.contrast)
        if np.any((c < 0) | (c > 1)):
            raise DomainError("contrast outside [0, 1]")


def rng_for(seed: int, point_index: int = 0) -> np.random.Generator:
    """Philox stream for one scan point; independent of thread count."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(point_index,))))


def coherence_length(source_distance: float, wavelength: float, source_extent: float) -> float:
    """l0 = y_s lambda / (2 sigma_s)."""
    if min(source_distance, wavelength, source_extent) <= 0:
        raise DomainError("coherence length needs positive y_s, lambda and sigma_s")
    return source_distance * wavelength / (2 * source_extent)


def source_extent_for(coherence: float, source_distance: float, wavelength: float) -> float:
    """Inverse of ``coherence_length``."""
    return source_distance * wavelength / (2 * coherence)


def survival_probability(species: ParticleSpecies, path_length: float, speed) -> np.ndarray:
    speed = np.asarray(speed, dtype=float)
    if math.isinf(species.lifetime):
        return np.ones(speed.shape)
    with np.errstate(divide="ignore"):
        return np.exp(-(path_length / speed) / species.lifetime)


def decay_cull(uniforms, species: ParticleSpecies, path_length: float, speed) -> np.ndarray:
    """Survival mask: particle kept iff its uniform draw is below exp(-t / tau)."""
    return np.asarray(uniforms) < survival_probability(species, path_length, speed)


def draw_samples(
    beam: BeamModel,
    species: ParticleSpecies,
    cfg: MCConfig,
    point_index: int = 0,
    path_length: float | None = None,
) -> SampleSet:
    n = cfg.samples
    rng = rng_for(cfg.seed, point_index)
    u_pos = rng.random(n)
    z = rng.standard_normal(n)
    u_decay = rng.random(n)
    kin = beam.kinematics
    x_src = (u_pos - 0.5) * beam.source_extent
    if beam.energy_sigma > 0:
        energy = kin.kinetic_energy + beam.energy_sigma * z
        valid = energy > 0
        speed = np.sqrt(2 * np.where(valid, energy, kin.kinetic_energy) / kin.mass)
    else:
        speed = kin.speed + beam.speed_sigma * z
        valid = speed > 0
        speed = np.where(valid, speed, kin.speed)
    lam = kin.wavelength * kin.speed / speed
    keep = valid.copy()
    surv = 1.0
    if cfg.decay_culling and path_length is not None and not math.isinf(species.lifetime):
        alive = decay_cull(u_decay, species, path_length, speed)
        keep &= alive
        surv = float(alive[valid].mean()) if valid.any() else 0.0
    return SampleSet(x_src, speed, lam, keep, n, int((~valid).sum()), surv, u_pos)


def batch_slices(n: int, batches: int) -> list[slice]:
    edges = np.linspace(0, n, min(batches, n) + 1).astype(int)
    return [slice(a, b) for a, b in zip(edges[:-1], edges[1:])]


def _dirichlet_sq(q, period, n):
    h = q * period / 2
    s = np.sin(h)
    small = np.abs(s) < 1e-12
    r = np.where(small, n, np.sin(n * h) / np.where(small, 1.0, s))
    return r * r


def _far_field_sum(grating, x, shifts, lams, distance, envelope):
    """sum_s I_coh(x + shift_s; lambda_s) in chunks."""
    out = np.zeros(x.size)
    uniform = grating.weights is None
    step = max(1, _CHUNK // max(x.size * (1 if uniform else grating.n_slits), 1))
    for a in range(0, shifts.size, step):
        xx = x[None, :] + shifts[a:a + step, None]
        lam = lams[a:a + step, None]
        q = 2 * math.pi * xx / (lam * distance)
        env = grating.profile.envelope(-q) if envelope is None else envelope(-q)
        if uniform:
            arr = _dirichlet_sq(q, grating.period, grating.n_slits)
        else:
            arr = np.abs(np.exp(-1j * q[..., None] * grating.centers) @ grating.slit_weights) ** 2
        out += np.sum(np.abs(env) ** 2 * arr / (lam * distance), axis=0)
    return out


def coherent_intensity(grating, x, wavelength, distance, source_x=0.0, source_distance=math.inf,
                       mode="fresnel", envelope=None) -> np.ndarray:
    """Single-source pattern used by the sample average (same normalization)."""
    x = np.asarray(x, dtype=float)
    xs = np.atleast_1d(float(source_x))
    lam = np.atleast_1d(float(wavelength))
    if mode == "fraunhofer":
        shift = xs * distance / source_distance if not math.isinf(source_distance) else np.zeros(1)
        return _far_field_sum(grating, x, shift, lam, distance, envelope)
    return slit_source_intensity(grating, x, xs, lam, np.ones(1), source_distance, distance)


def choose_mode(grating: GratingSpec, x, wavelength: float, distance: float) -> str:
    half = float(np.max(np.abs(x)))
    return "fraunhofer" if is_far_field(grating.profile.sigma, grating.period, distance, wavelength, half) else "fresnel"


def mc_average(
    grating: GratingSpec,
    beam: BeamModel,
    species: ParticleSpecies,
    distance: float,
    x,
    cfg: MCConfig,
    point_index: int = 0,
    mode: str = "auto",
    envelope: Callable[[np.ndarray], np.ndarray] | None = None,
    path_length: float | None = None,
) -> IntensityPattern:
    """Mean of single-source intensities over the sampled beam.

    ``mode`` is ``"fraunhofer"`` (shifted, rescaled far-field patterns),
    ``"fresnel"`` (exact point-source Fresnel integrals through rectangular
    slits) or ``"auto"``. The decay path defaults to y_s + L.
    """
    x = np.asarray(x, dtype=float)
    lam0 = beam.kinematics.wavelength
    if mode == "auto":
        mode = choose_mode(grating, x, lam0, distance)
    if mode not in ("fraunhofer", "fresnel"):
        raise ConfigError(f"unknown propagation mode {mode!r}")
    if path_length is None:
        path_length = distance + (0.0 if math.isinf(beam.source_distance) else beam.source_distance)
    smp = draw_samples(beam, species, cfg, point_index, path_length)
    n_keep = int(smp.keep.sum())
    if n_keep == 0:
        raise EmptyEnsembleError(
            f"no particle of {smp.n_drawn} reaches the detector (survival {smp.survival_fraction:.3g})"
        )
    ys = beam.source_distance
    sums, counts = [], []
    for sl in batch_slices(smp.n_drawn, cfg.batches):
        k = smp.keep[sl]
        xs, lam = smp.x_src[sl][k], smp.wavelength[sl][k]
        if mode == "fraunhofer":
            shift = xs * distance / ys if not math.isinf(ys) else np.zeros(xs.size)
            s = _far_field_sum(grating, x, shift, lam, distance, envelope)
        else:
            s = slit_source_intensity(grating, x, xs, lam, np.ones(xs.size), ys, distance)
        sums.append(s)
        counts.append(xs.size)
    sums = np.array(sums)
    counts = np.array(counts)
    mean = sums.sum(axis=0) / n_keep
    ok = counts > 0
    bmeans = sums[ok] / counts[ok, None]
    stderr = bmeans.std(axis=0, ddof=1) / math.sqrt(ok.sum()) if ok.sum() > 1 else np.zeros_like(mean)
    meta = {
        "mode": mode,
        "samples": smp.n_drawn,
        "kept": n_keep,
        "invalid": smp.n_invalid,
        "survival_fraction": smp.survival_fraction,
        "batch_sums": sums,
        "batch_counts": counts,
        "x_src_mean": float(smp.x_src[smp.keep].mean()),
        "x_src_std": float(smp.x_src[smp.keep].std()),
        "speed_mean": float(smp.speed[smp.keep].mean()),
        "speed_std": float(smp.speed[smp.keep].std()),
    }
    return IntensityPattern(x, mean, stderr, meta)


def analytic_coherent_pattern(
    grating: GratingSpec,
    wavelength: float,
    distance: float,
    coherence: float,
    x,
    envelope: Callable[[np.ndarray], np.ndarray] | None = None,
) -> IntensityPattern:
    """Far-field N-slit pattern with Gaussian partial coherence:

    (N / (lambda L)) |psi_hat|^2 {1 + 2 sum_n (N - n)/N exp[-(nD)^2 / (2 l0^2)] cos(2 pi n D x / (lambda L))}
    """
    x = np.asarray(x, dtype=float)
    n_sl, d = grating.n_slits, grating.period
    q = 2 * math.pi * x / (wavelength * distance)
    env = grating.profile.envelope(q) if envelope is None else envelope(q)
    n = np.arange(1, n_sl)
    w = (n_sl - n) / n_sl * (np.exp(-((n * d) ** 2) / (2 * coherence**2)) if math.isfinite(coherence) else 1.0)
    mod = 1 + 2 * (np.cos(np.multiply.outer(q, n * d)) @ w) if n_sl > 1 else np.ones_like(x)
    inten = n_sl / (wavelength * distance) * np.abs(env) ** 2 * np.clip(mod, 0, None)
    return IntensityPattern(x, inten, meta={"coherence_length": coherence})


# ---------------------------------------------------------------- contrast


def extract_contrast(x, intensity, period: float, center: float = 0.0, stderr=None,
                     significance: float = 2.0) -> ContrastPoint:
    """Contrast of the fringe maximum nearest ``center``.

    The maximum is searched within +-period/2 of ``center``; the minima in
    one period on either side of it. A minimum counts only if it lies inside
    that window (an envelope sloping out of the window is not a fringe).
    With ``stderr`` a minimum must also lie ``significance`` combined
    standard errors below the maximum, so noise is not read as a fringe.
    Returns the mean of the one-sided contrasts found, or 0 flagged
    degenerate when there is no fringe.
    """
    x = np.asarray(x, dtype=float)
    inten = np.asarray(intensity, dtype=float)
    if x[0] > center - 1.5 * period or x[-1] < center + 1.5 * period:
        raise DomainError("pattern must span at least three periods around the centre")
    idx = np.flatnonzero(np.abs(x - center) <= period / 2)
    i0 = idx[np.argmax(inten[idx])]
    xm, imax = x[i0], inten[i0]
    out = []
    for side in (np.flatnonzero((x >= xm - period) & (x <= xm)), np.flatnonzero((x >= xm) & (x <= xm + period))):
        j = side[np.argmin(inten[side])]
        far_end = side[0] if side[-1] == i0 else side[-1]
        if j in (i0, far_end):
            continue
        imin = inten[j]
        if stderr is not None and imax - imin <= significance * math.hypot(stderr[i0], stderr[j]):
            continue
        den = imax + imin
        out.append((imax - imin) / den if den > 0 else 0.0)
    if not out:
        return ContrastPoint(0.0, float(xm), True)
    return ContrastPoint(float(np.clip(np.mean(out), 0.0, 1.0)), float(xm), False)


def pattern_contrast(pattern: IntensityPattern, period: float, center: float = 0.0) -> tuple[float, float]:
    """Contrast and its jackknife error over the Monte Carlo batches."""
    c = extract_contrast(pattern.x, pattern.intensity, period, center, pattern.stderr).contrast
    sums = pattern.meta.get("batch_sums")
    if sums is None:
        return c, 0.0
    counts = np.asarray(pattern.meta["batch_counts"])
    ok = counts > 0
    sums, counts = sums[ok], counts[ok]
    b = counts.size
    if b < 2:
        return c, 0.0
    tot, ntot = sums.sum(axis=0), counts.sum()
    jk = np.array([
        extract_contrast(pattern.x, (tot - sums[i]) / (ntot - counts[i]), period, center).contrast
        for i in range(b)
    ])
    err = math.sqrt((b - 1) / b * np.sum((jk - jk.mean()) ** 2))
    return c, err
