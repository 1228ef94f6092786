"""Two-grating Talbot-Lau interferometer and its classical moire counterpart.

The open slits of G1 act as a continuum of mutually incoherent line sources.
Each source illuminates G2 (distance L) and the detector sits a further L
behind G2. With equal distances the pattern depends on lambda only through
L / T_L.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import constants as K
from .errors import ConfigError, EmptyEnsembleError, UnsupportedOperationError
from .incoherence import (
    BeamModel, ContrastCurve, MCConfig, batch_slices, draw_samples, extract_contrast, pattern_contrast,
)
from .interaction import grating_effective_width
from .physics import BeamKinematics, ParticleSpecies, critical_fields, talbot_length
from .wavefield import GratingSpec, IntensityPattern, slit_source_intensity

B_FIELD_NOTE = (
    "B_crit assumes the Lorentz force q v B with v the full beam speed; conventions that use another "
    "velocity or deflection scale shift B_crit by up to an order of magnitude"
)


@dataclass(frozen=True)
class TalbotLauSetup:
    """G1 -> G2 and G2 -> detector both ``distance`` apart.

    ``interaction`` None means: use effective slit widths when G2 has a
    material and the species is charged.
    """

    grating1: GratingSpec
    grating2: GratingSpec
    distance: float
    species: ParticleSpecies
    beam: BeamModel
    interaction: bool | None = None
    interaction_on_g1: bool = False

    def __post_init__(self):
        if not math.isclose(self.grating1.period, self.grating2.period, rel_tol=1e-12):
            raise ConfigError("Talbot-Lau gratings need equal periods")
        if not self.distance > 0:
            raise ConfigError("grating separation must be positive")
        if self.grating1.profile.kind != "rectangular" or self.grating2.profile.kind != "rectangular":
            raise ConfigError("Talbot-Lau gratings must have rectangular slits")

    @property
    def period(self) -> float:
        return self.grating2.period

    @property
    def talbot_length(self) -> float:
        return talbot_length(self.period, self.beam.kinematics)

    @property
    def use_interaction(self) -> bool:
        if self.interaction is None:
            return self.grating2.material is not None and self.species.is_charged
        return self.interaction and self.grating2.material is not None

    def with_distance(self, distance: float) -> "TalbotLauSetup":
        return replace(self, distance=distance)

    def with_energy(self, energy: float, energy_sigma: float | None = None) -> "TalbotLauSetup":
        kin = BeamKinematics.from_energy(self.species.mass, energy)
        sig = self.beam.energy_sigma if energy_sigma is None else energy_sigma
        return replace(self, beam=replace(self.beam, kinematics=kin, energy_sigma=sig, speed_sigma=0.0))


@dataclass(frozen=True)
class ScanResult:
    curve: ContrastCurve
    mode: str
    manifest: dict = field(default_factory=dict, compare=False)


def effective_gratings(setup: TalbotLauSetup) -> tuple[GratingSpec, GratingSpec, dict]:
    """Gratings with interaction-narrowed widths at the nominal speed."""
    g1, g2 = setup.grating1, setup.grating2
    info = {"a_eff_g2": g2.width, "a_eff_g1": g1.width, "interaction": setup.use_interaction}
    if setup.use_interaction:
        ce = grating_effective_width(g2, setup.species, setup.beam.kinematics)
        g2 = g2.with_width(ce.a_eff)
        info["a_eff_g2"] = ce.a_eff
        info["near_validity_edge"] = ce.near_validity_edge
        if setup.interaction_on_g1 and g1.material is not None:
            c1 = grating_effective_width(g1, setup.species, setup.beam.kinematics)
            g1 = g1.with_width(c1.a_eff)
            info["a_eff_g1"] = c1.a_eff
    return g1, g2, info


def default_window(setup: TalbotLauSetup, n: int = 161) -> np.ndarray:
    return np.linspace(-2 * setup.period, 2 * setup.period, n)


def _sources_from_uniform(g1: GratingSpec, u: np.ndarray) -> np.ndarray:
    """Map uniforms on [0, 1) to points spread evenly over G1's open slits."""
    s = u * g1.n_slits
    idx = np.minimum(s.astype(int), g1.n_slits - 1)
    return g1.centers[idx] + (s - idx - 0.5) * g1.width


def _quadrature_sources(g1: GratingSpec, per_slit: int) -> np.ndarray:
    off = ((np.arange(per_slit) + 0.5) / per_slit - 0.5) * g1.width
    return (g1.centers[:, None] + off[None, :]).ravel()


def _classical(g2: GratingSpec, x, xs, distance):
    # straight rays from source through G2 at xi to detector x; equal spacings
    xi = 0.5 * (xs[:, None] + x[None, :])
    return g2.transmission(xi).sum(axis=0)


def talbot_lau_pattern(
    setup: TalbotLauSetup,
    cfg: MCConfig | None = None,
    x=None,
    method: str = "mc",
    point_index: int = 0,
    classical: bool = False,
    points_per_slit: int = 8,
    tol: float = 0.005,
    max_points_per_slit: int = 512,
) -> IntensityPattern:
    """Detector pattern, quantum (point-source Fresnel integrals) or classical
    (ray optics). ``method="mc"`` samples sources and speeds; ``"quadrature"``
    uses evenly spaced sources per G1 slit, doubled until the contrast moves
    by less than ``tol``."""
    x = default_window(setup) if x is None else np.asarray(x, dtype=float)
    g1, g2, info = effective_gratings(setup)
    L = setup.distance
    info.update(method=method, classical=classical, distance=L, L_over_TL=L / setup.talbot_length)
    if method == "quadrature":
        if not setup.beam.monochromatic:
            raise UnsupportedOperationError("source quadrature needs a monochromatic beam; use method='mc'")
        lam = setup.beam.kinematics.wavelength
        prev, n = None, points_per_slit
        while True:
            xs = _quadrature_sources(g1, n)
            if classical:
                inten = _classical(g2, x, xs, L) / xs.size
            else:
                inten = slit_source_intensity(g2, x, xs, np.full(xs.size, lam), np.ones(xs.size), L, L) / xs.size
            c = extract_contrast(x, inten, setup.period).contrast
            if prev is not None and abs(c - prev) < tol:
                break
            if 2 * n > max_points_per_slit:
                info["unconverged"] = True
                break
            prev, n = c, 2 * n
        info.update(points_per_slit=n, refinement_change=abs(c - prev) if prev is not None else 0.0)
        return IntensityPattern(x, inten, None, info)
    if method != "mc":
        raise ConfigError(f"unknown method {method!r}")
    cfg = cfg or MCConfig()
    smp = draw_samples(setup.beam, setup.species, cfg, point_index, 2 * L)
    n_keep = int(smp.keep.sum())
    if n_keep == 0:
        raise EmptyEnsembleError(f"no particle of {smp.n_drawn} reaches the detector")
    xs_all = _sources_from_uniform(g1, smp.u_pos)
    sums, counts = [], []
    for sl in batch_slices(smp.n_drawn, cfg.batches):
        k = smp.keep[sl]
        xs, lam = xs_all[sl][k], smp.wavelength[sl][k]
        if classical:
            s = _classical(g2, x, xs, L)
        else:
            s = slit_source_intensity(g2, x, xs, lam, np.ones(xs.size), L, L)
        sums.append(s)
        counts.append(xs.size)
    sums, counts = np.array(sums), np.array(counts)
    mean = sums.sum(axis=0) / n_keep
    ok = counts > 0
    bm = sums[ok] / counts[ok, None]
    stderr = bm.std(axis=0, ddof=1) / math.sqrt(ok.sum())
    info.update(samples=smp.n_drawn, kept=n_keep, survival_fraction=smp.survival_fraction,
                batch_sums=sums, batch_counts=counts)
    return IntensityPattern(x, mean, stderr, info)


def classical_baseline(setup: TalbotLauSetup, cfg: MCConfig | None = None, x=None, method: str = "mc",
                       point_index: int = 0) -> IntensityPattern:
    """Ballistic shadow pattern of the same geometry."""
    return talbot_lau_pattern(setup, cfg, x, method, point_index, classical=True)


def _contrast(p: IntensityPattern, period: float) -> tuple[float, float]:
    if p.meta.get("method") == "quadrature":
        return extract_contrast(p.x, p.intensity, period).contrast, p.meta.get("refinement_change", 0.0)
    return pattern_contrast(p, period)


def field_report(species: ParticleSpecies, kin: BeamKinematics, period: float, distance: float) -> dict:
    """Critical stray fields, or a note for neutral species."""
    if not species.is_charged:
        return {"critical_fields": "not applicable (neutral species)"}
    cf = critical_fields(species, kin, period, distance)
    return {
        "critical_force_N": cf.force,
        "E_crit_V_per_m": cf.e_field,
        "B_crit_T": cf.b_field,
        "B_crit_mG": cf.b_field_mG,
        "field_energy_keV": kin.kinetic_energy_keV,
        "field_distance_m": distance,
        "B_note": B_FIELD_NOTE,
    }


def _manifest(setup: TalbotLauSetup) -> dict:
    g1, g2 = setup.grating1, setup.grating2
    return {
        "species": setup.species.name,
        "period_m": setup.period,
        "n_slits": [g1.n_slits, g2.n_slits],
        "slit_width_m": [g1.width, g2.width],
        "open_fraction": g2.open_fraction,
        "energy_keV": setup.beam.kinematics.kinetic_energy_keV,
        "talbot_length_m": setup.talbot_length,
    }


def scan_grating_separation(
    setup: TalbotLauSetup,
    ratios,
    cfg: MCConfig | None = None,
    mode: str = "quantum",
    method: str = "mc",
    x=None,
) -> ScanResult:
    """Contrast against L / T_L at fixed energy. Point k uses stream (seed, k)
    in both modes, so quantum and classical curves share random numbers."""
    if mode not in ("quantum", "classical"):
        raise ConfigError(f"unknown scan mode {mode!r}")
    ratios = np.asarray(ratios, dtype=float)
    tl = setup.talbot_length
    c, e, a_eff = [], [], None
    for k, r in enumerate(ratios):
        s = setup.with_distance(r * tl)
        p = talbot_lau_pattern(s, cfg, x, method, k, classical=(mode == "classical"))
        ck, ek = _contrast(p, s.period)
        c.append(ck)
        e.append(ek)
        a_eff = p.meta["a_eff_g2"]
    man = _manifest(setup)
    man.update(scan="L/T_L", mode=mode, method=method, a_eff_g2_m=a_eff,
               **field_report(setup.species, setup.beam.kinematics, setup.period, float(ratios.max() * tl)))
    curve = ContrastCurve("L/T_L", ratios, np.array(c), np.array(e), mode, man)
    return ScanResult(curve, mode, man)


def scan_energy(
    setup: TalbotLauSetup,
    energies_keV,
    energy_sigmas_keV=(0.0,),
    cfg: MCConfig | None = None,
    mode: str = "quantum",
    x=None,
) -> list[ScanResult]:
    """Contrast against E0 at fixed separation, one curve per energy spread.
    Energy point k uses stream (seed, k) for every spread."""
    energies_keV = np.asarray(energies_keV, dtype=float)
    out = []
    for sig in energy_sigmas_keV:
        c, e, ratio, widths = [], [], [], []
        for k, e0 in enumerate(energies_keV):
            s = setup.with_energy(e0 * K.keV, sig * K.keV)
            p = talbot_lau_pattern(s, cfg, x, "mc", k, classical=(mode == "classical"))
            ck, ek = _contrast(p, s.period)
            c.append(ck)
            e.append(ek)
            ratio.append(s.distance / s.talbot_length)
            widths.append(p.meta["a_eff_g2"])
        worst = setup.with_energy(float(energies_keV.min()) * K.keV)
        man = _manifest(setup)
        man.update(scan="E0_keV", mode=mode, energy_sigma_keV=float(sig), distance_m=setup.distance,
                   L_over_TL=ratio, a_eff_g2_m=widths,
                   **field_report(setup.species, worst.beam.kinematics, setup.period, setup.distance))
        curve = ContrastCurve("E0_keV", energies_keV, np.array(c), np.array(e), mode, man)
        out.append(ScanResult(curve, mode, man))
    return out
