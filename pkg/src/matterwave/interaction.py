"""Particle-wall interaction phases and effective slit widths.

A particle crossing the slit at transverse position xi (|xi| < a_m / 2)
travels straight through the bar thickness delta. The walls open outward
with wedge angle beta, the narrow side a_m facing the beam. For an
attractive wall potential V(r) = -C_n / r^n the eikonal phase

    phi(xi) = -(1 / (hbar v)) int_0^delta V dy

is positive and diverges at the walls. Van der Waals is n = 3 with C_3 from
the material; a charge in front of a dielectric sees its image charge, n = 1
with C_1 = |(1 - eps) / (1 + eps)| q^2 / (8 pi eps_0).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import constants as K
from .errors import ConfigError, ConvergenceError, DomainError, ExpansionInvalidError
from .physics import BeamKinematics, ParticleSpecies, get_species
from .quadrature import oscillatory_quad
from .wavefield import GratingSpec, SlitProfile

R_MAX = 2.74e-12  # meV nm^3 / (nm/s): largest experimentally validated C3/v
NEAR_EDGE_RATIO = 0.5


@dataclass(frozen=True)
class MaterialSpec:
    """Grating material.

    ``c3`` [meV nm^3] is the van der Waals coefficient measured for
    ``reference`` (a species name); other species get it rescaled by static
    polarizability. ``r_min`` [m] is the absorbing distance from each wall.
    """

    c3: float = 0.0
    permittivity: float = 1.0
    reference: str | None = None
    r_min: float = 0.0
    power: int = 3
    name: str = "custom"

    def __post_init__(self):
        if self.c3 < 0:
            raise ConfigError("c3 must be non-negative")
        if self.permittivity < 1:
            raise ConfigError("relative permittivity must be >= 1")
        if self.r_min < 0:
            raise ConfigError("r_min must be non-negative")
        if self.power < 1:
            raise ConfigError("potential power must be >= 1")

    def c3_for(self, species: ParticleSpecies) -> float:
        """C_3 [meV nm^3] for ``species``."""
        if self.reference is None or self.c3 == 0:
            return self.c3
        ref = get_species(self.reference)
        if ref.name == species.name:
            return self.c3
        return hoinkes_c3(self, ref, species.polarizability)

    @property
    def image_factor(self) -> float:
        return (self.permittivity - 1) / (self.permittivity + 1)


def hoinkes_c3(reference: MaterialSpec, reference_species: ParticleSpecies, target_polarizability: float) -> float:
    """Scale a measured C_3 linearly in static polarizability [angstrom^3]."""
    if reference_species.polarizability <= 0:
        raise DomainError(f"{reference_species.name} has no polarizability to scale from")
    if target_polarizability < 0:
        raise DomainError("polarizability must be non-negative")
    return reference.c3 * target_polarizability / reference_species.polarizability


@dataclass(frozen=True)
class PhaseProfile:
    """phi(xi) over the open slit, xi measured from the slit centre.

    ``scale`` is the interaction scale: C_3 / v in meV nm^3 / (nm/s) for van
    der Waals, the electrostatic prefactor C_1 / (hbar v) otherwise.
    Values within ``r_min`` of a wall are NaN (absorbed).
    """

    func: Callable[[np.ndarray], np.ndarray]
    half_width: float
    r_min: float = 0.0
    scale: float = 0.0
    kind: str = "none"

    def __call__(self, xi):
        xi = np.asarray(xi, dtype=float)
        with np.errstate(all="ignore"):
            phi = self.func(xi)
        return np.where(np.abs(xi) < self.half_width - self.r_min, phi, np.nan)

    def samples(self, n: int = 201) -> tuple[np.ndarray, np.ndarray]:
        lim = self.half_width - self.r_min
        xi = np.linspace(-lim, lim, n)[1:-1]
        return xi, self(xi)

    @property
    def open_fraction(self) -> float:
        return 1 - self.r_min / self.half_width

    def __add__(self, other: "PhaseProfile") -> "PhaseProfile":
        if not math.isclose(self.half_width, other.half_width) or self.r_min != other.r_min:
            raise ConfigError("cannot add phase profiles over different slits")
        f, g = self.func, other.func
        return PhaseProfile(lambda xi: f(xi) + g(xi), self.half_width, self.r_min,
                            self.scale + other.scale, f"{self.kind}+{other.kind}")


def zero_phase(half_width: float, r_min: float = 0.0) -> PhaseProfile:
    return PhaseProfile(lambda xi: np.zeros_like(np.asarray(xi, dtype=float)), half_width, r_min)


def _wall_integral(w, delta, tan_b, n):
    """int_0^delta dy / (w/2 + y tan_b)^n, written to stay accurate as tan_b -> 0."""
    x = 2 * delta * tan_b / w
    if n == 1:
        g = np.where(x > 1e-8, np.log1p(x) / np.where(x > 0, x, 1), 1 - x / 2)
    else:
        g = np.where(
            x > 1e-8,
            -np.expm1((1 - n) * np.log1p(x)) / ((n - 1) * np.where(x > 0, x, 1)),
            1 - n * x / 2,
        )
    return delta * g / (w / 2) ** n


def wall_phase(coeff: float, n: int, grating: GratingSpec, speed: float, r_min: float = 0.0,
               kind: str = "wall", scale: float = 0.0) -> PhaseProfile:
    """Phase from V = -coeff / r^n [J m^n] at both walls of one slit."""
    if not speed > 0:
        raise DomainError("speed must be positive")
    a_m = grating.width
    delta = grating.thickness
    beta = grating.wedge_angle
    t = math.tan(beta)
    pref = coeff / (K.hbar * speed * math.cos(beta) ** n)

    def phi1(xi):
        # r(y) = (w/2 + y tan beta) cos beta, w = a_m - 2 xi
        return pref * _wall_integral(a_m - 2 * xi, delta, t, n)

    def func(xi):
        xi = np.asarray(xi, dtype=float)
        return phi1(xi) + phi1(-xi)

    if 2 * r_min >= a_m:
        raise ConfigError("wall cutoff closes the slit")
    return PhaseProfile(func, a_m / 2, r_min, scale, kind)


def _material(grating: GratingSpec) -> MaterialSpec:
    if grating.material is None:
        raise ConfigError("grating has no material")
    return grating.material


def vdw_phase(grating: GratingSpec, species: ParticleSpecies, speed: float, xi=None):
    """Van der Waals phase profile (or its values at ``xi``)."""
    mat = _material(grating)
    c3 = mat.c3_for(species)
    coeff = c3 * K.meV_nm3 * (K.nm ** (mat.power - 3))
    prof = wall_phase(coeff, mat.power, grating, speed, mat.r_min, "vdw", interaction_scale(c3, speed))
    return prof if xi is None else prof(xi)


def electrostatic_phase(grating: GratingSpec, species: ParticleSpecies, speed: float, xi=None):
    """Image-charge phase profile for a charged particle (or its values at ``xi``)."""
    mat = _material(grating)
    coeff = mat.image_factor * species.charge**2 / (8 * math.pi * K.epsilon_0)
    prof = wall_phase(coeff, 1, grating, speed, mat.r_min, "electrostatic", coeff / (K.hbar * speed))
    return prof if xi is None else prof(xi)


def interaction_phase(grating: GratingSpec, species: ParticleSpecies, speed: float) -> PhaseProfile:
    """Image-charge phase for charged species, van der Waals otherwise."""
    mat = _material(grating)
    if species.is_charged:
        return electrostatic_phase(grating, species, speed)
    if mat.c3_for(species) > 0:
        return vdw_phase(grating, species, speed)
    return zero_phase(grating.width / 2, mat.r_min)


def potential_ratio(material: MaterialSpec, species: ParticleSpecies, width: float) -> float:
    """V_el / V_vdW at the centre of a slit of ``width`` (one wall, r = width / 2)."""
    c3 = material.c3_for(species) * K.meV_nm3
    if c3 == 0:
        raise DomainError("no van der Waals coupling to compare with")
    r = width / 2
    v_el = material.image_factor * species.charge**2 / (8 * math.pi * K.epsilon_0) / r
    return v_el / (c3 / r**3)


def interaction_scale(c3: float, speed: float) -> float:
    """R = C_3 / v in meV nm^3 / (nm/s)."""
    return c3 / (speed / K.nm)


def interaction_regime(species: ParticleSpecies, speed: float, material: MaterialSpec) -> str:
    c3 = material.c3_for(species)
    if not c3 > 0:
        raise DomainError("regime needs a positive C3")
    return "weak" if interaction_scale(c3, speed) <= R_MAX else "strong"


def min_weak_speed(species: ParticleSpecies, material: MaterialSpec) -> float:
    """Lowest speed [m/s] with C_3 / v <= R_MAX."""
    return material.c3_for(species) / R_MAX * K.nm


@dataclass(frozen=True)
class CumulantExpansion:
    mu0: complex
    mu1: complex
    mu2: complex
    kappa1: complex
    kappa2: complex
    a_eff: float
    nominal_width: float
    open_fraction: float = 1.0
    quad_error: float = 0.0
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def reduction(self) -> float:
        """Fractional width reduction 1 - a_eff / a_0."""
        return 1 - self.a_eff / self.nominal_width

    @property
    def near_validity_edge(self) -> bool:
        return self.a_eff / self.nominal_width < NEAR_EDGE_RATIO

    def gaussian_envelope(self, q) -> np.ndarray:
        """|psi_hat(q)|^2 to second order: |mu0|^2 exp(-Re kappa2 q^2 - 2 Im kappa1 q)."""
        q = np.asarray(q, dtype=float)
        return abs(self.mu0) ** 2 * np.exp(-self.kappa2.real * q**2 - 2 * self.kappa1.imag * q)


def effective_slit_width(profile: SlitProfile, phase: PhaseProfile | None = None, tol: float = 1e-11) -> CumulantExpansion:
    """Moments mu_k = int psi e^{i phi} xi^k, normalized cumulants and
    a_eff = sqrt(12 Re kappa2)."""
    if phase is None:
        phase = zero_phase(profile.width / 2)
    if not math.isclose(2 * phase.half_width, profile.width, rel_tol=1e-9):
        raise ConfigError("phase profile does not span the slit")
    lim = phase.half_width - phase.r_min
    wall = phase.r_min == 0 and phase.kind != "none"
    amp = profile.amplitude
    # steep (1/r^n, n > 1) walls can need too many panels at tight tolerance;
    # relax stepwise and report the tolerance actually met
    while True:
        try:
            res = oscillatory_quad(
                [amp, lambda x: amp(x) * x, lambda x: amp(x) * x * x],
                phase.func,
                -lim, lim, singular=(wall, wall), tol=tol, max_panels=400_000,
            )
            break
        except ConvergenceError:
            if tol >= 1e-5:
                raise
            tol *= 1e3
    mu0, mu1, mu2 = (complex(v) for v in res.values)
    if abs(mu0) == 0:
        raise ExpansionInvalidError("zero-order moment vanishes")
    k1 = mu1 / mu0
    k2 = mu2 / mu0 - k1 * k1
    if not k2.real > 0:
        raise ExpansionInvalidError(
            f"Re kappa2 = {k2.real:.3g} m^2 <= 0: interaction too strong for the second-order expansion"
        )
    return CumulantExpansion(
        mu0, mu1, mu2, k1, k2, math.sqrt(12 * k2.real), profile.width,
        phase.open_fraction, res.error,
        {"n_panels": res.n_panels, "end_cutoffs": res.end_cutoffs, "phase_kind": phase.kind, "tol": tol},
    )


def grating_effective_width(grating: GratingSpec, species: ParticleSpecies, kin: BeamKinematics) -> CumulantExpansion:
    phase = interaction_phase(grating, species, kin.speed) if grating.material is not None else None
    return effective_slit_width(grating.profile, phase)


# ---------------------------------------------------------------- tables

TABLE_ENERGIES_KEV = (0.1, 1.0, 10.0, 100.0)


@dataclass(frozen=True)
class WidthRow:
    species: str
    energy_keV: float
    a_eff: float
    nominal: float
    near_edge: bool


def width_table(
    species_names=("e+", "pbar"),
    energies_keV=TABLE_ENERGIES_KEV,
    width: float = 500e-9,
    wedge_deg: float = 5.0,
    permittivity: float = 4.0,
    thickness: dict | float | None = None,
    r_min: float = 0.0,
) -> list[WidthRow]:
    """Effective widths of one trapezoidal slit per species and beam energy.

    ``thickness`` maps species name to bar thickness; defaults are 500 nm for
    positrons and 160 nm for antiprotons.
    """
    if thickness is None:
        thickness = {"e+": 500e-9, "pbar": 160e-9}
    mat = MaterialSpec(permittivity=permittivity, r_min=r_min, name="dielectric")
    rows = []
    for name in species_names:
        sp = get_species(name)
        delta = thickness[name] if isinstance(thickness, dict) else float(thickness)
        g = GratingSpec(1, 2 * width, SlitProfile("rectangular", width), delta, math.radians(wedge_deg), mat)
        for e_keV in energies_keV:
            kin = BeamKinematics.from_energy(sp.mass, e_keV * K.keV)
            ce = effective_slit_width(g.profile, interaction_phase(g, sp, kin.speed))
            rows.append(WidthRow(sp.name, e_keV, ce.a_eff, width, ce.near_validity_edge))
    return rows


def cutoff_sensitivity(r_mins=(0.5e-9, 1e-9, 2e-9, 5e-9), **table_kw) -> dict[float, list[WidthRow]]:
    """Width tables recomputed with absorbing wall cutoffs r_min [m]."""
    return {r: width_table(r_min=r, **table_kw) for r in (0.0, *r_mins)}
