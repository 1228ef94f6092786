"""Particle species, de Broglie kinematics, Talbot length and stray-field tolerances.

Kinematics are non-relativistic throughout (E = m v^2 / 2). For a 20 keV
positron the relativistic correction to the wavelength is about 2 %; it is
not modelled.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

from . import constants as const
from .errors import ConfigError, DomainError, UnsupportedOperationError

_MASS_UNITS = {"m_e": const.m_e, "m_p": const.m_p, "u": const.u}


@dataclass(frozen=True)
class ParticleSpecies:
    name: str
    mass: float  # kg
    charge: float = 0.0  # C
    polarizability: float = 0.0  # Angstrom^3
    lifetime: float = math.inf  # s

    def __post_init__(self):
        if not self.mass > 0:
            raise DomainError(f"species {self.name!r}: mass must be positive")
        if not self.lifetime > 0:
            raise DomainError(f"species {self.name!r}: lifetime must be positive")
        if self.polarizability < 0:
            raise DomainError(f"species {self.name!r}: negative polarizability")

    @property
    def is_charged(self) -> bool:
        return self.charge != 0.0

    @property
    def is_stable(self) -> bool:
        return math.isinf(self.lifetime)


def _parse_mass(token: str) -> float:
    factor, _, unit = token.partition("*")
    if unit not in _MASS_UNITS:
        raise ConfigError(f"unknown mass unit in {token!r}")
    return float(factor) * _MASS_UNITS[unit]


def parse_species_table(text: str) -> dict[str, ParticleSpecies]:
    """Parse the whitespace-delimited species table; keys include aliases."""
    table = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) not in (5, 6):
            raise ConfigError("expected 5 or 6 columns in species table", lineno)
        name, mass, charge, alpha, tau = fields[:5]
        sp = ParticleSpecies(
            name=name,
            mass=_parse_mass(mass),
            charge=float(charge) * const.e,
            polarizability=float(alpha),
            lifetime=float(tau),
        )
        aliases = fields[5].split(",") if len(fields) == 6 else []
        for key in [name, *aliases]:
            table[key.lower()] = sp
    return table


@lru_cache(maxsize=None)
def _presets() -> dict[str, ParticleSpecies]:
    text = resources.files("matterwave").joinpath("data/species.txt").read_text()
    return parse_species_table(text)


def get_species(name: str) -> ParticleSpecies:
    try:
        return _presets()[name.lower()]
    except KeyError:
        known = sorted({sp.name for sp in _presets().values()})
        raise ConfigError(f"unknown species {name!r}; presets: {', '.join(known)}") from None


def preset_names() -> list[str]:
    return sorted({sp.name for sp in _presets().values()})


@dataclass(frozen=True)
class BeamKinematics:
    """Mutually consistent speed, de Broglie wavelength and kinetic energy."""

    mass: float
    speed: float
    wavelength: float
    kinetic_energy: float

    @property
    def kinetic_energy_keV(self) -> float:
        return self.kinetic_energy / const.keV

    @property
    def momentum(self) -> float:
        return self.mass * self.speed

    @classmethod
    def from_speed(cls, mass: float, speed: float) -> "BeamKinematics":
        if not speed > 0:
            raise DomainError(f"speed must be positive, got {speed}")
        return cls(mass, speed, const.h / (mass * speed), 0.5 * mass * speed**2)

    @classmethod
    def from_energy(cls, mass: float, energy: float) -> "BeamKinematics":
        if not energy > 0:
            raise DomainError(f"kinetic energy must be positive, got {energy}")
        return cls.from_speed(mass, math.sqrt(2 * energy / mass))

    @classmethod
    def from_wavelength(cls, mass: float, wavelength: float) -> "BeamKinematics":
        if not wavelength > 0:
            raise DomainError(f"wavelength must be positive, got {wavelength}")
        return cls.from_speed(mass, const.h / (mass * wavelength))


def de_broglie(species: ParticleSpecies, speed: float) -> BeamKinematics:
    """Kinematics of ``species`` moving at ``speed`` (m/s)."""
    return BeamKinematics.from_speed(species.mass, speed)


def from_energy(species: ParticleSpecies, energy: float) -> BeamKinematics:
    """Kinematics from a kinetic energy in joules (use ``constants.keV`` for keV)."""
    return BeamKinematics.from_energy(species.mass, energy)


def talbot_length(period: float, kin: BeamKinematics | float) -> float:
    """T_L = D^2 / lambda. ``kin`` may be a BeamKinematics or a wavelength."""
    if not period > 0:
        raise DomainError(f"grating period must be positive, got {period}")
    lam = kin.wavelength if isinstance(kin, BeamKinematics) else float(kin)
    return period**2 / lam


@dataclass(frozen=True)
class CriticalFields:
    force: float  # N
    e_field: float  # V/m
    b_field: float  # T
    pattern_scale: float  # m, the tolerated deviation Delta
    flight_time: float  # s

    @property
    def b_field_mG(self) -> float:
        return self.b_field / const.mG


def critical_fields(
    species: ParticleSpecies,
    kin: BeamKinematics,
    period: float,
    distance: float,
    pattern_scale: float | None = None,
    mode: str = "talbot-lau",
) -> CriticalFields:
    """Largest uniform force (and E, B fields) whose deflection over the
    flight time ``distance / v`` stays below ``pattern_scale``.

    From Delta = F tau^2 / m with tau = L / v:  F = h^2 Delta / (m L^2 lambda^2).
    ``pattern_scale`` defaults to D in Talbot-Lau mode and to L lambda / D in
    ``"fraunhofer"`` mode. With L = T_L and Delta = D this is h^2 / (m D^3).
    """
    if not species.is_charged:
        raise UnsupportedOperationError(f"critical fields need a charged species, {species.name} is neutral")
    if not (period > 0 and distance > 0):
        raise DomainError("period and distance must be positive")
    lam = kin.wavelength
    if pattern_scale is None:
        if mode == "talbot-lau":
            pattern_scale = period
        elif mode == "fraunhofer":
            pattern_scale = distance * lam / period
        else:
            raise ConfigError(f"unknown critical-field mode {mode!r}")
    if not pattern_scale > 0:
        raise DomainError("pattern scale must be positive")
    force = const.h**2 * pattern_scale / (species.mass * distance**2 * lam**2)
    q = abs(species.charge)
    return CriticalFields(
        force=force,
        e_field=force / q,
        b_field=force / (q * kin.speed),
        pattern_scale=pattern_scale,
        flight_time=distance / kin.speed,
    )


def detector_resolvable(distance: float, wavelength: float, period: float, resolution: float, m: int = 1) -> bool:
    """Whether far-field orders (spacing L lambda / D) span at least ``m`` detector
    resolution elements: L >= m D dx / lambda."""
    return distance >= m * period * resolution / wavelength


def min_source_distance(period: float, source_extent: float, wavelength: float, m: float = 1.0) -> float:
    """Source-grating distance giving a coherence length of ``m`` periods."""
    return m * period * 2 * source_extent / wavelength
