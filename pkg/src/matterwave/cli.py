"""Command-line entry point: ``matterwave <command> --config run.cfg``."""
from __future__ import annotations

import argparse
import math
import sys
import time
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__, kernels
from . import constants as K
from .config import COMMANDS, RunConfig, emit_config, parse_config
from .errors import ConfigError, MatterwaveError, ResolutionError
from .incoherence import (
    BeamModel, MCConfig, analytic_coherent_pattern, coherence_length, mc_average, pattern_contrast,
    extract_contrast,
)
from .interaction import MaterialSpec, cutoff_sensitivity, grating_effective_width, interaction_phase, width_table
from .io import format_table, manifest_hash, write_manifest, atomic_write
from .physics import BeamKinematics, get_species, talbot_length
from .talbot import B_FIELD_NOTE, TalbotLauSetup, field_report, scan_energy, scan_grating_separation
from .wavefield import (
    GratingSpec, SlitProfile, build_grating_field, fraunhofer_pattern, fresnel_propagate,
    is_far_field, propagate_slits,
)


def preset_path(name: str) -> Path:
    p = resources.files("matterwave") / "presets" / f"{name}.cfg"
    if not p.is_file():
        raise ConfigError(f"no preset named {name!r}")
    return Path(str(p))


def preset_names() -> list[str]:
    d = resources.files("matterwave") / "presets"
    return sorted(p.name[:-4] for p in d.iterdir() if p.name.endswith(".cfg"))


# ---------------------------------------------------------------- builders


def _species_kin(cfg: RunConfig):
    sp = get_species(cfg.require("species", "name"))
    if cfg.has("species", "speed"):
        kin = BeamKinematics.from_speed(sp.mass, cfg.get("species", "speed"))
    elif cfg.has("species", "energy"):
        kin = BeamKinematics.from_energy(sp.mass, cfg.get("species", "energy"))
    elif cfg.has("species", "wavelength"):
        kin = BeamKinematics.from_wavelength(sp.mass, cfg.get("species", "wavelength"))
    else:
        raise ConfigError("[species] needs speed, energy or wavelength")
    return sp, kin


def _material(cfg: RunConfig) -> MaterialSpec | None:
    if "material" not in cfg.values or cfg.get("material", "interaction", True) is False:
        return None
    return MaterialSpec(
        c3=cfg.get("material", "c3", 0.0),
        permittivity=cfg.get("material", "permittivity", 1.0),
        reference=cfg.get("material", "reference"),
        r_min=cfg.get("material", "r_min", 0.0),
    )


def _grating(cfg: RunConfig, first: bool = False) -> GratingSpec:
    width = cfg.require("grating", "width")
    slits = cfg.get("grating", "slits", 1)
    if first:
        width = cfg.get("grating", "first_width", width)
        slits = cfg.get("grating", "first_slits", slits)
    period = cfg.get("grating", "period", 2 * width)
    try:
        return GratingSpec(
            slits, period, SlitProfile(cfg.get("grating", "profile", "rectangular"), width),
            cfg.get("grating", "thickness", 0.0), cfg.get("grating", "wedge", 0.0), _material(cfg),
        )
    except ConfigError as exc:
        raise ConfigError(str(exc), line=cfg.line_of("grating", "period")) from None


def _mc(cfg: RunConfig) -> MCConfig:
    return MCConfig(
        cfg.get("mc", "samples", 100_000), cfg.get("mc", "seed", 0),
        cfg.get("mc", "decay_culling", False), cfg.get("mc", "batches", 20),
    )


def _beam(cfg: RunConfig, kin, extent: float | None = None) -> BeamModel:
    ext = extent if extent is not None else (cfg.get("geometry", "source_extent", [0.0]) or [0.0])[0]
    sig = cfg.get("beam", "energy_sigma", [0.0])
    return BeamModel(
        kin, ext, cfg.get("geometry", "source_distance", math.inf),
        cfg.get("beam", "speed_sigma", 0.0), sig[0] if len(sig) == 1 else 0.0,
    )


def _window(cfg: RunConfig) -> np.ndarray:
    half = cfg.require("geometry", "window")
    return np.linspace(-half, half, cfg.get("geometry", "points", 801))


def _kin_summary(sp, kin) -> dict:
    return {"species": sp.name, "speed_m_per_s": kin.speed, "wavelength_m": kin.wavelength,
            "energy_keV": kin.kinetic_energy_keV}


# ---------------------------------------------------------------- pipelines
# each returns (derived quantities, {file name: (header, columns, rows)})


def run_pattern(cfg: RunConfig):
    sp, kin = _species_kin(cfg)
    g = _grating(cfg)
    L = cfg.require("geometry", "distance")
    x = _window(cfg)
    lam = kin.wavelength
    derived = _kin_summary(sp, kin)
    ext = cfg.get("geometry", "source_extent", [0.0])[0]
    beam = _beam(cfg, kin)
    if ext > 0 or not beam.monochromatic:
        p = mc_average(g, beam, sp, L, x, _mc(cfg), mode=cfg.get("geometry", "mode", "auto"))
        derived.update(mode=p.meta["mode"], survival_fraction=p.meta["survival_fraction"],
                       samples=p.meta["samples"], source_x_std_m=p.meta["x_src_std"])
        if ext > 0:
            derived["coherence_length_m"] = coherence_length(beam.source_distance, lam, ext)
        cols, rows = ["x", "intensity", "stderr"], zip(p.x, p.intensity, p.stderr)
    else:
        mode = cfg.get("geometry", "mode", "auto")
        if mode == "auto":
            mode = "fraunhofer" if is_far_field(g.profile.sigma, g.period, L, lam, x.max()) else "fresnel"
        phase = interaction_phase(g, sp, kin.speed) if g.material is not None else None
        if mode == "fraunhofer" and phase is None:
            inten = fraunhofer_pattern(g, x, lam, L)
        elif mode == "fresnel" and phase is None and g.profile.kind == "rectangular":
            inten = propagate_slits(g, x, lam, L, 0.0, cfg.get("geometry", "source_distance", math.inf))
        else:
            dx = None
            while True:
                f = build_grating_field(g, lam, dx=dx, phase=phase)
                try:
                    out = fresnel_propagate(f, L, x_out=x)
                    break
                except ResolutionError as exc:
                    dx = 0.9 * exc.max_dx
            inten = out.intensity
            derived["fresnel_error_estimate"] = out.meta.get("error_estimate")
            mode = "numerical"
        derived["mode"] = mode
        cols, rows = ["x", "intensity"], zip(x, inten)
    return derived, {"pattern.dat": ({"command": "pattern"}, cols, list(rows))}


def run_coherence(cfg: RunConfig):
    sp, kin = _species_kin(cfg)
    g = _grating(cfg)
    L = cfg.require("geometry", "distance")
    ys = cfg.require("geometry", "source_distance")
    x = _window(cfg)
    lam = kin.wavelength
    mc = _mc(cfg)
    period = lam * L / g.period
    derived = _kin_summary(sp, kin)
    files, summary = {}, []
    for k, ext in enumerate(cfg.require("geometry", "source_extent")):
        l0 = coherence_length(ys, lam, ext)
        p = mc_average(g, _beam(cfg, kin, ext), sp, L, x, mc, point_index=k, mode=cfg.get("geometry", "mode", "auto"))
        a = analytic_coherent_pattern(g, lam, L, l0, x)
        c, e = pattern_contrast(p, period)
        ca = extract_contrast(x, a.intensity, period).contrast
        rms = float(np.sqrt(np.mean((p.intensity - a.intensity) ** 2)) / a.intensity.max())
        summary.append((ext, l0, c, e, ca, rms, p.meta["survival_fraction"], p.meta["mode"]))
        files[f"coherence_{k}.dat"] = (
            {"source_extent_m": ext, "coherence_length_m": l0},
            ["x", "intensity_mc", "stderr", "intensity_analytic"],
            list(zip(x, p.intensity, p.stderr, a.intensity)),
        )
    derived["fringe_period_m"] = period
    files["coherence.dat"] = (
        {"command": "coherence"},
        ["source_extent", "coherence_length", "contrast_mc", "contrast_error", "contrast_analytic",
         "rms_over_peak", "survival_fraction", "mode"],
        summary,
    )
    return derived, files


def run_slitwidth(cfg: RunConfig):
    width = cfg.require("grating", "width")
    wedge = cfg.get("grating", "wedge", 0.0)
    eps = cfg.get("material", "permittivity", 1.0)
    r_min = cfg.get("material", "r_min", 0.0)
    files, derived = {}, {}
    if cfg.has("slitwidth", "species"):
        names = cfg.get("slitwidth", "species")
        energies = [e / K.keV for e in cfg.require("slitwidth", "energies")]
        thick = cfg.require("slitwidth", "thickness")
        if len(thick) != len(names):
            raise ConfigError("one thickness per species", line=cfg.line_of("slitwidth", "thickness"))
        tk = dict(zip(names, thick))
        kw = dict(species_names=tuple(names), energies_keV=tuple(energies), width=width,
                  wedge_deg=math.degrees(wedge), permittivity=eps, thickness=tk)
        rows = width_table(r_min=r_min, **kw)
        by = {(r.species, r.energy_keV): r for r in rows}
        sp_names = [get_species(n).name for n in names]
        table = [
            [e] + [by[(n, e)].a_eff for n in sp_names] + [int(by[(n, e)].near_edge) for n in sp_names]
            for e in energies
        ]
        cols = ["energy_keV"] + [f"a_eff_{n}" for n in sp_names] + [f"near_edge_{n}" for n in sp_names]
        files["slitwidth.dat"] = ({"command": "slitwidth", "nominal_width_m": width, "r_min_m": r_min}, cols, table)
        if cfg.has("slitwidth", "sweep_r_min"):
            sweep = cutoff_sensitivity(tuple(cfg.get("slitwidth", "sweep_r_min")), **kw)
            srows = [(r, w.species, w.energy_keV, w.a_eff) for r, ws in sweep.items() for w in ws]
            files["cutoff_sensitivity.dat"] = ({"command": "slitwidth"}, ["r_min", "species", "energy_keV", "a_eff"], srows)
    else:
        sp, kin = _species_kin(cfg)
        g = _grating(cfg)
        ce = grating_effective_width(g, sp, kin)
        derived.update(_kin_summary(sp, kin), a_eff_m=ce.a_eff, reduction=ce.reduction,
                       kappa1_m=abs(ce.kappa1), near_validity_edge=ce.near_validity_edge)
        files["slitwidth.dat"] = (
            {"command": "slitwidth"}, ["species", "energy_keV", "a0", "a_eff", "reduction"],
            [(sp.name, kin.kinetic_energy_keV, g.width, ce.a_eff, ce.reduction)],
        )
    return derived, files


def _talbot_setup(cfg: RunConfig, distance: float | None = None) -> TalbotLauSetup:
    sp, kin = _species_kin(cfg)
    g2 = _grating(cfg)
    g1 = _grating(cfg, first=True)
    inter = cfg.get("material", "interaction")
    L = distance if distance is not None else cfg.get("geometry", "distance", talbot_length(g2.period, kin))
    return TalbotLauSetup(g1, g2, L, sp, BeamModel(kin, speed_sigma=cfg.get("beam", "speed_sigma", 0.0)), inter)


def run_talbot_scan_l(cfg: RunConfig):
    setup = _talbot_setup(cfg)
    ratios = np.linspace(cfg.require("scan", "start"), cfg.require("scan", "stop"), cfg.get("scan", "points", 20))
    method = cfg.get("scan", "method", "mc")
    mc = _mc(cfg)
    rows, derived = [], {}
    for mode in ("quantum", "classical"):
        res = scan_grating_separation(setup, ratios, mc, mode, method)
        rows += [(v, c, e, mode) for v, c, e in zip(res.curve.values, res.curve.contrast, res.curve.error)]
        derived[mode] = res.manifest
    return derived, {"scan_l.dat": ({"command": "talbot-scan-l"}, ["scan_value", "contrast", "stat_error", "mode"], rows)}


def run_talbot_scan_e(cfg: RunConfig):
    setup = _talbot_setup(cfg, cfg.require("geometry", "distance"))
    e0 = np.linspace(cfg.require("scan", "energy_start"), cfg.require("scan", "energy_stop"),
                     cfg.get("scan", "points", 16)) / K.keV
    sigmas = [s / K.keV for s in cfg.get("beam", "energy_sigma", [0.0])]
    res = scan_energy(setup, e0, sigmas, _mc(cfg))
    rows, derived = [], {"curves": [r.manifest for r in res]}
    for s, r in zip(sigmas, res):
        rows += [(v, c, e, "quantum", s) for v, c, e in zip(r.curve.values, r.curve.contrast, r.curve.error)]
    cols = ["scan_value", "contrast", "stat_error", "mode", "energy_sigma_keV"]
    return derived, {"scan_e.dat": ({"command": "talbot-scan-e"}, cols, rows)}


def run_fields(cfg: RunConfig):
    sp, kin = _species_kin(cfg)
    period = cfg.require("grating", "period")
    L = cfg.get("geometry", "distance", talbot_length(period, kin))
    rep = field_report(sp, kin, period, L)
    rep.update(_kin_summary(sp, kin), talbot_length_m=talbot_length(period, kin), distance_m=L)
    if cfg.has("geometry", "detector_resolution"):
        from .physics import detector_resolvable
        rep["detector_resolvable"] = detector_resolvable(L, kin.wavelength, period, cfg.get("geometry", "detector_resolution"))
    return rep, {"fields.txt": (rep, [], [])}


PIPELINES = {
    "pattern": run_pattern,
    "coherence": run_coherence,
    "slitwidth": run_slitwidth,
    "talbot-scan-l": run_talbot_scan_l,
    "talbot-scan-e": run_talbot_scan_e,
    "fields": run_fields,
}


def run(cfg: RunConfig, out_dir, threads: int | None = None) -> dict:
    """Execute ``cfg`` and write its outputs plus ``manifest.json`` under ``out_dir``."""
    t0 = time.perf_counter()
    with kernels.using(n_threads=threads):
        derived, files = PIPELINES[cfg.command](cfg)
    manifest = {
        "tool": "matterwave",
        "version": __version__,
        "command": cfg.command,
        "config": emit_config(cfg),
        "derived": derived,
        "outputs": sorted(files),
    }
    if cfg.command in ("fields", "talbot-scan-l", "talbot-scan-e"):
        manifest["notes"] = [B_FIELD_NOTE]
    h = manifest_hash(manifest)
    out = Path(out_dir)
    for name, (header, cols, rows) in files.items():
        header = {"manifest_hash": h, **header}
        atomic_write(out / name, format_table(header, cols, rows) if cols else format_table(header, [], [])[:-len("# columns = \n")])
    manifest["timing"] = {"seconds": time.perf_counter() - t0, "threads": kernels.threads(), "backend": kernels.backend()}
    write_manifest(out / "manifest.json", manifest)
    manifest["manifest_hash"] = h
    return manifest


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="matterwave", description="Matter-wave grating interferometry simulations.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        src = p.add_mutually_exclusive_group(required=True)
        src.add_argument("--config", type=Path, help="run configuration file")
        src.add_argument("--preset", choices=preset_names(), help="shipped configuration")
        p.add_argument("--seed", type=int, help="Monte Carlo seed (unsigned 64-bit)")
        p.add_argument("--samples", type=int, help="Monte Carlo samples per point")
        p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
        p.add_argument("--threads", type=int, default=None, help="worker threads (default: all)")
    return ap


def load(args) -> RunConfig:
    path = args.config if args.config is not None else preset_path(args.preset)
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    cfg = parse_config(text)
    if cfg.command and cfg.command != args.command:
        raise ConfigError(f"config is for {cfg.command!r}, not {args.command!r}", line=cfg.line_of("run", "command"))
    cfg.set("run", "command", args.command)
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        cfg.set("mc", "seed", args.seed)
    if args.samples is not None:
        if args.samples < 1:
            raise ConfigError("--samples must be positive")
        cfg.set("mc", "samples", args.samples)
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.threads is not None and args.threads < 1:
            raise ConfigError("--threads must be positive")
        cfg = load(args)
        m = run(cfg, args.out, args.threads)
    except MatterwaveError as exc:
        print(f"matterwave: error: {exc}", file=sys.stderr)
        return exc.exit_code
    print(f"{cfg.command}: wrote {', '.join(m['outputs'])} to {args.out} (manifest {m['manifest_hash'][:12]})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
