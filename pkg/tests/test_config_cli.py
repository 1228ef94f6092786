import json
import math

import pytest
from hypothesis import given, strategies as st

from matterwave import cli
from matterwave import constants as K
from matterwave.config import SCHEMA, emit_config, parse_config
from matterwave.errors import ConfigError, ExpansionInvalidError
from matterwave.io import read_pattern, read_table, write_field, read_field
from matterwave.wavefield import GratingSpec, SlitProfile, build_grating_field

MC_PATTERN = """\
[run]
command = pattern
[species]
name = Ps
speed = 1e5 m/s
[grating]
slits = 4
period = 10 um
width = 3 um
[geometry]
distance = 1 m
source_distance = 0.5 m
source_extent = 90 um
window = 1 mm
points = 201
[mc]
samples = 3000
seed = 5
"""


def write_cfg(tmp_path, text, name="run.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_units_normalized_to_si():
    cfg = parse_config("[grating]\nperiod = 265 nm\nwidth = 0.09 um\nwedge = 10 deg\n[species]\nenergy = 5 keV\n")
    assert cfg.get("grating", "period") == pytest.approx(265e-9)
    assert cfg.get("grating", "width") == pytest.approx(90e-9)
    assert cfg.get("grating", "wedge") == pytest.approx(math.radians(10))
    assert cfg.get("species", "energy") == pytest.approx(5 * K.keV)


@pytest.mark.parametrize("text,line,msg", [
    ("[grating]\nperiod = 2\n", 2, "missing unit"),
    ("[grating]\nperiod = 2 kg\n", 2, "not a length unit"),
    ("[grating]\n\nperiods = 2 um\n", 3, "unknown key"),
    ("[gratings]\n", 1, "unknown section"),
    ("[grating]\nperiod = 2 um\nperiod = 3 um\n", 3, "duplicate"),
    ("[grating]\nwidth = 3 um\nperiod = 2 um\nslits = 3\n", 3, "period must exceed slit width"),
    ("[mc]\nsamples = -4\n", 2, "positive"),
    ("[material]\npermittivity = 0.5\n", 2, "permittivity"),
    ("[species]\nspeed = 1 m/s\nenergy = 1 eV\n", 3, "only one"),
    ("period = 2 um\n", 1, "outside any section"),
])
def test_errors_name_the_line(text, line, msg):
    with pytest.raises(ConfigError, match=msg) as exc:
        parse_config(text)
    assert exc.value.line == line
    assert f"line {line}" in str(exc.value)


lengths = st.floats(1e-9, 10.0, allow_nan=False)


@given(lengths, lengths, st.integers(1, 100), st.lists(st.floats(0, 1e-3), min_size=1, max_size=4),
       st.integers(0, 2**64 - 1), st.booleans())
def test_emit_parse_round_trip(d, w, n, ext, seed, cull):
    cfg = parse_config("[run]\ncommand = pattern\n")
    cfg.set("grating", "period", max(d, w) * 2)
    cfg.set("grating", "width", w)
    cfg.set("grating", "slits", n)
    cfg.set("geometry", "source_extent", ext)
    cfg.set("mc", "seed", seed)
    cfg.set("mc", "decay_culling", cull)
    again = parse_config(emit_config(cfg))
    assert again.values == cfg.values


def test_every_schema_key_emits():
    assert all(SCHEMA[s] for s in SCHEMA)


def test_presets_parse_to_stated_parameters():
    fig3 = parse_config(cli.preset_path("fig3").read_text())
    assert fig3.get("species", "speed") == 1e5
    assert fig3.get("grating", "slits") == 10
    assert fig3.get("grating", "period") == pytest.approx(10e-6)
    assert fig3.get("grating", "width") == pytest.approx(3e-6)
    assert fig3.get("geometry", "distance") == 1.0
    assert fig3.get("geometry", "source_distance") == 0.5
    assert fig3.get("geometry", "source_extent") == pytest.approx([900e-6, 90e-6, 9e-6])
    for name in cli.preset_names():
        parse_config(cli.preset_path(name).read_text())


def test_pattern_run_outputs_and_manifest(tmp_path):
    cfg = write_cfg(tmp_path, MC_PATTERN)
    assert cli.main(["pattern", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    header, pat = read_pattern(tmp_path / "o" / "pattern.dat")
    man = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert header["manifest_hash"] == man["manifest_hash"]
    assert pat.stderr is not None and pat.x.size == 201
    assert man["derived"]["coherence_length_m"] == pytest.approx(0.5 * man["derived"]["wavelength_m"] / 180e-6)
    assert "timing" in man and man["derived"]["mode"] == "fraunhofer"


def test_same_seed_any_threads_byte_identical(tmp_path):
    cfg = write_cfg(tmp_path, MC_PATTERN)
    outs = []
    for t in ("1", "3"):
        d = tmp_path / f"t{t}"
        assert cli.main(["pattern", "--config", cfg, "--out", str(d), "--threads", t]) == 0
        outs.append((d / "pattern.dat").read_bytes())
    assert outs[0] == outs[1]
    cli.main(["pattern", "--config", cfg, "--out", str(tmp_path / "s"), "--seed", "6"])
    assert (tmp_path / "s" / "pattern.dat").read_bytes() != outs[0]


def test_exit_code_config_error(tmp_path, capsys):
    cfg = write_cfg(tmp_path, MC_PATTERN.replace("distance = 1 m", "distance = 1"))
    assert cli.main(["pattern", "--config", cfg, "--out", str(tmp_path)]) == 2
    assert "line" in capsys.readouterr().err
    assert cli.main(["coherence", "--config", write_cfg(tmp_path, MC_PATTERN), "--out", str(tmp_path)]) == 2
    assert cli.main(["pattern", "--config", str(tmp_path / "missing.cfg")]) == 2


def test_exit_code_empty_ensemble(tmp_path):
    text = MC_PATTERN.replace("1e5 m/s", "100 m/s") + "decay_culling = true\n"
    assert cli.main(["pattern", "--config", write_cfg(tmp_path, text), "--out", str(tmp_path / "o")]) == 4
    assert not (tmp_path / "o" / "pattern.dat").exists()


def test_exit_code_numerical_validity(tmp_path, monkeypatch):
    def boom(cfg):
        raise ExpansionInvalidError("Re kappa2 <= 0")
    monkeypatch.setitem(cli.PIPELINES, "slitwidth", boom)
    assert cli.main(["slitwidth", "--preset", "table1", "--out", str(tmp_path)]) == 3


def test_fields_report(tmp_path):
    assert cli.main(["fields", "--preset", "fields", "--out", str(tmp_path)]) == 0
    header, _, _ = read_table(tmp_path / "fields.txt")
    assert float(header["E_crit_V_per_m"]) == pytest.approx(0.188, rel=1e-2)
    assert "B_crit assumes" in header["B_note"]
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["notes"]


def test_neutral_fields_report(tmp_path):
    text = "[species]\nname = Ps\nspeed = 1e5 m/s\n[grating]\nperiod = 1 um\n"
    assert cli.main(["fields", "--config", write_cfg(tmp_path, text), "--out", str(tmp_path)]) == 0
    assert "not applicable" in (tmp_path / "fields.txt").read_text()


def test_coherent_pattern_modes(tmp_path):
    assert cli.main(["pattern", "--preset", "twoslit", "--out", str(tmp_path / "a")]) == 0
    man = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert man["derived"]["mode"] == "fraunhofer"
    gauss = ("[species]\nname = e-\nwavelength = 1 nm\n[grating]\nslits = 2\nperiod = 400 nm\nwidth = 100 nm\n"
             "profile = gaussian\n[geometry]\ndistance = 20 um\nwindow = 1.5 um\npoints = 61\n")
    assert cli.main(["pattern", "--config", write_cfg(tmp_path, gauss), "--out", str(tmp_path / "b")]) == 0
    man = json.loads((tmp_path / "b" / "manifest.json").read_text())
    assert man["derived"]["mode"] == "numerical"
    assert man["derived"]["fresnel_error_estimate"] < 1e-3


def test_field_io_round_trip(tmp_path):
    f = build_grating_field(GratingSpec(2, 4e-7, SlitProfile("gaussian", 1e-7)), 1e-9)
    write_field(tmp_path / "f.dat", f, {"note": "x"})
    h, g = read_field(tmp_path / "f.dat")
    assert h["note"] == "x"
    assert (g.amplitude == f.amplitude).all() and g.wavelength == f.wavelength
