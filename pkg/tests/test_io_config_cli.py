import os

import numpy as np
import pytest

from mstrack import cli, config, io
from mstrack import curve as cv
from mstrack.errors import ConfigError
from mstrack.shapes import concentric_pair
from mstrack.stepper import StepDiagnostics

SMALL_SPEC = """
name = "small"

[shape]
kind = "circle"
r = 1.0
K = 32

[scheme]
dt = 0.01
T = 0.03

[mesh]
N_f = 32
N_c = 4

[output]
snapshot_times = [0.0, 0.02]
"""


def test_polyline_round_trip(tmp_path):
    c = concentric_pair(1.0, 2.0, 16)
    path = tmp_path / "c.txt"
    io.write_polylines(path, c)
    text = path.read_text()
    assert text.startswith("# component 0, 8 vertices, closed\n")
    back = io.read_polylines(path)
    np.testing.assert_array_equal(back.points, c.points)
    assert back.starts == c.starts


def test_csv_round_trip(tmp_path):
    path = tmp_path / "d.csv"
    d = StepDiagnostics(3, 0.125, 1.0, 1.0, 2.0, 1e-17, 0.5, -1e-3, 2, 1.01)
    io.write_diagnostics(path, [d])
    data = io.read_csv(path)
    assert list(data) == list(StepDiagnostics.FIELDS)
    assert data["v_rel"][0] == 1e-17 and data["fp_iters"][0] == 2


def test_atomic_write_leaves_nothing_on_failure(tmp_path):
    path = tmp_path / "x.txt"
    with pytest.raises(RuntimeError):
        with io.atomic_write(path) as fh:
            fh.write("partial")
            raise RuntimeError("boom")
    assert os.listdir(tmp_path) == []


def test_svg_output_is_well_formed():
    import xml.etree.ElementTree as ET

    c = concentric_pair(1.0, 2.0, 16)
    ET.fromstring(io.curves_svg([c, c], labels=["a", "b"]))
    ET.fromstring(io.series_svg([0, 1, 2], {"e": [3.0, 2.0, float("nan")]}, title="t"))


def test_snapshot_names_sort_by_time():
    names = [io.snapshot_name(t) for t in (0.0, 0.1, 2.0, 10.5)]
    assert names == sorted(names) and "." not in "".join(names)


@pytest.mark.parametrize("name", config.PRESETS)
def test_presets_load(name):
    spec = config.load_spec(name)
    assert spec.name == name
    assert spec.scheme.dt > 0


def test_preset_settings():
    oct_ = config.load_spec("octagon")
    assert oct_.scheme.anisotropy is not None and oct_.scheme.anisotropy.L == 4
    assert config.load_spec("octagon-isotropic").scheme.anisotropy is None
    assert config.load_spec("cigar-linear").scheme.scheme == "bgn_linear"
    assert config.load_spec("annulus-converge").converge.levels == (0, 1)
    p = config.ConvergeSpec.level_params(2)
    assert p == dict(N_f=512, N_c=16, dt=4e-3, K=1024)


def _write(tmp_path, text):
    path = tmp_path / "spec.toml"
    path.write_text(text)
    return str(path)


@pytest.mark.parametrize("bad,match", [
    (SMALL_SPEC.replace("T = 0.03\n", ""), "scheme.T"),
    (SMALL_SPEC.replace('name = "small"', ""), "name"),
    (SMALL_SPEC.replace("N_c = 4", "N_c = 4\nN_x = 1"), "unknown key"),
    (SMALL_SPEC + "\n[anisotropy]\npreset = \"hexagon\"\n", "preset"),
    (SMALL_SPEC.replace("dt = 0.01", "dt = -1"), "dt"),
    ("name = [", "spec.toml"),
])
def test_bad_specs(tmp_path, bad, match):
    with pytest.raises(ConfigError, match=match):
        config.load_spec(_write(tmp_path, bad))


def test_anisotropy_tables():
    d = config.parse_anisotropy({"matrices": [[[1.0, 0.0], [0.0, 2.0]]], "r": 2})
    assert d.L == 1 and d.r == 2.0
    d = config.parse_anisotropy({"rotated_diag": [[0.5, [1.0, 0.1], 1.0]]})
    assert d.L == 1
    with pytest.raises(ConfigError):
        config.parse_anisotropy({"preset": "octagon", "matrices": []})
    with pytest.raises(ConfigError):
        config.load_spec("no-such-file")


def test_cli_exact(capsys):
    assert cli.main(["exact", "--t", "0.5", "--r1", "2.5", "--r2", "3"]) == 0
    out = dict(line.split() for line in capsys.readouterr().out.splitlines())
    assert float(out["r1"]) == pytest.approx(1.6595125697516977, abs=1e-12)
    assert float(out["r2"]) ** 2 - float(out["r1"]) ** 2 == pytest.approx(2.75, abs=1e-12)
    assert cli.main(["exact", "--t", "2", "--r1", "2.5", "--r2", "3"]) == 2


def test_cli_simulate(tmp_path, capsys):
    out = tmp_path / "out"
    assert cli.main(["simulate", _write(tmp_path, SMALL_SPEC), "--out", str(out)]) == 0
    files = sorted(os.listdir(out))
    assert files == ["curves.svg", "diagnostics.csv", "energy.svg", "snapshots", "volume.svg"]
    snaps = sorted(os.listdir(out / "snapshots"))
    assert snaps == [io.snapshot_name(t) + ".txt" for t in (0.0, 0.02, 0.03)]
    data = io.read_csv(out / "diagnostics.csv")
    np.testing.assert_allclose(data["t"], [0, 0.01, 0.02, 0.03])
    assert np.abs(data["v_rel"]).max() < 1e-9
    final = io.read_polylines(out / "snapshots" / snaps[-1])
    assert final.n_vertices == 32 and cv.is_simple(final)
    assert "max_stability_violation" in capsys.readouterr().out


def test_cli_simulate_missing_field_writes_nothing(tmp_path, capsys):
    out = tmp_path / "out"
    spec = _write(tmp_path, SMALL_SPEC.replace("T = 0.03\n", ""))
    assert cli.main(["simulate", spec, "--out", str(out)]) == 2
    assert not out.exists()
    assert "scheme.T" in capsys.readouterr().err


def test_cli_converge_short_ladder(tmp_path, capsys):
    spec = _write(tmp_path, open(config.resources.files("mstrack") / "presets" /
                                 "annulus-converge.toml").read().replace("T = 0.5\nlevels",
                                                                         "T = 0.128\nlevels"))
    csv_path = tmp_path / "table.csv"
    assert cli.main(["converge", spec, "--levels", "0", "--scheme", "bgn-linear",
                     "--integration", "lumped", "--out", str(csv_path)]) == 0
    data = io.read_csv(csv_path)
    assert tuple(data) == io.CONVERGE_COLUMNS
    assert data["K"][0] == 256 and data["h_f"][0] == 0.0625
    assert 0 < data["v_Delta_M"][0] < 0.1
    assert cli.main(["converge", spec, "--levels", "9"]) == 2
