import numpy as np
import pytest

from bpsvortex.grid import Grid
from bpsvortex.io import (
    ConfigError,
    format_report,
    load_config,
    parse_config,
    parse_report,
    read_fields,
    read_report,
    write_csv,
    write_fields,
    write_report,
)

from conftest import PLANE_CONFIG, TORUS_CONFIG


def test_parse_torus_config():
    cfg = parse_config(TORUS_CONFIG)
    assert cfg.mode == "solve-torus"
    assert (cfg.params.e, cfg.params.g, cfg.params.v, cfg.params.N) == (2.0, 1.0, 1.0, 2)
    assert cfg.periods == pytest.approx((2 * np.pi, 2 * np.pi))
    assert cfg.resolution == (32, 32)
    assert cfg.vortices == [[(1.0, 2.0)], []]
    assert cfg.tol_rel == 1e-10 and cfg.init == "zero"
    spec = cfg.vortex_spec()
    assert spec.is_torus and spec.counts().n_per_species == (1, 0)


def test_parse_plane_config_with_auto_width():
    cfg = parse_config(PLANE_CONFIG)
    assert cfg.domain == "plane" and cfg.half_width is None
    assert not cfg.vortex_spec().is_torus


def test_multiplicity_and_list_syntax():
    text = TORUS_CONFIG.replace("species_1 = (1.0, 2.0)", "species_1 = [(1.0, 2.0), (1.0, 2.0)]")
    assert parse_config(text).vortex_spec().counts().n_per_species == (2, 0)


@pytest.mark.parametrize(
    "old, new, fragment",
    [
        ("tol_rel = 1e-10", "tol_rel = 1e-10\ncolour = red", "[solver] colour: unknown key"),
        ("[solver]", "[solvers]", "[solvers]: unknown section"),
        ("resolution = 32", "resolution = 33", "[grid] resolution"),
        ("species_1 = (1.0, 2.0)", "species_1 = (9.0, 2.0)", "outside the cell"),
        ("tol_rel = 1e-10", "tol_rel = 0", "[solver] tol_rel"),
        ("e = 2", "e = -2", "[params]"),
        ("mode = solve-torus", "mode = dance", "[run] mode"),
        ("species_2 =", "species_3 = (1.0, 1.0)", "[vortices] species_3"),
        ("e = 2", "e = two", "cannot parse"),
    ],
)
def test_config_errors_name_line_and_key(old, new, fragment):
    text = TORUS_CONFIG.replace(old, new)
    with pytest.raises(ConfigError) as exc:
        parse_config(text, "run.ini")
    msg = str(exc.value)
    assert fragment in msg
    assert msg.startswith("run.ini")


def test_missing_required_items():
    with pytest.raises(ConfigError, match="missing required key"):
        parse_config(TORUS_CONFIG.replace("v = 1\n", ""))
    with pytest.raises(ConfigError, match="missing required section"):
        parse_config(TORUS_CONFIG.replace("[grid]\nresolution = 32\n", ""))
    with pytest.raises(ConfigError, match="periods"):
        parse_config(TORUS_CONFIG.replace("periods = (6.283185307179586, 6.283185307179586)\n", ""))


def test_error_reports_line_number():
    text = TORUS_CONFIG.replace("tol_rel = 1e-10", "tol_rel = 1e-10\nbogus = 1")
    line = text.splitlines().index("bogus = 1") + 1
    with pytest.raises(ConfigError, match=f"line {line}"):
        parse_config(text, "x.ini")


def test_sweep_section_validation():
    base = TORUS_CONFIG.replace("mode = solve-torus", "mode = sweep-threshold")
    with pytest.raises(ConfigError, match="sweep"):
        parse_config(base)
    ok = parse_config(base + "\n[sweep]\naxis = area\nstart = 40\nstop = 70\npoints = 5\n")
    assert ok.sweep.points == 5 and ok.sweep.workers == 1
    with pytest.raises(ConfigError, match="empty sweep range"):
        parse_config(base + "\n[sweep]\naxis = area\nstart = 70\nstop = 40\npoints = 5\n")
    with pytest.raises(ConfigError, match="species"):
        parse_config(base + "\n[sweep]\naxis = count\nstart = 0\nstop = 4\npoints = 5\nspecies = 3\n")


def test_load_config_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.ini")


def test_vfb1_round_trip(tmp_path):
    grid = Grid.torus(3.0, 2.5, 8, 6)
    rng = np.random.default_rng(0)
    fields = {"u": rng.normal(size=(2, 8, 6)), "B12": rng.normal(size=(2, 8, 6))}
    path = tmp_path / "out.vfb"
    write_fields(path, grid, fields)
    raw = path.read_bytes()
    header = raw.split(b"\n", 4)
    assert header[:4] == [b"VFB1", b"2 8 6", b"torus 3.0 2.5", b"u B12"]
    payload = np.frombuffer(header[4], dtype="<f8")
    np.testing.assert_array_equal(payload[:96], fields["u"].ravel())
    np.testing.assert_array_equal(payload[96:], fields["B12"].ravel())
    grid2, back = read_fields(path)
    assert grid2 == grid
    for name in fields:
        np.testing.assert_array_equal(back[name], fields[name])


def test_vfb1_box_descriptor_and_validation(tmp_path):
    grid = Grid.box(4.5, 4)
    write_fields(tmp_path / "b.vfb", grid, {"u": np.zeros((1, 4, 4))})
    assert (tmp_path / "b.vfb").read_bytes().split(b"\n")[2] == b"box 4.5"
    with pytest.raises(ValueError):
        write_fields(tmp_path / "c.vfb", grid, {"u": np.zeros((1, 4, 5))})
    with pytest.raises(ValueError):
        write_fields(tmp_path / "c.vfb", grid, {"bad name": np.zeros((1, 4, 4))})
    (tmp_path / "junk.vfb").write_bytes(b"nope\n")
    with pytest.raises(ValueError):
        read_fields(tmp_path / "junk.vfb")


def test_csv_rows(tmp_path):
    grid = Grid.box(1.0, 2)
    written = write_csv(tmp_path / "f", grid, {"u": np.arange(8.0).reshape(2, 2, 2)})
    assert [p.name for p in written] == ["f.u_1.csv", "f.u_2.csv"]
    lines = written[1].read_text().splitlines()
    assert lines[0] == "x,y,value"
    assert lines[1] == "-0.5,-0.5,4.0"
    assert len(lines) == 5


def test_report_format_and_parse(tmp_path):
    record = {"converged": True, "iterations": 12, "grad_norm": 1.5e-11, "flux": np.array([6.28, 0.0]), "status": "ok"}
    text = format_report(record)
    assert text.splitlines() == [
        "converged = true",
        "iterations = 12",
        "grad_norm = 1.5e-11",
        "flux_1 = 6.28",
        "flux_2 = 0.0",
        "status = ok",
    ]
    write_report(tmp_path / "r.txt", record)
    parsed = read_report(tmp_path / "r.txt")
    assert parsed == {"converged": True, "iterations": 12, "grad_norm": 1.5e-11, "flux_1": 6.28, "flux_2": 0.0, "status": "ok"}
    assert parse_report("# comment\n\nx = nan\n")["x"] != parse_report("x = nan")["x"]
