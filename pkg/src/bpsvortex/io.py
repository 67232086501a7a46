"""Run configuration, VFB1 field files and ``key = value`` report records."""
from __future__ import annotations

import ast
import configparser
import csv
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .coupling import CouplingParams
from .grid import Grid
from .sources import VortexSpec

MAGIC = "VFB1"
MODES = ("check", "solve-torus", "solve-plane", "sweep-threshold", "verify")


class ConfigError(ValueError):
    pass


@dataclass
class SweepConfig:
    axis: str = "area"
    start: float = 0.0
    stop: float = 0.0
    points: int = 0
    species: int = 1
    workers: int = 1


@dataclass
class RunConfig:
    mode: str
    params: CouplingParams
    domain: str
    periods: tuple | None
    half_width: float | None
    resolution: tuple
    vortices: list
    tol_rel: float = 1e-10
    max_iter: int = 5000
    seed: int = 0
    init: str = "zero"
    fields_path: str | None = None
    report_path: str | None = None
    sigma: float | None = None
    mu: float | None = None
    sweep: SweepConfig | None = None
    source: str = "<config>"

    def vortex_spec(self) -> VortexSpec:
        if self.domain == "torus":
            return VortexSpec.torus(self.vortices, self.periods)
        return VortexSpec.plane(self.vortices)


# section -> {key: (required, parser)}
def _float(s):
    return float(ast.literal_eval(s))


def _int(s):
    val = ast.literal_eval(s)
    if int(val) != val:
        raise ValueError(f"not an integer: {s}")
    return int(val)


def _pair(s):
    val = ast.literal_eval(s)
    if np.isscalar(val):
        val = (val, val)
    if len(val) != 2:
        raise ValueError(f"expected two numbers, got {s}")
    return tuple(float(x) for x in val)


def _auto_float(s):
    return None if s.strip().lower() in ("auto", "none", "") else _float(s)


def _points(s):
    s = s.strip()
    if not s:
        return []
    val = ast.literal_eval(s if s.startswith("[") else f"[{s}]")
    pts = [tuple(float(c) for c in p) for p in val]
    if any(len(p) != 2 for p in pts):
        raise ValueError("each vortex point needs two coordinates")
    return pts


SCHEMA = {
    "run": {"mode": (True, str.strip)},
    "params": {"e": (True, _float), "g": (True, _float), "v": (True, _float), "N": (True, _int)},
    "domain": {
        "kind": (True, str.strip),
        "periods": (False, _pair),
        "half_width": (False, _auto_float),
    },
    "grid": {"resolution": (True, _pair)},
    "vortices": {},  # species_1 .. species_N
    "solver": {
        "tol_rel": (False, _float),
        "max_iter": (False, _int),
        "seed": (False, _int),
        "init": (False, str.strip),
    },
    "sources": {"sigma": (False, _auto_float), "mu": (False, _auto_float)},
    "output": {"fields": (False, str.strip), "report": (False, str.strip)},
    "sweep": {
        "axis": (True, str.strip),
        "start": (True, _float),
        "stop": (True, _float),
        "points": (True, _int),
        "species": (False, _int),
        "workers": (False, _int),
    },
}
OPTIONAL_SECTIONS = {"solver", "sources", "output", "sweep", "vortices"}


def _line_of(path_text: str, section: str, key: str | None) -> str:
    lines = path_text.splitlines()
    current = None
    for n, line in enumerate(lines, 1):
        s = line.strip()
        if s.startswith("[") and s.endswith("]"):
            current = s[1:-1].strip()
            if key is None and current == section:
                return f"line {n}"
        elif current == section and key is not None and "=" in s:
            if s.split("=", 1)[0].strip() == key:
                return f"line {n}"
    return "line ?"


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from exc

    def fail(section, key, msg):
        where = _line_of(text, section, key)
        label = f"[{section}]" + (f" {key}" if key else "")
        raise ConfigError(f"{source}:{where}: {label}: {msg}")

    values: dict = {}
    for section in cp.sections():
        if section not in SCHEMA:
            fail(section, None, "unknown section")
    for section, keys in SCHEMA.items():
        if not cp.has_section(section):
            if section not in OPTIONAL_SECTIONS:
                fail(section, None, "missing required section")
            continue
        got = dict(cp.items(section))
        if section == "vortices":
            values["vortices"] = got
            continue
        for key in got:
            if key not in keys:
                fail(section, key, "unknown key")
        for key, (required, parse) in keys.items():
            if key not in got:
                if required:
                    fail(section, key, "missing required key")
                continue
            try:
                values[(section, key)] = parse(got[key])
            except (ValueError, SyntaxError, TypeError) as exc:
                fail(section, key, f"cannot parse {got[key]!r}: {exc}")

    mode = values[("run", "mode")]
    if mode not in MODES:
        fail("run", "mode", f"must be one of {', '.join(MODES)}")
    try:
        params = CouplingParams(
            values[("params", "e")], values[("params", "g")], values[("params", "v")], values[("params", "N")]
        )
    except ValueError as exc:
        fail("params", None, str(exc))
    N = params.N

    kind = values[("domain", "kind")]
    periods = values.get(("domain", "periods"))
    half_width = values.get(("domain", "half_width"))
    if kind == "torus":
        if periods is None:
            fail("domain", "periods", "torus domain needs periods")
        if min(periods) <= 0:
            fail("domain", "periods", "periods must be positive")
    elif kind == "plane":
        if half_width is not None and half_width <= 0:
            fail("domain", "half_width", "half width must be positive")
    else:
        fail("domain", "kind", "must be 'torus' or 'plane'")

    m1, m2 = values[("grid", "resolution")]
    if m1 != int(m1) or m2 != int(m2) or m1 <= 0 or m2 <= 0 or int(m1) % 2 or int(m2) % 2:
        fail("grid", "resolution", "resolution must be positive even integers")

    raw_vortices = values.get("vortices", {})
    expected = {f"species_{i + 1}" for i in range(N)}
    for key in raw_vortices:
        if key not in expected:
            fail("vortices", key, f"unknown key (expected species_1..species_{N})")
    vortices = []
    for i in range(N):
        key = f"species_{i + 1}"
        try:
            pts = _points(raw_vortices.get(key, ""))
        except (ValueError, SyntaxError, TypeError) as exc:
            fail("vortices", key, f"cannot parse points: {exc}")
        for px, py in pts:
            if kind == "torus" and not (0 <= px < periods[0] and 0 <= py < periods[1]):
                fail("vortices", key, f"point ({px}, {py}) lies outside the cell [0,L1)x[0,L2)")
            if kind == "plane" and half_width is not None and max(abs(px), abs(py)) >= half_width:
                fail("vortices", key, f"point ({px}, {py}) lies outside the box")
        vortices.append(pts)

    tol_rel = values.get(("solver", "tol_rel"), 1e-10)
    if not tol_rel > 0:
        fail("solver", "tol_rel", "must be positive")
    init = values.get(("solver", "init"), "zero")
    if init not in ("zero", "random"):
        fail("solver", "init", "must be 'zero' or 'random'")

    sweep = None
    if cp.has_section("sweep"):
        sweep = SweepConfig(
            axis=values[("sweep", "axis")],
            start=values[("sweep", "start")],
            stop=values[("sweep", "stop")],
            points=values[("sweep", "points")],
            species=values.get(("sweep", "species"), 1),
            workers=values.get(("sweep", "workers"), 1),
        )
        if sweep.axis not in ("area", "count"):
            fail("sweep", "axis", "must be 'area' or 'count'")
        if sweep.points < 1 or sweep.stop < sweep.start:
            fail("sweep", "points", "empty sweep range")
        if not 1 <= sweep.species <= N:
            fail("sweep", "species", f"must be in 1..{N}")
    if mode == "sweep-threshold":
        if sweep is None:
            fail("sweep", None, "sweep-threshold mode needs a [sweep] section")
        if kind != "torus":
            fail("domain", "kind", "threshold sweeps run on the torus")

    return RunConfig(
        mode=mode,
        params=params,
        domain=kind,
        periods=periods,
        half_width=half_width,
        resolution=(int(m1), int(m2)),
        vortices=vortices,
        tol_rel=tol_rel,
        max_iter=values.get(("solver", "max_iter"), 5000),
        seed=values.get(("solver", "seed"), 0),
        init=init,
        fields_path=values.get(("output", "fields")),
        report_path=values.get(("output", "report")),
        sigma=values.get(("sources", "sigma")),
        mu=values.get(("sources", "mu")),
        sweep=sweep,
        source=source,
    )


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return parse_config(text, str(path))


def _atomic_write(path, data: bytes):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def domain_descriptor(grid: Grid) -> str:
    if grid.is_torus:
        return f"torus {grid.periods[0]!r} {grid.periods[1]!r}"
    return f"box {grid.half_width!r}"


def write_fields(path, grid: Grid, fields: dict):
    """Write named ``(N, m1, m2)`` stacks: text header, then little-endian float64,
    field by field, species-major, row-major."""
    names = list(fields)
    if not names:
        raise ValueError("no fields to write")
    if any(" " in name or not name for name in names):
        raise ValueError("field names must be non-empty and contain no spaces")
    stacks = [np.asarray(fields[n], dtype=float) for n in names]
    N = stacks[0].shape[0]
    for name, s in zip(names, stacks):
        if s.shape != (N,) + grid.shape:
            raise ValueError(f"field {name!r} has shape {s.shape}, expected {(N,) + grid.shape}")
    m1, m2 = grid.shape
    header = f"{MAGIC}\n{N} {m1} {m2}\n{domain_descriptor(grid)}\n{' '.join(names)}\n".encode("ascii")
    payload = b"".join(np.ascontiguousarray(s, dtype="<f8").tobytes() for s in stacks)
    _atomic_write(path, header + payload)


def read_fields(path):
    """Return ``(grid, {name: array(N, m1, m2)})``."""
    data = Path(path).read_bytes()
    parts = data.split(b"\n", 4)
    if len(parts) < 5 or parts[0] != MAGIC.encode():
        raise ValueError(f"{path}: not a {MAGIC} file")
    N, m1, m2 = (int(t) for t in parts[1].split())
    desc = parts[2].decode().split()
    if desc[0] == "torus":
        grid = Grid.torus(float(desc[1]), float(desc[2]), m1, m2)
    elif desc[0] == "box":
        grid = Grid.box(float(desc[1]), m1, m2)
    else:
        raise ValueError(f"{path}: unknown domain {desc[0]!r}")
    names = parts[3].decode().split()
    payload = np.frombuffer(parts[4], dtype="<f8")
    per = N * m1 * m2
    if payload.size != per * len(names):
        raise ValueError(f"{path}: payload has {payload.size} values, expected {per * len(names)}")
    return grid, {n: payload[k * per:(k + 1) * per].reshape(N, m1, m2).copy() for k, n in enumerate(names)}


def write_csv(prefix, grid: Grid, fields: dict) -> list[Path]:
    """One ``x,y,value`` CSV per field and species."""
    X, Y = grid.coords
    written = []
    prefix = Path(prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    for name, stack in fields.items():
        for i, f in enumerate(np.asarray(stack)):
            out = prefix.parent / f"{prefix.name}.{name}_{i + 1}.csv"
            with open(out, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["x", "y", "value"])
                for x, y, val in zip(X.ravel(), Y.ravel(), f.ravel()):
                    w.writerow([repr(float(x)), repr(float(y)), repr(float(val))])
            written.append(out)
    return written


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def format_report(record: dict) -> str:
    lines = []
    for key, value in record.items():
        if isinstance(value, (list, tuple, np.ndarray)):
            for i, item in enumerate(np.ravel(value), 1):
                lines.append(f"{key}_{i} = {_fmt(item)}")
        else:
            lines.append(f"{key} = {_fmt(value)}")
    return "\n".join(lines) + "\n"


def write_report(path, record: dict):
    _atomic_write(path, format_report(record).encode())


def read_report(path) -> dict:
    return parse_report(Path(path).read_text())


def parse_report(text: str) -> dict:
    out = {}
    for line in text.splitlines():
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        key, _, value = line.partition("=")
        value = value.strip()
        if value in ("true", "false"):
            out[key.strip()] = value == "true"
            continue
        try:
            out[key.strip()] = int(value)
        except ValueError:
            try:
                out[key.strip()] = float(value)
            except ValueError:
                out[key.strip()] = value
    return out
