import textwrap

import pytest

TORUS_CONFIG = """
[run]
mode = solve-torus

[params]
e = 2
g = 1
v = 1
N = 2

[domain]
kind = torus
periods = (6.283185307179586, 6.283185307179586)

[grid]
resolution = 32

[vortices]
species_1 = (1.0, 2.0)
species_2 =

[solver]
tol_rel = 1e-10
seed = 0
"""

PLANE_CONFIG = """
[run]
mode = solve-plane

[params]
e = 1
g = 1
v = 1
N = 2

[domain]
kind = plane
half_width = auto

[grid]
resolution = 64

[vortices]
species_1 = (-2.0, 0.0)
species_2 = (2.0, 0.0)
"""


@pytest.fixture
def write_config(tmp_path):
    def write(text, name="run.ini", **sections):
        body = textwrap.dedent(text)
        for section, entries in sections.items():
            body += f"\n[{section}]\n" + "".join(f"{k} = {v}\n" for k, v in entries.items())
        path = tmp_path / name
        path.write_text(body)
        return path

    return write


ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture
def criterion(request):
    """Record one acceptance line: ``criterion(number, title, passed, detail)``."""
    lines = request.config.stash.setdefault(ACCEPTANCE_KEY, [])

    def record(number, title, passed, detail):
        line = f"criterion {number} {'PASS' if passed else 'FAIL'}  {title}: {detail}"
        lines.append((number, line))
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
