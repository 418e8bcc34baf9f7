"""Scenario parsing, the driver and the command line."""
from __future__ import annotations

import logging

import numpy as np
import pytest

from oldreg import cli
from oldreg.driver import curl_velocity, initial_state, run
from oldreg.errors import ScenarioParseError, ValidationError
from oldreg.scenario import DEFAULTS, defaults_table, parse_scenario
from oldreg.solver import checkpoint
from oldreg.solver import operators as ops
from oldreg.solver.grid import Grid

SMALL = "grid.nx = 8\ngrid.ny = 8\n"


def write_scenario(tmp_path, text, name="s.txt"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


# Scenario ------------------------------------------------------------------


def test_minimal_scenario_gets_defaults():
    sc = parse_scenario("grid.nx = 12\ngrid.ny = 10\nrun.t_end = 0.5\n")
    p = sc.params
    assert (sc.grid.nx, sc.grid.ny, p.t_end) == (12, 10, 0.5)
    assert (p.p, p.q, p.a, p.m, p.epsilon, p.mu0) == (2.0, 4.0, 0.0, 1, 0.1, 1.0)
    assert sc.warnings == () and sc.admissible


def test_inadmissible_exponents_warn(caplog):
    with caplog.at_level(logging.WARNING, logger="oldreg.scenario"):
        sc = parse_scenario("viscosity.p = 1.8\ndiffusion.q = 2.5\n")
    assert not sc.admissible
    assert len(sc.warnings) == 1 and "q >= 4" in sc.warnings[0]
    assert any("q >= 4" in r.getMessage() for r in caplog.records)


def test_a_out_of_range_is_an_error():
    with pytest.raises(ValidationError, match="a must lie in"):
        parse_scenario("fluid.a = 1.5\n")


@pytest.mark.parametrize(
    "text,line",
    [
        ("grid.nx = 8\nbogus.key = 1\n", 2),
        ("grid.nx = 8\n\n# note\ngrid.nx = 9\n", 4),
        ("grid.nx = eight\n", 1),
        ("grid.nx 8\n", 1),
        ("nx = 8\n", 1),
    ],
)
def test_parse_errors_carry_line_numbers(text, line):
    with pytest.raises(ScenarioParseError) as info:
        parse_scenario(text)
    assert info.value.line == line
    assert f"line {line}" in str(info.value)


@pytest.mark.parametrize(
    "text",
    [
        "initial.velocity = vortex\n",
        "initial.stress = wild\n",
        "initial.velocity = checkpoint\n",
        "run.record_interval = 0\n",
        "capture.fields = pressure\nrun.dt = 0.1\n",
        "capture.fields = speed\n",
        "sweep.m_values = 1,4,2\n",
        "grid.nx = 2\n",
        "viscosity.p = 1.0\n",
    ],
)
def test_invalid_scenarios(text):
    with pytest.raises(ValidationError):
        parse_scenario(text)


def test_defaults_table_lists_every_key():
    table = defaults_table()
    for key in DEFAULTS:
        assert f"`{key}`" in table


def test_comments_and_blank_lines():
    sc = parse_scenario("# header\n\ngrid.nx = 6   # trailing\n  grid.ny=5\n")
    assert (sc.grid.nx, sc.grid.ny) == (6, 5)


# Driver --------------------------------------------------------------------


def test_curl_velocity_is_divergence_free():
    g = Grid(9, 7)
    psi = np.zeros((10, 8))
    psi[1:-1, 1:-1] = np.random.default_rng(0).standard_normal((8, 6))
    u, v = curl_velocity(psi, g)
    assert np.max(np.abs(ops.divergence(u, v, g))) < 1e-12
    assert not u[[0, -1]].any() and not v[:, [0, -1]].any()


def test_random_initial_state_is_seeded_and_projected():
    text = SMALL + "initial.velocity = random\ninitial.stress = random\n"
    a = initial_state(parse_scenario(text + "run.seed = 3\n"))
    b = initial_state(parse_scenario(text + "run.seed = 3\n"))
    c = initial_state(parse_scenario(text + "run.seed = 4\n"))
    assert np.array_equal(a.u, b.u) and np.array_equal(a.stress, b.stress)
    assert not np.array_equal(a.u, c.u)
    assert np.max(np.abs(ops.divergence(a.u, a.v, Grid(8, 8)))) <= 1e-10


def test_t_end_zero_run():
    sc = parse_scenario(SMALL + "run.t_end = 0\ninitial.velocity = taylor-green\n")
    res = run(sc)
    assert len(res.records) == 1 and res.steps == 0
    assert np.array_equal(res.state.u, initial_state(sc).u)


def test_record_interval_and_captures():
    sc = parse_scenario(SMALL + "run.t_end = 0.01\nrun.dt = 0.001\nrun.record_interval = 3\ncapture.fields = speed,stress_norm\n")
    res = run(sc)
    assert res.steps == 10
    assert [round(r.time, 12) for r in res.records] == [0.0, 0.003, 0.006, 0.009, 0.01]
    assert res.captures["speed"].shape == (11, 8, 8)
    assert res.captures["speed"].dt == 0.001


def test_checkpoint_initial_condition(tmp_path):
    sc = parse_scenario(SMALL + "run.t_end = 0.005\ninitial.velocity = taylor-green\n")
    res = run(sc)
    path = tmp_path / "c.txt"
    checkpoint.write(path, res.state, sc.grid)
    sc2 = parse_scenario(SMALL + f"initial.velocity = checkpoint\ninitial.path = {path}\n")
    st = initial_state(sc2)
    assert st.time == 0.0 and np.array_equal(st.u, res.state.u)
    with pytest.raises(ValidationError, match="does not match"):
        initial_state(parse_scenario(f"grid.nx = 9\ngrid.ny = 8\ninitial.velocity = checkpoint\ninitial.path = {path}\n"))


# Command line --------------------------------------------------------------


def test_run_with_t_end_zero(tmp_path):
    path = write_scenario(tmp_path, SMALL + "run.t_end = 0\n")
    out = tmp_path / "out"
    assert cli.main(["run", "--scenario", path, "--out", str(out)]) == 0
    rows = (out / "records.csv").read_text().splitlines()
    assert len(rows) == 2 and rows[0].startswith("time,dt,kinetic_l2")
    state, grid = checkpoint.read(out / "checkpoint.txt")
    assert grid == Grid(8, 8) and state.time == 0.0


def test_run_is_deterministic(tmp_path):
    path = write_scenario(tmp_path, SMALL + "run.t_end = 0.02\ninitial.velocity = random\ninitial.stress = random\n")
    for k in (1, 2):
        assert cli.main(["run", "--scenario", path, "--out", str(tmp_path / f"o{k}"), "--seed", "7"]) == 0
    assert (tmp_path / "o1/records.csv").read_bytes() == (tmp_path / "o2/records.csv").read_bytes()
    assert (tmp_path / "o1/checkpoint.txt").read_bytes() == (tmp_path / "o2/checkpoint.txt").read_bytes()
    assert cli.main(["run", "--scenario", path, "--out", str(tmp_path / "o3"), "--seed", "8"]) == 0
    assert (tmp_path / "o1/records.csv").read_bytes() != (tmp_path / "o3/records.csv").read_bytes()


def test_verify_assumptions(tmp_path):
    path = write_scenario(tmp_path, SMALL)
    assert cli.main(["verify-assumptions", "--scenario", path, "--out", str(tmp_path)]) == 0
    text = (tmp_path / "assumptions.txt").read_text()
    assert "violations" in text


def test_exit_codes(tmp_path):
    bad = write_scenario(tmp_path, "fluid.a = 1.5\n")
    assert cli.main(["run", "--scenario", bad, "--out", str(tmp_path)]) == 1
    unknown = write_scenario(tmp_path, "grid.nx = 8\nfoo.bar = 1\n", "u.txt")
    assert cli.main(["run", "--scenario", unknown, "--out", str(tmp_path)]) == 1
    assert cli.main(["run", "--scenario", str(tmp_path / "missing.txt")]) == 1
    blow = write_scenario(
        tmp_path, SMALL + "run.t_end = 50\nrun.dt = 1\ninitial.stress = random\ndiffusion.kappa_t = 0\n", "b.txt"
    )
    out = tmp_path / "blow"
    assert cli.main(["run", "--scenario", blow, "--out", str(out)]) == 2
    assert (out / "records.csv").exists() and not (out / "checkpoint.txt").exists()
    with pytest.raises(SystemExit):
        cli.main(["fly", "--scenario", bad])


def test_m_sweep_command(tmp_path):
    path = write_scenario(tmp_path, SMALL + "run.t_end = 0.01\nsweep.m_values = 1,2\n")
    assert cli.main(["m-sweep", "--scenario", path, "--out", str(tmp_path)]) == 0
    rows = (tmp_path / "sweep.csv").read_text().splitlines()
    assert rows[0] == "m,reg_l1_final,sup_energy,vmax,ratio,error" and len(rows) == 3


def test_mms_command(tmp_path):
    path = write_scenario(
        tmp_path, "diffusion.q = 2\nmms.grids = 8,16\nmms.t_end = 0.002\nmms.time_grid = 8\nmms.dts = 0.001,0.0005,0.00025\n"
    )
    assert cli.main(["mms-convergence", "--scenario", path, "--out", str(tmp_path)]) == 0
    rows = (tmp_path / "mms.csv").read_text().splitlines()
    assert rows[0] == "kind,n,dt,error,order"
    assert sum(r.startswith("space") for r in rows) == 2 and sum(r.startswith("time") for r in rows) == 2


def test_maximal_diagnostics_command(tmp_path):
    text = SMALL + "run.t_end = 0.01\nrun.dt = 0.001\ninitial.velocity = taylor-green\ncapture.fields = speed\nmaximal.n_lambda = 5\n"
    path = write_scenario(tmp_path, text)
    out = tmp_path / "out"
    assert cli.main(["maximal-diagnostics", "--scenario", path, "--out", str(out)]) == 0
    assert len(list((out / "trajectory").glob("state_*.txt"))) == 11
    rows = (out / "levelset.csv").read_text().splitlines()
    assert rows[0] == "lambda,measure,weak_constant" and len(rows) == 6
    # A second call reuses the stored trajectory.
    first = (out / "levelset.csv").read_bytes()
    assert cli.main(["maximal-diagnostics", "--scenario", path, "--out", str(out)]) == 0
    assert (out / "levelset.csv").read_bytes() == first


def test_maximal_diagnostics_needs_captures(tmp_path):
    path = write_scenario(tmp_path, SMALL)
    assert cli.main(["maximal-diagnostics", "--scenario", path, "--out", str(tmp_path / "x")]) == 1
