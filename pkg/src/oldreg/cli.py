"""Command line entry point, `oldreg <subcommand> --scenario <path>`.

Exit status is 0 on success, 1 on a validation failure (bad scenario,
violated constitutive assumption) and 2 on a numerical failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from oldreg import diagnostics, maximal, mms
from oldreg.constitutive import verify_assumptions
from oldreg.driver import capture_sample, run
from oldreg.errors import NumericalError, OldregError, ValidationError
from oldreg.scenario import Scenario, build_scenario, parse_values
from oldreg.solver import checkpoint

log = logging.getLogger("oldreg")

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERICAL = 2

TRAJECTORY_DIR = "trajectory"


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    log.debug("wrote %s", path)


def cmd_run(scenario: Scenario, out: Path) -> int:
    snapshots = []
    trajectory = bool(scenario.capture)

    status = EXIT_OK
    try:
        result = run(scenario, on_capture=snapshots.append if trajectory else None)
    except NumericalError as exc:
        log.error("numerical failure: %s", exc)
        result = getattr(exc, "partial", None)
        status = EXIT_NUMERICAL
        if result is None:
            return status
    _write(out / "records.csv", diagnostics.records_to_csv(result.records))
    if status == EXIT_OK:
        _write(out / "checkpoint.txt", checkpoint.dumps(result.state, scenario.grid))
    for k, state in enumerate(snapshots):
        _write(out / TRAJECTORY_DIR / f"state_{k:06d}.txt", checkpoint.dumps(state, scenario.grid))
    return status


def cmd_verify(scenario: Scenario, out: Path) -> int:
    params = scenario.params
    reports = [
        verify_assumptions(params.viscosity, seed=scenario.seed, kind="viscosity"),
        verify_assumptions(params.diffusion, seed=scenario.seed, kind="diffusion"),
    ]
    text = "\n".join(r.as_text() for r in reports)
    _write(out / "assumptions.txt", text)
    bad = sum(r.violations for r in reports)
    if bad:
        log.error("%d assumption violations", bad)
        return EXIT_VALIDATION
    return EXIT_OK


def cmd_sweep(scenario: Scenario, out: Path) -> int:
    report = diagnostics.m_sweep(scenario, scenario.options["sweep.m_values"])
    _write(out / "sweep.csv", report.as_csv())
    if any(report.errors):
        log.error("some sweep members failed; see the error column")
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_mms(scenario: Scenario, out: Path) -> int:
    o = scenario.options
    table = mms.convergence_study(
        scenario.params,
        grids=o["mms.grids"],
        t_end=o["mms.t_end"],
        dt=o["mms.dt"],
        time_grid=o["mms.time_grid"],
        dts=o["mms.dts"],
    )
    _write(out / "mms.csv", table.as_csv())
    log.info("spatial order %.3f, temporal order %.3f", table.fitted_order("space"), table.fitted_order("time"))
    return EXIT_OK


def read_trajectory(directory: Path, name: str) -> maximal.SpaceTimeField:
    """Stack the checkpoints of a trajectory directory into a space-time field."""
    files = sorted(directory.glob("state_*.txt"))
    if len(files) < 2:
        raise ValidationError(f"trajectory {directory} needs at least two checkpoints")
    states, grid = [], None
    for f in files:
        state, g = checkpoint.read(f)
        if grid is not None and (g.nx, g.ny) != (grid.nx, grid.ny):
            raise ValidationError(f"checkpoint {f} has a different grid")
        grid = g
        states.append(state)
    times = np.array([s.time for s in states])
    steps = np.diff(times)
    if np.any(steps <= 0) or np.ptp(steps) > 1e-9 * steps.mean():
        raise ValidationError("trajectory checkpoints must be equally spaced in time")
    data = np.stack([capture_sample(name, s) for s in states])
    return maximal.SpaceTimeField(data, float(steps.mean()), grid.hx, grid.hy, (float(times[0]), 0.0, 0.0))


def cmd_maximal(scenario: Scenario, out: Path) -> int:
    o = scenario.options
    traj = out / TRAJECTORY_DIR
    if not any(traj.glob("state_*.txt")):
        if not scenario.capture:
            raise ValidationError("maximal-diagnostics needs capture.fields (or an existing trajectory)")
        status = cmd_run(scenario, out)
        if status != EXIT_OK:
            return status
    field = read_trajectory(traj, o["maximal.field"])
    alpha, p = o["maximal.alpha"], o["maximal.p"]
    mf = maximal.parabolic_maximal(field, alpha, 1.0)
    top = float(np.max(mf.data))
    if top <= 0:
        raise ValidationError(f"captured {o['maximal.field']} vanishes identically")
    lam_max = o["maximal.lambda_max"] or top
    lam_min = o["maximal.lambda_min"] or lam_max * 1e-3
    lams = np.geomspace(lam_min, lam_max, o["maximal.n_lambda"])
    report = maximal.weak_bound_check(field, p, alpha, lams, maximal=mf)
    _write(out / "levelset.csv", report.as_csv())
    log.info("measured weak-type constant %.6g", report.constant)
    return EXIT_OK


COMMANDS = {
    "run": cmd_run,
    "verify-assumptions": cmd_verify,
    "m-sweep": cmd_sweep,
    "mms-convergence": cmd_mms,
    "maximal-diagnostics": cmd_maximal,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="oldreg", description=__doc__.splitlines()[0])
    parser.add_argument("subcommand", choices=sorted(COMMANDS))
    parser.add_argument("--scenario", required=True, help="scenario file (section.key = value lines)")
    parser.add_argument("--out", help="output directory (overrides output.dir)")
    parser.add_argument("--seed", type=int, help="random seed (overrides run.seed)")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    return parser


def load(args) -> Scenario:
    values = parse_values(Path(args.scenario).read_text())
    if args.seed is not None:
        values["run.seed"] = args.seed
    if args.out is not None:
        values["output.dir"] = args.out
    return build_scenario(values)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="oldreg: %(levelname)s: %(message)s")
    try:
        scenario = load(args)
        return COMMANDS[args.subcommand](scenario, Path(scenario.output_dir))
    except OSError as exc:
        log.error("%s", exc)
        return EXIT_VALIDATION
    except ValidationError as exc:
        log.error("validation failed: %s", exc)
        return EXIT_VALIDATION
    except NumericalError as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERICAL
    except OldregError as exc:
        log.error("%s", exc)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
