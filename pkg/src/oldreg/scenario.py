"""Scenario files: a flat ``section.key = value`` grammar.

Blank lines and ``#`` comments are ignored. Every key has a default listed
in :data:`DEFAULTS`; unknown keys are rejected with their line number.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

from oldreg.constitutive import DiffusionLaw, ViscosityLaw
from oldreg.errors import ScenarioParseError, ValidationError
from oldreg.solver.grid import Grid
from oldreg.solver.stepper import FluidParams, exponents_admissible

log = logging.getLogger(__name__)


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.split(",") if x.strip())


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.split(",") if x.strip())


def _names(text: str) -> tuple[str, ...]:
    return tuple(x.strip() for x in text.split(",") if x.strip())


# key: (converter, default, description)
DEFAULTS: dict[str, tuple] = {
    "grid.nx": (int, 32, "cells in x"),
    "grid.ny": (int, 32, "cells in y"),
    "grid.lx": (float, 1.0, "domain width"),
    "grid.ly": (float, 1.0, "domain height"),
    "run.t_end": (float, 1.0, "final time"),
    "run.cfl": (float, 0.5, "safety factor of the adaptive step"),
    "run.dt": (float, 0.0, "fixed time step; 0 selects the adaptive step"),
    "run.record_interval": (int, 1, "steps between CSV rows"),
    "run.seed": (int, 0, "seed of random initial data"),
    "run.projection_tol": (float, 1e-10, "max-norm divergence tolerance"),
    "run.max_steps": (int, 10_000_000, "hard cap on the number of steps"),
    "fluid.epsilon": (float, 0.1, "stress-diffusion coefficient"),
    "fluid.mu0": (float, 1.0, "coupling viscosity"),
    "fluid.a": (float, 0.0, "objective-derivative parameter in [-1, 1]"),
    "fluid.m": (int, 1, "cut-off / regularization level"),
    "viscosity.mu1": (float, 1.0, "base viscosity"),
    "viscosity.kappa": (float, 1.0, "Carreau shift of the viscosity"),
    "viscosity.p": (float, 2.0, "viscosity exponent"),
    "diffusion.gamma1": (float, 1.0, "base stress diffusivity"),
    "diffusion.kappa_t": (float, 1.0, "Carreau shift of the diffusivity"),
    "diffusion.q": (float, 4.0, "diffusion exponent"),
    "initial.velocity": (str, "zero", "zero | taylor-green | random | checkpoint"),
    "initial.amplitude": (float, 1.0, "velocity amplitude"),
    "initial.stress": (str, "zero", "zero | constant | random"),
    "initial.t11": (float, 0.0, "constant initial T11"),
    "initial.t12": (float, 0.0, "constant initial T12"),
    "initial.t22": (float, 0.0, "constant initial T22"),
    "initial.stress_amplitude": (float, 1.0, "amplitude of random initial stress"),
    "initial.path": (str, "", "checkpoint file for initial.velocity = checkpoint"),
    "capture.fields": (_names, (), "space-time captures: speed, stress_norm, velocity"),
    "capture.interval": (float, 0.0, "capture spacing in time; 0 captures every (fixed) step"),
    "output.dir": (str, "out", "output directory"),
    "sweep.m_values": (_ints, (1, 2, 4, 8, 16), "m values of the m-sweep"),
    "mms.grids": (_ints, (16, 32, 64), "grid sizes of the spatial convergence study"),
    "mms.t_end": (float, 0.05, "final time of the manufactured-solution runs"),
    "mms.dt": (float, 0.0, "fixed step of the spatial study; 0 derives it from the finest grid"),
    "mms.time_grid": (int, 32, "grid of the temporal study"),
    "mms.dts": (_floats, (), "steps of the temporal study; empty derives them"),
    "maximal.field": (str, "speed", "captured field analysed by maximal-diagnostics"),
    "maximal.alpha": (float, 1.0, "parabolic scaling of the cylinders"),
    "maximal.p": (float, 2.0, "exponent of the weak-type ratio"),
    "maximal.lambda_min": (float, 0.0, "smallest level; 0 derives it from the data"),
    "maximal.lambda_max": (float, 0.0, "largest level; 0 derives it from the data"),
    "maximal.n_lambda": (int, 16, "number of levels (log-spaced)"),
}

VELOCITY_KINDS = ("zero", "taylor-green", "random", "checkpoint")
STRESS_KINDS = ("zero", "constant", "random")
CAPTURE_FIELDS = ("speed", "stress_norm", "velocity")


@dataclass(frozen=True)
class InitialCondition:
    velocity: str = "zero"
    amplitude: float = 1.0
    stress: str = "zero"
    constant: tuple[float, float, float] = (0.0, 0.0, 0.0)
    stress_amplitude: float = 1.0
    path: str = ""


@dataclass(frozen=True)
class Scenario:
    grid: Grid
    params: FluidParams
    initial: InitialCondition = InitialCondition()
    record_interval: int = 1
    seed: int = 0
    dt: float = 0.0
    max_steps: int = 10_000_000
    capture: tuple[str, ...] = ()
    capture_interval: float = 0.0
    output_dir: str = "out"
    options: dict = field(default_factory=dict)
    warnings: tuple[str, ...] = ()

    @property
    def admissible(self) -> bool:
        return self.params.admissible


def parse_values(text: str) -> dict:
    """Parse the key-value text and return the complete value table."""
    values = {k: spec[1] for k, spec in DEFAULTS.items()}
    seen = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ScenarioParseError(f"expected 'section.key = value', got {raw.strip()!r}", lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if key.count(".") != 1 or not all(key.split(".")):
            raise ScenarioParseError(f"key {key!r} must have the form section.key", lineno)
        if key not in DEFAULTS:
            raise ScenarioParseError(f"unknown key {key!r}", lineno)
        if key in seen:
            raise ScenarioParseError(f"duplicate key {key!r} (first set on line {seen[key]})", lineno)
        conv = DEFAULTS[key][0]
        try:
            values[key] = conv(value)
        except ValueError:
            raise ScenarioParseError(f"cannot read {value!r} as the value of {key}", lineno) from None
        seen[key] = lineno
    return values


def build_scenario(values: dict) -> Scenario:
    try:
        grid = Grid(values["grid.nx"], values["grid.ny"], values["grid.lx"], values["grid.ly"])
        viscosity = ViscosityLaw(values["viscosity.mu1"], values["viscosity.kappa"], values["viscosity.p"])
        diffusion = DiffusionLaw(values["diffusion.gamma1"], values["diffusion.kappa_t"], values["diffusion.q"])
    except ValueError as exc:
        raise ValidationError(str(exc)) from None
    params = FluidParams(
        epsilon=values["fluid.epsilon"],
        mu0=values["fluid.mu0"],
        a=values["fluid.a"],
        m=values["fluid.m"],
        viscosity=viscosity,
        diffusion=diffusion,
        t_end=values["run.t_end"],
        cfl=values["run.cfl"],
        projection_tol=values["run.projection_tol"],
    )
    initial = InitialCondition(
        velocity=values["initial.velocity"],
        amplitude=values["initial.amplitude"],
        stress=values["initial.stress"],
        constant=(values["initial.t11"], values["initial.t12"], values["initial.t22"]),
        stress_amplitude=values["initial.stress_amplitude"],
        path=values["initial.path"],
    )
    if initial.velocity not in VELOCITY_KINDS:
        raise ValidationError(f"initial.velocity must be one of {VELOCITY_KINDS} (got {initial.velocity!r})")
    if initial.stress not in STRESS_KINDS:
        raise ValidationError(f"initial.stress must be one of {STRESS_KINDS} (got {initial.stress!r})")
    if initial.velocity == "checkpoint" and not initial.path:
        raise ValidationError("initial.velocity = checkpoint requires initial.path")
    if values["run.record_interval"] < 1:
        raise ValidationError("run.record_interval must be >= 1")
    if values["run.dt"] < 0:
        raise ValidationError("run.dt must be >= 0")
    capture = values["capture.fields"]
    for name in capture:
        if name not in CAPTURE_FIELDS:
            raise ValidationError(f"capture.fields entry {name!r} is not one of {CAPTURE_FIELDS}")
    if capture and values["capture.interval"] <= 0 and values["run.dt"] <= 0:
        raise ValidationError("capturing every step needs a fixed run.dt (or set capture.interval > 0)")
    m_values = values["sweep.m_values"]
    if any(b <= a for a, b in zip(m_values[:-1], m_values[1:])):
        raise ValidationError("sweep.m_values must be strictly increasing")

    ok, reason = exponents_admissible(params.p, params.q)
    warnings = ()
    if not ok:
        msg = f"exponents outside the existence theorem: {reason}"
        log.warning(msg)
        warnings = (msg,)

    options = {k: v for k, v in values.items() if k.split(".")[0] in ("sweep", "mms", "maximal")}
    return Scenario(
        grid=grid,
        params=params,
        initial=initial,
        record_interval=values["run.record_interval"],
        seed=values["run.seed"],
        dt=values["run.dt"],
        max_steps=values["run.max_steps"],
        capture=capture,
        capture_interval=values["capture.interval"],
        output_dir=values["output.dir"],
        options=options,
        warnings=warnings,
    )


def parse_scenario(text: str) -> Scenario:
    return build_scenario(parse_values(text))


def load_scenario(path) -> Scenario:
    return parse_scenario(Path(path).read_text())


def defaults_table() -> str:
    """The defaults as a Markdown table (used in the README)."""
    rows = ["| key | default | meaning |", "|---|---|---|"]
    for key, (_, default, doc) in DEFAULTS.items():
        if isinstance(default, tuple):
            default = ",".join(str(x) for x in default)
        rows.append(f"| `{key}` | `{default}` | {doc} |")
    return "\n".join(rows)
