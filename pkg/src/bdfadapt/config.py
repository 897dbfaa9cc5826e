"""Run configuration files (TOML or JSON) and the problem registry.

Example::

    [problem]
    id = "cfd300"
    refine = 0
    t_end = 2.0

    [controller]
    tol = 1e-3
    dt_min = 1e-4
    dt_max = 1e-1
    estimator = "li"

    [output]
    dir = "runs/cfd300"
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .controller import ControllerConfig
from .nonlinear import NewtonConfig
from .problem import DAEProblem

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

PROBLEMS = ("cfd300", "pressure_impulse", "stiff_ode", "saddle_dae", "polynomial")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ProblemSpec:
    id: str = "cfd300"
    refine: int = 0
    nu: float | None = None
    degree: int = 2
    stiffness: float = 1e3
    t0: float = 0.0
    t_end: float = 2.0

    def __post_init__(self):
        if self.id not in PROBLEMS:
            raise ConfigError(f"unknown problem id {self.id!r}; expected one of {PROBLEMS}")
        if self.refine < 0:
            raise ConfigError("refine must be >= 0")
        if self.t_end < self.t0:
            raise ConfigError("t_end must not precede t0")


@dataclass(frozen=True)
class RunConfig:
    problem: ProblemSpec = field(default_factory=ProblemSpec)
    controller: ControllerConfig = field(default_factory=ControllerConfig)
    output_dir: str = "runs/out"
    reference: bool = False
    snapshot_times: tuple[float, ...] = ()
    seed: int = 0

    def to_dict(self) -> dict:
        ctrl = dataclasses.asdict(self.controller)
        newton = ctrl.pop("newton")
        return {
            "problem": dataclasses.asdict(self.problem),
            "controller": ctrl,
            "newton": newton,
            "output": {"dir": self.output_dir, "reference": self.reference,
                       "snapshot_times": list(self.snapshot_times), "seed": self.seed},
        }


def _fields(cls) -> set[str]:
    return {f.name for f in dataclasses.fields(cls)}


def _check_keys(section: str, data: dict, allowed: set[str]) -> None:
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in [{section}]: {sorted(unknown)}")


def from_dict(data: dict) -> RunConfig:
    _check_keys("top level", data, {"problem", "controller", "newton", "output"})
    prob = dict(data.get("problem", {}))
    ctrl = dict(data.get("controller", {}))
    newt = dict(data.get("newton", {}))
    out = dict(data.get("output", {}))
    _check_keys("problem", prob, _fields(ProblemSpec))
    _check_keys("controller", ctrl, _fields(ControllerConfig) - {"newton"})
    _check_keys("newton", newt, _fields(NewtonConfig))
    _check_keys("output", out, {"dir", "reference", "snapshot_times", "seed"})
    try:
        controller = ControllerConfig(newton=NewtonConfig(**newt), **ctrl)
        return RunConfig(
            problem=ProblemSpec(**prob),
            controller=controller,
            output_dir=str(out.get("dir", "runs/out")),
            reference=bool(out.get("reference", False)),
            snapshot_times=tuple(float(t) for t in out.get("snapshot_times", ())),
            seed=int(out.get("seed", 0)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        if path.suffix == ".json":
            data = json.loads(text)
        else:
            data = tomllib.loads(text.decode())
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    return from_dict(data)


def build_problem(spec: ProblemSpec) -> DAEProblem:
    from . import verification
    from .fem import benchmarks

    if spec.id == "cfd300":
        return benchmarks.build_cfd300(spec.refine, spec.nu if spec.nu is not None else benchmarks.CFD300_NU)
    if spec.id == "pressure_impulse":
        return benchmarks.build_pressure_impulse_channel(
            spec.refine, spec.nu if spec.nu is not None else benchmarks.CHANNEL_NU)
    if spec.id == "stiff_ode":
        return verification.make_stiff_nonlinear_ode(spec.stiffness)
    if spec.id == "saddle_dae":
        return verification.make_linear_saddle_dae()
    return verification.make_polynomial_ode(spec.degree)
