"""Run configuration: a strict YAML schema mapped onto dataclasses.

Unknown keys anywhere in the file are rejected. :func:`resolved_yaml` dumps
the configuration with every default filled in, which each command writes
next to its outputs.
"""

from __future__ import annotations

import dataclasses
import typing
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import yaml

from .fields import Grid2
from .phantom import BOUNDARY_MODES, PHANTOM_KINDS, Inclusion, PhantomSpec


class ConfigError(ValueError):
    """Invalid or unknown configuration entry."""


@dataclass
class GridSection:
    nx: int = 64
    ny: int = 64
    lx: float = 1.0
    ly: float = 1.0
    origin: list = field(default_factory=lambda: [0.0, 0.0])

    def build(self) -> Grid2:
        return Grid2.rectangle(self.nx, self.ny, self.lx, self.ly, tuple(self.origin))


@dataclass
class PhysicsSection:
    omega2: float = 25.0
    mu_floor: float = 1e-8
    solver_tol: float = 1e-10


@dataclass
class InclusionSection:
    center: list = field(default_factory=lambda: [0.5, 0.5])
    width: float = 0.15
    amplitude: float = 1.0


@dataclass
class PhantomSection:
    kind: str = "gaussian-inclusion"
    background: float = 1.0
    inclusions: list = field(default_factory=lambda: [InclusionSection()])

    def build(self, grid: Grid2, mu_floor: float) -> PhantomSpec:
        incs = tuple(Inclusion(tuple(i.center), i.width, i.amplitude) for i in self.inclusions)
        return PhantomSpec(grid, self.kind, self.background,
                           () if self.kind == "constant" else incs, mu_floor)


@dataclass
class MeasurementSection:
    mode: str = "shear-x"
    label: str = ""


@dataclass
class NoiseSection:
    level: float = 0.0
    seed: int = 1234


@dataclass
class InputsSection:
    mu: Optional[str] = None             # field file for the shear modulus
    measurements: Optional[str] = None   # measurement manifest from the phantom command


@dataclass
class LandweberSection:
    sigma: float = 1.0
    max_iterations: int = 500
    gradient_tolerance: float = 1e-6
    discrepancy_tau: float = 1.5
    line_search: bool = True
    snapshot_every: int = 0
    mu0: Optional[float] = None          # constant start; defaults to the phantom background


@dataclass
class LimitStudySection:
    lambdas: list = field(default_factory=lambda: [1e2, 1e3, 1e4, 1e5])


@dataclass
class GradcheckSection:
    directions: int = 5
    epsilons: list = field(default_factory=lambda: [1e-1, 3e-2, 1e-2, 3e-3, 1e-3, 3e-4, 1e-4])
    tolerance: float = 1e-5
    mu: Optional[float] = None           # constant evaluation point; defaults to the background


@dataclass
class ConditionsSection:
    threshold: float = 0.0
    n_directions: int = 2048
    n_angles: int = 256
    pairs: list = field(default_factory=list)          # [{A: 3x3, At: 3x3}, ...]
    lopatinskii: list = field(default_factory=list)    # [[a, b, c], ...]


@dataclass
class RunConfig:
    grid: GridSection = field(default_factory=GridSection)
    physics: PhysicsSection = field(default_factory=PhysicsSection)
    phantom: PhantomSection = field(default_factory=PhantomSection)
    measurements: list = field(default_factory=lambda: [MeasurementSection()])
    noise: NoiseSection = field(default_factory=NoiseSection)
    inputs: InputsSection = field(default_factory=InputsSection)
    landweber: LandweberSection = field(default_factory=LandweberSection)
    limit_study: LimitStudySection = field(default_factory=LimitStudySection)
    gradcheck: GradcheckSection = field(default_factory=GradcheckSection)
    conditions: ConditionsSection = field(default_factory=ConditionsSection)
    output_dir: str = "out"
    deterministic: bool = False
    seed: int = 0


# list-valued keys whose items are themselves sections
_ITEM_TYPES = {
    (PhantomSection, "inclusions"): InclusionSection,
    (RunConfig, "measurements"): MeasurementSection,
}


def _number(value, where: str) -> float:
    # YAML 1.1 reads exponent literals without a dot (1e9) as strings
    if isinstance(value, str):
        try:
            return float(value)
        except ValueError:
            pass
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}: expected a number, got {value!r}")
    return float(value)


def _coerce(value, tp, where: str):
    origin = typing.get_origin(tp)
    if origin is typing.Union:
        args = [a for a in typing.get_args(tp) if a is not type(None)]
        return None if value is None else _coerce(value, args[0], where)
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected true/false, got {value!r}")
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        return value
    if tp is float:
        return _number(value, where)
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string, got {value!r}")
        return value
    if tp is list:
        if not isinstance(value, list):
            raise ConfigError(f"{where}: expected a list, got {value!r}")
        return value
    return value


def _build(cls, data, where: str):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{where or 'config'}: expected a mapping, got {type(data).__name__}")
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"{where or 'config'}: unknown key(s) {', '.join(map(str, unknown))}")
    kwargs = {}
    for name, value in data.items():
        key = f"{where}.{name}" if where else name
        tp = hints[name]
        if dataclasses.is_dataclass(tp):
            kwargs[name] = _build(tp, value, key)
        elif (cls, name) in _ITEM_TYPES:
            if not isinstance(value, list):
                raise ConfigError(f"{key}: expected a list")
            item = _ITEM_TYPES[(cls, name)]
            kwargs[name] = [_build(item, v, f"{key}[{i}]") for i, v in enumerate(value)]
        else:
            kwargs[name] = _coerce(value, tp, key)
    return cls(**kwargs)


def validate(cfg: RunConfig) -> RunConfig:
    def need(ok: bool, msg: str):
        if not ok:
            raise ConfigError(msg)

    g = cfg.grid
    need(g.nx >= 4 and g.ny >= 4, "grid: nx and ny must be at least 4")
    need(g.lx > 0 and g.ly > 0, "grid: extents must be positive")
    need(len(g.origin) == 2, "grid.origin needs two coordinates")
    need(cfg.physics.omega2 >= 0, "physics.omega2 must be non-negative")
    need(cfg.physics.mu_floor > 0, "physics.mu_floor must be positive")
    need(0 < cfg.physics.solver_tol <= 1e-6, "physics.solver_tol must lie in (0, 1e-6]")
    need(cfg.phantom.kind in PHANTOM_KINDS, f"phantom.kind must be one of {PHANTOM_KINDS}")
    need(len(cfg.measurements) >= 1, "at least one measurement is required")
    labels = []
    for i, m in enumerate(cfg.measurements):
        need(m.mode in BOUNDARY_MODES, f"measurements[{i}].mode must be one of {BOUNDARY_MODES}")
        labels.append(m.label or f"m{i}")
    need(len(set(labels)) == len(labels), "measurement labels must be unique")
    for m, lab in zip(cfg.measurements, labels):
        m.label = lab
    need(0 <= cfg.noise.level < 1, "noise.level must lie in [0, 1)")
    lw = cfg.landweber
    need(lw.sigma > 0, "landweber.sigma must be positive")
    need(lw.max_iterations >= 0, "landweber.max_iterations must be non-negative")
    need(lw.gradient_tolerance > 0, "landweber.gradient_tolerance must be positive")
    need(lw.discrepancy_tau >= 1, "landweber.discrepancy_tau must be at least 1")
    need(lw.snapshot_every >= 0, "landweber.snapshot_every must be non-negative")
    cfg.limit_study.lambdas = [_number(v, "limit_study.lambdas") for v in cfg.limit_study.lambdas]
    need(all(v > 0 for v in cfg.limit_study.lambdas), "limit_study.lambdas must be positive")
    gc = cfg.gradcheck
    need(gc.directions >= 1, "gradcheck.directions must be at least 1")
    gc.epsilons = [_number(e, "gradcheck.epsilons") for e in gc.epsilons]
    need(len(gc.epsilons) >= 1 and all(e > 0 for e in gc.epsilons),
         "gradcheck.epsilons must be positive numbers")
    need(gc.tolerance > 0, "gradcheck.tolerance must be positive")
    c = cfg.conditions
    need(c.threshold >= 0, "conditions.threshold must be non-negative")
    need(c.n_directions >= 1 and c.n_angles >= 1, "conditions sample counts must be positive")
    for i, pair in enumerate(c.pairs):
        need(isinstance(pair, dict) and set(pair) == {"A", "At"},
             f"conditions.pairs[{i}] needs exactly the keys A and At")
    for i, t in enumerate(c.lopatinskii):
        need(isinstance(t, list) and len(t) == 3, f"conditions.lopatinskii[{i}] needs [a, b, c]")
    return cfg


def load_config(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed YAML in {path}: {exc}") from exc
    return validate(_build(RunConfig, data, ""))


def from_dict(data: dict) -> RunConfig:
    return validate(_build(RunConfig, data, ""))


def resolved_yaml(cfg: RunConfig) -> str:
    return yaml.safe_dump(dataclasses.asdict(cfg), sort_keys=False, default_flow_style=None)


def write_resolved(cfg: RunConfig, out_dir) -> Path:
    path = Path(out_dir) / "resolved_config.yaml"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(resolved_yaml(cfg), encoding="utf-8")
    return path
