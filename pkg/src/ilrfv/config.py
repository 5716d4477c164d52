"""Run configuration: a flat key-value text format with dotted sections.

Example::

    case = double-sine
    mesh.generator = uniform
    mesh.nx = 32
    equation = scalar
    flux = upwind
    reconstruction = ilr
    time.cfl = 0.3
    time.end = 1.0
    output.directory = out

Unknown keys are errors, not warnings: configs are archived next to their
outputs and must stay unambiguous.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

from .bench import CASES
from .physics import FLUXES, GAMMA_DEFAULT
from .reconstruction import METHODS


class ConfigError(Exception):
    pass


@dataclass
class MeshConfig:
    generator: str = "uniform"      # uniform | jittered | stretched | file
    file: str = ""
    nx: int = 32
    ny: int = 0                     # 0: generator default
    jitter: float = 0.15
    stretch: float = 1.2
    periodic: bool = False


@dataclass
class TimeConfig:
    cfl: float = 0.3
    beta: float = 1.0 / 3.0
    fixed_dt: float = 0.0           # 0: use the CFL bound
    end: float = -1.0               # <0: case default
    cfl_mode: str = "conventional"  # conventional | strict
    integrator: str = "ssp-rk2"     # ssp-rk2 | forward-euler


@dataclass
class AmrSection:
    enabled: bool = False
    threshold: float = 0.6
    interval: int = 1
    max_level: int = 1


@dataclass
class OutputConfig:
    directory: str = "out"
    snapshots: int = 0              # evenly spaced VTK snapshots (0: final only)
    vtk: bool = True
    summary: bool = True


@dataclass
class RunConfig:
    case: str = ""
    equation: str = ""              # filled from the case when empty
    flux: str = ""
    reconstruction: str = "ilr"
    gamma: float = GAMMA_DEFAULT
    resolution: int = 0             # case-dependent default when 0
    seed: int = 0
    mesh: MeshConfig = field(default_factory=MeshConfig)
    time: TimeConfig = field(default_factory=TimeConfig)
    amr: AmrSection = field(default_factory=AmrSection)
    output: OutputConfig = field(default_factory=OutputConfig)

    def validate(self) -> "RunConfig":
        if self.case and self.case not in CASES:
            raise ConfigError(
                f"case: unknown case {self.case!r}; valid: {', '.join(CASES)}"
            )
        if self.flux and self.flux not in FLUXES:
            raise ConfigError(
                f"flux: unknown flux {self.flux!r}; valid: {', '.join(FLUXES)}"
            )
        if self.reconstruction not in METHODS:
            raise ConfigError(
                f"reconstruction: unknown method {self.reconstruction!r}; "
                f"valid: {', '.join(METHODS)}"
            )
        if self.time.end == 0.0 or (self.time.end < 0.0 and not self.case):
            raise ConfigError("time.end must be positive")
        if not 0.0 < self.time.beta <= 1.0:
            raise ConfigError("time.beta must lie in (0, 1]")
        if self.time.cfl <= 0.0:
            raise ConfigError("time.cfl must be positive")
        if self.time.cfl_mode not in ("conventional", "strict"):
            raise ConfigError(f"time.cfl_mode: invalid value {self.time.cfl_mode!r}")
        if self.time.integrator not in ("ssp-rk2", "forward-euler"):
            raise ConfigError(f"time.integrator: invalid {self.time.integrator!r}")
        if self.amr.max_level not in (0, 1):
            raise ConfigError("amr.max_level: only one refinement level is supported")
        if self.mesh.generator not in ("uniform", "jittered", "stretched", "file"):
            raise ConfigError(f"mesh.generator: invalid {self.mesh.generator!r}")
        if self.mesh.generator == "file" and not Path(self.mesh.file).exists():
            raise ConfigError(f"mesh.file: {self.mesh.file!r} does not exist")
        if not self.case and not self.equation:
            raise ConfigError("either case or equation must be given")
        return self


_SECTIONS = {"mesh": MeshConfig, "time": TimeConfig, "amr": AmrSection,
             "output": OutputConfig}


def _coerce(key: str, raw: str, target_type):
    try:
        if target_type is bool:
            if raw.lower() in ("true", "yes", "on", "1"):
                return True
            if raw.lower() in ("false", "no", "off", "0"):
                return False
            raise ValueError(raw)
        if target_type is int:
            return int(raw)
        if target_type is float:
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(
            f"{key}: cannot parse {raw!r} as {target_type.__name__}"
        ) from None


def parse_config(source) -> RunConfig:
    """Parse a config from a path or from literal text."""
    text = source
    p = Path(str(source))
    if "\n" not in str(source) and p.exists():
        text = p.read_text()
    cfg = RunConfig()
    top_fields = {f.name: f for f in fields(RunConfig)}
    for lineno, line in enumerate(str(text).splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, raw = (s.strip() for s in line.split("=", 1))
        if "." in key:
            section, name = key.split(".", 1)
            if section not in _SECTIONS:
                raise ConfigError(f"{key}: unknown section {section!r}")
            sub = getattr(cfg, section)
            sub_fields = {f.name: f for f in fields(sub)}
            name = name.replace("-", "_")
            if name not in sub_fields:
                raise ConfigError(f"{key}: unknown key")
            setattr(sub, name, _coerce(key, raw, type(getattr(sub, name))))
        else:
            name = key.replace("-", "_")
            if name not in top_fields or name in _SECTIONS:
                raise ConfigError(f"{key}: unknown key")
            setattr(cfg, name, _coerce(key, raw, type(getattr(cfg, name))))
    return cfg.validate()


def serialize_config(cfg: RunConfig) -> str:
    lines = []
    for f in fields(RunConfig):
        val = getattr(cfg, f.name)
        if f.name in _SECTIONS:
            for sf in fields(val):
                lines.append(f"{f.name}.{sf.name} = {getattr(val, sf.name)}")
        else:
            lines.append(f"{f.name} = {val}")
    return "\n".join(lines) + "\n"
