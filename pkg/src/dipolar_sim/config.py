"""Run configuration: TOML text -> validated RunConfig, with preset layering and dotted overrides."""
from __future__ import annotations

import copy
import math
import sys
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

SOLVERS = ("ed", "gsm", "xy", "swa", "dtwa", "cumulant")
OBSERVABLES = ("populations", "excited_population", "negativity", "renyi2", "toth",
               "n_k", "quadratures", "spin_means")


class ConfigError(ValueError):
    """All problems found in one configuration, not just the first."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.errors))


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class Geometry(_Section):
    dim: Literal[1, 2] = 1
    n_per_side: int = Field(5, ge=1, le=64)
    spacing: float = Field(0.1, gt=0, description="lattice constant in units of lambda")
    periodic: bool = False        # minimum-image couplings (spin-wave and DTWA comparisons)


class Levels(_Section):
    scheme: Literal["two-level", "four-level", "sr88"] = "four-level"


class Drive(_Section):
    rabi: float = Field(0.1, ge=0)
    detuning: float = -3.0
    polarization: Literal["pi", "sigma+", "sigma-"] = "pi"
    theta: float = Field(0.0, ge=0, le=math.pi / 2 + 1e-12)    # tilt of the quantization axis
    k_hat: tuple[float, float, float] = (0.0, 1.0, 0.0)
    switch_off: tuple[float, ...] = ()      # extra branches with the drive switched off at these times
    detuning_scan: tuple[float, ...] = ()   # run once per detuning if non-empty

    @field_validator("switch_off")
    @classmethod
    def _positive_times(cls, v):
        if any(t <= 0 for t in v):
            raise ValueError("switch-off times must be positive")
        return v


class TimeGrid(_Section):
    t_max: float = Field(100.0, gt=0)
    n_steps: int = Field(101, ge=2, le=100_000)
    spacing: Literal["linear", "log"] = "linear"
    t_min: float = Field(1e-2, gt=0)        # first nonzero time for log spacing
    unit: Literal["gamma", "tau"] = "gamma"


class EDOptions(_Section):
    max_excited: Optional[int] = Field(None, ge=0)
    subsystem: tuple[int, ...] = ()         # empty: the middle atom


class GSMOptions(_Section):
    keep_hamiltonian: bool = True
    keep_dissipation: bool = True


class XYOptions(_Section):
    dissipation: bool = True


class SWAOptions(_Section):
    thetas: tuple[float, ...] = (0.0,)


class DTWAOptions(_Section):
    n_traj: int = Field(10_000, ge=1)
    chunk_size: int = Field(500, ge=1)
    modes: Literal["all", "kz_2pi"] = "all"


class CumulantOptions(_Section):
    dissipation: bool = True


class RunConfig(_Section):
    solver: Literal["ed", "gsm", "xy", "swa", "dtwa", "cumulant"]
    name: Optional[str] = None              # output file stem; defaults to the solver
    geometry: Geometry = Geometry()
    levels: Levels = Levels()
    drive: Drive = Drive()
    time: TimeGrid = TimeGrid()
    observables: tuple[str, ...] = ("negativity",)
    ed: EDOptions = EDOptions()
    gsm: GSMOptions = GSMOptions()
    xy: XYOptions = XYOptions()
    swa: SWAOptions = SWAOptions()
    dtwa: DTWAOptions = DTWAOptions()
    cumulant: CumulantOptions = CumulantOptions()
    seed: int = Field(0, ge=0, lt=2**64)
    threads: Optional[int] = Field(None, ge=1)
    out: str = "out"

    @field_validator("observables")
    @classmethod
    def _known_observables(cls, v):
        bad = [o for o in v if o not in OBSERVABLES]
        if bad:
            raise ValueError(f"unknown observables {bad}; choose from {list(OBSERVABLES)}")
        return v

    @model_validator(mode="after")
    def _consistent(self):
        if self.time.unit == "tau" and (self.drive.rabi == 0 or self.drive.detuning == 0):
            raise ValueError("time unit tau needs non-zero rabi and detuning")
        if self.solver in ("xy", "swa", "dtwa", "cumulant") and self.drive.detuning == 0:
            raise ValueError(f"solver {self.solver} needs a non-zero detuning")
        if self.solver in ("swa", "dtwa") and self.geometry.dim == 2 and self.drive.rabi == 0:
            raise ValueError("spin-wave runs need a non-zero rabi frequency")
        if self.time.spacing == "log" and self.time.t_min >= self.time.t_max:
            raise ValueError("time.t_min must be below time.t_max for log spacing")
        return self

    @property
    def label(self) -> str:
        return self.name or self.solver

    def tau(self) -> float | None:
        """0.04 Delta^2 / (Gamma Omega^2), the spin-wave time unit."""
        if self.drive.rabi == 0 or self.drive.detuning == 0:
            return None
        return 0.04 * self.drive.detuning**2 / self.drive.rabi**2


# ---------------------------------------------------------------- parsing

def _format_errors(exc: ValidationError):
    out = []
    for e in exc.errors():
        loc = ".".join(str(p) for p in e["loc"]) or "<root>"
        msg = e["msg"]
        if e["type"] == "extra_forbidden":
            msg = "unknown key"
        elif e["type"] == "missing":
            msg = "missing required key"
        out.append(f"{loc}: {msg}")
    return out


def _deep_merge(base: dict, extra: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _deep_merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _parse_value(text: str):
    """Override values use TOML value syntax; bare words fall back to strings."""
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def apply_override(data: dict, item: str) -> dict:
    """'dtwa.n_traj=2000' -> nested assignment."""
    if "=" not in item:
        raise ConfigError([f"override {item!r}: expected key=value"])
    key, val = item.split("=", 1)
    parts = [p for p in key.strip().split(".") if p]
    if not parts:
        raise ConfigError([f"override {item!r}: empty key"])
    out = copy.deepcopy(data)
    node = out
    for p in parts[:-1]:
        node = node.setdefault(p, {})
        if not isinstance(node, dict):
            raise ConfigError([f"override {item!r}: {p} is not a section"])
    node[parts[-1]] = _parse_value(val.strip())
    return out


def build_config(data: dict) -> RunConfig:
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_errors(exc)) from None


def parse_config(text: str, overrides=()) -> RunConfig:
    """Validate TOML text. A top-level `preset = "<name>"` starts from that preset's first job."""
    try:
        data = tomllib.loads(text) if text.strip() else {}
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError([f"syntax: {exc}"]) from None
    for item in overrides:
        data = apply_override(data, item)
    preset = data.pop("preset", None)
    if preset is not None:
        from .presets import preset_jobs
        base = preset_jobs(preset)[0].model_dump()
        data = _deep_merge(base, data)
    return build_config(data)


def load_config(path, overrides=()) -> RunConfig:
    with open(path, "rb") as fh:
        text = fh.read().decode("utf-8")
    return parse_config(text, overrides)
