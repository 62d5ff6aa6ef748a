"""Scenario configuration: JSON schema, validation and builtin presets."""
from __future__ import annotations

import json
import math
from typing import Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

ENGINES = ("static", "dynamic_modal", "dynamic_strong", "dynamic_general", "weak", "oracle")


class ConfigError(ValueError):
    """Invalid configuration, with a line-anchored message."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ProfileConfig(_Strict):
    kind: Literal["standing_wave", "gaussian", "constant"]
    g0: float
    k: Optional[float] = None
    z0: Optional[float] = None
    w: Optional[float] = None

    def params(self) -> dict:
        keys = {"standing_wave": ("g0", "k"), "gaussian": ("g0", "z0", "w"), "constant": ("g0",)}[self.kind]
        missing = [k for k in keys if getattr(self, k) is None]
        if missing:
            raise ValueError(f"{self.kind} profile needs {missing}")
        return {k: getattr(self, k) for k in keys}

    @model_validator(mode="after")
    def _complete(self):
        self.params()
        return self


class ModeConfig(_Strict):
    omega_nu: float = Field(gt=0)
    gamma_nu: float = Field(gt=0)
    profile: ProfileConfig
    max_width_ratio: float = 0.1


class BackgroundConfig(_Strict):
    g_prime_sq: Optional[float] = Field(default=None, ge=0)
    gamma_bg: Optional[float] = Field(default=None, ge=0)
    delta_bg: float = 0.0

    @model_validator(mode="after")
    def _one_rate(self):
        if self.g_prime_sq is not None and self.gamma_bg is not None:
            raise ValueError("give either g_prime_sq or gamma_bg, not both")
        return self

    def spectral_density(self) -> float:
        if self.gamma_bg is not None:
            return self.gamma_bg / (2.0 * math.pi)
        return self.g_prime_sq or 0.0


class AtomConfig(_Strict):
    omega_10: float = Field(gt=0)
    E0: float = 0.0
    dipole_real: bool = True
    mag_im: Optional[list[float]] = None
    mag_re: Optional[list[float]] = None
    gamma_full: Optional[float] = Field(default=None, ge=0)
    shift_full: Optional[float] = None


class ThetaOffset(_Strict):
    theta_c_plus: float


ThetaSpec = Union[float, ThetaOffset]


class PositionRange(_Strict):
    start: float
    stop: float
    num: int = Field(ge=1)


class TimeConfig(_Strict):
    t0: float = 0.0
    t_end: float
    n_samples: int = Field(ge=2)

    @model_validator(mode="after")
    def _monotone(self):
        if not self.t_end > self.t0:
            raise ValueError("t_end must exceed t0")
        return self


class OracleConfig(_Strict):
    dt: float = Field(default=0.01, gt=0)
    n_core: int = 4001
    core_halfwidth: Optional[float] = None
    outer_halfwidth: Optional[float] = None
    outer_spacing: Optional[float] = None
    photon: Literal["mode", "coupled"] = "mode"


class Scenario(_Strict):
    name: str = "scenario"
    atom: AtomConfig
    mode: ModeConfig
    background: BackgroundConfig = BackgroundConfig()
    positions: Union[list[float], PositionRange]
    thetas: list[ThetaSpec] = Field(min_length=1)
    time: TimeConfig
    engines: list[str] = Field(min_length=1)
    oracle: OracleConfig = OracleConfig()
    general_window: float = Field(default=400.0, gt=0)
    normalize: Literal["Fplus", "none"] = "none"
    jobs: int = Field(default=1, ge=1)

    @field_validator("engines")
    @classmethod
    def _known(cls, v):
        bad = [e for e in v if e not in ENGINES]
        if bad:
            raise ValueError(f"unknown engines {bad}; choose from {list(ENGINES)}")
        return list(dict.fromkeys(v))

    def position_list(self) -> list[float]:
        if isinstance(self.positions, PositionRange):
            r = self.positions
            if r.num == 1:
                return [r.start]
            step = (r.stop - r.start) / (r.num - 1)
            return [r.start + i * step for i in range(r.num)]
        if not self.positions:
            raise ConfigError("positions must not be empty")
        return list(self.positions)

    def time_grid(self) -> list[float]:
        tc = self.time
        step = (tc.t_end - tc.t0) / (tc.n_samples - 1)
        return [tc.t0 + i * step for i in range(tc.n_samples)]


def _line_of(text: str, loc) -> int:
    """Best-effort line number of a validation location in the JSON text."""
    pos = 0
    for part in loc:
        if isinstance(part, str):
            hit = text.find(f'"{part}"', pos)
            if hit >= 0:
                pos = hit
    return text.count("\n", 0, pos) + 1


def parse_scenario(text: str, source: str = "<config>") -> Scenario:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from None
    try:
        return Scenario.model_validate(raw)
    except ValidationError as exc:
        lines = []
        for err in exc.errors():
            where = ".".join(str(p) for p in err["loc"]) or "<root>"
            lines.append(f"{source}:{_line_of(text, err['loc'])}: {where}: {err['msg']}")
        raise ConfigError("\n".join(lines)) from None


def load_scenario(path) -> Scenario:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config: {exc.strerror}") from None
    return parse_scenario(text, str(path))


def _fig2() -> dict:
    # 2 theta_c = 3 pi / 8 and total damping 0.05 Omega, rabi = 1 at the
    # standing-wave point kz = 3 pi / 4 where grad(rabi) < 0 so that F+ > 0
    two_c = 3.0 * math.pi / 8.0
    rabi = 1.0
    detuning = -rabi / math.tan(two_c)
    omega = rabi / math.sin(two_c)
    gamma_nu = 2.0 * 0.05 * omega
    z = 3.0 * math.pi / 4.0
    g0 = rabi / (math.sin(z) * math.sqrt(2.0 * math.pi * gamma_nu))
    omega_nu = 100.0
    quarter = math.pi / 4.0
    return {
        "name": "fig2",
        "atom": {"omega_10": omega_nu - detuning},
        "mode": {"omega_nu": omega_nu, "gamma_nu": gamma_nu,
                 "profile": {"kind": "standing_wave", "g0": g0, "k": 1.0}},
        "background": {"g_prime_sq": 0.0},
        "positions": [z],
        "thetas": [{"theta_c_plus": i * quarter} for i in range(4)] + [i * quarter for i in range(4)],
        "time": {"t0": 0.0, "t_end": 60.0 / omega, "n_samples": 601},
        "engines": ["dynamic_strong", "dynamic_modal"],
        "normalize": "Fplus",
    }


def _weak_decay() -> dict:
    # broad mode, slightly detuned so the force is nonzero
    gamma_nu, rabi, z0, w = 10.0, 0.1, 0.0, 1.0
    z = 0.5
    g0 = rabi / (math.exp(-z * z / (2 * w * w)) * math.sqrt(2.0 * math.pi * gamma_nu))
    return {
        "name": "weak_decay",
        "atom": {"omega_10": 998.0},
        "mode": {"omega_nu": 1000.0, "gamma_nu": gamma_nu,
                 "profile": {"kind": "gaussian", "g0": g0, "z0": z0, "w": w}},
        "background": {"gamma_bg": 0.001},
        "positions": [z],
        "thetas": [0.0],
        "time": {"t0": 0.0, "t_end": 1500.0, "n_samples": 301},
        "engines": ["weak", "dynamic_modal"],
    }


def _oracle_compare() -> dict:
    gamma_nu, rabi = 0.05, 1.0
    z = math.pi / 4.0
    g0 = rabi / (math.sin(z) * math.sqrt(2.0 * math.pi * gamma_nu))
    dt = 0.01
    return {
        "name": "oracle_compare",
        "atom": {"omega_10": 99.7},
        "mode": {"omega_nu": 100.0, "gamma_nu": gamma_nu,
                 "profile": {"kind": "standing_wave", "g0": g0, "k": 1.0}},
        "background": {"gamma_bg": 0.02},
        "positions": [z],
        "thetas": [0.0, math.pi / 4.0, math.pi / 2.0],
        "time": {"t0": 0.0, "t_end": 30.0, "n_samples": 301},
        "engines": ["dynamic_modal", "oracle"],
        "oracle": {"dt": dt, "n_core": 4001, "outer_halfwidth": 0.05 / dt, "outer_spacing": 0.05},
    }


PRESETS = {"fig2": _fig2, "weak_decay": _weak_decay, "oracle_compare": _oracle_compare}


def preset(name: str) -> dict:
    try:
        return PRESETS[name]()
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}") from None
