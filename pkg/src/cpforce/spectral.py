"""Spectral density of the atom-field coupling and its spatial profile.

The coupling strength near the mode is a Lorentzian of width ``gamma_nu``
centred on ``omega_nu`` whose peak value g(r, omega_nu)^2 carries all the
position dependence, plus a flat residual background treated as Markovian.
Units are natural (hbar = 1); frequencies and rates share one scale.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Mapping, Sequence, Union

import numpy as np

Position = Union[float, Sequence[float], np.ndarray]

PROFILE_KINDS = ("standing_wave", "gaussian", "constant")

_REQUIRED = {
    "standing_wave": ("g0", "k"),
    "gaussian": ("g0", "z0", "w"),
    "constant": ("g0",),
}


class DomainError(ValueError):
    """Position outside the valid domain of a spatial profile."""


def as_position(r: Position) -> np.ndarray:
    pos = np.atleast_1d(np.asarray(r, dtype=float))
    if pos.ndim != 1 or pos.size == 0:
        raise DomainError(f"position must be a scalar or 1-D vector, got shape {pos.shape}")
    return pos


@dataclass(frozen=True)
class SpatialProfile:
    """Peak coupling g(r, omega_nu) as a function of position.

    Builtin kinds depend on the first coordinate ``z`` only; gradients are
    returned as vectors with the same length as the position.
    """

    kind: str
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in PROFILE_KINDS:
            raise ValueError(f"unknown profile kind {self.kind!r}; expected one of {PROFILE_KINDS}")
        missing = [p for p in _REQUIRED[self.kind] if p not in self.params]
        if missing:
            raise ValueError(f"{self.kind} profile needs parameters {missing}")
        extra = sorted(set(self.params) - set(_REQUIRED[self.kind]))
        if extra:
            raise ValueError(f"{self.kind} profile got unexpected parameters {extra}")
        clean = {k: float(v) for k, v in self.params.items()}
        if any(not math.isfinite(v) for v in clean.values()):
            raise ValueError("profile parameters must be finite")
        if clean["g0"] < 0:
            raise ValueError("profile amplitude g0 must be non-negative")
        if self.kind == "standing_wave" and clean["k"] <= 0:
            raise ValueError("standing_wave wavenumber k must be positive")
        if self.kind == "gaussian" and clean["w"] <= 0:
            raise ValueError("gaussian width w must be positive")
        object.__setattr__(self, "params", clean)

    @classmethod
    def standing_wave(cls, g0: float, k: float) -> "SpatialProfile":
        return cls("standing_wave", {"g0": g0, "k": k})

    @classmethod
    def gaussian(cls, g0: float, z0: float, w: float) -> "SpatialProfile":
        return cls("gaussian", {"g0": g0, "z0": z0, "w": w})

    @classmethod
    def constant(cls, g0: float) -> "SpatialProfile":
        return cls("constant", {"g0": g0})

    @property
    def length_scale(self) -> float:
        """Characteristic length used to size finite-difference steps."""
        if self.kind == "standing_wave":
            return 1.0 / self.params["k"]
        if self.kind == "gaussian":
            return self.params["w"]
        return 1.0

    @property
    def domain(self) -> tuple[float, float]:
        """Open interval of valid z."""
        if self.kind == "standing_wave":
            return (0.0, math.pi / self.params["k"])
        return (-math.inf, math.inf)

    def _z(self, r: Position, strict: bool) -> tuple[np.ndarray, float]:
        pos = as_position(r)
        z = float(pos[0])
        if not math.isfinite(z):
            raise DomainError(f"non-finite position {z}")
        lo, hi = self.domain
        if strict:
            ok = lo < z < hi
        else:
            ok = lo <= z <= hi
        if not ok:
            raise DomainError(f"z={z!r} outside {self.kind} domain ({lo}, {hi})")
        return pos, z

    def value(self, r: Position) -> float:
        _, z = self._z(r, strict=False)
        p = self.params
        if self.kind == "standing_wave":
            # clamp the tiny negative values sin() can return at z = pi/k
            return max(p["g0"] * math.sin(p["k"] * z), 0.0)
        if self.kind == "gaussian":
            return p["g0"] * math.exp(-((z - p["z0"]) ** 2) / (2.0 * p["w"] ** 2))
        return p["g0"]

    def gradient(self, r: Position) -> np.ndarray:
        pos, z = self._z(r, strict=True)
        p = self.params
        grad = np.zeros_like(pos)
        if self.kind == "standing_wave":
            grad[0] = p["g0"] * p["k"] * math.cos(p["k"] * z)
        elif self.kind == "gaussian":
            u = (z - p["z0"]) / p["w"]
            grad[0] = -p["g0"] * u / p["w"] * math.exp(-0.5 * u * u)
        return grad

    def to_dict(self) -> dict:
        return {"kind": self.kind, **self.params}


@dataclass(frozen=True)
class ModeSpec:
    """Lorentzian mode: mid-frequency, FWHM and spatial coupling profile."""

    omega_nu: float
    gamma_nu: float
    profile: SpatialProfile
    max_width_ratio: float = 0.1

    def __post_init__(self):
        if not (self.omega_nu > 0 and math.isfinite(self.omega_nu)):
            raise ValueError("omega_nu must be positive and finite")
        if not self.gamma_nu > 0:
            raise ValueError("gamma_nu must be positive")
        if not 0 < self.max_width_ratio <= 1:
            raise ValueError("max_width_ratio must lie in (0, 1]")
        if self.gamma_nu >= self.max_width_ratio * self.omega_nu:
            raise ValueError(
                f"gamma_nu={self.gamma_nu} is not narrow: need gamma_nu < "
                f"{self.max_width_ratio}*omega_nu={self.max_width_ratio * self.omega_nu}"
            )

    def lorentzian(self, omega):
        """Normalized line shape, equal to 1 at the peak and 1/2 at half width."""
        q = 0.25 * self.gamma_nu**2
        return q / ((np.asarray(omega, dtype=float) - self.omega_nu) ** 2 + q)


@dataclass(frozen=True)
class ResidualBackground:
    """Flat Markovian remainder of the field continuum.

    ``gamma_bg`` follows from the flat spectral density as 2*pi*g'^2 and is
    therefore derived rather than stored.
    """

    g_prime_sq: float = 0.0
    delta_bg: float = 0.0

    def __post_init__(self):
        if not (self.g_prime_sq >= 0 and math.isfinite(self.g_prime_sq)):
            raise ValueError("g_prime_sq must be finite and non-negative")
        if not math.isfinite(self.delta_bg):
            raise ValueError("delta_bg must be finite")

    @classmethod
    def from_rate(cls, gamma_bg: float, delta_bg: float = 0.0) -> "ResidualBackground":
        return cls(g_prime_sq=gamma_bg / (2.0 * math.pi), delta_bg=delta_bg)

    @property
    def gamma_bg(self) -> float:
        return 2.0 * math.pi * self.g_prime_sq

    def markov_margin(self, rabi: float, spacing: float) -> float:
        """Ratio gamma_bg*spacing / (rabi^2/2); the Markov treatment needs it << 1."""
        if rabi == 0:
            return math.inf if self.g_prime_sq > 0 else 0.0
        return self.gamma_bg * spacing / (0.5 * rabi * rabi)

    def check_markov(self, rabi: float, spacing: float, limit: float = 0.1) -> bool:
        margin = self.markov_margin(rabi, spacing)
        if margin > limit:
            warnings.warn(
                f"residual background not Markovian on line spacing {spacing}: "
                f"gamma_bg*spacing/(rabi^2/2) = {margin:.3g}",
                RuntimeWarning,
                stacklevel=2,
            )
            return False
        return True


def g_squared(mode: ModeSpec, bg: ResidualBackground, r: Position, omega):
    """Coupling spectral density g^2(r, omega)."""
    omega = np.asarray(omega, dtype=float)
    if np.any(omega <= 0):
        raise ValueError("omega must be positive")
    peak = mode.profile.value(r) ** 2
    out = peak * mode.lorentzian(omega) + bg.g_prime_sq
    return float(out) if out.ndim == 0 else out


def rabi_frequency(mode: ModeSpec, r: Position) -> float:
    return math.sqrt(2.0 * math.pi * mode.gamma_nu) * mode.profile.value(r)


def grad_rabi(mode: ModeSpec, r: Position) -> np.ndarray:
    return math.sqrt(2.0 * math.pi * mode.gamma_nu) * mode.profile.gradient(r)


def peak_coupling(mode: ModeSpec, rabi: float) -> float:
    """Invert the Rabi relation: g(r, omega_nu) for a given Rabi frequency."""
    return rabi / math.sqrt(2.0 * math.pi * mode.gamma_nu)
