"""Dressed-state (static) potentials and forces.

The atom prepared in ``|theta> = cos(theta)|1,{0}> + sin(theta)|0,1_nu>``
sees the potential ``U_theta = cos(2(theta - theta_c)) * Omega / 2`` where
``theta_c`` is the coupling angle and ``Omega`` the generalized Rabi
frequency. Energies are measured in frequency units (hbar = 1).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np


class DegenerateCouplingError(ValueError):
    """Coupling angle undefined: zero Rabi frequency at zero detuning."""


class SingularCotError(ValueError):
    """cot(2 theta_c) diverges in the uncoupled limit."""


def coupling_angle(rabi: float, detuning: float) -> float:
    """theta_c in [0, pi/2] with tan(2 theta_c) = -rabi/detuning and sin(2 theta_c) >= 0."""
    if rabi < 0:
        raise ValueError("rabi frequency must be non-negative")
    if rabi == 0 and detuning == 0:
        raise DegenerateCouplingError("coupling angle undefined for rabi = detuning = 0")
    return 0.5 * math.atan2(rabi, -detuning)


@dataclass(frozen=True)
class CouplingPoint:
    rabi: float
    detuning: float
    theta_c: float
    omega: float

    @property
    def sin2c(self) -> float:
        # sin(2 theta_c) and cos(2 theta_c) straight from the defining ratios,
        # exact to rounding even when theta_c is pinned at 0 or pi/2
        return self.rabi / self.omega

    @property
    def cos2c(self) -> float:
        return -self.detuning / self.omega


def make_point(rabi: float, detuning: float) -> CouplingPoint:
    theta_c = coupling_angle(rabi, detuning)
    return CouplingPoint(float(rabi), float(detuning), theta_c, math.hypot(rabi, detuning))


@dataclass(frozen=True)
class DressedPair:
    energy_plus: float
    energy_minus: float
    coeffs: tuple[float, float]

    @property
    def state_plus(self) -> np.ndarray:
        c, s = self.coeffs
        return np.array([c, s])

    @property
    def state_minus(self) -> np.ndarray:
        c, s = self.coeffs
        return np.array([-s, c])


def dressed_energies(E0: float, E1: float, omega_nu: float, point: CouplingPoint) -> DressedPair:
    """Eigenenergies of the single-excitation atom-mode Hamiltonian.

    Basis order is (|1,{0}>, |0,1_nu>).
    """
    mid = 0.5 * (E0 + E1 + omega_nu)
    return DressedPair(
        mid + 0.5 * point.omega,
        mid - 0.5 * point.omega,
        (math.cos(point.theta_c), math.sin(point.theta_c)),
    )


def potential_dressed(point: CouplingPoint) -> tuple[float, float]:
    return 0.5 * point.omega, -0.5 * point.omega


def _check_theta(theta: float) -> None:
    if not 0.0 <= theta <= math.pi:
        raise ValueError(f"theta={theta} outside [0, pi]")


def potential_theta(theta: float, point: CouplingPoint) -> float:
    _check_theta(theta)
    return 0.5 * math.cos(2.0 * (theta - point.theta_c)) * point.omega


def potential_adiabatic(point: CouplingPoint) -> float:
    """Potential of the dressed state that connects adiabatically to |1,{0}>.

    Measured from the bare level, so it vanishes as rabi -> 0. This is the
    quantity whose large-detuning limit is -rabi^2/(4*detuning); the fixed
    preparation theta = 0 instead gives the position-independent -detuning/2.
    """
    if point.detuning == 0:
        raise DegenerateCouplingError("no adiabatic connection at exact resonance")
    sign = 1.0 if point.detuning > 0 else -1.0
    # omega - |detuning| without cancellation
    gap = point.rabi**2 / (point.omega + abs(point.detuning))
    return -0.5 * sign * gap


def force_theta_static(theta: float, point: CouplingPoint, grad_rabi) -> np.ndarray:
    """Static force -grad U_theta, finite for every coupling angle."""
    _check_theta(theta)
    d = 2.0 * (theta - point.theta_c)
    factor = math.cos(d) * point.sin2c + point.cos2c * math.sin(d)
    return -0.5 * factor * np.asarray(grad_rabi, dtype=float)


def force_theta_static_cot(theta: float, point: CouplingPoint, grad_rabi) -> np.ndarray:
    """Same force in the cot form; raises where cot(2 theta_c) diverges."""
    _check_theta(theta)
    d = 2.0 * (theta - point.theta_c)
    if point.rabi == 0:
        if abs(math.sin(d)) > 1e-15:
            raise SingularCotError("cot(2 theta_c) diverges for zero coupling")
        return np.zeros_like(np.asarray(grad_rabi, dtype=float))
    cot = point.cos2c / point.sin2c
    grad_omega = point.sin2c * np.asarray(grad_rabi, dtype=float)
    return -0.5 * (math.cos(d) + cot * math.sin(d)) * grad_omega


class PerturbativePotentials(NamedTuple):
    upper: float  # atom excited, field in vacuum
    lower: float  # atom in ground state, one photon in the mode
    valid: bool


def perturbative_potentials(rabi: float, detuning: float, min_ratio: float = 10.0) -> PerturbativePotentials:
    if detuning == 0:
        raise ValueError("perturbative potentials need nonzero detuning")
    u = -rabi**2 / (4.0 * detuning)
    return PerturbativePotentials(u, -u, abs(detuning) >= min_ratio * rabi)
