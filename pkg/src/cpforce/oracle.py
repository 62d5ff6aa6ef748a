"""Brute-force reference: the field continuum on a frequency grid.

The mode and the residual background are kept as two independent continua
that share one frequency grid. Their couplings add in quadrature to the
full spectral density, so the atomic memory kernel is unchanged, while the
prepared photon can live in the mode alone. Amplitudes are stored scaled
by sqrt(weight) which keeps the discretized Hamiltonian Hermitian, and all
phases rotate at ``omega_nu`` so the time step is set by the detunings.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.integrate import quad

from .dynamics import LevelData


class GridError(ValueError):
    pass


class StepSizeError(ValueError):
    pass


class InstabilityError(RuntimeError):
    pass


@dataclass(frozen=True)
class FrequencyGrid:
    """Frequency nodes: a fine uniform core plus an optional coarse outer band.

    ``offsets`` are measured from ``omega_nu``; the core has an odd number of
    nodes so ``omega_nu`` sits on a node. Weights are trapezoidal.
    """

    omega_nu: float
    offsets: np.ndarray
    weights: np.ndarray
    n_core: int
    core_halfwidth: float
    outer_halfwidth: float

    @classmethod
    def build(cls, omega_nu: float, gamma_nu: float, n_core: int = 4001,
              core_halfwidth: Optional[float] = None, outer_halfwidth: Optional[float] = None,
              outer_spacing: Optional[float] = None) -> "FrequencyGrid":
        if n_core < 3 or n_core % 2 == 0:
            raise GridError("n_core must be odd and at least 3")
        core = 20.0 * gamma_nu if core_halfwidth is None else core_halfwidth
        if core < 10.0 * gamma_nu:
            raise GridError("core window must cover omega_nu +- 10 gamma_nu")
        h = 2.0 * core / (n_core - 1)
        if h > gamma_nu / 20.0:
            raise GridError(f"core spacing {h:.3g} exceeds gamma_nu/20; use more nodes")
        outer = core if outer_halfwidth is None else max(outer_halfwidth, core)
        h_out = gamma_nu if outer_spacing is None else outer_spacing
        if h_out < h:
            raise GridError("outer spacing must not be finer than the core spacing")
        x = np.linspace(-core, core, n_core)
        n_out = int(round((outer - core) / h_out))
        if n_out > 0:
            right = core + h_out * np.arange(1, n_out + 1)
            x = np.concatenate([-right[::-1], x, right])
        if omega_nu + x[0] <= 0:
            raise GridError("grid reaches non-positive frequencies")
        dx = np.diff(x)
        w = np.zeros_like(x)
        w[:-1] += 0.5 * dx
        w[1:] += 0.5 * dx
        return cls(omega_nu, x, w, n_core, core, float(x[-1]))

    @property
    def omega(self) -> np.ndarray:
        return self.omega_nu + self.offsets

    @property
    def omega_min(self) -> float:
        return self.omega_nu + self.offsets[0]

    @property
    def omega_max(self) -> float:
        return self.omega_nu + self.offsets[-1]

    @property
    def n_points(self) -> int:
        return self.offsets.size

    @property
    def core_mask(self) -> np.ndarray:
        return np.abs(self.offsets) <= self.core_halfwidth * (1 + 1e-12)


@dataclass(frozen=True)
class ContinuumModel:
    """Discretized atom-field Hamiltonian in the rotating frame."""

    grid: FrequencyGrid
    rabi: float
    gamma_nu: float
    energy_1: float          # upper level relative to omega_nu
    gamma_prime: float
    omega_nu: float

    @classmethod
    def from_level(cls, grid: FrequencyGrid, level: LevelData, rabi: float) -> "ContinuumModel":
        if level.gamma_prime < 0:
            raise GridError("negative residual width cannot be represented by a continuum")
        # the residual continuum on a symmetric band adds no net shift of its
        # own, so the configured residual shift enters as a level energy
        return cls(grid, rabi, level.gamma_nu, -level.detuning_shifted, level.gamma_prime,
                   grid.omega_nu)

    @property
    def lorentz(self) -> np.ndarray:
        q = 0.25 * self.gamma_nu**2
        return q / (self.grid.offsets**2 + q)

    @property
    def g_peak(self) -> float:
        return self.rabi / math.sqrt(2.0 * math.pi * self.gamma_nu)

    @property
    def couplings(self) -> np.ndarray:
        """sqrt(weight)-scaled couplings: mode channel then residual channel."""
        sw = np.sqrt(self.grid.weights)
        mode = sw * self.g_peak * np.sqrt(self.lorentz)
        bg = sw * math.sqrt(self.gamma_prime / (2.0 * math.pi))
        return np.concatenate([mode, bg])

    @property
    def energies(self) -> np.ndarray:
        return np.concatenate([self.grid.offsets, self.grid.offsets])

    def max_rate(self) -> float:
        return max(self.rabi, abs(self.energy_1), abs(self.grid.offsets[0]), abs(self.grid.offsets[-1]))


@dataclass
class ContinuumState:
    psi1: complex
    psi0: np.ndarray   # sqrt(weight)-scaled amplitudes, mode channel then residual
    t: float = 0.0

    @property
    def norm(self) -> float:
        return abs(self.psi1) ** 2 + float(np.vdot(self.psi0, self.psi0).real)


def init_state(theta: float, model: ContinuumModel, photon: str = "mode") -> ContinuumState:
    """Prepare cos(theta)|1,{0}> + sin(theta)|0,1_nu>.

    ``photon="mode"`` puts the photon in the mode continuum with the
    Lorentzian amplitude sqrt(2/(pi gamma_nu)) sqrt(L). ``photon="coupled"``
    uses an amplitude proportional to the full coupling g(omega) over the
    core window, split over both continua the way the atom sees them.
    """
    if not 0.0 <= theta <= math.pi:
        raise ValueError(f"theta={theta} outside [0, pi]")
    grid = model.grid
    sw = np.sqrt(grid.weights)
    n = grid.n_points
    amp = np.zeros(2 * n, dtype=complex)
    if photon == "mode":
        ideal = math.sqrt(2.0 / (math.pi * model.gamma_nu)) * np.sqrt(model.lorentz)
        amp[:n] = sw * ideal
    elif photon == "coupled":
        # chi is flat on the window; amplitude = coupling * chi in each channel
        g = model.g_peak
        win = grid.core_mask.astype(float)
        amp[:n] = sw * win * math.sqrt(2.0 / (math.pi * model.gamma_nu)) * np.sqrt(model.lorentz)
        if g > 0:
            amp[n:] = sw * win * math.sqrt(2.0 / (math.pi * model.gamma_nu)) * \
                math.sqrt(model.gamma_prime / (2.0 * math.pi)) / g
    else:
        raise ValueError(f"unknown photon shape {photon!r}")
    s = math.sin(theta)
    total = float(np.vdot(amp, amp).real)
    if s != 0.0:
        if abs(total - 1.0) > 0.01 and photon == "mode":
            raise GridError(f"grid too coarse or narrow: photon norm {total:.4f} before correction")
        amp *= s / math.sqrt(total)
    else:
        amp[:] = 0.0
    return ContinuumState(complex(math.cos(theta)), amp, 0.0)


def _rhs(p, b, e1, c, x):
    return -1j * (e1 * p + np.dot(c, b)), -1j * (x * b + c * p)


def _observables(p, b, c, x, e1, model: ContinuumModel):
    if model.rabi == 0:
        return 0.0, 0.0
    n = model.grid.n_points
    sw_l = np.sqrt(model.grid.weights * model.lorentz)
    w_tilde = np.dot(sw_l, b[:n])
    dp, db = _rhs(p, b, e1, c, x)
    dw = np.dot(sw_l, db[:n])
    g = model.g_peak
    # per unit grad(rabi): grad g = grad(rabi) / sqrt(2 pi gamma)
    el = -2.0 * (np.conj(p) * w_tilde).real * g / model.rabi
    # per unit mag_im, with the field-mode weight at omega_nu
    mag = -2.0 * model.omega_nu / (math.pi * g) * (np.conj(dp) * w_tilde + np.conj(p) * dw).imag
    return el, mag


@dataclass
class OracleTrace:
    t: np.ndarray
    psi1: np.ndarray
    f_el: np.ndarray     # per unit grad(rabi)
    f_mag: np.ndarray    # per unit mag_im
    norm: np.ndarray

    @property
    def population(self) -> np.ndarray:
        return np.abs(self.psi1) ** 2


def evolve(state: ContinuumState, model: ContinuumModel, dt: float, t_end: float,
           sample_every: int = 1, norm_tol: float = 1e-6) -> tuple[ContinuumState, OracleTrace]:
    """Classical fourth-order Runge-Kutta with a fixed step."""
    limit = 0.05 / model.max_rate()
    if dt <= 0 or dt > limit * (1 + 1e-12):
        raise StepSizeError(f"dt={dt} violates dt <= 0.05/max rate = {limit:.4g}")
    n_steps = int(round((t_end - state.t) / dt))
    if n_steps < 0 or abs(state.t + n_steps * dt - t_end) > 1e-9 * max(1.0, abs(t_end)):
        raise StepSizeError("t_end - t must be a non-negative multiple of dt")
    c = model.couplings
    x = model.energies
    e1 = model.energy_1
    p, b = complex(state.psi1), state.psi0.astype(complex, copy=True)
    norm0 = state.norm
    h2, h6 = 0.5 * dt, dt / 6.0
    ts, ps, fe, fm, ns = [], [], [], [], []

    def record(k):
        el, mag = _observables(p, b, c, x, e1, model)
        ts.append(state.t + k * dt)
        ps.append(p)
        fe.append(el)
        fm.append(mag)
        ns.append(abs(p) ** 2 + float(np.vdot(b, b).real))

    record(0)
    for k in range(1, n_steps + 1):
        k1p, k1b = _rhs(p, b, e1, c, x)
        k2p, k2b = _rhs(p + h2 * k1p, b + h2 * k1b, e1, c, x)
        k3p, k3b = _rhs(p + h2 * k2p, b + h2 * k2b, e1, c, x)
        k4p, k4b = _rhs(p + dt * k3p, b + dt * k3b, e1, c, x)
        p = p + h6 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
        b = b + h6 * (k1b + 2.0 * k2b + 2.0 * k3b + k4b)
        if k % sample_every == 0 or k == n_steps:
            record(k)
            if abs(ns[-1] - norm0) > norm_tol:
                raise InstabilityError(f"norm drifted by {ns[-1] - norm0:.3g} at t={ts[-1]:.6g}")
    final = ContinuumState(p, b, state.t + n_steps * dt)
    trace = OracleTrace(np.array(ts), np.array(ps), np.array(fe), np.array(fm), np.array(ns))
    return final, trace


def force_from_state(state: ContinuumState, model: ContinuumModel, grad_rabi,
                     mag_im=None) -> tuple[np.ndarray, np.ndarray]:
    grad_rabi = np.atleast_1d(np.asarray(grad_rabi, dtype=float))
    el, mag = _observables(complex(state.psi1), state.psi0, model.couplings, model.energies,
                           model.energy_1, model)
    m = np.zeros_like(grad_rabi) if mag_im is None else np.atleast_1d(np.asarray(mag_im, dtype=float))
    return el * grad_rabi, mag * m


def fit_decay_rate(t, population, t_min: float = 0.0) -> float:
    """Least-squares slope of -log(population) over t >= t_min."""
    t = np.asarray(t, dtype=float)
    pop = np.asarray(population, dtype=float)
    mask = (t >= t_min) & (pop > 0)
    slope = np.polyfit(t[mask], np.log(pop[mask]), 1)[0]
    return -float(slope)


def _lorentz_denominator(omega, omega_nu, gamma_nu):
    return (omega - omega_nu) ** 2 + 0.25 * gamma_nu**2


def pv_identity(omega_tilde: float, omega_nu: float, gamma_nu: float,
                lower: float = 0.0) -> tuple[float, float]:
    """Principal-value Lorentzian integral over [lower, inf) and its closed form.

    The pole is excised symmetrically: inside a radius ``eps`` the odd part
    cancels exactly and the even remainder ``[f(w+u) - f(w-u)]/u`` is regular.
    """
    if not omega_tilde > lower:
        raise ValueError("the pole must lie inside the integration range")

    def f(w):
        return 1.0 / _lorentz_denominator(w, omega_nu, gamma_nu)

    eps = 0.5 * min(gamma_nu, omega_tilde - lower)
    opts = dict(epsabs=0.0, epsrel=1e-13, limit=1000)
    # the peak of the Lorentzian is passed as a breakpoint when it is in range
    near = max(lower, min(omega_tilde, omega_nu) - 50.0 * gamma_nu)
    left_pts = [omega_nu] if near < omega_nu < omega_tilde - eps else None
    left, _ = quad(lambda w: f(w) / (omega_tilde - w), near, omega_tilde - eps,
                   points=left_pts, **opts)
    if near > lower:
        rest, _ = quad(lambda w: f(w) / (omega_tilde - w), lower, near, **opts)
        left += rest
    far = max(omega_tilde, omega_nu) + 50.0 * gamma_nu
    mid_pts = [omega_nu] if omega_tilde + eps < omega_nu < far else None
    mid, _ = quad(lambda w: f(w) / (omega_tilde - w), omega_tilde + eps, far,
                  points=mid_pts, **opts)
    tail, _ = quad(lambda w: f(w) / (omega_tilde - w), far, np.inf, **opts)
    slope0 = 4.0 * (omega_tilde - omega_nu) * f(omega_tilde) ** 2  # limit u -> 0

    def odd_part(u):
        return (f(omega_tilde - u) - f(omega_tilde + u)) / u if u > 0 else slope0

    core, _ = quad(odd_part, 0.0, eps, **opts)
    lhs = left + mid + tail + core
    d = omega_tilde - omega_nu
    rhs = 2.0 * math.pi / gamma_nu * d / (d * d + 0.25 * gamma_nu**2)
    return lhs, rhs
