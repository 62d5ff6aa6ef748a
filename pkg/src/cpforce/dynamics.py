"""Time-dependent resonant force from the closed-form two-root solution.

The upper-state amplitude is ``psi1 = exp[(-i(E1 + dw') - G'/2) t] * phi1``
where ``phi1 = c+ exp(W+ t) + c- exp(W- t)`` solves a damped oscillator
equation. Times are measured from the preparation instant (t0 = 0).
Only phase-invariant quantities (forces, populations) are physical.

Force functions return an array of shape ``(dim,)`` for scalar ``t`` and
``(len(t), dim)`` for array ``t``.
"""
from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.integrate import quad_vec

from .spectral import ModeSpec, ResidualBackground
from .statics import CouplingPoint, make_point

DEGENERATE_EPS = 1e-10


class RegimeError(ValueError):
    """Requested approximation used outside its coupling regime."""


class ConvergenceError(RuntimeError):
    pass


class PoleError(ZeroDivisionError):
    """A kernel denominator vanished on the real frequency axis."""


class IntegrationError(RuntimeError):
    def __init__(self, msg, achieved):
        super().__init__(f"{msg} (achieved error estimate {achieved:.3g})")
        self.achieved = achieved


def _vec(v, dim=None):
    if v is None:
        return np.zeros(dim or 1)
    return np.atleast_1d(np.asarray(v, dtype=float))


@dataclass(frozen=True)
class AtomSpec:
    """Two-level atom.

    ``background`` describes the residual field; by default its rate and shift
    *are* the primed quantities. Passing ``gamma_full`` (total decay rate) or
    ``shift_full`` (full principal-value shift) instead fixes the primed
    quantities through the mode-subtraction terms.
    """

    omega_10: float
    background: ResidualBackground = field(default_factory=ResidualBackground)
    E0: float = 0.0
    dipole_real: bool = True
    mag_im: Optional[np.ndarray] = None
    mag_re: Optional[np.ndarray] = None
    gamma_full: Optional[float] = None
    shift_full: Optional[float] = None

    def __post_init__(self):
        if not (self.omega_10 > 0 and math.isfinite(self.omega_10)):
            raise ValueError("omega_10 must be positive and finite")
        if self.gamma_full is not None and self.gamma_full < 0:
            raise ValueError("gamma_full must be non-negative")
        for name in ("mag_im", "mag_re"):
            v = getattr(self, name)
            if v is not None:
                object.__setattr__(self, name, _vec(v))

    @property
    def E1(self) -> float:
        return self.E0 + self.omega_10

    def magnetic(self, dim: int) -> np.ndarray:
        m = self.mag_im if self.mag_im is not None else np.zeros(dim)
        if m.shape != (dim,):
            raise ValueError(f"mag_im has shape {m.shape}, expected ({dim},)")
        return m


@dataclass(frozen=True)
class LevelData:
    delta_shift: float       # residual-field shift of the upper level
    gamma_prime: float       # residual-field width
    omega_tilde: float       # shifted transition frequency
    detuning_shifted: float  # omega_nu - omega_tilde
    gamma_total: float       # (gamma_nu + gamma_prime) / 2
    gamma_nu: float
    mode_rate: float         # decay rate the mode contributes
    mode_shift: float        # level shift the mode contributes
    iterations: int = 0
    flags: dict = field(default_factory=dict)

    @property
    def gamma_full(self) -> float:
        return self.gamma_prime + self.mode_rate

    @property
    def shift_full(self) -> float:
        return self.delta_shift - self.mode_shift


def _mode_terms(rabi: float, detuning: float, gamma_nu: float) -> tuple[float, float]:
    den = detuning * detuning + 0.25 * gamma_nu * gamma_nu
    if den == 0:
        # lossless mode on resonance: the perturbative rate diverges
        return (math.inf if rabi else 0.0), 0.0
    q = 0.25 * rabi * rabi / den
    return q * gamma_nu, q * detuning


def regime_flags(rabi: float, detuning: float, gamma_nu: float, gamma_prime: float,
                 much: float = 10.0) -> dict:
    """Which limiting forms apply; ``much`` quantifies ``<<``."""
    rabi_sq2 = 2.0 * rabi * rabi
    close = abs(detuning) * gamma_nu * much <= rabi_sq2
    widths_ok = max(gamma_nu, gamma_prime) <= 2.0 * rabi
    return {
        "weak": gamma_nu >= much * 2.0 * rabi or abs(detuning) * gamma_nu >= much * rabi_sq2,
        "moderate": widths_ok and close,
        "strong": max(gamma_nu, gamma_prime) * much <= 2.0 * rabi and close,
        "small_detuning": abs(detuning) * much <= 0.5 * gamma_nu,
        "large_detuning": 0.5 * gamma_nu * much <= abs(detuning) and close,
    }


def primed_level(atom: AtomSpec, mode: ModeSpec, point: CouplingPoint,
                 tol: float = 1e-12, max_iter: int = 100) -> LevelData:
    """Residual-field shift and width, with the detuning made self-consistent."""
    bare = mode.omega_nu - atom.omega_10
    rabi, gam = point.rabi, mode.gamma_nu
    bg = atom.background
    shift = bg.delta_bg
    iterations = 0
    if atom.shift_full is not None:
        for iterations in range(1, max_iter + 1):
            _, mshift = _mode_terms(rabi, bare - shift, gam)
            new = atom.shift_full + mshift
            done = abs(new - shift) <= tol * atom.omega_10
            shift = new
            if done:
                break
        else:
            raise ConvergenceError(f"level shift did not converge in {max_iter} iterations")
    detuning = bare - shift
    mrate, mshift = _mode_terms(rabi, detuning, gam)
    if atom.gamma_full is not None:
        gamma_prime = atom.gamma_full - mrate
    else:
        gamma_prime = bg.gamma_bg
    if gamma_prime < 0:
        warnings.warn(
            f"residual width is negative ({gamma_prime:.6g}): total rate is smaller "
            "than the mode contribution, background configuration inconsistent",
            RuntimeWarning,
            stacklevel=2,
        )
    flags = regime_flags(rabi, detuning, gam, gamma_prime)
    flags["negative_gamma_prime"] = gamma_prime < 0
    return LevelData(
        delta_shift=shift,
        gamma_prime=gamma_prime,
        omega_tilde=atom.omega_10 + shift,
        detuning_shifted=detuning,
        gamma_total=0.5 * (gam + gamma_prime),
        gamma_nu=gam,
        mode_rate=mrate,
        mode_shift=mshift,
        iterations=iterations,
        flags=flags,
    )


def level_from_params(rabi: float, detuning_shifted: float, gamma_nu: float,
                      gamma_prime: float, delta_shift: float = 0.0,
                      omega_10: float = 0.0) -> LevelData:
    """LevelData straight from the shifted quantities, bypassing self-consistency."""
    mrate, mshift = _mode_terms(rabi, detuning_shifted, gamma_nu)
    flags = regime_flags(rabi, detuning_shifted, gamma_nu, gamma_prime)
    flags["negative_gamma_prime"] = gamma_prime < 0
    return LevelData(delta_shift, gamma_prime, omega_10 + delta_shift, detuning_shifted,
                     0.5 * (gamma_nu + gamma_prime), gamma_nu, mrate, mshift, 0, flags)


def _damping(level: LevelData) -> complex:
    # a = i Delta + (gamma_nu - gamma')/2, the first-derivative coefficient
    return complex(0.5 * (level.gamma_nu - level.gamma_prime), level.detuning_shifted)


def modal_roots(level: LevelData, rabi: float) -> tuple[complex, complex]:
    a = _damping(level)
    root = cmath.sqrt(a * a - rabi * rabi)
    return -0.5 * a - 0.5 * root, -0.5 * a + 0.5 * root


def modal_roots_strong(level: LevelData, rabi: float) -> tuple[complex, complex]:
    """Approximant valid for at least moderately strong coupling."""
    a = _damping(level)
    omega = math.sqrt(max(rabi**2 + level.detuning_shifted**2 - a.real**2, 0.0))
    return -0.5 * a - 0.5j * omega, -0.5 * a + 0.5j * omega


def modal_roots_weak(level: LevelData, rabi: float) -> tuple[complex, complex]:
    """Taylor approximant valid for weak coupling."""
    d, g = level.detuning_shifted, level.gamma_nu
    den = d * d + 0.25 * g * g
    fast = -_damping(level)
    slow = complex(-rabi**2 * g / (8.0 * den), rabi**2 * d / (4.0 * den))
    return fast, slow


def is_degenerate(roots, rabi: float, eps: float = DEGENERATE_EPS) -> bool:
    # (wp - wm)^2 is the discriminant a^2 - rabi^2
    wp, wm = roots
    return abs(wp - wm) ** 2 <= eps * max(abs(wp), abs(wm), rabi) ** 2


def amplitude_coeffs(theta: float, roots, rabi: float) -> tuple[complex, complex]:
    wp, wm = roots
    if is_degenerate(roots, rabi):
        raise ZeroDivisionError("degenerate roots: use the confluent solution")
    kick = 0.5j * rabi * math.sin(theta)
    c = math.cos(theta)
    return (wm * c + kick) / (wm - wp), (wp * c + kick) / (wp - wm)


def amplitude_coeffs_strong(theta: float, theta_c: float) -> tuple[float, float]:
    return (math.cos(theta_c) * math.cos(theta - theta_c),
            -math.sin(theta_c) * math.sin(theta - theta_c))


@dataclass(frozen=True)
class ModalSolution:
    roots: tuple[complex, complex]
    coeffs: tuple[complex, complex]
    level: LevelData
    point: CouplingPoint
    theta: float
    degenerate: bool = False
    approximant: str = "exact"

    @property
    def rabi(self) -> float:
        return self.point.rabi

    def phi(self, t):
        """phi1(t) and its time derivative."""
        t = np.asarray(t, dtype=float)
        wp, wm = self.roots
        if self.degenerate:
            a = math.cos(self.theta)
            b = -0.5j * self.rabi * math.sin(self.theta) - wp * a
            e = np.exp(wp * t)
            return (a + b * t) * e, (b + wp * (a + b * t)) * e
        cp, cm = self.coeffs
        ep, em = np.exp(wp * t), np.exp(wm * t)
        return cp * ep + cm * em, cp * wp * ep + cm * wm * em

    def invariants(self) -> dict:
        """Residuals of the initial-condition and Vieta identities."""
        wp, wm = self.roots
        a = _damping(self.level)
        phi0, dphi0 = self.phi(0.0)
        scale = max(self.rabi, abs(a), 1e-300)
        return {
            "initial_value": abs(complex(phi0) - math.cos(self.theta)),
            "initial_slope": abs(complex(dphi0) + 0.5j * self.rabi * math.sin(self.theta)) / scale,
            "root_sum": abs(wp + wm + a) / scale,
            "root_product": abs(wp * wm - 0.25 * self.rabi**2) / scale**2,
        }


def solve(level: LevelData, point: CouplingPoint, theta: float,
          approximant: str = "exact") -> ModalSolution:
    """Roots and coefficients for preparation angle ``theta``.

    ``point`` must already carry the shifted detuning.
    """
    if not 0.0 <= theta <= math.pi:
        raise ValueError(f"theta={theta} outside [0, pi]")
    if point.rabi <= 0:
        raise ValueError("dynamics needs a nonzero Rabi frequency")
    if approximant == "exact":
        roots = modal_roots(level, point.rabi)
    elif approximant == "strong":
        roots = modal_roots_strong(level, point.rabi)
    elif approximant == "weak":
        roots = modal_roots_weak(level, point.rabi)
    else:
        raise ValueError(f"unknown approximant {approximant!r}")
    if is_degenerate(roots, point.rabi):
        if approximant != "exact":
            raise RegimeError("approximate roots coincide")
        return ModalSolution(roots, (complex("nan"), complex("nan")), level, point, theta,
                             degenerate=True)
    return ModalSolution(roots, amplitude_coeffs(theta, roots, point.rabi), level, point,
                         theta, approximant=approximant)


def modal_solution(atom: AtomSpec, mode: ModeSpec, rabi: float, theta: float,
                   approximant: str = "exact") -> ModalSolution:
    bare = make_point(rabi, mode.omega_nu - atom.omega_10)
    level = primed_level(atom, mode, bare)
    return solve(level, make_point(rabi, level.detuning_shifted), theta, approximant)


def _times(t):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("times must not precede the preparation instant")
    return t


def _outer(scalar, vec):
    scalar = np.asarray(scalar, dtype=float)
    return np.multiply.outer(scalar, np.asarray(vec, dtype=float))


def psi1(sol: ModalSolution, E1: float, t):
    t = _times(t)
    lv = sol.level
    phi, _ = sol.phi(t)
    return np.exp((-1j * (E1 + lv.delta_shift) - 0.5 * lv.gamma_prime) * t) * phi


def population(sol: ModalSolution, t):
    t = _times(t)
    phi, _ = sol.phi(t)
    return np.exp(-sol.level.gamma_prime * t) * np.abs(phi) ** 2


def q_factor(sol: ModalSolution, t):
    t = _times(t)
    lv = sol.level
    pre = np.exp((-1j * lv.detuning_shifted - 0.5 * (lv.gamma_nu + lv.gamma_prime)) * t)
    (wp, wm), (cp, cm) = sol.roots, sol.coeffs
    return pre * (np.conj(cp) * np.exp(np.conj(wp) * t) + np.conj(cm) * np.exp(np.conj(wm) * t))


def dq_factor(sol: ModalSolution, t):
    t = _times(t)
    lv = sol.level
    beta = -1j * lv.detuning_shifted - 0.5 * (lv.gamma_nu + lv.gamma_prime)
    out = 0j
    for w, c in zip(sol.roots, sol.coeffs):
        k = beta + np.conj(w)
        out = out + np.conj(c) * k * np.exp(k * t)
    return out


def _s_terms(sol: ModalSolution, omega, scale):
    lv = sol.level
    gp = lv.gamma_prime
    for a in (0, 1):
        for b in (0, 1):
            wa, wb = sol.roots[a], sol.roots[b]
            coef = np.conj(sol.coeffs[a]) * sol.coeffs[b]
            den = omega - lv.omega_tilde + 0.5j * gp - 1j * wb
            if np.any(np.abs(den) < 1e-14 * scale):
                raise PoleError("s-kernel denominator vanishes on the real axis")
            first = -gp + np.conj(wa) + wb
            second = 1j * (lv.omega_tilde - omega) - 0.5 * gp + np.conj(wa)
            yield coef, den, first, second


def s_kernel(sol: ModalSolution, omega, t):
    """Frequency-resolved part of the force integrand; ``omega`` is absolute."""
    t = _times(t)
    scale = max(sol.rabi, sol.level.gamma_nu)
    out = 0j
    for coef, den, first, second in _s_terms(sol, omega, scale):
        out = out + coef * (np.exp(first * t) - np.exp(second * t)) / den
    return out


def ds_kernel(sol: ModalSolution, omega, t):
    t = _times(t)
    scale = max(sol.rabi, sol.level.gamma_nu)
    out = 0j
    for coef, den, first, second in _s_terms(sol, omega, scale):
        out = out + coef * (first * np.exp(first * t) - second * np.exp(second * t)) / den
    return out


def _g_grad_g(mode: ModeSpec, sol: ModalSolution) -> float:
    # g * grad g per unit grad(rabi)
    return sol.rabi / (2.0 * math.pi * mode.gamma_nu)


def _lorentz_integral(mode, sol, kernel, t, window, epsabs):
    t = np.atleast_1d(_times(t))
    lv = sol.level
    if abs(lv.omega_tilde + lv.detuning_shifted - mode.omega_nu) > 1e-9 * mode.omega_nu:
        raise ValueError("level and mode disagree on omega_nu; build the level with omega_10")
    lo, hi = mode.omega_nu - window * mode.gamma_nu, mode.omega_nu + window * mode.gamma_nu

    def f(omega):
        v = mode.lorentzian(omega) * kernel(sol, omega, t)
        return np.concatenate([v.real, v.imag])

    val, err = quad_vec(f, lo, hi, epsabs=epsabs, epsrel=1e-10, limit=4000)
    if not np.isfinite(err) or err > max(epsabs, 1e-8 * np.max(np.abs(val), initial=0.0)) * 100:
        raise IntegrationError("frequency quadrature did not converge", err)
    n = t.size
    return val[:n] + 1j * val[n:]


def force_el_general(sol: ModalSolution, mode: ModeSpec, grad_rabi, t, window: float = 400.0):
    """Electric force from the q and s kernels with explicit frequency quadrature."""
    scalar_t = np.ndim(t) == 0
    gg = _g_grad_g(mode, sol)
    scale = math.pi * mode.gamma_nu * gg
    integral = _lorentz_integral(mode, sol, s_kernel, t, window, 1e-10 * max(scale, 1e-300) / gg)
    first = -math.pi * mode.gamma_nu * math.sin(sol.theta) / sol.rabi * q_factor(sol, np.atleast_1d(t))
    total = 2.0 * gg * (first + integral).real
    out = _outer(total, grad_rabi)
    return out[0] if scalar_t else out


def force_mag_general(sol: ModalSolution, atom: AtomSpec, mode: ModeSpec, t,
                      window: float = 400.0):
    """Magnetic force from the time derivatives of the q and s kernels."""
    scalar_t = np.ndim(t) == 0
    m = atom.magnetic(1 if atom.mag_im is None else atom.mag_im.size)
    integral = _lorentz_integral(mode, sol, ds_kernel, t, window, 1e-10 * sol.rabi)
    first = math.pi * mode.gamma_nu * math.sin(sol.theta) / sol.rabi * dq_factor(sol, np.atleast_1d(t))
    total = 2.0 * (1j * mode.omega_nu / math.pi * (first - integral)).real
    out = _outer(total, m)
    return out[0] if scalar_t else out


def _cross_sum(sol: ModalSolution, t, diagonal: bool, derivative: bool):
    # sum over root pairs of conj(c_a) c_b W_b exp((conj W_a + W_b - G') t),
    # optionally weighted by the exponent (time derivative)
    gp = sol.level.gamma_prime
    out = 0j
    for a in (0, 1):
        for b in (0, 1):
            if a == b and not diagonal:
                continue
            k = np.conj(sol.roots[a]) + sol.roots[b] - gp
            term = np.conj(sol.coeffs[a]) * sol.coeffs[b] * sol.roots[b] * np.exp(k * t)
            out = out + (k * term if derivative else term)
    return out


def _phi_product(sol: ModalSolution, t, derivative: bool):
    # exp(-G' t) conj(phi) phi' and its time derivative, valid at double roots
    phi, dphi = sol.phi(t)
    gp = sol.level.gamma_prime
    decay = np.exp(-gp * t)
    prod = np.conj(phi) * dphi
    if not derivative:
        return decay * prod
    a = _damping(sol.level)
    ddphi = -a * dphi - 0.25 * sol.rabi**2 * phi
    return decay * (-gp * prod + np.abs(dphi) ** 2 + np.conj(phi) * ddphi)


def force_el_modal(sol: ModalSolution, grad_rabi, t):
    """Electric force summed over root pairs.

    Each pair contributes ``conj(c_a) c_b exp((conj W_a + W_b - G') t) / (2i W_other)``
    times ``(rabi / 2) grad(rabi)``, plus the complex conjugate.
    """
    t = _times(t)
    if sol.degenerate:
        prod = _phi_product(sol, t, derivative=False)
    else:
        prod = _cross_sum(sol, t, diagonal=True, derivative=False)
    return _outer(2.0 / sol.rabi * np.imag(prod), grad_rabi)


def force_el_strong(sol: ModalSolution, grad_rabi, t, check_regime: bool = True):
    t = _times(t)
    if check_regime and not sol.level.flags.get("strong", False):
        raise RegimeError("strong-coupling inequalities not satisfied")
    p = sol.point
    d = 2.0 * (sol.theta - p.theta_c)
    shape = math.cos(d) * p.sin2c + p.cos2c * math.sin(d) * np.cos(p.omega * t)
    return _outer(-0.5 * np.exp(-sol.level.gamma_total * t) * shape, grad_rabi)


def f_plus(point: CouplingPoint, grad_rabi) -> np.ndarray:
    """Force in the upper dressed state, -grad(Omega)/2."""
    return -0.5 * point.sin2c * np.asarray(grad_rabi, dtype=float)


def _mag_prefactor(sol: ModalSolution, atom: AtomSpec, mode: ModeSpec, dim: int):
    return -4.0 * mode.omega_nu * mode.gamma_nu / sol.rabi**2 * atom.magnetic(dim)


def force_mag_modal(sol: ModalSolution, atom: AtomSpec, mode: ModeSpec, t, dim: int = 1):
    """Magnetic force from the beat (cross) terms between the two roots.

    Diagonal terms are smaller by the damping over the splitting and are
    dropped, so the result vanishes whenever one coefficient is zero.
    """
    t = _times(t)
    pre = _mag_prefactor(sol, atom, mode, dim)
    if sol.degenerate:
        val = _phi_product(sol, t, derivative=True)
    else:
        val = _cross_sum(sol, t, diagonal=False, derivative=True)
    return _outer(np.real(val), pre)


def force_mag_exact(sol: ModalSolution, atom: AtomSpec, mode: ModeSpec, t, dim: int = 1):
    """Magnetic force including the diagonal terms."""
    t = _times(t)
    pre = _mag_prefactor(sol, atom, mode, dim)
    return _outer(np.real(_phi_product(sol, t, derivative=True)), pre)


def force_mag_strong(sol: ModalSolution, atom: AtomSpec, mode: ModeSpec, t,
                     dim: int = 1, check_regime: bool = True):
    t = _times(t)
    if check_regime and not sol.level.flags.get("strong", False):
        raise RegimeError("strong-coupling inequalities not satisfied")
    p = sol.point
    d = 2.0 * (sol.theta - p.theta_c)
    amp = math.sin(d) / p.sin2c
    shape = amp * np.exp(-sol.level.gamma_total * t) * np.cos(p.omega * t)
    return _outer(-mode.omega_nu * mode.gamma_nu * shape, atom.magnetic(dim))


def weak_static_force(level: LevelData, rabi: float, grad_rabi, gamma_full=None):
    """Initial force of the weakly coupled excited atom.

    Lorentzian model of the resonant force with complex frequency
    omega_tilde + i*Gamma/2. With ``gamma_full=None`` the full rate and the
    full shift are used; pass ``level.gamma_prime`` together with the
    shifted detuning for the primed variant.
    """
    if gamma_full is None:
        gamma_full = level.gamma_full
        detuning = level.detuning_shifted + level.mode_shift
    else:
        detuning = level.detuning_shifted
    g = level.gamma_nu - gamma_full
    val = 0.5 * rabi * detuning / (detuning**2 + 0.25 * g * g)
    return val * np.asarray(grad_rabi, dtype=float)


def force_weak(level: LevelData, rabi: float, grad_rabi, t, check_regime: bool = True):
    t = _times(t)
    if check_regime and not level.flags.get("weak", False):
        raise RegimeError("weak-coupling inequalities not satisfied")
    f0 = weak_static_force(level, rabi, grad_rabi)
    return _outer(np.exp(-level.gamma_full * t), f0)


def dressed_force_decay(point: CouplingPoint, level: LevelData, grad_rabi, t):
    """Forces (F+, F-) on the two dressed states, decaying at the total damping rate."""
    t = _times(t)
    fp = _outer(np.exp(-level.gamma_total * t), f_plus(point, grad_rabi))
    return fp, -fp


def correction_factor(level: LevelData, rabi: float) -> float:
    d2 = level.detuning_shifted**2 - (level.gamma_nu - 0.5 * level.gamma_prime) ** 2 / 4.0
    return d2 / (d2 + rabi * rabi)


def correction_factor_limits(level: LevelData, rabi: float) -> tuple[float, float]:
    """Small- and large-detuning limit forms of the correction factor."""
    q = 0.25 * level.gamma_nu**2
    d2 = level.detuning_shifted**2
    return q / (q - rabi * rabi), d2 / (d2 + rabi * rabi)


def mode_rate(rabi: float, detuning: float, gamma_nu: float) -> float:
    return _mode_terms(rabi, detuning, gamma_nu)[0]
