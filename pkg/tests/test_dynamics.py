import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from cpforce import dynamics as dyn
from cpforce.spectral import ModeSpec, ResidualBackground, SpatialProfile
from cpforce.statics import force_theta_static, make_point

STRONG = dict(rabi=1.0, detuning=0.3, gamma_nu=0.05, gamma_prime=0.01)


def strong_solution(theta, **over):
    p = {**STRONG, **over}
    level = dyn.level_from_params(p["rabi"], p["detuning"], p["gamma_nu"], p["gamma_prime"],
                                  omega_10=100.0 - p["detuning"])
    return dyn.solve(level, make_point(p["rabi"], p["detuning"]), theta)


def flat_mode(rabi=1.0, gamma_nu=0.05, omega_nu=100.0):
    g0 = rabi / math.sqrt(2 * math.pi * gamma_nu)
    return ModeSpec(omega_nu, gamma_nu, SpatialProfile.constant(g0))


# -- level quantities -------------------------------------------------------

def test_primed_level_without_coupling():
    mode = flat_mode(rabi=0.0)
    atom = dyn.AtomSpec(99.0, ResidualBackground.from_rate(0.02, delta_bg=0.003), gamma_full=0.02)
    lv = dyn.primed_level(atom, mode, make_point(0.0, 1.0))
    assert lv.delta_shift == 0.003
    assert lv.gamma_prime == pytest.approx(0.02, rel=1e-15)
    assert lv.detuning_shifted == pytest.approx(1.0 - 0.003, rel=1e-15)


def test_primed_level_at_resonance_subtracts_mode_rate():
    mode = flat_mode(rabi=0.5, gamma_nu=2.0)
    atom = dyn.AtomSpec(100.0, gamma_full=0.3)
    lv = dyn.primed_level(atom, mode, make_point(0.5, 0.0))
    assert lv.gamma_prime == pytest.approx(0.3 - 0.25 / 2.0, rel=1e-14)
    assert lv.mode_shift == 0.0


def test_mode_shift_value():
    _, shift = dyn._mode_terms(1.0, 2.0, 0.05)
    assert shift == pytest.approx(0.124980471801281, rel=1e-14)


def test_default_background_is_the_primed_width():
    mode = flat_mode()
    atom = dyn.AtomSpec(99.7, ResidualBackground.from_rate(0.02))
    lv = dyn.primed_level(atom, mode, make_point(1.0, 0.3))
    assert lv.gamma_prime == pytest.approx(0.02, rel=1e-14)
    assert lv.gamma_full == pytest.approx(0.02 + dyn.mode_rate(1.0, 0.3, 0.05), rel=1e-14)
    assert lv.gamma_total == pytest.approx(0.5 * (0.05 + 0.02), rel=1e-14)
    assert lv.omega_tilde == pytest.approx(atom.omega_10 + lv.delta_shift)


def test_full_shift_is_self_consistent():
    mode = flat_mode(rabi=1.0, gamma_nu=0.5)
    atom = dyn.AtomSpec(99.0, shift_full=0.05)
    lv = dyn.primed_level(atom, mode, make_point(1.0, 1.0))
    _, mshift = dyn._mode_terms(1.0, lv.detuning_shifted, 0.5)
    assert lv.delta_shift == pytest.approx(0.05 + mshift, abs=1e-12 * 99.0)
    assert lv.shift_full == pytest.approx(0.05, abs=1e-10)
    assert lv.iterations > 1


def test_negative_residual_width_warns():
    mode = flat_mode(rabi=1.0, gamma_nu=1.0)
    atom = dyn.AtomSpec(100.0, gamma_full=0.001)
    with pytest.warns(RuntimeWarning, match="negative"):
        lv = dyn.primed_level(atom, mode, make_point(1.0, 0.0))
    assert lv.flags["negative_gamma_prime"]


def test_regime_flags():
    assert dyn.regime_flags(1.0, 0.3, 0.05, 0.01)["strong"]
    weak = dyn.regime_flags(0.1, 0.0, 10.0, 0.001)
    assert weak["weak"] and not weak["strong"]


# -- roots and coefficients --------------------------------------------------

def test_roots_lossless_resonance():
    lv = dyn.level_from_params(1.0, 0.0, 0.0, 0.0)
    wp, wm = dyn.modal_roots(lv, 1.0)
    assert wp == pytest.approx(-0.5j, abs=1e-15)
    assert wm == pytest.approx(0.5j, abs=1e-15)


def test_repeated_root_uses_confluent_solution():
    lv = dyn.level_from_params(1.0, 0.0, 2.0, 0.0)
    roots = dyn.modal_roots(lv, 1.0)
    assert roots == pytest.approx((-0.5, -0.5), abs=1e-15)
    assert dyn.is_degenerate(roots, 1.0)
    with pytest.raises(ZeroDivisionError):
        dyn.amplitude_coeffs(0.3, roots, 1.0)
    sol = dyn.solve(lv, make_point(1.0, 0.0), 0.7)
    assert sol.degenerate
    inv = sol.invariants()
    assert inv["initial_value"] < 1e-15 and inv["initial_slope"] < 1e-15
    # (1 + t/2 ... ) e^{-t/2}: compare with a tiny lift off the double root
    near = dyn.solve(dyn.level_from_params(1.0, 0.0, 2.0 + 1e-4, 0.0), make_point(1.0, 0.0), 0.7)
    t = np.linspace(0, 10, 11)
    assert np.abs(sol.phi(t)[0] - near.phi(t)[0]).max() < 1e-3


def test_weak_root_approximant():
    lv = dyn.level_from_params(0.1, 0.0, 10.0, 0.0)
    exact = dyn.modal_roots(lv, 0.1)[1]
    approx = dyn.modal_roots_weak(lv, 0.1)[1]
    assert approx == pytest.approx(-5e-4, rel=1e-12)
    assert abs(exact - approx) / abs(exact) < 0.01


def test_strong_root_approximant_close_in_deep_strong_regime():
    lv = dyn.level_from_params(1.0, 0.2, 1e-4, 1e-4)
    assert dyn.modal_roots_strong(lv, 1.0) == pytest.approx(dyn.modal_roots(lv, 1.0), abs=1e-8)


def test_coefficient_examples():
    lv = dyn.level_from_params(1.0, 0.0, 0.0, 0.0)
    cp, cm = dyn.amplitude_coeffs(0.0, dyn.modal_roots(lv, 1.0), 1.0)
    assert (cp, cm) == pytest.approx((0.5, 0.5), abs=1e-15)
    assert dyn.amplitude_coeffs_strong(math.pi / 2, math.pi / 4) == pytest.approx((0.5, -0.5))
    tc = 0.3
    assert dyn.amplitude_coeffs_strong(tc, tc) == (math.cos(tc), -0.0)


def test_solve_rejects_bad_input():
    lv = dyn.level_from_params(1.0, 0.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        dyn.solve(lv, make_point(1.0, 0.0), -0.1)
    with pytest.raises(ValueError):
        dyn.solve(lv, make_point(0.0, 1.0), 0.1)
    with pytest.raises(ValueError):
        dyn.solve(lv, make_point(1.0, 0.0), 0.1, approximant="taylor")


# -- amplitude ------------------------------------------------------------------

def test_psi1_frozen_values():
    sol = strong_solution(math.pi / 4, gamma_prime=0.02)
    # independent high-precision ODE integration (mpmath odefun)
    assert sol.phi(5.0)[0] == pytest.approx(-0.577344506659583 + 0.226617209846492j, abs=1e-13)
    f = dyn.force_el_modal(sol, [1.0], [5.0, 10.0])[:, 0]
    assert f == pytest.approx([-0.391873175272818, -0.292436845996011], abs=1e-13)


def test_psi1_lossless_rabi_oscillation():
    lv = dyn.level_from_params(1.3, 0.0, 0.0, 0.0)
    sol = dyn.solve(lv, make_point(1.3, 0.0), 0.0)
    t = np.linspace(0, 20, 201)
    assert np.abs(dyn.psi1(sol, 2.0, t)) == pytest.approx(np.abs(np.cos(0.65 * t)), abs=1e-13)
    with pytest.raises(ValueError):
        dyn.psi1(sol, 0.0, -1.0)


def test_psi1_weak_exponential():
    lv = dyn.level_from_params(0.1, 0.0, 10.0, 0.001)
    sol = dyn.solve(lv, make_point(0.1, 0.0), 0.0)
    t = np.linspace(0, 3 / lv.gamma_full, 301)
    ref = np.exp(-lv.gamma_full * t)
    assert np.max(np.abs(dyn.population(sol, t) - ref) / ref) < 0.05


@pytest.mark.parametrize("tc", [math.pi / 8, math.pi / 6, math.pi / 3])
def test_population_strong_ideal_formula(tc):
    rabi = 1.0
    det = -rabi / math.tan(2 * tc)
    p = make_point(rabi, det)
    sol = dyn.solve(dyn.level_from_params(rabi, det, 0.0, 0.0), p, 0.0)
    t = np.linspace(0, 3 * 2 * math.pi / p.omega, 3001)
    c, s = math.cos(tc), math.sin(tc)
    ref = c**4 + s**4 + 2 * c * c * s * s * np.cos(p.omega * t)
    assert dyn.population(sol, t) == pytest.approx(ref, abs=1e-12)
    assert dyn.population(sol, t).min() >= math.cos(2 * tc) ** 2 - 1e-9


def test_q_factor_examples():
    sol = strong_solution(0.4)
    assert abs(dyn.q_factor(sol, 0.0) - math.cos(0.4)) < 1e-12
    ideal = dyn.solve(dyn.level_from_params(1.0, 0.0, 0.0, 0.0), make_point(1.0, 0.0), 0.0)
    t = np.linspace(0, 10, 51)
    assert dyn.q_factor(ideal, t) == pytest.approx(np.cos(0.5 * t), abs=1e-13)
    cp, cm = sol.coeffs
    bound = np.exp(-sol.level.gamma_total * t) * (abs(cp) + abs(cm))
    assert np.all(np.abs(dyn.q_factor(sol, t)) <= bound + 1e-15)


def test_s_kernel_vanishes_at_start():
    sol = strong_solution(0.4)
    assert abs(dyn.s_kernel(sol, 0.2, 0.0)) < 1e-15


def test_s_kernel_single_term_when_one_coefficient_vanishes():
    lv = dyn.level_from_params(1.0, 0.4, 0.0, 0.0)
    p = make_point(1.0, 0.4)
    sol = dyn.solve(lv, p, p.theta_c)
    assert abs(sol.coeffs[1]) < 1e-15
    t = np.array([1.0, 3.0])
    # only the |c+|^2 term survives; it is independent of the second root
    perturbed = dyn.ModalSolution((sol.roots[0], sol.roots[1] + 0.3), sol.coeffs, lv, p, sol.theta)
    assert dyn.s_kernel(sol, 0.7, t) == pytest.approx(dyn.s_kernel(perturbed, 0.7, t), abs=1e-14)


# -- electric force --------------------------------------------------------------

def test_general_force_matches_modal_sum():
    sol = strong_solution(0.0)
    mode = flat_mode()
    t = np.linspace(0.0, 40.0, 41)
    gen = dyn.force_el_general(sol, mode, [1.0], t)[:, 0]
    mod = dyn.force_el_modal(sol, [1.0], t)[:, 0]
    assert np.max(np.abs(gen - mod)) / np.max(np.abs(mod)) < 1e-3


def test_general_force_needs_consistent_level():
    lv = dyn.level_from_params(1.0, 0.3, 0.05, 0.01)
    sol = dyn.solve(lv, make_point(1.0, 0.3), 0.0)
    with pytest.raises(ValueError, match="omega_nu"):
        dyn.force_el_general(sol, flat_mode(), [1.0], 1.0)


def test_general_force_zero_gradient():
    sol = strong_solution(0.6)
    out = dyn.force_el_general(sol, flat_mode(), [0.0, 0.0], np.array([0.0, 3.0]))
    assert np.all(out == 0.0)


def test_general_magnetic_force_tracks_exact():
    sol = strong_solution(math.pi / 2)
    atom = dyn.AtomSpec(99.7, mag_im=[1.0])
    mode = flat_mode()
    t = np.linspace(0.5, 20.0, 8)
    gen = dyn.force_mag_general(sol, atom, mode, t)[:, 0]
    exact = dyn.force_mag_exact(sol, atom, mode, t)[:, 0]
    # the magnetic kernel decays only like 1/window in frequency
    assert np.max(np.abs(gen - exact)) / np.max(np.abs(exact)) < 5e-3


def test_modal_force_initial_value_is_static():
    lv = dyn.level_from_params(1.0, -0.7, 0.0, 0.0)
    p = make_point(1.0, -0.7)
    sol = dyn.solve(lv, p, p.theta_c)
    grad = np.array([0.3, -1.2])
    assert dyn.force_el_modal(sol, grad, 0.0) == pytest.approx(-0.5 * p.sin2c * grad, rel=1e-13)


def test_modal_force_zero_on_resonance():
    sol = strong_solution(0.0, detuning=0.0)
    t = np.linspace(0, 50, 101)
    assert np.abs(dyn.force_el_modal(sol, [1.0], t)).max() < 1e-15


def test_modal_force_correction_factor_form():
    # exact for a lossless mode, and tracks the damped trace early on
    for g, gp, tol in ((0.0, 0.0, 1e-12), (0.01, 0.0, 0.1)):
        rabi, det = 1.0, 0.5
        lv = dyn.level_from_params(rabi, det, g, gp)
        p = make_point(rabi, det)
        sol = dyn.solve(lv, p, 0.0)
        t = np.linspace(0, 20.0, 401)
        f = dyn.force_el_modal(sol, [1.0], t)[:, 0]
        f10 = dyn.weak_static_force(lv, rabi, [1.0], gamma_full=gp)[0]
        c = dyn.correction_factor(lv, rabi)
        form = 2 * np.exp(-lv.gamma_total * t) * np.sin(0.5 * p.omega * t) ** 2 * c * f10
        assert np.abs(f - form).max() <= tol * np.abs(f).max()


def test_strong_force_examples():
    p = make_point(1.0, -0.4)
    lv = dyn.level_from_params(1.0, -0.4, 0.02, 0.01)
    t = np.linspace(0, 30, 301)
    grad = [1.0]
    fp = dyn.f_plus(p, grad)[0]
    pure = dyn.force_el_strong(dyn.solve(lv, p, p.theta_c), grad, t)[:, 0]
    assert pure == pytest.approx(np.exp(-lv.gamma_total * t) * fp, rel=1e-14)
    osc = dyn.force_el_strong(dyn.solve(lv, p, p.theta_c + math.pi / 4), grad, t)[:, 0]
    cot = p.cos2c / p.sin2c
    assert osc == pytest.approx(np.exp(-lv.gamma_total * t) * cot * np.cos(p.omega * t) * fp, abs=1e-14)


def test_strong_force_regime_error():
    lv = dyn.level_from_params(0.1, 0.0, 10.0, 0.0)
    sol = dyn.solve(lv, make_point(0.1, 0.0), 0.0)
    with pytest.raises(dyn.RegimeError):
        dyn.force_el_strong(sol, [1.0], 1.0)
    dyn.force_el_strong(sol, [1.0], 1.0, check_regime=False)


# -- magnetic force -------------------------------------------------------------

def test_magnetic_modal_vanishes_for_dressed_preparation():
    lv = dyn.level_from_params(1.0, 0.4, 0.0, 0.0)
    p = make_point(1.0, 0.4)
    atom = dyn.AtomSpec(99.6, mag_im=[1.0, 0.5])
    mode = flat_mode()
    t = np.linspace(0, 10, 21)
    for theta in (p.theta_c, p.theta_c + math.pi / 2):
        sol = dyn.solve(lv, p, theta)
        assert np.abs(dyn.force_mag_modal(sol, atom, mode, t, dim=2)).max() < 1e-10


def test_magnetic_modal_cross_terms_at_start():
    sol = strong_solution(math.pi / 2, detuning=0.0)
    atom = dyn.AtomSpec(100.0, mag_im=[1.0])
    f = dyn.force_mag_modal(sol, atom, flat_mode(), 0.0)
    assert np.all(np.isfinite(f)) and abs(f[0]) > 0


def test_magnetic_defaults_to_zero():
    sol = strong_solution(0.5)
    assert np.all(dyn.force_mag_modal(sol, dyn.AtomSpec(99.7), flat_mode(), [0.0, 1.0]) == 0.0)
    with pytest.raises(ValueError):
        dyn.AtomSpec(99.7, mag_im=[1.0]).magnetic(3)


def test_magnetic_strong_matches_modal_deep_strong():
    rabi, det = 1.0, 0.4
    lv = dyn.level_from_params(rabi, det, 1e-4, 1e-4)
    p = make_point(rabi, det)
    atom = dyn.AtomSpec(99.6, mag_im=[1.0])
    mode = flat_mode(gamma_nu=1e-4)
    t = np.linspace(0, 50, 501)
    for theta in (0.0, 0.3, math.pi / 2):
        sol = dyn.solve(lv, p, theta)
        strong = dyn.force_mag_strong(sol, atom, mode, t)[:, 0]
        modal = dyn.force_mag_modal(sol, atom, mode, t)[:, 0]
        assert np.abs(strong - modal).max() <= 0.02 * np.abs(modal).max()


def test_magnetic_strong_zero_and_mean_free():
    lv = dyn.level_from_params(1.0, -0.3, 0.01, 0.0)
    p = make_point(1.0, -0.3)
    atom = dyn.AtomSpec(100.3, mag_im=[2.0])
    mode = flat_mode(gamma_nu=0.01)
    period = 2 * math.pi / p.omega
    t = np.linspace(0, 4 * period, 4001)[:-1]
    for theta in (p.theta_c, p.theta_c + math.pi / 2):
        f = dyn.force_mag_strong(dyn.solve(lv, p, theta), atom, mode, t)
        assert np.abs(f).max() < 1e-12
    f = dyn.force_mag_strong(dyn.solve(lv, p, 0.1), atom, mode, t)[:, 0]
    assert abs(np.mean(np.exp(lv.gamma_total * t) * f)) < 1e-10


# -- weak and dressed decay ------------------------------------------------------

def test_weak_force_examples():
    for det in (-2.0, 2.0):
        lv = dyn.level_from_params(0.1, det, 10.0, 0.001)
        t = np.linspace(0, 3 / lv.gamma_full, 201)
        f = dyn.force_weak(lv, 0.1, [1.0], t)[:, 0]
        assert np.sign(f[0]) == np.sign(det)
        slope = -np.polyfit(t, np.log(np.abs(f)), 1)[0]
        assert slope == pytest.approx(lv.gamma_full, rel=0.01)
        assert abs(dyn.force_weak(lv, 0.1, [1.0], 1e7)[0]) < 1e-300


def test_weak_force_regime_error():
    lv = dyn.level_from_params(1.0, 0.3, 0.05, 0.01)
    with pytest.raises(dyn.RegimeError):
        dyn.force_weak(lv, 1.0, [1.0], 0.0)


def test_dressed_force_decay():
    p = make_point(1.0, 0.6)
    lv = dyn.level_from_params(1.0, 0.6, 0.0, 0.0)
    t = np.linspace(0, 5, 11)
    fp, fm = dyn.dressed_force_decay(p, lv, [1.0], t)
    assert np.all(fp + fm == 0.0)
    assert np.all(fp == fp[0])
    assert fp[0] == pytest.approx(force_theta_static(p.theta_c, p, [1.0]), rel=1e-12)
    assert fm[0] == pytest.approx(force_theta_static(p.theta_c + math.pi / 2, p, [1.0]), rel=1e-12)


def test_correction_factor_examples():
    lv = dyn.level_from_params(1.0, 0.0, 0.1, 0.0)
    assert dyn.correction_factor(lv, 1.0) == pytest.approx(-2.50626566416040e-3, rel=1e-12)
    big = dyn.level_from_params(1.0, 100.0, 0.1, 0.0)
    assert dyn.correction_factor(big, 1.0) == pytest.approx(dyn.correction_factor_limits(big, 1.0)[1], rel=1e-6)
    assert dyn.correction_factor(big, 1e-9) == pytest.approx(1.0)


# -- properties --------------------------------------------------------------------

@settings(max_examples=1000, deadline=None)
@given(rabi=st.floats(0.01, 5.0), det=st.floats(-5.0, 5.0), g=st.floats(0.0, 3.0),
       gp=st.floats(0.0, 1.0), theta=st.floats(0.0, math.pi))
def test_solution_invariants(rabi, det, g, gp, theta):
    sol = dyn.solve(dyn.level_from_params(rabi, det, g, gp), make_point(rabi, det), theta)
    if sol.degenerate:
        return
    cp, cm = sol.coeffs
    wp, wm = sol.roots
    scale = max(abs(cp), abs(cm), 1.0)
    assert abs(cp + cm - math.cos(theta)) <= 1e-12 * scale
    assert abs(wp * cp + wm * cm + 0.5j * rabi * math.sin(theta)) <= 1e-12 * rabi * scale * max(1, abs(wp))
    a = complex(0.5 * (g - gp), det)
    assert abs(wp + wm + a) <= 1e-12 * max(abs(a), rabi)
    assert abs(wp * wm - 0.25 * rabi**2) <= 1e-12 * max(abs(a), rabi) ** 2


@settings(max_examples=20, deadline=None)
@given(det=st.floats(-0.5, 0.5), g=st.floats(0.0, 0.1), gp=st.floats(0.0, 0.05),
       theta=st.floats(0.0, math.pi), t=st.floats(0.1, 15.0))
def test_memory_kernel_residual(det, g, gp, theta, t):
    # phi' = -(i rabi/2) [sin(theta) e^{-a t} - (i rabi/2) int_0^t e^{-a(t-s)} phi(s) ds]
    rabi = 1.0
    sol = dyn.solve(dyn.level_from_params(rabi, det, g, gp), make_point(rabi, det), theta)
    a = complex(0.5 * (g - gp), det)

    def part(fn):
        return quad(fn, 0.0, t, epsabs=1e-13, epsrel=1e-13, limit=400)[0]

    kern = lambda s: cmath.exp(-a * (t - s)) * complex(sol.phi(s)[0])
    integral = part(lambda s: kern(s).real) + 1j * part(lambda s: kern(s).imag)
    rhs = -0.5j * rabi * (math.sin(theta) * cmath.exp(-a * t) - 0.5j * rabi * integral)
    assert abs(complex(sol.phi(t)[1]) - rhs) < 1e-6 * rabi


@settings(max_examples=200, deadline=None)
@given(rabi=st.floats(0.5, 5.0), det=st.floats(-2.0, 2.0), frac=st.floats(0.0, 0.1),
       theta=st.floats(0.0, math.pi / 2))
def test_strong_forces_flip_sign_under_quarter_turn(rabi, det, frac, theta):
    lv = dyn.level_from_params(rabi, det, frac * rabi, 0.5 * frac * rabi)
    p = make_point(rabi, det)
    atom = dyn.AtomSpec(100.0, mag_im=[0.7])
    mode = flat_mode(rabi=rabi, gamma_nu=max(frac * rabi, 1e-6))
    t = np.linspace(0, 10, 17)
    a, b = dyn.solve(lv, p, theta), dyn.solve(lv, p, theta + math.pi / 2)
    ea = dyn.force_el_strong(a, [1.0], t, check_regime=False)
    eb = dyn.force_el_strong(b, [1.0], t, check_regime=False)
    assert ea == pytest.approx(-eb, abs=1e-14 * rabi)
    ma = dyn.force_mag_strong(a, atom, mode, t, check_regime=False)
    mb = dyn.force_mag_strong(b, atom, mode, t, check_regime=False)
    assert ma == pytest.approx(-mb, rel=1e-12, abs=1e-12 * np.abs(ma).max())


@settings(max_examples=200, deadline=None)
@given(rabi=st.floats(0.5, 5.0), det=st.floats(-3.0, 3.0), frac=st.floats(0.0, 0.05),
       theta=st.floats(0.0, math.pi))
def test_strong_force_initial_value_is_static(rabi, det, frac, theta):
    lv = dyn.level_from_params(rabi, det, frac * rabi, 0.5 * frac * rabi)
    p = make_point(rabi, det)
    f = dyn.force_el_strong(dyn.solve(lv, p, theta), [1.0], 0.0, check_regime=False)
    s = force_theta_static(theta, p, [1.0])
    assert f == pytest.approx(s, rel=1e-9, abs=1e-15 * rabi)


@settings(max_examples=100, deadline=None)
@given(det=st.floats(0.05, 1.0), sign=st.sampled_from([-1, 1]), g=st.floats(1e-3, 0.1),
       gp=st.floats(0.0, 0.05))
def test_theta_zero_force_keeps_its_sign(det, sign, g, gp):
    rabi = 1.0
    lv = dyn.level_from_params(rabi, sign * det, g, gp)
    if not lv.flags["moderate"]:
        return
    sol = dyn.solve(lv, make_point(rabi, sign * det), 0.0)
    t = np.linspace(0, 10 / lv.gamma_total, 4001)
    f = dyn.force_el_modal(sol, [1.0], t)[:, 0]
    peak = np.abs(f).max()
    assert np.all(sign * f >= -1e-12 * peak)


@settings(max_examples=100, deadline=None)
@given(det=st.floats(0.05, 1.0), sign=st.sampled_from([-1, 1]), g=st.floats(1e-3, 0.1),
       ratio=st.floats(0.0, 1.0))
def test_theta_zero_force_keeps_its_sign_when_mode_dominates_damping(det, sign, g, ratio):
    rabi = 1.0
    lv = dyn.level_from_params(rabi, sign * det, g, ratio * g)
    if not lv.flags["moderate"]:
        return
    sol = dyn.solve(lv, make_point(rabi, sign * det), 0.0)
    t = np.linspace(0, 10 / lv.gamma_total, 4001)
    f = dyn.force_el_modal(sol, [1.0], t)[:, 0]
    assert np.all(sign * f >= -1e-12 * np.abs(f).max())
