"""Run configured scenarios: engines, traces, CSV and metadata output."""
from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dynamics as dyn
from . import oracle as orc
from .config import ConfigError, Scenario, ThetaOffset
from .spectral import ModeSpec, ResidualBackground, SpatialProfile, grad_rabi, rabi_frequency
from .statics import make_point, potential_theta

COLUMNS = ("t", "F_el", "F_mag", "population", "U_theta", "regime_flags")

CONVENTIONS = {
    "units": "hbar = 1; energies and rates in the frequency unit of omega_nu",
    "force_el_modal": "pair sum with positive overall sign; equals -(1/2) sin(2 theta) grad(rabi) at t0",
    "force_mag": "mag_im only, field weight taken at omega_nu; mag_re is carried but unused",
    "force_mag_strong": "coefficient -omega_nu*gamma_nu*mag_im, no doubling for a conjugate term",
    "force_mag_modal": "beat terms only; the diagonal terms are dropped",
    "normalize_Fplus": "force columns divided by |F+(t0)| = sin(2 theta_c)|grad rabi|/2",
    "oracle": "mode and residual continua kept separate; photon shape in metadata",
}


class EngineFailure(RuntimeError):
    pass


@dataclass
class Trace:
    engine: str
    theta_index: int
    position_index: int
    t: np.ndarray
    f_el: np.ndarray
    f_mag: np.ndarray
    population: np.ndarray
    u_theta: float
    flags: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    @property
    def filename(self) -> str:
        return f"{self.engine}_theta{self.theta_index}_pos{self.position_index}.csv"


def build_models(scn: Scenario):
    prof = SpatialProfile(scn.mode.profile.kind, scn.mode.profile.params())
    mode = ModeSpec(scn.mode.omega_nu, scn.mode.gamma_nu, prof, scn.mode.max_width_ratio)
    bg = ResidualBackground(scn.background.spectral_density(), scn.background.delta_bg)
    a = scn.atom
    atom = dyn.AtomSpec(a.omega_10, bg, a.E0, a.dipole_real, a.mag_im, a.mag_re,
                        a.gamma_full, a.shift_full)
    return atom, mode


@dataclass(frozen=True)
class Site:
    """Everything position-dependent the engines need."""

    z: float
    rabi: float
    grad: np.ndarray
    bare_detuning: float
    level: dyn.LevelData
    point: object  # CouplingPoint with the shifted detuning


def resolve_site(atom, mode, z: float) -> Site:
    rabi = rabi_frequency(mode, z)
    grad = grad_rabi(mode, z)
    bare = make_point(rabi, mode.omega_nu - atom.omega_10)
    level = dyn.primed_level(atom, mode, bare)
    return Site(z, rabi, grad, bare.detuning, level, make_point(rabi, level.detuning_shifted))


def resolve_theta(spec, site: Site) -> float:
    theta = site.point.theta_c + spec.theta_c_plus if isinstance(spec, ThetaOffset) else float(spec)
    if not 0.0 <= theta <= math.pi + 1e-15:
        raise ConfigError(f"resolved theta {theta} outside [0, pi] at z={site.z}")
    return min(theta, math.pi)


def _base_flags(site: Site, sol=None) -> list:
    flags = [k for k in ("weak", "moderate", "strong") if site.level.flags.get(k)]
    if site.level.flags.get("negative_gamma_prime"):
        flags.append("negative_gamma_prime")
    if sol is not None and sol.degenerate:
        flags.append("degenerate_confluent")
    return flags


def _strong_population(sol, t):
    p = sol.point
    cp, cm = dyn.amplitude_coeffs_strong(sol.theta, p.theta_c)
    return np.exp(-sol.level.gamma_total * t) * (cp * cp + cm * cm + 2 * cp * cm * np.cos(p.omega * t))


def run_engine(engine: str, scn: Scenario, atom, mode, site: Site, theta: float,
               t_abs: np.ndarray, ti: int, pi: int) -> Trace:
    t = t_abs - scn.time.t0
    dim = site.grad.size
    u_bare = potential_theta(theta, make_point(site.rabi, site.bare_detuning))
    if engine == "static":
        from .statics import force_theta_static
        f = force_theta_static(theta, make_point(site.rabi, site.bare_detuning), site.grad)
        return Trace(engine, ti, pi, t_abs[:1], f[None, :], np.zeros((1, dim)),
                     np.array([math.cos(theta) ** 2]), u_bare, ["static"])
    if site.rabi <= 0:
        raise EngineFailure("zero Rabi frequency at this position")
    sol = dyn.solve(site.level, site.point, theta)
    flags = _base_flags(site, sol)
    u = potential_theta(theta, site.point)
    m_dim = dim if atom.mag_im is None else atom.mag_im.size
    extra = {}
    if engine == "dynamic_modal":
        f_el = dyn.force_el_modal(sol, site.grad, t)
        f_mag = dyn.force_mag_modal(sol, atom, mode, t, m_dim)
        pop = dyn.population(sol, t)
        if site.level.flags["weak"]:
            extra["rate_expected"] = site.level.gamma_full
            extra["rate_fitted"] = orc.fit_decay_rate(t, pop)
    elif engine == "dynamic_strong":
        if not site.level.flags["strong"]:
            flags.append("regime_violation")
        f_el = dyn.force_el_strong(sol, site.grad, t, check_regime=False)
        f_mag = dyn.force_mag_strong(sol, atom, mode, t, m_dim, check_regime=False)
        pop = _strong_population(sol, t)
    elif engine == "dynamic_general":
        f_el = dyn.force_el_general(sol, mode, site.grad, t, window=scn.general_window)
        f_mag = dyn.force_mag_general(sol, atom, mode, t, window=scn.general_window)
        pop = dyn.population(sol, t)
    elif engine == "weak":
        if not site.level.flags["weak"]:
            flags.append("regime_violation")
        f_el = dyn.force_weak(site.level, site.rabi, site.grad, t, check_regime=False)
        f_mag = np.zeros((t.size, m_dim))
        pop = np.exp(-site.level.gamma_full * t)
        extra["rate_expected"] = site.level.gamma_full
        extra["rate_fitted"] = orc.fit_decay_rate(t, pop)
    elif engine == "oracle":
        f_el, f_mag, pop, extra = _run_oracle(scn, atom, site, theta, t)
    else:
        raise ConfigError(f"unknown engine {engine!r}")
    return Trace(engine, ti, pi, t_abs, np.atleast_2d(f_el), np.atleast_2d(f_mag),
                 np.asarray(pop, dtype=float), u, flags, extra)


def _run_oracle(scn: Scenario, atom, site: Site, theta: float, t: np.ndarray):
    oc = scn.oracle
    spacing = (scn.time.t_end - scn.time.t0) / (scn.time.n_samples - 1)
    every = spacing / oc.dt
    if abs(every - round(every)) > 1e-9 * every:
        raise ConfigError("oracle.dt must divide the sample spacing of the time grid")
    grid = orc.FrequencyGrid.build(scn.mode.omega_nu, scn.mode.gamma_nu, oc.n_core,
                                   oc.core_halfwidth, oc.outer_halfwidth, oc.outer_spacing)
    model = orc.ContinuumModel.from_level(grid, site.level, site.rabi)
    state = orc.init_state(theta, model, oc.photon)
    _, tr = orc.evolve(state, model, oc.dt, float(t[-1]), sample_every=int(round(every)))
    dim = site.grad.size
    m = atom.magnetic(dim if atom.mag_im is None else atom.mag_im.size)
    extra = {"grid_points": int(grid.n_points), "omega_min": grid.omega_min,
             "omega_max": grid.omega_max, "photon": oc.photon,
             "max_norm_drift": float(np.max(np.abs(tr.norm - tr.norm[0])))}
    return (np.multiply.outer(tr.f_el, site.grad), np.multiply.outer(tr.f_mag, m),
            tr.population, extra)


def _fmt(x) -> str:
    return repr(float(x))


def trace_csv(trace: Trace, scale: float = 1.0) -> str:
    flags = ";".join(trace.flags) if trace.flags else "none"
    lines = [",".join(COLUMNS)]
    for i in range(trace.t.size):
        lines.append(",".join((
            _fmt(trace.t[i]), _fmt(trace.f_el[i, 0] / scale), _fmt(trace.f_mag[i, 0] / scale),
            _fmt(trace.population[i]), _fmt(trace.u_theta), flags,
        )))
    return "\n".join(lines) + "\n"


def _task(args):
    engine, scn, ti, pi, theta_spec, z = args
    atom, mode = build_models(scn)
    site = resolve_site(atom, mode, z)
    theta = resolve_theta(theta_spec, site)
    t_abs = np.array(scn.time_grid())
    try:
        return run_engine(engine, scn, atom, mode, site, theta, t_abs, ti, pi), None
    except ConfigError:
        raise
    except (ValueError, ArithmeticError, RuntimeError) as exc:
        return None, f"{type(exc).__name__}: {exc}"


def _clean(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, complex):
        return [_clean(obj.real), _clean(obj.imag)]
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return _clean(obj.item())
    return obj


def site_summary(atom, mode, site: Site, thetas) -> dict:
    lv = site.level
    out = {
        "z": site.z, "rabi": site.rabi, "grad_rabi": site.grad, "bare_detuning": site.bare_detuning,
        "detuning_shifted": lv.detuning_shifted, "delta_shift": lv.delta_shift,
        "gamma_prime": lv.gamma_prime, "gamma_full": lv.gamma_full, "gamma_total": lv.gamma_total,
        "omega_tilde": lv.omega_tilde, "theta_c": site.point.theta_c, "omega": site.point.omega,
        "correction_factor": dyn.correction_factor(lv, site.rabi) if site.rabi > 0 else None,
        "regimes": dict(lv.flags), "iterations": lv.iterations, "thetas": [],
    }
    for theta in thetas:
        entry = {"theta": theta}
        if site.rabi > 0:
            sol = dyn.solve(lv, site.point, theta)
            entry.update(roots=sol.roots, degenerate=sol.degenerate)
            if not sol.degenerate:
                entry["coeffs"] = sol.coeffs
                entry["invariants"] = sol.invariants()
        out["thetas"].append(entry)
    return out


def _comparisons(traces: list) -> list:
    """Closed-form versus oracle discrepancy for every matching pair."""
    by_key = {(tr.engine, tr.theta_index, tr.position_index): tr for tr in traces}
    report = []
    for (engine, ti, pi), tr in sorted(by_key.items()):
        if engine != "oracle":
            continue
        ref = by_key.get(("dynamic_modal", ti, pi))
        if ref is None:
            continue
        dpsi = np.max(np.abs(np.sqrt(tr.population) - np.sqrt(ref.population)))
        scale = np.max(np.abs(ref.f_el))
        df = np.max(np.abs(tr.f_el - ref.f_el)) / scale if scale > 0 else float("nan")
        report.append({"theta_index": ti, "position_index": pi, "max_abs_psi1_diff": float(dpsi),
                       "max_rel_force_diff": float(df)})
    return report


def run_scenario(scn: Scenario, out_dir, normalize: str | None = None,
                 engines: list | None = None) -> dict:
    normalize = normalize or scn.normalize
    engines = engines or scn.engines
    atom, mode = build_models(scn)
    positions = scn.position_list()
    sites = [resolve_site(atom, mode, z) for z in positions]
    resolved = [[resolve_theta(spec, s) for spec in scn.thetas] for s in sites]
    tasks = [(e, scn, ti, pi, spec, z)
             for pi, z in enumerate(positions)
             for ti, spec in enumerate(scn.thetas)
             for e in engines]
    if scn.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=scn.jobs) as pool:
            results = list(pool.map(_task, tasks))
    else:
        results = [_task(a) for a in tasks]

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files, failures, traces = [], [], []
    for (engine, _, ti, pi, _, _), (trace, err) in zip(tasks, results):
        if err is not None:
            failures.append({"engine": engine, "theta_index": ti, "position_index": pi, "error": err})
            continue
        scale = 1.0
        if normalize == "Fplus":
            fp = float(np.linalg.norm(dyn.f_plus(sites[pi].point, sites[pi].grad)))
            if fp > 0:
                scale = fp
            else:
                trace.flags.append("normalization_undefined")
        (out / trace.filename).write_text(trace_csv(trace, scale), encoding="utf-8")
        traces.append(trace)
        files.append({"file": trace.filename, "engine": engine, "theta_index": ti,
                      "position_index": pi, "theta": resolved[pi][ti], "scale": scale,
                      "flags": trace.flags, **trace.extra})
    meta = {
        "scenario": scn.model_dump(mode="json"),
        "normalize": normalize,
        "engines": list(engines),
        "conventions": CONVENTIONS,
        "sites": [site_summary(atom, mode, s, th) for s, th in zip(sites, resolved)],
        "files": files,
        "failures": failures,
        "comparisons": _comparisons(traces),
    }
    text = json.dumps(_clean(meta), indent=2, sort_keys=True, allow_nan=False) + "\n"
    (out / "metadata.json").write_text(text, encoding="utf-8")
    return meta


def default_out_dir() -> str:
    return os.environ.get("CPFORCE_OUT", "cpforce_out")
