"""Rescaled-time runs and comparison with the limiting equations.

Time is rescaled as t = t_ref(tau) s.  The rules for t_ref are

    "inv_tau2": tau^-2      "inv_tau": 1/tau    "one": 1
    "tau":      tau         "tau2":    tau^2
    ("power", a): tau^a     ("fixed", T): T

and each regime label maps to one of them:
i -> inv_tau2, ii -> inv_tau, iii -> one, iv -> tau, v -> tau2.

Limits checked here:
  ii   density follows the drift-diffusion equation
           d_s rho + div(E rho - grad rho) = 0,  E = delta^-2 grad Lap^-1 (rho - rho_star)
  iii  f -> rho_0 M on compacts of s > 0
  iv   f -> homogeneous Fokker-Planck flow of f_0
  v    f -> f_0
"""
import json
import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .diagnostics import fit_decay_rate
from .field import compute_moments
from .phase_space import SpectralState
from .solver import SolverConfig, cfl_dt, run
from .spectral import get_grid, integrate, l2

REGIME_RULES = {"i": "inv_tau2", "ii": "inv_tau", "iii": "one", "iv": "tau", "v": "tau2"}


def t_ref(tau, rule):
    if isinstance(rule, (tuple, list)):
        kind, val = rule
        if kind == "power":
            return tau ** float(val)
        if kind == "fixed":
            return float(val)
        raise ValueError(f"unknown time-scale rule {rule!r}")
    table = {"inv_tau2": tau**-2, "inv_tau": 1.0 / tau, "one": 1.0, "tau": tau, "tau2": tau**2}
    if rule not in table:
        raise ValueError(f"unknown time-scale rule {rule!r}")
    return table[rule]


@dataclass
class RescaledRun:
    tau: float
    t_ref: float
    times: np.ndarray          # rescaled
    trajectory: object
    kinetic_deviation: float   # sqrt of int ||f - rho M||^2 ds
    deviation_peak: float
    deviation_final: float


def kinetic_deviation_density(c, eq):
    """||f - rho M||^2 in L^2(M^-1 dv dx): all Hermite shells except (0,0)."""
    q = np.sum(c * c, axis=(0, 1)) - c[0, 0] ** 2
    return float(integrate(q * eq.weight**2))


def run_rescaled(tau, rule, h0, eq, horizon, record_ds, delta=1.0, mode="nonlinear", cfl=0.4,
                 store_states=True, hypo=None):
    """Run the kinetic solver over rescaled time [0, horizon].

    The step is chosen in physical time from the stability bound, shortened
    so that records fall exactly every ``record_ds`` units of rescaled time.
    Alongside, the rescaled-time integral of ||f - rho M||^2 is accumulated
    at every step with the trapezoid rule.
    """
    tr_ = t_ref(tau, rule)
    n_rec = int(round(horizon / record_ds))
    if n_rec < 1 or abs(n_rec * record_ds - horizon) > 1e-9 * horizon:
        raise ValueError("horizon must be a multiple of record_ds")
    cadence = record_ds * tr_
    per = max(1, math.ceil(cadence / cfl_dt(h0.disc, cfl) - 1e-9))
    dt = cadence / per
    cfg = SolverConfig(tau=tau, delta=delta, t_end=horizon * tr_, dt=dt, cfl=cfl, mode=mode,
                       record_every=per, store_states=store_states, hypo=hypo)
    acc = {"sum": 0.0, "prev": None, "peak": 0.0, "last": 0.0}

    def accumulate(t, hhat, prop):
        c = prop.grid.ifft(hhat)
        val = kinetic_deviation_density(c, eq)
        if acc["prev"] is not None:
            acc["sum"] += 0.5 * (acc["prev"] + val) * dt / tr_
        acc["prev"] = val
        acc["peak"] = max(acc["peak"], val)
        acc["last"] = val

    traj = run(h0, cfg, eq, callback=accumulate)
    times = np.array(traj.times) / tr_
    return RescaledRun(tau=tau, t_ref=tr_, times=times, trajectory=traj,
                       kinetic_deviation=math.sqrt(acc["sum"]), deviation_peak=acc["peak"],
                       deviation_final=acc["last"])


# limiting equations ------------------------------------------------------

@dataclass
class DDTrajectory:
    times: np.ndarray
    rho: list


def solve_drift_diffusion(rho0, rho_star, delta, t_end, dt=1e-4, record_times=None):
    """Second-order IMEX (SBDF2) spectral solve of the drift-diffusion equation.

    Diffusion is implicit in Fourier space, the drift is explicit with
    alias-free products.  Exact steady states of the semi-discrete equation
    are steady states of the scheme.
    """
    rho0 = np.asarray(rho0, dtype=float)
    rs = rho_star.values if hasattr(rho_star, "values") else np.asarray(rho_star)
    n = rho0.shape[0]
    g = get_grid(n, dealias=True)
    if record_times is None:
        record_times = np.array([0.0, t_end])
    record_times = np.asarray(record_times, dtype=float)
    n_steps = max(1, int(math.ceil(t_end / dt - 1e-9)))
    dt = t_end / n_steps
    rec_steps = np.rint(record_times / dt).astype(int)
    if np.any(np.abs(rec_steps * dt - record_times) > 1e-9 * max(t_end, 1.0)):
        raise ValueError("record times must be multiples of the step")

    def drift_hat(r):
        E = g.grad(g.inv_laplacian(r - rs)) / delta**2
        flux = np.stack([g.product(E[0], r), g.product(E[1], r)])
        return -(1j * g.kd[0] * g.fft(flux[0]) + 1j * g.kd[1] * g.fft(flux[1]))

    wanted = set(rec_steps.tolist())
    out_t, out_r = [], []

    def record(k, r):
        if k in wanted:
            out_t.append(k * dt)
            out_r.append(r.copy())

    record(0, rho0)
    R_prev = g.fft(rho0)
    N_prev = drift_hat(rho0)
    # first step: IMEX Euler
    R = (R_prev + dt * N_prev) / (1 + dt * g.ksq)
    r = g.ifft(R)
    record(1, r)
    denom = 3 + 2 * dt * g.ksq
    for k in range(2, n_steps + 1):
        N_cur = drift_hat(r)
        R_new = (4 * R - R_prev + 2 * dt * (2 * N_cur - N_prev)) / denom
        R_prev, R, N_prev = R, R_new, N_cur
        r = g.ifft(R)
        record(k, r)
    if np.min(r) < 0:
        warnings.warn("drift-diffusion density became negative")
    return DDTrajectory(times=np.array(out_t), rho=out_r)


def solve_homogeneous_fp(h0, t, time_scale=1.0):
    """Exact homogeneous Fokker-Planck flow: h_n(t) = h_n(0) exp(-|n| t / time_scale)."""
    deg = h0.disc.total_degree()
    return SpectralState(h0.coeffs * np.exp(-deg * (t / time_scale)), h0.disc)


def corrected_density(n, j, tau):
    """n - tau div j."""
    g = get_grid(n.shape[0])
    return n - tau * g.div(j)


def f_distance(a, b, eq):
    """L^2(M^-1) distance of f_inf (1 + a) and f_inf (1 + b)."""
    d = a - b
    return math.sqrt(float(integrate(np.sum(d * d, axis=(0, 1)) * eq.weight**2)))


# moment equations ----------------------------------------------------------

@dataclass
class MomentResiduals:
    times: np.ndarray
    continuity: np.ndarray
    momentum: np.ndarray
    continuity_scale: np.ndarray
    momentum_scale: np.ndarray


def moment_equation_residuals(rr, eq, field_active=True):
    """Continuity and momentum residuals along a rescaled run.

        d_s n + t_ref div j = 0
        (1/t_ref) d_s j + j / tau = n E_inf + (rho_inf + n) E - grad n - div S

    Time derivatives are centered differences of the recorded moments.
    """
    g = get_grid(eq.n)
    macs = rr.trajectory.macros
    ts = rr.times
    Einf = -eq.grad_phi
    out = MomentResiduals([], [], [], [], [])
    for k in range(1, len(ts) - 1):
        dl, dr = ts[k] - ts[k - 1], ts[k + 1] - ts[k]
        if abs(dl - dr) > 1e-9 * max(dl, dr):
            continue
        m = macs[k]
        dn = (macs[k + 1].n - macs[k - 1].n) / (dl + dr)
        dj = (macs[k + 1].j - macs[k - 1].j) / (dl + dr)
        divj = g.div(m.j)
        cont = dn + rr.t_ref * divj
        divS = np.stack([g.div(m.S[0]), g.div(m.S[1])])
        E = m.E if field_active else 0.0
        force = m.n * Einf + (eq.rho + m.n) * E - g.grad(m.n) - divS
        mom = dj / rr.t_ref + m.j / rr.tau - force
        out.times.append(ts[k])
        out.continuity.append(l2(cont))
        out.momentum.append(l2(mom))
        out.continuity_scale.append(l2(dn) + rr.t_ref * l2(divj))
        out.momentum_scale.append(l2(dj) / rr.t_ref + l2(m.j) / rr.tau + l2(force))
    return MomentResiduals(*(np.array(v) for v in (out.times, out.continuity, out.momentum,
                                                    out.continuity_scale, out.momentum_scale)))


def fit_convergence_order(tau_list, errors):
    """Slope of log(error) against log(tau)."""
    tau = np.asarray(tau_list, float)
    err = np.asarray(errors, float)
    if np.any(tau <= 0) or np.any(~(err > 0)):
        raise ValueError("convergence fit needs positive tau values and errors")
    return float(np.polyfit(np.log(tau), np.log(err), 1)[0])


def fit_r2(tau_list, errors):
    """Coefficient of determination of the log-log convergence fit."""
    x = np.log(np.asarray(tau_list, float))
    y = np.log(np.asarray(errors, float))
    if len(x) < 3:
        return 1.0
    pred = np.polyval(np.polyfit(x, y, 1), x)
    ss = np.sum((y - y.mean()) ** 2)
    return float(1.0 - np.sum((y - pred) ** 2) / ss) if ss > 0 else 1.0


# studies -------------------------------------------------------------------

@dataclass
class RegimeReport:
    regime: str
    rule: object
    tau_list: list
    errors: list
    order: float
    monotone: bool
    extra: dict = field(default_factory=dict)
    r2: float = 1.0
    horizon: float = 0.0

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(asdict(self), fh, indent=2, sort_keys=True)


def diffusion_limit_study(tau_list, h0, eq, horizon=0.3, record_ds=0.005, delta=None, cfl=0.4,
                          dd_dt=2e-5):
    """Regime ii: kinetic deviation and density errors against drift-diffusion."""
    delta = eq.delta if delta is None else delta
    n0 = eq.weight * h0.coeffs[0, 0]
    rec = np.arange(int(round(horizon / record_ds)) + 1) * record_ds
    dd = solve_drift_diffusion(eq.rho + n0, eq.rho_star, delta, horizon, dt=dd_dt, record_times=rec)
    n_as = [r - eq.rho for r in dd.rho]
    dev, err_n, err_nt, decayed = [], [], [], []
    for tau in tau_list:
        rr = run_rescaled(tau, "inv_tau", h0, eq, horizon, record_ds, delta=delta, cfl=cfl,
                          store_states=False)
        en = max(l2(m.n - na) for m, na in zip(rr.trajectory.macros, n_as))
        ent = max(l2(corrected_density(m.n, m.j, tau) - na)
                  for m, na in zip(rr.trajectory.macros, n_as))
        dev.append(rr.kinetic_deviation)
        err_n.append(en)
        err_nt.append(ent)
        decayed.append(rr.deviation_final <= 1e-8 * rr.deviation_peak)
    return RegimeReport(
        regime="ii", rule="inv_tau", tau_list=list(tau_list), errors=dev,
        order=fit_convergence_order(tau_list, dev),
        monotone=bool(np.all(np.diff(dev) < 0)),
        extra={"density_error": err_n, "corrected_density_error": err_nt,
               "corrected_density_order": fit_convergence_order(tau_list, err_nt),
               "density_order": fit_convergence_order(tau_list, err_n),
               "integrand_decayed": decayed},
        r2=fit_r2(tau_list, dev), horizon=horizon)


def regime_errors(regime, tau, h0, eq, horizon=1.0, record_ds=0.05, window=None, delta=None,
                  cfl=0.4):
    """Sup over the window of the L^2(M^-1) distance to the regime's limit."""
    delta = eq.delta if delta is None else delta
    rule = REGIME_RULES[regime]
    rr = run_rescaled(tau, rule, h0, eq, horizon, record_ds, delta=delta, cfl=cfl)
    lo, hi = window or (0.0, horizon)
    errs = []
    for s, h in zip(rr.times, rr.trajectory.states):
        if s < lo - 1e-12 or s > hi + 1e-12:
            continue
        if regime == "iii":
            lim = np.zeros_like(h0.coeffs)
            lim[0, 0] = h0.coeffs[0, 0]
        elif regime == "iv":
            lim = solve_homogeneous_fp(h0, s, 1.0).coeffs
        elif regime == "v":
            lim = h0.coeffs
        else:
            raise ValueError(f"no pointwise limit for regime {regime!r}")
        errs.append(f_distance(h.coeffs, lim, eq))
    return max(errs)


DEFAULT_WINDOWS = {"iii": (0.1, 0.5), "iv": (0.0, 1.0), "v": (0.0, 1.0)}


def regime_study(regime, tau_list, h0, eq, horizon=None, record_ds=0.05, window=None, delta=None,
                 cfl=0.4):
    window = window or DEFAULT_WINDOWS[regime]
    horizon = horizon or window[1]
    errs = [regime_errors(regime, tau, h0, eq, horizon, record_ds, window, delta, cfl)
            for tau in tau_list]
    return RegimeReport(regime=regime, rule=REGIME_RULES[regime], tau_list=list(tau_list),
                        errors=errs, order=fit_convergence_order(tau_list, errs),
                        monotone=bool(np.all(np.diff(errs) < 0)),
                        extra={"window": list(window)}, r2=fit_r2(tau_list, errs),
                        horizon=horizon)


def rescaled_decay_rate(tau, rule, h0, eq, horizon, record_ds, delta=None, cfl=0.4,
                        mode="linear_vfp"):
    """Decay rate of ||h|| in rescaled time, fitted on the second half of the run."""
    delta = eq.delta if delta is None else delta
    rr = run_rescaled(tau, rule, h0, eq, horizon, record_ds, delta=delta, cfl=cfl, mode=mode,
                      store_states=False)
    nh = np.sqrt(rr.trajectory.series("norm_h2"))
    return fit_decay_rate(rr.times, nh, window=(0.5 * horizon, horizon)).rate
