"""Hypocoercive functionals, energy-identity residuals and decay-rate fits.

Time weight w(t) = min(1, t / tau).  For parameters beta, gamma:

    |||h|||^2 = ||h||^2 + g1 tau^b1 w ||Ah||^2 + g2 tau^b2 w^3 ||Ch||^2
                + 2 g3 tau^b3 w^2 <Ah, Ch>
    D        = tau^-1 ||Ah||^2 + g1 tau^(b1-1) w ||A*.A h||^2
                + g2 tau^(b2-1) w^3 ||ACh||^2 + g3 tau^b3 w^2 ||Ch||^2
    E_func   = |||h|||^2 + delta^2 (1 + g1 tau^b1 w) ||E||^2
"""
import csv
import warnings
from dataclasses import asdict, dataclass, fields

import numpy as np
import scipy.linalg

from .field import solve_field
from .phase_space import lower, norms_bundle
from .spectral import integrate

BETA_PRESETS = {
    "diffusive": (0.0, 2.0, 1.0),
    "collisional": (-8.0 / 15.0, 2.0 / 5.0, -1.0 / 15.0),
}


@dataclass
class HypoParams:
    beta: tuple
    gamma: tuple
    epsilon: float
    regime: str

    @property
    def c0(self):
        g1, g2, g3 = self.gamma
        return 1.0 - g3 / np.sqrt(g1 * g2)


def beta_condition_holds(beta, regime):
    b1, b2, b3 = beta
    if regime == "diffusive":
        return max(1.0, 0.5 * (b1 + b2)) <= b3 + 1e-12 and b3 <= min(2 * b1 + 1, b2 - 1) + 1e-12
    if regime == "collisional":
        return min(1.0, 0.5 * (b1 + b2)) >= b3 - 1e-12 and b3 >= max(2 * b1 + 1, b2 - 1) - 1e-12
    raise ValueError(f"unknown regime {regime!r}")


def select_gamma(epsilon=0.05, beta="diffusive", regime=None):
    """gamma = (eps, eps^2, eps^(7/4)) together with the chosen exponents.

    beta is a preset name or an explicit triple.  Exponents outside the
    admissible range for the regime only trigger a warning, so that
    borderline choices can still be explored.
    """
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    if isinstance(beta, str):
        if beta not in BETA_PRESETS:
            raise ValueError(f"unknown beta preset {beta!r}")
        regime = regime or beta
        beta = BETA_PRESETS[beta]
    else:
        beta = tuple(float(b) for b in beta)
        if len(beta) != 3:
            raise ValueError("beta must have three entries")
        regime = regime or "diffusive"
    if not beta_condition_holds(beta, regime):
        warnings.warn(f"beta={beta} violates the admissibility conditions of the {regime} regime")
    gamma = (epsilon, epsilon**2, epsilon**1.75)
    p = HypoParams(beta=tuple(beta), gamma=gamma, epsilon=float(epsilon), regime=regime)
    if p.c0 < 0.05:
        warnings.warn(f"equivalence constant c0={p.c0:.3g} is close to zero")
    return p


def default_hypo(tau):
    return select_gamma(0.05, "diffusive" if tau <= 1 else "collisional")


@dataclass
class FunctionalSample:
    t: float
    w: float
    norm_h2: float
    norm_Ah2: float
    norm_Ch2: float
    cross_AC: float
    norm_A2h2: float
    norm_ACh2: float
    norm_AsAh2: float
    field_energy: float
    triple_norm: float
    E_func: float
    D_diss: float


def field_energy(E):
    return float(integrate(np.sum(E * E, axis=0)))


def sample_functionals(h, E, p, tau, delta, t, eq, norms=None):
    nb = norms or norms_bundle(h, eq)
    g1, g2, g3 = p.gamma
    b1, b2, b3 = p.beta
    w = min(1.0, t / tau)
    triple2 = (nb.norm_h2 + g1 * tau**b1 * w * nb.norm_Ah2 + g2 * tau**b2 * w**3 * nb.norm_Ch2
               + 2 * g3 * tau**b3 * w**2 * nb.cross_AC)
    D = (nb.norm_Ah2 / tau + g1 * tau ** (b1 - 1) * w * nb.norm_AsAh2
         + g2 * tau ** (b2 - 1) * w**3 * nb.norm_ACh2 + g3 * tau**b3 * w**2 * nb.norm_Ch2)
    fe = field_energy(E) if E is not None else 0.0
    d2 = delta**2 if np.isfinite(delta) else 0.0
    Ef = triple2 + d2 * (1 + g1 * tau**b1 * w) * fe
    return FunctionalSample(t=float(t), w=w, norm_h2=nb.norm_h2, norm_Ah2=nb.norm_Ah2,
                            norm_Ch2=nb.norm_Ch2, cross_AC=nb.cross_AC, norm_A2h2=nb.norm_A2h2,
                            norm_ACh2=nb.norm_ACh2, norm_AsAh2=nb.norm_AsAh2, field_energy=fe,
                            triple_norm=float(np.sqrt(max(triple2, 0.0))), E_func=float(Ef),
                            D_diss=float(D))


def write_samples_csv(samples, path):
    names = [f.name for f in fields(FunctionalSample)]
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(names)
        for s in samples:
            d = asdict(s)
            wr.writerow([repr(float(d[k])) for k in names])


def read_samples_csv(path):
    with open(path) as fh:
        rd = csv.DictReader(fh)
        return [FunctionalSample(**{k: float(v) for k, v in row.items()}) for row in rd]


def write_plot_script(csv_path, script_path):
    """Companion gnuplot script for a functional-sample CSV."""
    with open(script_path, "w") as fh:
        fh.write("set datafile separator ','\n")
        fh.write("set key autotitle columnhead\n")
        fh.write("set logscale y\n")
        fh.write("set xlabel 't'\n")
        fh.write(f"plot '{csv_path}' using 1:3 with lines, '' using 1:12 with lines, "
                 f"'' using 1:13 with lines\n")


# energy-identity terms ---------------------------------------------------

@dataclass
class QRTerms:
    Q_A: float
    Q_C: float
    Q_AC: float
    Q_AC_tilde: float
    R0: float
    R_A: float
    R_C: float
    R_AC: float


def _field_of(state, eq, delta, active):
    if not active or state is None:
        return np.zeros((2,) + eq.phi.shape)
    return solve_field(eq.weight * state.coeffs[0, 0], delta, check_mean=False)


def compute_QR_terms(h, eq, tau, delta, g=None, g_tilde=None, field_active=True):
    """Linear (Q) and nonlinear (R) source terms of the four energy identities.

    E is generated by h.  The nonlinear terms use the state g and the field
    generated by g_tilde; both default to h (the self-consistent problem).
    Index contractions follow the ladder commutators, e.g. the pairing
    <A^2 h, E C g> is sum_ij <A_j A_i h, E_j C_i g>.
    """
    grid = h.disc.grid
    w = eq.weight
    c = h.coeffs
    g = h if g is None else g
    g_tilde = g if g_tilde is None else g_tilde
    gc = g.coeffs

    def ip(a, b):
        return float(integrate(np.sum(a * b, axis=(0, 1)) * w))

    def ipx(f, a):
        # int f a exp(-phi) dx for spatial fields
        return float(integrate(f * a * w))

    E = _field_of(h, eq, delta, field_active)
    Et = _field_of(g_tilde, eq, delta, field_active)
    dE = [[grid.deriv(E[j], i) for j in range(2)] for i in range(2)]
    dEt = [[grid.deriv(Et[j], i) for j in range(2)] for i in range(2)]
    H = eq.hess_phi

    Ah = [lower(c, i) for i in range(2)]
    Ch = [grid.deriv(c, i) for i in range(2)]
    AAh = [[lower(Ah[i], j) for j in range(2)] for i in range(2)]   # [i][j] = A_j A_i h
    ACh = [[lower(Ch[i], j) for j in range(2)] for i in range(2)]   # [i][j] = A_j C_i h
    Ag = [lower(gc, i) for i in range(2)]
    Cg = [grid.deriv(gc, i) for i in range(2)]
    e = [(1, 0), (0, 1)]

    Q_A = -sum(ip(Ch[i], Ah[i]) for i in range(2))
    hessA = sum(ip(H[i, j] * Ah[j], Ch[i]) for i in range(2) for j in range(2))
    fieldC = sum(ipx(dE[i][j], Ch[i][e[j]]) for i in range(2) for j in range(2))
    Q_C = hessA + fieldC

    Qt = (sum(ip(H[i, j] * Ah[j], Ah[i]) for i in range(2) for j in range(2))
          + sum(ipx(E[i], Ch[i][0, 0]) for i in range(2))
          + sum(ipx(dE[i][j], Ah[i][e[j]]) for i in range(2) for j in range(2)))
    cross = sum(ip(Ah[i], Ch[i]) for i in range(2))
    a2ac = sum(ip(AAh[i][j], ACh[i][j]) for i in range(2) for j in range(2))
    Q_AC = -(cross + 2 * a2ac) / tau + Qt

    R0 = sum(ip(Ah[i], Et[i] * gc) for i in range(2))
    R_A = R0 + sum(ip(AAh[i][j], Et[j] * Ag[i]) for i in range(2) for j in range(2))
    R_C = sum(ip(ACh[i][j], Et[j] * Cg[i]) + ip(ACh[i][j], dEt[i][j] * gc)
              for i in range(2) for j in range(2))
    R_AC = (sum(ip(AAh[i][j], Et[j] * Cg[i]) + ip(AAh[i][j], dEt[i][j] * gc)
                + ip(ACh[i][j], Et[j] * Ag[i]) for i in range(2) for j in range(2))
            + sum(ip(Ch[i], Et[i] * gc) for i in range(2)))
    return QRTerms(Q_A=Q_A, Q_C=Q_C, Q_AC=Q_AC, Q_AC_tilde=Qt, R0=R0, R_A=R_A, R_C=R_C, R_AC=R_AC)


@dataclass
class IdentityTerms:
    """Functionals and right-hand sides of the four identities at one state.

    Identity k reads  d/dt F[k] = rhs[k].
    """
    F: tuple
    rhs: tuple
    scale: tuple


def identity_terms(h, eq, tau, delta, g=None, g_tilde=None, field_active=True):
    nb = norms_bundle(h, eq)
    E = _field_of(h, eq, delta, field_active)
    fe = field_energy(E) * (delta**2 if field_active else 0.0)
    qr = compute_QR_terms(h, eq, tau, delta, g, g_tilde, field_active)
    F = (0.5 * (nb.norm_h2 + fe), 0.5 * (nb.norm_Ah2 + fe), 0.5 * nb.norm_Ch2, nb.cross_AC)
    diss = (nb.norm_Ah2 / tau, (nb.norm_Ah2 + nb.norm_A2h2) / tau, nb.norm_ACh2 / tau,
            nb.norm_Ch2)
    Q = (0.0, qr.Q_A, qr.Q_C, qr.Q_AC)
    R = (qr.R0, qr.R_A, qr.R_C, qr.R_AC)
    rhs = tuple(-d + q + r for d, q, r in zip(diss, Q, R))
    scale = tuple(abs(d) + abs(q) + abs(r) for d, q, r in zip(diss, Q, R))
    return IdentityTerms(F=F, rhs=rhs, scale=scale)


@dataclass
class ResidualReport:
    times: np.ndarray
    residuals: np.ndarray   # (n_mid, 4) absolute
    relative: np.ndarray    # (n_mid, 4)

    @property
    def max_abs(self):
        return np.max(np.abs(self.residuals), axis=0)

    @property
    def max_rel(self):
        return np.max(np.abs(self.relative), axis=0)

    @property
    def rms(self):
        return np.sqrt(np.mean(self.residuals**2, axis=0))


def energy_identity_residuals(traj, eq=None, source=None):
    """Residuals of the four identities along a recorded trajectory.

    The time derivative is the centered difference over neighbouring
    records; the right-hand side is evaluated at the middle record.  Only
    records with uniform spacing on both sides are used.
    """
    eq = eq or traj.eq
    cfg = traj.config
    states = traj.states
    if states is None or len(states) < 3:
        raise ValueError("energy-identity residuals need at least three recorded states")
    times = np.asarray(traj.times)
    active = cfg.mode != "linear_vfp"
    source = source or cfg.frozen_source
    terms = []
    for t, h in zip(times, states):
        if cfg.mode == "frozen":
            g, gt = source.at(t)
        else:
            g = gt = None
        terms.append(identity_terms(h, eq, cfg.tau, cfg.delta, g, gt, active))
    mid_t, res, rel = [], [], []
    for k in range(1, len(times) - 1):
        dl, dr = times[k] - times[k - 1], times[k + 1] - times[k]
        if abs(dl - dr) > 1e-9 * max(dl, dr):
            continue
        r = []
        s = []
        for i in range(4):
            dF = (terms[k + 1].F[i] - terms[k - 1].F[i]) / (dl + dr)
            r.append(dF - terms[k].rhs[i])
            s.append(abs(dF) + terms[k].scale[i])
        mid_t.append(times[k])
        res.append(r)
        rel.append([ri / si if si > 0 else 0.0 for ri, si in zip(r, s)])
    return ResidualReport(times=np.array(mid_t), residuals=np.array(res), relative=np.array(rel))


def residual_orders(reports, ratio=2.0):
    """Observed convergence orders between successive refinements.

    Each report comes from a run with the step (and record spacing) divided
    by ``ratio`` relative to the previous one.  RMS residuals are compared on
    the record times of the coarsest run so that every level sees the same
    stretch of the trajectory.  Returns an array (n_levels - 1, 4).
    """
    common = reports[0].times
    rms = []
    for rep in reports:
        idx = [int(np.argmin(np.abs(rep.times - t))) for t in common]
        if not np.allclose(rep.times[idx], common, rtol=0, atol=1e-9):
            raise ValueError("refined runs do not share the coarse record times")
        rms.append(np.sqrt(np.mean(rep.residuals[idx] ** 2, axis=0)))
    rms = np.array(rms)
    return np.log(rms[:-1] / rms[1:]) / np.log(ratio)


def instantaneous_identity_residuals(h, rhs, eq, tau, delta, g=None, g_tilde=None,
                                     field_active=True):
    """Identity residuals with the exact time derivative along a given rhs.

    ``rhs`` is dh/dt at the state h.  This removes time-discretization error
    and isolates the semi-discrete consistency of the identities.
    """
    nb_terms = identity_terms(h, eq, tau, delta, g, g_tilde, field_active)
    eps = 1e-6
    hp = h.like(h.coeffs + eps * rhs.coeffs)
    hm = h.like(h.coeffs - eps * rhs.coeffs)
    Fp = identity_terms(hp, eq, tau, delta, g, g_tilde, field_active).F
    Fm = identity_terms(hm, eq, tau, delta, g, g_tilde, field_active).F
    out = []
    for i in range(4):
        dF = (Fp[i] - Fm[i]) / (2 * eps)
        out.append((dF - nb_terms.rhs[i]) / (abs(dF) + nb_terms.scale[i]))
    return np.array(out)


# decay rates -------------------------------------------------------------

@dataclass
class RateFit:
    rate: float
    intercept: float
    r2: float
    window: tuple
    n_points: int


def fit_decay_rate(times, values, tau=0.0, window=None, min_points=5):
    """Least-squares slope of -log(value) against t.

    Default window is [max(tau, 0.1 t_end), t_end].
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if window is None:
        window = (max(tau, 0.1 * times[-1]), times[-1])
    sel = (times >= window[0] - 1e-12) & (times <= window[1] + 1e-12)
    t, v = times[sel], values[sel]
    if len(t) < min_points:
        raise ValueError(f"only {len(t)} samples in the fit window {window}")
    if np.any(v <= 0):
        raise ValueError("decay fit needs strictly positive values")
    y = -np.log(v)
    slope, icpt = np.polyfit(t, y, 1)
    pred = slope * t + icpt
    ss = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum((y - pred) ** 2) / ss if ss > 0 else 1.0
    return RateFit(rate=float(slope), intercept=float(icpt), r2=float(r2),
                   window=tuple(float(x) for x in window), n_points=int(len(t)))


def fit_power_law(xs, ys):
    """Slope of log y against log x."""
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


def toy_matrix(tau):
    """Generator of X' = V, V' = -X - V / tau."""
    return np.array([[0.0, 1.0], [-1.0, -1.0 / tau]])


def toy_decay_rate(tau):
    """Exact decay rate: minus the largest real part of the eigenvalues."""
    disc = 1.0 / tau**2 - 4.0
    if disc >= 0:
        return 0.5 * (1.0 / tau - np.sqrt(disc))
    return 0.5 / tau


def toy_fitted_rate(tau, t_end=None, n=400):
    """Decay rate of the toy model fitted from its propagated solution norm."""
    rate0 = toy_decay_rate(tau)
    t_end = t_end or 60.0 / rate0
    ts = np.linspace(0.0, t_end, n)
    M = toy_matrix(tau)
    # start on the slow eigenvector in the overdamped case
    lam, vec = np.linalg.eig(M)
    # (at critical damping the eigenvector still decays as a pure exponential)
    overdamped = 1.0 / tau**2 >= 4
    x0 = np.real(vec[:, np.argmax(lam.real)]) if overdamped else np.array([1.0, 0.0])
    if overdamped:
        norms = [np.linalg.norm(scipy.linalg.expm(M * t) @ x0) for t in ts]
        return fit_decay_rate(ts, norms, window=(0.0, t_end)).rate
    # underdamped: the norm oscillates, so fit the peaks of the energy
    # envelope |x|^2 e^{t/tau} which is exactly periodic
    dt_per = 2 * np.pi / np.sqrt(4.0 - 1.0 / tau**2)
    ts = np.arange(0, 40) * dt_per
    norms = [np.linalg.norm(scipy.linalg.expm(M * t) @ x0) for t in ts]
    return fit_decay_rate(ts, norms, window=(0.0, ts[-1])).rate


def poincare_ratio(h, eq):
    nb = norms_bundle(h, eq)
    den = nb.norm_Ah2 + nb.norm_Ch2
    if not den > 0:
        raise ValueError("Poincare ratio undefined: h is constant in x and v")
    return nb.norm_h2 / den


def lyapunov_violations(samples, tau, rel_slack=1e-6):
    """Times t >= tau where E_func increased beyond the relative slack."""
    out = []
    prev = None
    for s in samples:
        if s.t < tau - 1e-12:
            continue
        if prev is not None and s.E_func > prev.E_func * (1 + rel_slack):
            out.append((s.t, s.E_func, prev.E_func))
        prev = s
    return out

