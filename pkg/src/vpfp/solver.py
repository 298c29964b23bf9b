"""Time integration of the perturbation equation.

    d_t h + (1/tau) A*.A h + B h - E.A*(1) = E.A* h          (nonlinear)
    d_t h + (1/tau) A*.A h + B h = 0                         (linear_vfp)
    d_t h + (1/tau) A*.A h + B h - E.v = Et.A* g             (frozen)

where E is generated by h and, in the frozen problem, g and the field Et
(generated by g_tilde) come from a prescribed source.

Each step is a Strang splitting: half a step of the exact Fokker-Planck
decay exp(-|n| dt / 2 tau) on every Hermite coefficient, a classical RK4
step of the remaining terms, and another half step of decay.  Between
records the state is kept as spatial Fourier coefficients, so linear
streaming costs no transforms.  Pointwise products with phi_inf, E and g
go through the (optionally dealiased) product grid.
"""
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .diagnostics import default_hypo, sample_functionals
from .field import compute_moments
from .phase_space import SpectralState, mass, norms_bundle, tail_mass

MODES = ("linear_vfp", "nonlinear", "frozen")


class NumericalAbort(RuntimeError):
    """Raised when the integration produces non-finite or runaway values."""

    def __init__(self, reason, time, max_coeff):
        super().__init__(f"{reason} at t={time:.6g} (max |coeff| = {max_coeff:.3e})")
        self.reason = reason
        self.time = time
        self.max_coeff = max_coeff


def max_speed(n_v):
    return math.sqrt(2 * n_v + 1)


def cfl_dt(disc, cfl):
    return cfl * (1.0 / disc.n_x) / max_speed(disc.n_v)


@dataclass
class SolverConfig:
    tau: float
    delta: float = 1.0
    t_end: float = 1.0
    dt: Optional[float] = None
    cfl: float = 0.4
    mode: str = "nonlinear"
    record_every: int = 10
    frozen_source: object = None
    hypo: object = None
    store_states: bool = True
    growth_limit: float = 1e6

    def validate(self, disc):
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if not self.t_end > 0:
            raise ValueError("t_end must be positive")
        if not 0 < self.cfl <= 1:
            raise ValueError("cfl must lie in (0, 1]")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.mode == "frozen" and self.frozen_source is None:
            raise ValueError("frozen mode needs a frozen_source")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")
        limit = cfl_dt(disc, self.cfl)
        if self.dt is not None:
            if not self.dt > 0:
                raise ValueError("dt must be positive")
            if self.dt > limit * (1 + 1e-12):
                raise ValueError(f"dt={self.dt} exceeds the stability bound "
                                 f"cfl*dx/v_max = {limit:.6g}")

    def schedule(self, disc):
        """(number of steps, step size) landing exactly on t_end."""
        dt = self.dt if self.dt is not None else cfl_dt(disc, self.cfl)
        n = max(1, int(math.ceil(self.t_end / dt - 1e-9)))
        return n, self.t_end / n


@dataclass
class Trajectory:
    times: list
    states: Optional[list]
    macros: list
    norms: list
    samples: list
    mass: list
    tail: list
    dt: float
    n_steps: int
    config: SolverConfig
    eq: object = field(repr=False, default=None)

    def series(self, name):
        return np.array([getattr(s, name) for s in self.samples])


class FrozenSource:
    """Prescribed (g, g_tilde) on a time grid, linearly interpolated."""

    def __init__(self, times, g_states, g_tilde_states=None):
        self.times = np.asarray(times, dtype=float)
        self.g = list(g_states)
        self.gt = list(g_tilde_states) if g_tilde_states is not None else self.g
        if len(self.g) != len(self.times) or len(self.gt) != len(self.times):
            raise ValueError("source states and times differ in length")

    @classmethod
    def from_trajectory(cls, traj):
        if traj.states is None:
            raise ValueError("trajectory has no stored states")
        return cls(traj.times, traj.states)

    @classmethod
    def constant(cls, g, g_tilde=None):
        return cls([0.0, np.inf], [g, g], [g_tilde or g, g_tilde or g])

    def _interp(self, states, t):
        ts = self.times
        if t <= ts[0]:
            return states[0]
        if t >= ts[-1]:
            return states[-1]
        k = int(np.searchsorted(ts, t, side="right") - 1)
        if not np.isfinite(ts[k + 1]):
            return states[k]
        a = (t - ts[k]) / (ts[k + 1] - ts[k])
        if a == 0:
            return states[k]
        return states[k].like((1 - a) * states[k].coeffs + a * states[k + 1].coeffs)

    def at(self, t):
        return self._interp(self.g, t), self._interp(self.gt, t)


class Propagator:
    """Right-hand side and Strang step on Fourier coefficients."""

    def __init__(self, disc, eq, cfg):
        self.disc = disc
        self.eq = eq
        self.cfg = cfg
        g = disc.grid
        self.grid = g
        self.k1 = np.ascontiguousarray(g.k1)
        self.k2 = np.ascontiguousarray(g.k2)
        self.deg = disc.total_degree()
        self.field = cfg.mode in ("nonlinear", "frozen")
        self.flat = eq.is_flat
        m = g.m
        self.zero = np.zeros((m, m))
        if self.flat:
            self.gphi = (self.zero, self.zero)
        else:
            self.gphi = tuple(np.ascontiguousarray(g.to_product_grid(eq.grad_phi[i]))
                              for i in range(2))
        self.w = eq.weight
        self._buf = np.empty(disc.n_v ** 2 * m * m).reshape(disc.n_v, disc.n_v, m, m)
        self._decay_dt = None

    # fields ---------------------------------------------------------------
    def field_hat(self, hhat):
        g = self.grid
        n = self.w * g.ifft(hhat[0, 0])
        N = g.fft(n)
        pot = -g.inv_ksq * N / self.cfg.delta**2
        return 1j * g.kd[0] * pot, 1j * g.kd[1] * pot

    def field_hat_of_grid(self, c00):
        g = self.grid
        N = g.fft(self.w * c00)
        pot = -g.inv_ksq * N / self.cfg.delta**2
        return 1j * g.kd[0] * pot, 1j * g.kd[1] * pot

    def _products(self, hhat, b1, b2):
        """Spectrum of  grad(phi).A h + b.A* h."""
        hg = np.ascontiguousarray(self.grid.pad(hhat))
        kernels.ladder_mix(hg, self.gphi[0], self.gphi[1], b1, b2, self._buf)
        return self.grid.unpad(self._buf)

    def rhs(self, t, hhat):
        """Everything except the Fokker-Planck term."""
        g = self.grid
        if self.field:
            E1, E2 = self.field_hat(hhat)
            if self.cfg.mode == "nonlinear":
                out = self._products(hhat, np.ascontiguousarray(g.pad(E1)),
                                     np.ascontiguousarray(g.pad(E2)))
            elif self.flat:
                out = np.zeros_like(hhat)
            else:
                out = self._products(hhat, self.zero, self.zero)
            out[1, 0] += E1
            out[0, 1] += E2
            if self.cfg.mode == "frozen":
                gs, gts = self.cfg.frozen_source.at(t)
                Et1, Et2 = self.field_hat_of_grid(gts.coeffs[0, 0])
                gg = np.ascontiguousarray(g.to_product_grid(gs.coeffs))
                kernels.ladder_mix(gg, self.zero, self.zero,
                                   np.ascontiguousarray(g.pad(Et1)),
                                   np.ascontiguousarray(g.pad(Et2)), self._buf)
                out += g.unpad(self._buf)
        elif not self.flat:
            out = self._products(hhat, self.zero, self.zero)
        else:
            out = np.zeros_like(hhat)
        return kernels.stream_axpy(hhat, self.k1, self.k2, out, 1.0, out)

    def _linear_apply_axpy(self, z, y, c):
        """y + c L z for the linear operator L of the linear_vfp problem."""
        if self.flat:
            out = np.empty_like(z)
            return kernels.stream_axpy(z, self.k1, self.k2, y, c, out)
        out = y + c * self._products(z, self.zero, self.zero)
        return kernels.stream_axpy(z, self.k1, self.k2, out, c, out)

    def rk4(self, hhat, t, dt):
        if self.cfg.mode == "linear_vfp":
            # classical RK4 on an autonomous linear system is the degree-4
            # Taylor polynomial of exp(dt L), evaluated here in Horner form
            z = hhat
            for c in (dt / 4, dt / 3, dt / 2, dt):
                z = self._linear_apply_axpy(z, hhat, c)
            return z
        k1 = self.rhs(t, hhat)
        k2 = self.rhs(t + dt / 2, hhat + (dt / 2) * k1)
        k3 = self.rhs(t + dt / 2, hhat + (dt / 2) * k2)
        k4 = self.rhs(t + dt, hhat + dt * k3)
        return hhat + (dt / 6) * (k1 + 2 * k2 + 2 * k3 + k4)

    def step(self, hhat, t, dt):
        if self._decay_dt != dt:
            self._decay = np.exp(-self.deg * (dt / (2 * self.cfg.tau)))
            self._decay_dt = dt
        h = hhat * self._decay
        h = self.rk4(h, t, dt)
        h *= self._decay
        return h

    def to_hat(self, h):
        return self.grid.fft(h.coeffs)

    def to_state(self, hhat):
        return SpectralState(self.grid.ifft(hhat), self.disc)


def step(h, t, dt, cfg, eq):
    """Advance h by one Strang step of size dt."""
    cfg.validate(h.disc)
    p = Propagator(h.disc, eq, cfg)
    return p.to_state(p.step(p.to_hat(h), t, dt))


def _record(traj, p, hhat, t, cfg, eq, h=None):
    h = h if h is not None else p.to_state(hhat)
    active = cfg.mode != "linear_vfp"
    mac = compute_moments(h, eq, cfg.delta)
    nb = norms_bundle(h, eq)
    traj.times.append(float(t))
    if traj.states is not None:
        traj.states.append(h)
    traj.macros.append(mac)
    traj.norms.append(nb)
    traj.mass.append(mass(h, eq))
    traj.tail.append(tail_mass(h, eq))
    traj.samples.append(sample_functionals(h, mac.E if active else None, cfg.hypo, cfg.tau,
                                           cfg.delta if active else np.inf, t, eq, nb))
    return h


def run(h0, cfg, eq, callback=None):
    """Integrate from h0 to cfg.t_end and record every cfg.record_every steps.

    ``callback(t, hhat, propagator)`` is called after every step with the
    Fourier coefficients of the state; it may be used for cheap running
    integrals without storing states.
    """
    disc = h0.disc
    cfg.validate(disc)
    if cfg.hypo is None:
        cfg.hypo = default_hypo(cfg.tau)
    n_steps, dt = cfg.schedule(disc)
    p = Propagator(disc, eq, cfg)
    traj = Trajectory(times=[], states=[] if cfg.store_states else None, macros=[], norms=[],
                      samples=[], mass=[], tail=[], dt=dt, n_steps=n_steps, config=cfg, eq=eq)
    hhat = p.to_hat(h0)
    _record(traj, p, hhat, 0.0, cfg, eq)
    base = math.sqrt(traj.norms[0].norm_h2)
    if callback is not None:
        callback(0.0, hhat, p)
    for k in range(1, n_steps + 1):
        t_prev = (k - 1) * dt
        hhat = p.step(hhat, t_prev, dt)
        t = k * dt
        if not np.isfinite(hhat.sum()):
            a = np.abs(hhat)
            finite = a[np.isfinite(a)]
            raise NumericalAbort("non-finite coefficients", t,
                                 float(finite.max()) if finite.size else float("nan"))
        if callback is not None:
            callback(t, hhat, p)
        if k % cfg.record_every == 0 or k == n_steps:
            h = _record(traj, p, hhat, t, cfg, eq)
            nrm = math.sqrt(traj.norms[-1].norm_h2)
            if base > 0 and nrm > cfg.growth_limit * base:
                raise NumericalAbort("norm grew beyond the growth limit (possible transient "
                                     "growth or instability)", t, float(np.abs(h.coeffs).max()))
    return traj
