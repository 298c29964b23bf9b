"""Background densities and the Poisson-Boltzmann equilibrium potential.

The equilibrium potential solves

    -delta^2 Lap(phi) = exp(-phi) - rho_star   on the unit torus,

with rho_star a positive background density of unit mean.  Newton's method
is used, with a preconditioned CG inner solve and a halving line search.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg

from .spectral import get_grid, integrate, l2


class ConvergenceError(RuntimeError):
    pass


@dataclass
class DensityField:
    """Background density rho_star sampled on an n x n grid."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError("density must be a square 2D array")
        if not np.all(np.isfinite(v)):
            raise ValueError("density contains non-finite values")
        if np.any(v <= 0):
            raise ValueError("density must be strictly positive")
        self.values = v

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def mean(self):
        return float(integrate(self.values))


def grid_coords(n):
    x = np.arange(n) / n
    return np.meshgrid(x, x, indexing="ij")


def uniform_density(n):
    return DensityField(np.ones((n, n)))


def cosine_density(n, eps, kx=1, ky=0):
    """rho_star = 1 + eps cos(2 pi (kx x1 + ky x2))."""
    if abs(eps) >= 1:
        raise ValueError("|eps| must be < 1 for a positive density")
    x1, x2 = grid_coords(n)
    return DensityField(1.0 + eps * np.cos(2 * np.pi * (kx * x1 + ky * x2)))


def product_density(n, eps1, eps2):
    """rho_star = (1 + eps1 cos 2 pi x1)(1 + eps2 sin 2 pi x2)."""
    x1, x2 = grid_coords(n)
    return DensityField((1 + eps1 * np.cos(2 * np.pi * x1)) * (1 + eps2 * np.sin(2 * np.pi * x2)))


def random_smooth_density(n, seed, amplitude=0.4, band=3):
    """Positive random trigonometric density with unit mean."""
    rng = np.random.default_rng(seed)
    x1, x2 = grid_coords(n)
    pert = np.zeros((n, n))
    for k1 in range(-band, band + 1):
        for k2 in range(0, band + 1):
            if k2 == 0 and k1 <= 0:
                continue
            a, b = rng.standard_normal(2) / (1 + k1 * k1 + k2 * k2)
            arg = 2 * np.pi * (k1 * x1 + k2 * x2)
            pert += a * np.cos(arg) + b * np.sin(arg)
    pert *= amplitude / np.max(np.abs(pert))
    return DensityField(1.0 + pert)


def load_density(path):
    """Read a density grid file: header "n n", then n rows of n values."""
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ValueError(f"{path}: header must hold two integers")
        n1, n2 = (int(t) for t in header)
        if n1 != n2:
            raise ValueError(f"{path}: grid must be square, got {n1} x {n2}")
        vals = np.loadtxt(fh, ndmin=2)
    if vals.shape != (n1, n2):
        raise ValueError(f"{path}: expected {n1} x {n2} values, got {vals.shape}")
    return DensityField(vals)


def save_density(rho, path):
    n = rho.n
    with open(path, "w") as fh:
        fh.write(f"{n} {n}\n")
        np.savetxt(fh, rho.values, fmt="%.17g")


@dataclass
class PBSolverConfig:
    tol: float = 1e-10
    max_iter: int = 50
    damping: int = 20
    cg_rtol: float = 1e-13


@dataclass
class Equilibrium:
    """Equilibrium potential and the derived fields used by the solver."""

    phi: np.ndarray
    rho_star: DensityField
    delta: float
    iterations: int = 0
    residual: float = 0.0
    rho: np.ndarray = field(init=False, repr=False)
    grad_phi: np.ndarray = field(init=False, repr=False)
    hess_phi: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        g = get_grid(self.n)
        self.rho = np.exp(-self.phi)
        self.grad_phi = g.grad(self.phi)
        self.hess_phi = g.hessian(self.phi)

    @property
    def n(self):
        return self.phi.shape[0]

    @property
    def weight(self):
        """exp(-phi), the spatial weight of the inner product."""
        return self.rho

    @property
    def is_flat(self):
        return not np.any(self.grad_phi)


def pb_residual(phi, rho_star, delta):
    g = get_grid(phi.shape[0])
    return -delta**2 * g.laplacian(phi) - np.exp(-phi) + rho_star


def solve_poisson_boltzmann(rho_star, delta, cfg=None):
    """Newton solve of the Poisson-Boltzmann equation starting from phi = 0.

    Raises ValueError for a background that is not of unit mean and
    ConvergenceError when Newton stalls or runs out of iterations.
    """
    cfg = cfg or PBSolverConfig()
    if delta <= 0:
        raise ValueError("delta must be positive")
    rho = rho_star.values
    if abs(rho_star.mean - 1.0) > 1e-12:
        raise ValueError(f"background density must have unit mean, got {rho_star.mean!r}")
    n = rho_star.n
    g = get_grid(n)
    shape = (n, n)
    d2 = delta * delta

    # (-delta^2 Lap + 1)^{-1} in Fourier space
    pre_symbol = 1.0 / (d2 * g.ksq + 1.0)

    def precond(r):
        return g.ifft(pre_symbol * g.fft(r.reshape(shape))).ravel()

    M = LinearOperator((n * n, n * n), matvec=precond, dtype=float)

    phi = np.zeros(shape)
    F = pb_residual(phi, rho, delta)
    res = l2(F)
    it = 0
    while res > cfg.tol:
        if it >= cfg.max_iter:
            raise ConvergenceError(f"Newton did not converge in {cfg.max_iter} iterations "
                                   f"(residual {res:.3e})")
        w = np.exp(-phi)

        def jac(x, w=w):
            x = x.reshape(shape)
            return (-d2 * g.laplacian(x) + w * x).ravel()

        J = LinearOperator((n * n, n * n), matvec=jac, dtype=float)
        step, info = cg(J, -F.ravel(), rtol=cfg.cg_rtol, atol=0.0, maxiter=10 * n * n, M=M)
        if info < 0:
            raise ConvergenceError(f"inner CG breakdown at Newton iteration {it}")
        step = step.reshape(shape)

        s = 1.0
        for _ in range(cfg.damping):
            trial = phi + s * step
            Ft = pb_residual(trial, rho, delta)
            rt = l2(Ft)
            if np.isfinite(rt) and rt < res:
                break
            s *= 0.5
        else:
            raise ConvergenceError(f"line search failed at Newton iteration {it} "
                                   f"(residual {res:.3e})")
        phi, F, res = trial, Ft, rt
        it += 1

    return Equilibrium(phi=phi, rho_star=rho_star, delta=float(delta), iterations=it, residual=res)


def evaluate_J(phi, rho_star, delta):
    """Free energy (delta^2/2)|grad phi|^2 + phi (rho_star - 1) + log int exp(-phi)."""
    g = get_grid(phi.shape[0])
    grad = g.grad(phi)
    rho = rho_star.values if isinstance(rho_star, DensityField) else rho_star
    with np.errstate(over="ignore"):
        val = float(0.5 * delta**2 * integrate(np.sum(grad**2, axis=0))
                    + integrate(phi * (rho - 1.0))
                    + np.log(integrate(np.exp(-phi))))
    if not np.isfinite(val):
        raise FloatingPointError("free energy evaluation overflowed")
    return val


@dataclass
class BoundsReport:
    p: list
    lhs: list
    rhs: list
    holds: bool

    def rows(self):
        return list(zip(self.p, self.lhs, self.rhs))


def lp_norm(f, p):
    if np.isinf(p):
        return float(np.max(np.abs(f)))
    return float(integrate(np.abs(f) ** p) ** (1.0 / p))


def verify_equilibrium_bounds(eq, rho_star=None, p_list=(2, 4, np.inf), rtol=1e-9):
    """Check ||exp(-phi)||_p <= ||rho_star||_p for each p."""
    rho_star = rho_star or eq.rho_star
    lhs = [lp_norm(eq.rho, p) for p in p_list]
    rhs = [lp_norm(rho_star.values, p) for p in p_list]
    holds = all(a <= b * (1 + rtol) for a, b in zip(lhs, rhs))
    return BoundsReport(p=list(p_list), lhs=lhs, rhs=rhs, holds=holds)
