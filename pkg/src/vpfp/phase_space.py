"""Hermite x Fourier representation of the perturbation h(x, v).

h(x, v) = sum_n h_n(x) psi_n(v), where psi_n are the normalized probabilists'
Hermite polynomials in two velocity variables, orthonormal for the Maxwellian
weight.  Coefficients are stored as a real array of shape
(n_v, n_v, n_x, n_x): two Hermite indices, then the spatial grid.

Ladder operators act on the Hermite axes:

    A_i  psi_n = sqrt(n_i) psi_{n - e_i}          (velocity derivative)
    A*_i psi_n = sqrt(n_i + 1) psi_{n + e_i}      (dropped past n_v - 1)

and C_i is the spatial derivative.  The inner product carries the weight
exp(-phi_inf(x)).
"""
from dataclasses import dataclass, field

import numpy as np

from .spectral import get_grid, integrate


@dataclass(frozen=True)
class Discretization:
    n_x: int
    n_v: int
    dealias: bool = False

    def __post_init__(self):
        if self.n_x < 8 or self.n_x % 2:
            raise ValueError("n_x must be an even integer >= 8")
        if self.n_v < 4:
            raise ValueError("n_v must be >= 4")

    @property
    def grid(self):
        return get_grid(self.n_x, self.dealias)

    @property
    def shape(self):
        return (self.n_v, self.n_v, self.n_x, self.n_x)

    def total_degree(self):
        """|n| = n1 + n2 on the Hermite axes, shaped for broadcasting."""
        m = np.arange(self.n_v)
        return (m[:, None] + m[None, :])[:, :, None, None]


@dataclass
class SpectralState:
    coeffs: np.ndarray
    disc: Discretization
    mean_free: bool = field(default=False)

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.shape != self.disc.shape:
            raise ValueError(f"coefficient shape {self.coeffs.shape} does not match {self.disc.shape}")

    def copy(self):
        return SpectralState(self.coeffs.copy(), self.disc, self.mean_free)

    def like(self, coeffs):
        return SpectralState(coeffs, self.disc)

    def __add__(self, other):
        return self.like(self.coeffs + other.coeffs)

    def __sub__(self, other):
        return self.like(self.coeffs - other.coeffs)

    def __mul__(self, s):
        return self.like(self.coeffs * s)

    __rmul__ = __mul__


def zeros(disc):
    return SpectralState(np.zeros(disc.shape), disc)


# ladder operators on raw coefficient arrays --------------------------------

def _sqrt_up(nv, axis):
    s = np.sqrt(np.arange(1, nv, dtype=float))
    return s[:, None, None, None] if axis == 0 else s[None, :, None, None]


def lower(c, i):
    """A_i on coefficients: (A_i h)_m = sqrt(m_i + 1) h_{m + e_i}."""
    out = np.zeros_like(c)
    s = _sqrt_up(c.shape[0], i)
    if i == 0:
        out[:-1] = s * c[1:]
    else:
        out[:, :-1] = s * c[:, 1:]
    return out


def raise_(c, i):
    """A*_i on coefficients: (A*_i h)_m = sqrt(m_i) h_{m - e_i}."""
    out = np.zeros_like(c)
    s = _sqrt_up(c.shape[0], i)
    if i == 0:
        out[1:] = s * c[:-1]
    else:
        out[:, 1:] = s * c[:, :-1]
    return out


def number(c):
    """A*.A on coefficients: multiplication by |n|."""
    m = np.arange(c.shape[0])
    return c * (m[:, None] + m[None, :])[:, :, None, None]


def spatial_deriv(c, i, grid):
    return grid.deriv(c, i)


# public operators ----------------------------------------------------------

def apply_A(h):
    return [h.like(lower(h.coeffs, i)) for i in range(2)]


def apply_Astar(h):
    return [h.like(raise_(h.coeffs, i)) for i in range(2)]


def apply_C(h):
    g = h.disc.grid
    return [h.like(g.deriv(h.coeffs, i)) for i in range(2)]


def apply_FP(h):
    """A*.A h, i.e. minus the Fokker-Planck operator in Hermite variables."""
    return h.like(number(h.coeffs))


def apply_B(h, eq):
    """Transport v.grad_x h - grad(phi_inf).grad_v h."""
    g = h.disc.grid
    c = h.coeffs
    out = np.zeros_like(c)
    for i in range(2):
        d = g.deriv(c, i)
        out += lower(d, i) + raise_(d, i)
        out -= g.product(eq.grad_phi[i], lower(c, i))
    return h.like(out)


def inner_product(a, b, eq):
    """<a, b> = sum_n int a_n b_n exp(-phi_inf) dx."""
    ca = a.coeffs if isinstance(a, SpectralState) else a
    cb = b.coeffs if isinstance(b, SpectralState) else b
    return float(integrate(np.sum(ca * cb, axis=(0, 1)) * eq.weight))


def norm2(a, eq):
    return inner_product(a, a, eq)


def mass(h, eq):
    """<1; h>, the weighted mean of the (0,0) coefficient."""
    return float(integrate(h.coeffs[0, 0] * eq.weight))


def project_mean_free(h, eq):
    c = h.coeffs.copy()
    c[0, 0] -= mass(h, eq) / float(integrate(eq.weight))
    return SpectralState(c, h.disc, mean_free=True)


@dataclass
class NormsBundle:
    norm_h2: float
    norm_Ah2: float
    norm_Ch2: float
    cross_AC: float
    norm_A2h2: float
    norm_ACh2: float
    norm_AsAh2: float


def norms_bundle(h, eq):
    """All weighted norms entering the hypocoercive functionals.

    Uses that every ladder product on the truncated basis is diagonal in the
    Hermite index once squared, e.g. ||A h||^2 = sum_n |n| ||h_n||^2.
    """
    c = h.coeffs
    w = eq.weight
    g = h.disc.grid
    deg = h.disc.total_degree()[:, :, 0, 0]
    q = integrate(c * c * w)
    d = [g.deriv(c, i) for i in range(2)]
    qc = integrate((d[0] ** 2 + d[1] ** 2) * w)
    cross = 0.0
    for i in range(2):
        cross += integrate(np.sum(lower(c, i) * d[i], axis=(0, 1)) * w)
    return NormsBundle(
        norm_h2=float(q.sum()),
        norm_Ah2=float((deg * q).sum()),
        norm_Ch2=float(qc.sum()),
        cross_AC=float(cross),
        norm_A2h2=float(((deg * deg - deg) * q).sum()),
        norm_ACh2=float((deg * qc).sum()),
        norm_AsAh2=float((deg * deg * q).sum()),
    )


def tail_mass(h, eq):
    """Fraction of ||h||^2 carried by the last Hermite index in either direction."""
    q = integrate(h.coeffs ** 2 * eq.weight)
    total = q.sum()
    if total == 0:
        return 0.0
    top = q[-1, :].sum() + q[:, -1].sum() - q[-1, -1]
    return float(top / total)


# initial data ------------------------------------------------------------

@dataclass
class InitialDataSpec:
    """Recipe for an initial perturbation.

    kind: "random_band", "single_mode" or "grid_file".
    For random_band, spatial Fourier modes with max(|k1|, |k2|) <= spatial_band
    and Hermite indices with n1 + n2 <= hermite_band are drawn; setting
    homogeneous=False leaves out the x-independent (k = 0) part of every
    Hermite coefficient.  For single_mode, mode_n and mode_k pick one Hermite
    index and one cosine wave.
    """

    kind: str = "random_band"
    seed: int = 0
    target_norm: float = 1.0
    spatial_band: int = 2
    hermite_band: int = 2
    homogeneous: bool = True
    mode_n: tuple = (0, 0)
    mode_k: tuple = (1, 0)
    path: str = ""


def _random_band(spec, disc, rng):
    n, nv = disc.n_x, disc.n_v
    if spec.spatial_band >= n // 2:
        raise ValueError("spatial_band must be below n_x / 2")
    x1, x2 = np.meshgrid(np.arange(n) / n, np.arange(n) / n, indexing="ij")
    waves = []
    b = spec.spatial_band
    for k1 in range(-b, b + 1):
        for k2 in range(0, b + 1):
            if k2 == 0 and k1 < 0:
                continue
            if k1 == 0 and k2 == 0:
                if spec.homogeneous:
                    waves.append(np.ones((n, n)))
                continue
            arg = 2 * np.pi * (k1 * x1 + k2 * x2)
            waves.append(np.cos(arg))
            waves.append(np.sin(arg))
    waves = np.array(waves)
    c = np.zeros(disc.shape)
    for a in range(nv):
        for bb in range(nv):
            if a + bb > spec.hermite_band:
                continue
            amps = rng.standard_normal(len(waves))
            c[a, bb] = np.tensordot(amps, waves, axes=1)
    return c


def make_initial_data(spec, disc, eq):
    """Build a mean-free initial state with weighted norm spec.target_norm."""
    if spec.kind == "grid_file":
        h = load_state(spec.path)
        if h.disc.n_x != disc.n_x or h.disc.n_v != disc.n_v:
            raise ValueError("state file resolution does not match the discretization")
        h = SpectralState(h.coeffs, disc)
        h = project_mean_free(h, eq)
    elif spec.kind == "single_mode":
        n1, n2 = spec.mode_n
        if max(n1, n2) >= disc.n_v:
            raise ValueError("mode_n outside the Hermite range")
        x1, x2 = np.meshgrid(np.arange(disc.n_x) / disc.n_x, np.arange(disc.n_x) / disc.n_x,
                             indexing="ij")
        c = np.zeros(disc.shape)
        k1, k2 = spec.mode_k
        c[n1, n2] = np.cos(2 * np.pi * (k1 * x1 + k2 * x2))
        h = project_mean_free(SpectralState(c, disc), eq)
    elif spec.kind == "random_band":
        h = None
        for attempt in range(10):
            rng = np.random.default_rng(spec.seed + attempt)
            cand = project_mean_free(SpectralState(_random_band(spec, disc, rng), disc), eq)
            if norm2(cand, eq) > 1e-24:
                h = cand
                break
        if h is None:
            raise ValueError("could not draw a non-degenerate initial state")
    else:
        raise ValueError(f"unknown initial data kind {spec.kind!r}")
    nrm = np.sqrt(norm2(h, eq))
    if nrm == 0:
        if spec.target_norm == 0:
            return h
        raise ValueError("initial state vanishes after projection")
    return SpectralState(h.coeffs * (spec.target_norm / nrm), disc, mean_free=True)


# state files -------------------------------------------------------------

def save_state(h, path):
    """Header "n_x n_v", then one n_x x n_x block per Hermite index (n1, n2)
    in lexicographic order, rows along x1."""
    d = h.disc
    with open(path, "w") as fh:
        fh.write(f"{d.n_x} {d.n_v}\n")
        for a in range(d.n_v):
            for b in range(d.n_v):
                np.savetxt(fh, h.coeffs[a, b], fmt="%.17g")


def load_state(path, dealias=False):
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ValueError(f"{path}: header must be 'n_x n_v'")
        n_x, n_v = (int(t) for t in header)
        vals = np.loadtxt(fh, ndmin=2)
    if vals.shape != (n_v * n_v * n_x, n_x):
        raise ValueError(f"{path}: expected {n_v * n_v * n_x} rows of {n_x} values")
    disc = Discretization(n_x, n_v, dealias)
    return SpectralState(vals.reshape(disc.shape), disc)
