import numpy as np
import pytest
from numpy.polynomial import hermite_e as He

from vpfp.equilibrium import cosine_density, solve_poisson_boltzmann, uniform_density
from vpfp.phase_space import Discretization, SpectralState

# PASS/FAIL lines of the acceptance suite, repeated in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("]")[0].split()[-1])):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def flat16():
    return solve_poisson_boltzmann(uniform_density(16), 1.0)


@pytest.fixture(scope="session")
def cos16():
    return solve_poisson_boltzmann(cosine_density(16, 0.3), 1.0)


@pytest.fixture(scope="session")
def cos16_d10():
    return solve_poisson_boltzmann(cosine_density(16, 0.3), 10.0)


def basis_state(disc, n1, n2, profile=None):
    c = np.zeros(disc.shape)
    c[n1, n2] = 1.0 if profile is None else profile
    return SpectralState(c, disc)


def x_grid(n):
    x = np.arange(n) / n
    return np.meshgrid(x, x, indexing="ij")


def random_state(disc, seed, kband=3, top=None):
    """Band-limited random coefficients; `top` empties Hermite indices >= top."""
    rng = np.random.default_rng(seed)
    g = disc.grid
    F = np.zeros(disc.shape[:2] + (disc.n_x, disc.n_x // 2 + 1), dtype=complex)
    k1 = np.fft.fftfreq(disc.n_x, 1.0 / disc.n_x)
    mask = (np.abs(k1)[:, None] <= kband) & (np.arange(disc.n_x // 2 + 1)[None, :] <= kband)
    F[..., mask] = rng.standard_normal(F[..., mask].shape) + 1j * rng.standard_normal(
        F[..., mask].shape)
    c = g.ifft(F)
    if top is not None:
        c[top:] = 0
        c[:, top:] = 0
    return SpectralState(c, disc)


class VelocityQuadrature:
    """Tensor Gauss-Hermite rule for the standard Gaussian in 2D, used as an
    independent route to velocity integrals and the Hermite functions."""

    def __init__(self, n_v, n_q=40):
        x, w = He.hermegauss(n_q)
        w = w / np.sqrt(2 * np.pi)
        self.v1, self.v2 = np.meshgrid(x, x, indexing="ij")
        self.w = np.outer(w, w)
        self.n_v = n_v
        fact = np.array([float(np.prod(np.arange(1, k + 1))) for k in range(n_v + 2)])
        self.psi1d = lambda k, v: He.hermeval(v, np.eye(n_v + 2)[k]) / np.sqrt(fact[k])

    def psi(self, n1, n2, v1=None, v2=None):
        v1 = self.v1 if v1 is None else v1
        v2 = self.v2 if v2 is None else v2
        return self.psi1d(n1, v1) * self.psi1d(n2, v2)

    def synth(self, coeffs, v1=None, v2=None):
        """h(v) from Hermite coefficients of shape (n_v, n_v)."""
        out = 0.0
        for a in range(self.n_v):
            for b in range(self.n_v):
                if coeffs[a, b] != 0:
                    out = out + coeffs[a, b] * self.psi(a, b, v1, v2)
        return out

    def project(self, values):
        c = np.zeros((self.n_v, self.n_v))
        for a in range(self.n_v):
            for b in range(self.n_v):
                c[a, b] = np.sum(self.w * values * self.psi(a, b))
        return c

    def integrate(self, values):
        return float(np.sum(self.w * values))


@pytest.fixture(scope="session")
def vq():
    return VelocityQuadrature(8)


def make_disc(n_x=16, n_v=8, dealias=False):
    return Discretization(n_x, n_v, dealias)
