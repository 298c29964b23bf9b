"""Fourier pseudo-spectral helpers on the periodic unit square.

Fields are real arrays whose last two axes are the (x1, x2) grid.  Spectra
use the real-to-complex layout of ``scipy.fft.rfft2`` over those axes.
"""
from functools import lru_cache

import numpy as np
import scipy.fft as sfft

TWO_PI = 2.0 * np.pi


class Grid:
    """Uniform n x n grid on [0,1)^2 with spectral derivative operators.

    First derivatives drop the Nyquist mode so that the discrete derivative is
    exactly skew-symmetric.  The Laplacian keeps it.

    With ``dealias=True`` pointwise products are formed on a 3/2-padded grid
    and truncated back, which removes quadratic aliasing.
    """

    def __init__(self, n, dealias=False):
        if n < 4 or n % 2:
            raise ValueError("grid size must be an even integer >= 4")
        self.n = n
        self.nq = n // 2 + 1
        self.dealias = dealias
        self.m = 3 * n // 2 if dealias else n
        self.x = np.arange(n) / n

        k1 = TWO_PI * sfft.fftfreq(n, 1.0 / n)
        k2 = TWO_PI * sfft.rfftfreq(n, 1.0 / n)
        self.ksq = k1[:, None] ** 2 + k2[None, :] ** 2
        k1d = k1.copy()
        k1d[n // 2] = 0.0
        k2d = k2.copy()
        k2d[-1] = 0.0
        self.k1 = k1d
        self.k2 = k2d
        self.kd = (k1d[:, None] * np.ones(self.nq)[None, :],
                   np.ones(n)[:, None] * k2d[None, :])
        inv = np.zeros_like(self.ksq)
        inv[self.ksq > 0] = 1.0 / self.ksq[self.ksq > 0]
        self.inv_ksq = inv

        # index map between the n grid spectrum and the padded one; the
        # Nyquist row and column are not carried over
        h = n // 2
        self._rows = np.r_[0:h, self.m - h + 1:self.m]
        self._src_rows = np.r_[0:h, n - h + 1:n]
        self._cols = h

    # transforms -----------------------------------------------------------
    def fft(self, f):
        return sfft.rfft2(f, axes=(-2, -1))

    def ifft(self, F):
        return sfft.irfft2(F, s=(self.n, self.n), axes=(-2, -1))

    def pad(self, F):
        """Spectrum on the n grid -> values on the product grid."""
        if not self.dealias:
            return self.ifft(F)
        m = self.m
        P = np.zeros(F.shape[:-2] + (m, m // 2 + 1), dtype=complex)
        P[..., self._rows, :self._cols] = F[..., self._src_rows, :self._cols]
        return sfft.irfft2(P, s=(m, m), axes=(-2, -1)) * (m * m / (self.n * self.n))

    def unpad(self, g):
        """Values on the product grid -> spectrum on the n grid."""
        if not self.dealias:
            return self.fft(g)
        m = self.m
        G = sfft.rfft2(g, axes=(-2, -1))
        F = np.zeros(g.shape[:-2] + (self.n, self.nq), dtype=complex)
        F[..., self._src_rows, :self._cols] = G[..., self._rows, :self._cols]
        return F * (self.n * self.n / (m * m))

    def to_product_grid(self, f):
        return self.pad(self.fft(f)) if self.dealias else f

    # calculus -------------------------------------------------------------
    def deriv(self, f, i):
        return self.ifft(1j * self.kd[i] * self.fft(f))

    def grad(self, f):
        F = self.fft(f)
        return np.stack([self.ifft(1j * self.kd[0] * F), self.ifft(1j * self.kd[1] * F)])

    def hessian(self, f):
        F = self.fft(f)
        out = np.empty((2, 2) + np.shape(f))
        for i in range(2):
            for j in range(i, 2):
                out[i, j] = self.ifft(-self.kd[i] * self.kd[j] * F)
                out[j, i] = out[i, j]
        return out

    def div(self, v):
        return self.ifft(1j * self.kd[0] * self.fft(v[0]) + 1j * self.kd[1] * self.fft(v[1]))

    def laplacian(self, f):
        return self.ifft(-self.ksq * self.fft(f))

    def inv_laplacian(self, f):
        """Mean-zero solution u of  Lap u = f - mean(f)."""
        return self.ifft(-self.inv_ksq * self.fft(f))

    def product(self, a, b):
        """Pointwise product, alias-free when the grid dealiases."""
        if not self.dealias:
            return a * b
        return self.ifft(self.unpad(self.to_product_grid(a) * self.to_product_grid(b)))


def integrate(f):
    """Periodic trapezoid rule on the unit square (the grid mean)."""
    return np.mean(f, axis=(-2, -1))


def l2(f):
    return float(np.sqrt(np.mean(np.square(f))))


@lru_cache(maxsize=None)
def get_grid(n, dealias=False):
    return Grid(n, dealias)
