"""Macroscopic moments of h and the self-consistent electric field.

With f = f_inf (1 + h) and f_inf = M(v) exp(-phi_inf):

    n    = exp(-phi) h_(0,0)
    j_i  = exp(-phi) h_(e_i)
    S_ii = sqrt(2) exp(-phi) h_(2 e_i),   S_12 = exp(-phi) h_(1,1)

The field is E = delta^-2 grad Lap^-1 n (zero-mean potential).
"""
import csv
from dataclasses import dataclass

import numpy as np

from .spectral import get_grid, integrate


@dataclass
class MacroFields:
    n: np.ndarray
    j: np.ndarray   # (2, n_x, n_x)
    S: np.ndarray   # (2, 2, n_x, n_x)
    E: np.ndarray   # (2, n_x, n_x)

    COLUMNS = ("x1", "x2", "n", "j1", "j2", "S11", "S12", "S22", "E1", "E2")


def solve_field(n, delta, check_mean=True):
    """E = delta^-2 grad Lap^-1 n for a zero-mean density perturbation n."""
    if check_mean and abs(float(integrate(n))) > 1e-9:
        raise ValueError(f"density perturbation must have zero mean, got {float(integrate(n)):.3e}")
    g = get_grid(n.shape[-1])
    N = g.fft(n)
    pot = -g.inv_ksq * N / delta**2
    return np.stack([g.ifft(1j * g.kd[0] * pot), g.ifft(1j * g.kd[1] * pot)])


def density(h, eq):
    return eq.weight * h.coeffs[0, 0]


def compute_moments(h, eq, delta=None):
    """Density, current, traceless stress and field of the state h."""
    w = eq.weight
    c = h.coeffs
    n = w * c[0, 0]
    j = np.stack([w * c[1, 0], w * c[0, 1]])
    S = np.empty((2, 2) + n.shape)
    S[0, 0] = np.sqrt(2.0) * w * c[2, 0]
    S[1, 1] = np.sqrt(2.0) * w * c[0, 2]
    S[0, 1] = S[1, 0] = w * c[1, 1]
    delta = eq.delta if delta is None else delta
    E = solve_field(n, delta, check_mean=False) if np.isfinite(delta) else np.zeros_like(j)
    return MacroFields(n=n, j=j, S=S, E=E)


def write_macro_csv(m, path):
    """One row per grid point, columns x1,x2,n,j1,j2,S11,S12,S22,E1,E2."""
    nx = m.n.shape[0]
    xs = np.arange(nx) / nx
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(MacroFields.COLUMNS)
        for a in range(nx):
            for b in range(nx):
                row = (xs[a], xs[b], m.n[a, b], m.j[0, a, b], m.j[1, a, b],
                       m.S[0, 0, a, b], m.S[0, 1, a, b], m.S[1, 1, a, b],
                       m.E[0, a, b], m.E[1, a, b])
                wr.writerow([repr(float(v)) for v in row])


def read_macro_csv(path):
    with open(path) as fh:
        rd = csv.reader(fh)
        header = next(rd)
        if tuple(header) != MacroFields.COLUMNS:
            raise ValueError(f"{path}: unexpected columns {header}")
        rows = np.array([[float(v) for v in r] for r in rd])
    nx = int(round(np.sqrt(len(rows))))
    col = {k: rows[:, i].reshape(nx, nx) for i, k in enumerate(header)}
    S = np.empty((2, 2, nx, nx))
    S[0, 0], S[1, 1] = col["S11"], col["S22"]
    S[0, 1] = S[1, 0] = col["S12"]
    return MacroFields(n=col["n"], j=np.stack([col["j1"], col["j2"]]), S=S,
                       E=np.stack([col["E1"], col["E2"]]))
