"""Hot loops of the phase-space right-hand side, with backend selection.

The compiled extension ``vpfp._kernels`` is used when it imports; otherwise
(or when ``VPFP_PURE_PYTHON`` is set to a non-empty value other than ``0``)
the numpy implementations below are used.  Both compute the same thing.
"""
import os

import numpy as np


def _sqrt_up(nv):
    # sqrt(m + 1) for m = 0 .. nv - 2
    return np.sqrt(np.arange(1, nv, dtype=float))


def stream_axpy_py(h, k1, k2, y, alpha, out):
    nv = h.shape[0]
    s = _sqrt_up(nv)
    s1 = s[:, None, None, None]
    s2 = s[None, :, None, None]
    v1 = np.zeros_like(h)
    v1[:-1] += s1 * h[1:]
    v1[1:] += s1 * h[:-1]
    v2 = np.zeros_like(h)
    v2[:, :-1] += s2 * h[:, 1:]
    v2[:, 1:] += s2 * h[:, :-1]
    t = k1[:, None] * v1 + k2[None, :] * v2
    np.add(y, (-1j * alpha) * t, out=out)
    return out


def ladder_mix_py(h, a1, a2, b1, b2, out):
    nv = h.shape[0]
    s = _sqrt_up(nv)
    s1 = s[:, None, None, None]
    s2 = s[None, :, None, None]
    out[...] = 0.0
    out[:-1] += a1 * (s1 * h[1:])
    out[:, :-1] += a2 * (s2 * h[:, 1:])
    out[1:] += b1 * (s1 * h[:-1])
    out[:, 1:] += b2 * (s2 * h[:, :-1])
    return out


def _want_pure():
    flag = os.environ.get("VPFP_PURE_PYTHON", "")
    return flag not in ("", "0")


_ext = None
if not _want_pure():
    try:
        from . import _kernels as _ext
    except ImportError:
        _ext = None

BACKEND = "cython" if _ext is not None else "python"


def stream_axpy(h, k1, k2, y, alpha, out):
    """out = y + alpha * (-i)(k1 v1 + k2 v2) h on Fourier coefficients."""
    if _ext is not None:
        _ext.stream_axpy(h.view(float), k1, k2, y.view(float), float(alpha), out.view(float))
        return out
    return stream_axpy_py(h, k1, k2, y, alpha, out)


def ladder_mix(h, a1, a2, b1, b2, out):
    """out = sum_i a_i A_i h + b_i A*_i h with pointwise coefficient fields."""
    if _ext is not None:
        _ext.ladder_mix(h, np.ascontiguousarray(a1), np.ascontiguousarray(a2),
                        np.ascontiguousarray(b1), np.ascontiguousarray(b2), out)
        return out
    return ladder_mix_py(h, a1, a2, b1, b2, out)
