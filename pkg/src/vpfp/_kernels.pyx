# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Fused Hermite-ladder loops for the phase-space right-hand side.

Arrays are C-contiguous with layout (n1, n2, x1, x2): two Hermite indices
followed by the spatial axes (or their Fourier modes).
"""
from libc.math cimport sqrt


def stream_axpy(const double[:, :, :, ::1] h,
                const double[::1] k1, const double[::1] k2,
                const double[:, :, :, ::1] y, double alpha,
                double[:, :, :, ::1] out):
    """out = y + alpha * (-i)(k1 v1 + k2 v2) h  with v_i = A_i + A*_i.

    Complex arrays are passed as their float views, so the last axis holds
    interleaved (real, imag) pairs.  ``out`` may alias ``y`` but not ``h``.
    """
    cdef Py_ssize_t nv = h.shape[0], n1 = h.shape[2], n2 = h.shape[3] // 2
    cdef Py_ssize_t a, b, p, q, au, ad, bu, bd
    cdef double ua, da, ub, db, kp, kq, tr, ti
    for a in range(nv):
        # out-of-range neighbours get a zero weight and a harmless index
        au = a + 1 if a + 1 < nv else a
        ad = a - 1 if a > 0 else a
        ua = sqrt(a + 1.0) if a + 1 < nv else 0.0
        da = sqrt(<double>a)
        for b in range(nv):
            bu = b + 1 if b + 1 < nv else b
            bd = b - 1 if b > 0 else b
            ub = sqrt(b + 1.0) if b + 1 < nv else 0.0
            db = sqrt(<double>b)
            for p in range(n1):
                kp = k1[p]
                for q in range(n2):
                    kq = k2[q]
                    tr = (kp * (ua * h[au, b, p, 2 * q] + da * h[ad, b, p, 2 * q])
                          + kq * (ub * h[a, bu, p, 2 * q] + db * h[a, bd, p, 2 * q]))
                    ti = (kp * (ua * h[au, b, p, 2 * q + 1] + da * h[ad, b, p, 2 * q + 1])
                          + kq * (ub * h[a, bu, p, 2 * q + 1] + db * h[a, bd, p, 2 * q + 1]))
                    out[a, b, p, 2 * q] = y[a, b, p, 2 * q] + alpha * ti
                    out[a, b, p, 2 * q + 1] = y[a, b, p, 2 * q + 1] - alpha * tr


def ladder_mix(const double[:, :, :, ::1] h,
               const double[:, ::1] a1, const double[:, ::1] a2,
               const double[:, ::1] b1, const double[:, ::1] b2,
               double[:, :, :, ::1] out):
    """out = a1 A_1 h + a2 A_2 h + b1 A*_1 h + b2 A*_2 h  (pointwise fields)."""
    cdef Py_ssize_t nv = h.shape[0], n1 = h.shape[2], n2 = h.shape[3]
    cdef Py_ssize_t a, b, p, q, au, ad, bu, bd
    cdef double ua, da, ub, db
    for a in range(nv):
        au = a + 1 if a + 1 < nv else a
        ad = a - 1 if a > 0 else a
        ua = sqrt(a + 1.0) if a + 1 < nv else 0.0
        da = sqrt(<double>a)
        for b in range(nv):
            bu = b + 1 if b + 1 < nv else b
            bd = b - 1 if b > 0 else b
            ub = sqrt(b + 1.0) if b + 1 < nv else 0.0
            db = sqrt(<double>b)
            for p in range(n1):
                for q in range(n2):
                    out[a, b, p, q] = (ua * a1[p, q] * h[au, b, p, q]
                                       + ub * a2[p, q] * h[a, bu, p, q]
                                       + da * b1[p, q] * h[ad, b, p, q]
                                       + db * b2[p, q] * h[a, bd, p, q])
