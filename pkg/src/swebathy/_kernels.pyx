# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled RK4 kernels; same contract as ``_kernels_py``."""

import numpy as np

from libc.math cimport isfinite
from scipy.linalg.cython_blas cimport dgemv


cdef inline void _mv(const double[:, ::1] A, const double* x, double* y, Py_ssize_t M) noexcept nogil:
    # row-major A is column-major A^T, hence the transpose flag
    cdef int n = <int>M
    cdef int one = 1
    cdef double alpha = 1.0
    cdef double beta = 0.0
    cdef char trans = b'T'
    dgemv(&trans, &n, &n, &alpha, <double*>&A[0, 0], &n, <double*>x, &one, &beta, y, &one)


cdef inline void _mv2(const double[:, ::1] A, const double* x1, const double* x2,
                      double* y1, double* y2, Py_ssize_t M) noexcept nogil:
    _mv(A, x1, y1, M)
    _mv(A, x2, y2, M)


cdef inline void _mv3(const double[:, ::1] A, const double* x1, const double* x2, const double* x3,
                      double* y1, double* y2, double* y3, Py_ssize_t M) noexcept nogil:
    _mv(A, x1, y1, M)
    _mv(A, x2, y2, M)
    _mv(A, x3, y3, M)


cdef void _swe_rhs(const double[:, ::1] D, const double[:, ::1] DF, const double* b,
                   const double* h, const double* u, double* dh, double* du,
                   double* w0, double* w1, double* w2, double* w3,
                   double g, double kappa, Py_ssize_t M) noexcept nogil:
    cdef Py_ssize_t i
    for i in range(M):
        w0[i] = h[i] * u[i]
        w1[i] = u[i] * u[i]
        w2[i] = h[i] + b[i]
    _mv2(DF, w0, w1, dh, du, M)
    _mv(D, w2, w3, M)
    for i in range(M):
        dh[i] = -dh[i]
        du[i] = -du[i] - g * w3[i] - kappa * u[i]


def forward_rk4(const double[:, ::1] D, const double[:, ::1] DF, const double[::1] b,
                const double[::1] hl, const double[::1] hl_mid,
                const double[::1] h0, const double[::1] u0,
                double g, double kappa, double dt, Py_ssize_t n_steps, Py_ssize_t stride):
    cdef Py_ssize_t M = b.shape[0]
    cdef Py_ssize_t n_store = n_steps // stride + 1
    out_arr = np.empty((n_store, 2, M))
    cdef double[:, :, ::1] out = out_arr
    work_arr = np.zeros((16, M))
    cdef double[:, ::1] wk = work_arr
    cdef double* h = &wk[0, 0]
    cdef double* u = &wk[1, 0]
    cdef double* hs = &wk[2, 0]
    cdef double* us = &wk[3, 0]
    cdef double* k1h = &wk[4, 0]
    cdef double* k1u = &wk[5, 0]
    cdef double* k2h = &wk[6, 0]
    cdef double* k2u = &wk[7, 0]
    cdef double* k3h = &wk[8, 0]
    cdef double* k3u = &wk[9, 0]
    cdef double* k4h = &wk[10, 0]
    cdef double* k4u = &wk[11, 0]
    cdef double* w0 = &wk[12, 0]
    cdef double* w1 = &wk[13, 0]
    cdef double* w2 = &wk[14, 0]
    cdef double* w3 = &wk[15, 0]
    cdef const double* bp = &b[0]
    cdef double bL = b[0]
    cdef double half = 0.5 * dt
    cdef double sixth = dt / 6.0
    cdef Py_ssize_t i, k, j
    cdef int bad
    cdef Py_ssize_t fail = -1

    with nogil:
        for i in range(M):
            h[i] = h0[i]
            u[i] = u0[i]
        h[0] = hl[0] - bL
        u[M - 1] = 0.0
        for i in range(M):
            out[0, 0, i] = h[i]
            out[0, 1, i] = u[i]

        for k in range(n_steps):
            _swe_rhs(D, DF, bp, h, u, k1h, k1u, w0, w1, w2, w3, g, kappa, M)
            for i in range(M):
                hs[i] = h[i] + half * k1h[i]
                us[i] = u[i] + half * k1u[i]
            hs[0] = hl_mid[k] - bL
            us[M - 1] = 0.0
            _swe_rhs(D, DF, bp, hs, us, k2h, k2u, w0, w1, w2, w3, g, kappa, M)
            for i in range(M):
                hs[i] = h[i] + half * k2h[i]
                us[i] = u[i] + half * k2u[i]
            hs[0] = hl_mid[k] - bL
            us[M - 1] = 0.0
            _swe_rhs(D, DF, bp, hs, us, k3h, k3u, w0, w1, w2, w3, g, kappa, M)
            for i in range(M):
                hs[i] = h[i] + dt * k3h[i]
                us[i] = u[i] + dt * k3u[i]
            hs[0] = hl[k + 1] - bL
            us[M - 1] = 0.0
            _swe_rhs(D, DF, bp, hs, us, k4h, k4u, w0, w1, w2, w3, g, kappa, M)
            bad = 0
            for i in range(M):
                h[i] = h[i] + sixth * (k1h[i] + 2.0 * k2h[i] + 2.0 * k3h[i] + k4h[i])
                u[i] = u[i] + sixth * (k1u[i] + 2.0 * k2u[i] + 2.0 * k3u[i] + k4u[i])
            h[0] = hl[k + 1] - bL
            u[M - 1] = 0.0
            for i in range(M):
                if not (isfinite(h[i]) and isfinite(u[i]) and h[i] > 0.0):
                    bad = 1
            if bad:
                fail = k + 1
                break
            if (k + 1) % stride == 0:
                j = (k + 1) // stride
                for i in range(M):
                    out[j, 0, i] = h[i]
                    out[j, 1, i] = u[i]
    return out_arr, fail


cdef void _adj_rhs(const double[:, ::1] D, const double[:, ::1] F, bint use_filter,
                   const double* p1, const double* p2, const double* h, const double* u,
                   const double* s, double* dp1, double* dp2,
                   double* d1, double* d2, double* a0, double* a1, double* a2,
                   double* f0, double* f1, double* f2,
                   double g, double kappa, Py_ssize_t M) noexcept nogil:
    cdef Py_ssize_t i
    _mv2(D, p1, p2, d1, d2, M)
    for i in range(M):
        a0[i] = u[i] * d1[i]
        a1[i] = h[i] * d1[i]
        a2[i] = u[i] * d2[i]
    if use_filter:
        _mv3(F, a0, a1, a2, f0, f1, f2, M)
        for i in range(M):
            dp1[i] = f0[i] + g * d2[i] + s[i]
            dp2[i] = f1[i] + 2.0 * f2[i] - kappa * p2[i]
    else:
        for i in range(M):
            dp1[i] = a0[i] + g * d2[i] + s[i]
            dp2[i] = a1[i] + 2.0 * a2[i] - kappa * p2[i]


cdef inline bint _adj_bc(double* p1, double* p2, double hL, double uL,
                         double h_min, Py_ssize_t M) noexcept nogil:
    if hL < h_min:
        return False
    p2[M - 1] = 0.0
    p1[0] = -2.0 * uL / hL * p2[0]
    return True


def adjoint_rk4(const double[:, ::1] D, const double[:, ::1] F, bint use_filter,
                const double[:, ::1] h_traj, const double[:, ::1] u_traj,
                const double[:, ::1] src, const double[::1] p1_T,
                double g, double kappa, double dt, double h_min):
    cdef Py_ssize_t n = h_traj.shape[0] - 1
    cdef Py_ssize_t M = h_traj.shape[1]
    out_arr = np.empty((n + 1, 2, M))
    cdef double[:, :, ::1] out = out_arr
    work_arr = np.zeros((23, M))
    cdef double[:, ::1] wk = work_arr
    cdef double* p1 = &wk[0, 0]
    cdef double* p2 = &wk[1, 0]
    cdef double* q1 = &wk[2, 0]
    cdef double* q2 = &wk[3, 0]
    cdef double* k1a = &wk[4, 0]
    cdef double* k1b = &wk[5, 0]
    cdef double* k2a = &wk[6, 0]
    cdef double* k2b = &wk[7, 0]
    cdef double* k3a = &wk[8, 0]
    cdef double* k3b = &wk[9, 0]
    cdef double* k4a = &wk[10, 0]
    cdef double* k4b = &wk[11, 0]
    cdef double* hm = &wk[12, 0]
    cdef double* um = &wk[13, 0]
    cdef double* sm = &wk[14, 0]
    cdef double* d1 = &wk[15, 0]
    cdef double* d2 = &wk[16, 0]
    cdef double* a0 = &wk[17, 0]
    cdef double* a1 = &wk[18, 0]
    cdef double* a2 = &wk[19, 0]
    cdef double* f0 = &wk[20, 0]
    cdef double* f1 = &wk[21, 0]
    cdef double* f2 = &wk[22, 0]
    cdef double half = 0.5 * dt
    cdef double sixth = dt / 6.0
    cdef Py_ssize_t i, k
    cdef const double* ha
    cdef const double* ua
    cdef const double* sa
    cdef const double* hb
    cdef const double* ub
    cdef const double* sb
    cdef Py_ssize_t fail = -1

    with nogil:
        for k in range(M):
            p1[k] = p1_T[k]
            p2[k] = 0.0
        if not _adj_bc(p1, p2, h_traj[n, 0], u_traj[n, 0], h_min, M):
            fail = n
        else:
            for k in range(M):
                out[n, 0, k] = p1[k]
                out[n, 1, k] = p2[k]
            i = n
            while i > 0:
                ha = &h_traj[i, 0]
                ua = &u_traj[i, 0]
                sa = &src[i, 0]
                hb = &h_traj[i - 1, 0]
                ub = &u_traj[i - 1, 0]
                sb = &src[i - 1, 0]
                for k in range(M):
                    hm[k] = 0.5 * (ha[k] + hb[k])
                    um[k] = 0.5 * (ua[k] + ub[k])
                    sm[k] = 0.5 * (sa[k] + sb[k])
                _adj_rhs(D, F, use_filter, p1, p2, ha, ua, sa, k1a, k1b,
                         d1, d2, a0, a1, a2, f0, f1, f2, g, kappa, M)
                for k in range(M):
                    q1[k] = p1[k] + half * k1a[k]
                    q2[k] = p2[k] + half * k1b[k]
                if not _adj_bc(q1, q2, hm[0], um[0], h_min, M):
                    fail = i
                    break
                _adj_rhs(D, F, use_filter, q1, q2, hm, um, sm, k2a, k2b,
                         d1, d2, a0, a1, a2, f0, f1, f2, g, kappa, M)
                for k in range(M):
                    q1[k] = p1[k] + half * k2a[k]
                    q2[k] = p2[k] + half * k2b[k]
                _adj_bc(q1, q2, hm[0], um[0], h_min, M)
                _adj_rhs(D, F, use_filter, q1, q2, hm, um, sm, k3a, k3b,
                         d1, d2, a0, a1, a2, f0, f1, f2, g, kappa, M)
                for k in range(M):
                    q1[k] = p1[k] + dt * k3a[k]
                    q2[k] = p2[k] + dt * k3b[k]
                if not _adj_bc(q1, q2, hb[0], ub[0], h_min, M):
                    fail = i - 1
                    break
                _adj_rhs(D, F, use_filter, q1, q2, hb, ub, sb, k4a, k4b,
                         d1, d2, a0, a1, a2, f0, f1, f2, g, kappa, M)
                for k in range(M):
                    p1[k] = p1[k] + sixth * (k1a[k] + 2.0 * k2a[k] + 2.0 * k3a[k] + k4a[k])
                    p2[k] = p2[k] + sixth * (k1b[k] + 2.0 * k2b[k] + 2.0 * k3b[k] + k4b[k])
                _adj_bc(p1, p2, hb[0], ub[0], h_min, M)
                for k in range(M):
                    if not (isfinite(p1[k]) and isfinite(p2[k])):
                        fail = i - 1
                if fail >= 0:
                    break
                for k in range(M):
                    out[i - 1, 0, k] = p1[k]
                    out[i - 1, 1, k] = p2[k]
                i -= 1
    return out_arr, fail
