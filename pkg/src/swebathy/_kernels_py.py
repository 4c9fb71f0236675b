"""Pure NumPy time-stepping kernels.

Reference implementation of the compiled core in ``_kernels.pyx``; both
expose identical signatures and are selected in ``swebathy._backend``.
Each returns ``(trajectory, fail_step)`` with ``fail_step == -1`` on success.
"""

import numpy as np


def forward_rk4(D, DF, b, hl, hl_mid, h0, u0, g, kappa, dt, n_steps, stride):
    """Classical RK4 for the quasi-linear shallow water system.

    ``hl`` / ``hl_mid`` hold the left surface elevation at step times and
    midpoints.  Every ``stride``-th state is stored (``n_steps % stride == 0``).
    """
    M = b.shape[0]
    n_store = n_steps // stride + 1
    out = np.empty((n_store, 2, M))
    bL = b[0]
    h = np.array(h0, dtype=float)
    u = np.array(u0, dtype=float)
    h[0] = hl[0] - bL
    u[M - 1] = 0.0
    out[0, 0] = h
    out[0, 1] = u
    DT = D.T
    DFT = DF.T

    def rhs(h, u):
        prod = np.empty((2, M))
        np.multiply(h, u, out=prod[0])
        np.multiply(u, u, out=prod[1])
        fl = prod @ DFT
        dh = -fl[0]
        du = -fl[1] - g * ((h + b) @ DT) - kappa * u
        return dh, du

    half = 0.5 * dt
    for k in range(n_steps):
        k1h, k1u = rhs(h, u)
        h2 = h + half * k1h
        u2 = u + half * k1u
        h2[0] = hl_mid[k] - bL
        u2[M - 1] = 0.0
        k2h, k2u = rhs(h2, u2)
        h3 = h + half * k2h
        u3 = u + half * k2u
        h3[0] = hl_mid[k] - bL
        u3[M - 1] = 0.0
        k3h, k3u = rhs(h3, u3)
        h4 = h + dt * k3h
        u4 = u + dt * k3u
        h4[0] = hl[k + 1] - bL
        u4[M - 1] = 0.0
        k4h, k4u = rhs(h4, u4)
        h = h + (dt / 6.0) * (k1h + 2.0 * k2h + 2.0 * k3h + k4h)
        u = u + (dt / 6.0) * (k1u + 2.0 * k2u + 2.0 * k3u + k4u)
        h[0] = hl[k + 1] - bL
        u[M - 1] = 0.0
        if not (np.all(np.isfinite(h)) and np.all(np.isfinite(u)) and h.min() > 0.0):
            return out, k + 1
        if (k + 1) % stride == 0:
            j = (k + 1) // stride
            out[j, 0] = h
            out[j, 1] = u
    return out, -1


def adjoint_rk4(D, F, use_filter, h_traj, u_traj, src, p1_T, g, kappa, dt, h_min):
    """RK4 for the time-reversed adjoint system.

    Forward states and sources are indexed by physical step ``0..n``; the
    returned adjoint trajectory uses the same indexing, so ``out[n]`` is the
    terminal condition and ``out[0]`` the adjoint at physical time zero.
    Stage values between stored steps are linear interpolants.
    """
    n = h_traj.shape[0] - 1
    M = h_traj.shape[1]
    out = np.empty((n + 1, 2, M))
    DT = D.T
    FT = F.T

    def rhs(p1, p2, h, u, s):
        d = np.stack((p1, p2)) @ DT
        prod = np.empty((3, M))
        np.multiply(u, d[0], out=prod[0])
        np.multiply(h, d[0], out=prod[1])
        np.multiply(u, d[1], out=prod[2])
        if use_filter:
            prod = prod @ FT
        dp1 = prod[0] + g * d[1] + s
        dp2 = prod[1] + 2.0 * prod[2] - kappa * p2
        return dp1, dp2

    def bc(p1, p2, h, u):
        if h[0] < h_min:
            return False
        p2[M - 1] = 0.0
        p1[0] = -2.0 * u[0] / h[0] * p2[0]
        return True

    p1 = np.array(p1_T, dtype=float)
    p2 = np.zeros(M)
    if not bc(p1, p2, h_traj[n], u_traj[n]):
        return out, n
    out[n, 0] = p1
    out[n, 1] = p2
    half = 0.5 * dt
    for i in range(n, 0, -1):
        ha, ua, sa = h_traj[i], u_traj[i], src[i]
        hb, ub, sb = h_traj[i - 1], u_traj[i - 1], src[i - 1]
        hm, um, sm = 0.5 * (ha + hb), 0.5 * (ua + ub), 0.5 * (sa + sb)
        k1a, k1b = rhs(p1, p2, ha, ua, sa)
        q1 = p1 + half * k1a
        q2 = p2 + half * k1b
        if not bc(q1, q2, hm, um):
            return out, i
        k2a, k2b = rhs(q1, q2, hm, um, sm)
        q1 = p1 + half * k2a
        q2 = p2 + half * k2b
        bc(q1, q2, hm, um)
        k3a, k3b = rhs(q1, q2, hm, um, sm)
        q1 = p1 + dt * k3a
        q2 = p2 + dt * k3b
        if not bc(q1, q2, hb, ub):
            return out, i - 1
        k4a, k4b = rhs(q1, q2, hb, ub, sb)
        p1 = p1 + (dt / 6.0) * (k1a + 2.0 * k2a + 2.0 * k3a + k4a)
        p2 = p2 + (dt / 6.0) * (k1b + 2.0 * k2b + 2.0 * k3b + k4b)
        bc(p1, p2, hb, ub)
        if not (np.all(np.isfinite(p1)) and np.all(np.isfinite(p2))):
            return out, i - 1
        out[i - 1, 0] = p1
        out[i - 1, 1] = p2
    return out, -1
