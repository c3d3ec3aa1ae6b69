"""Compiled stencil loops for the time stepper.

These mirror the numpy operators in :mod:`axiswirl.ops` term by term; they
exist only because the time loop dominates run time.
"""

import numpy as np
from numba import njit


# reassociation and reciprocal arithmetic only: NaN and inf must still propagate
_FASTMATH = {"reassoc", "contract", "arcp"}


@njit(cache=True, error_model="numpy", fastmath=_FASTMATH)
def momentum_rhs(rc, rf, hr, hz, zs, rho, rr, rz, ur, uth, uz, dur, duth, duz):
    nr, nz = rho.shape
    ihr2 = 1.0 / (hr * hr)
    ihz2 = 1.0 / (hz * hz)
    i2hr = 0.5 / hr
    i2hz = 0.5 / hz
    ihz = 1.0 / hz
    # ghost-padded copies: z ghosts by the wall condition, radial ghosts by parity
    # and the no-slip outer wall
    up = np.empty((nr + 1, nz + 2))
    tp = np.empty((nr + 2, nz + 2))
    wp = np.empty((nr + 2, nz + 1))
    for i in range(nr + 1):
        up[i, 1:nz + 1] = ur[i]
        up[i, 0] = zs * ur[i, 0]
        up[i, nz + 1] = zs * ur[i, nz - 1]
    for i in range(nr):
        tp[i + 1, 1:nz + 1] = uth[i]
        tp[i + 1, 0] = zs * uth[i, 0]
        tp[i + 1, nz + 1] = zs * uth[i, nz - 1]
    tp[0] = -tp[1]
    tp[nr + 1] = -tp[nr]
    for i in range(nr):
        wp[i + 1] = uz[i]
    wp[0] = wp[1]
    wp[nr + 1] = -wp[nr]
    irc = 1.0 / rc
    # u^r on interior r-faces
    for i in range(1, nr):
        irf = 1.0 / rf[i]
        a_hi = rc[i] * ihr2 * irf
        a_lo = rc[i - 1] * ihr2 * irf
        for j in range(nz):
            u = up[i, j + 1]
            n = up[i, j + 2]
            s = up[i, j]
            e = up[i + 1, j + 1]
            w_ = up[i - 1, j + 1]
            w = 0.25 * (wp[i, j] + wp[i, j + 1] + wp[i + 1, j] + wp[i + 1, j + 1])
            t0 = tp[i, j + 1]
            t1 = tp[i + 1, j + 1]
            cent = 0.5 * (t0 * t0 + t1 * t1) * irf
            lap = a_hi * (e - u) - a_lo * (u - w_) + (n - 2.0 * u + s) * ihz2 - u * irf * irf
            dur[i, j] = -(u * (e - w_) * i2hr + w * (n - s) * i2hz) + cent + lap / rr[i, j]
    # u^theta at cells; advection in flux form (1/r) div(u r u^theta)
    for i in range(nr):
        ri = rc[i]
        rhi = rc[i + 1] if i < nr - 1 else 0.0
        rlo = rc[i - 1] if i > 0 else 0.0
        cf_hi = 0.5 * rf[i + 1] * irc[i] / hr * irc[i]
        cf_lo = 0.5 * rf[i] * irc[i] / hr * irc[i]
        b_hi = rf[i + 1] * ihr2 * irc[i]
        b_lo = rf[i] * ihr2 * irc[i]
        m = 1.0 if i < nr - 1 else 0.0
        for j in range(nz):
            u = tp[i + 1, j + 1]
            g = ri * u
            fr_hi = m * ur[i + 1, j] * (g + rhi * tp[i + 2, j + 1])
            fr_lo = ur[i, j] * (g + rlo * tp[i, j + 1])
            fz_hi = wp[i + 1, j + 1] * (g + ri * tp[i + 1, j + 2])
            fz_lo = wp[i + 1, j] * (g + ri * tp[i + 1, j])
            if j == nz - 1:
                fz_hi = 0.0
            if j == 0:
                fz_lo = 0.0
            adv = cf_hi * fr_hi - cf_lo * fr_lo + 0.5 * (fz_hi - fz_lo) * ihz * irc[i]
            lap = (b_hi * (tp[i + 2, j + 1] - u) - b_lo * (u - tp[i, j + 1])
                   + (tp[i + 1, j + 2] - 2.0 * u + tp[i + 1, j]) * ihz2 - u * irc[i] * irc[i])
            duth[i, j] = -adv + lap / rho[i, j]
    # u^3 on interior z-faces
    for i in range(nr):
        b_hi = rf[i + 1] * ihr2 * irc[i]
        b_lo = rf[i] * ihr2 * irc[i]
        for j in range(1, nz):
            w = wp[i + 1, j]
            u_at = 0.25 * (ur[i, j - 1] + ur[i + 1, j - 1] + ur[i, j] + ur[i + 1, j])
            e = wp[i + 2, j]
            w_ = wp[i, j]
            n = wp[i + 1, j + 1]
            s = wp[i + 1, j - 1]
            lap = b_hi * (e - w) - b_lo * (w - w_) + (n - 2.0 * w + s) * ihz2
            duz[i, j] = -(u_at * (e - w_) * i2hr + w * (n - s) * i2hz) + lap / rz[i, j]


@njit(cache=True)
def _minmod(a, b):
    if a * b <= 0.0:
        return 0.0
    if abs(a) < abs(b):
        return a
    return b


@njit(cache=True)
def transport_rate(rc, rf, hr, hz, q, ur, uz, rate):
    """Upwind MUSCL-minmod rate ``-(u . grad q)`` written face by face."""
    nr, nz = q.shape
    for i in range(nr):
        for j in range(nz):
            rate[i, j] = 0.0
    # r faces
    for j in range(nz):
        for i in range(1, nr):
            u = ur[i, j]
            if u == 0.0:
                continue
            if u > 0.0:
                lo = q[i - 2, j] if i >= 2 else q[0, j]
                s = _minmod(q[i, j] - q[i - 1, j], q[i - 1, j] - lo)
                qf = q[i - 1, j] + 0.5 * s
            else:
                hi = q[i + 1, j] if i + 1 < nr else q[nr - 1, j]
                s = _minmod(hi - q[i, j], q[i, j] - q[i - 1, j])
                qf = q[i, j] - 0.5 * s
            fl = rf[i] * u / hr
            rate[i - 1, j] -= fl * (qf - q[i - 1, j]) / rc[i - 1]
            rate[i, j] += fl * (qf - q[i, j]) / rc[i]
    # z faces
    for i in range(nr):
        for j in range(1, nz):
            w = uz[i, j]
            if w == 0.0:
                continue
            if w > 0.0:
                lo = q[i, j - 2] if j >= 2 else q[i, 0]
                s = _minmod(q[i, j] - q[i, j - 1], q[i, j - 1] - lo)
                qf = q[i, j - 1] + 0.5 * s
            else:
                hi = q[i, j + 1] if j + 1 < nz else q[i, nz - 1]
                s = _minmod(hi - q[i, j], q[i, j] - q[i, j - 1])
                qf = q[i, j] - 0.5 * s
            rate[i, j - 1] -= w * (qf - q[i, j - 1]) / hz
            rate[i, j] += w * (qf - q[i, j]) / hz


@njit(cache=True)
def divergence(rc, rf, hr, hz, ur, uz, out):
    nr, nz = out.shape
    ihz = 1.0 / hz
    for i in range(nr):
        a_hi = rf[i + 1] / (rc[i] * hr)
        a_lo = rf[i] / (rc[i] * hr)
        for j in range(nz):
            out[i, j] = a_hi * ur[i + 1, j] - a_lo * ur[i, j] + (uz[i, j + 1] - uz[i, j]) * ihz


@njit(cache=True)
def courant(rc, rf, hr, hz, ur, uz):
    nr, nz = rc.size, ur.shape[1]
    ihz = 1.0 / hz
    m = 0.0
    for i in range(nr):
        a_hi = rf[i + 1] / (rc[i] * hr)
        a_lo = rf[i] / (rc[i] * hr)
        for j in range(nz):
            s = a_hi * abs(ur[i + 1, j]) + a_lo * abs(ur[i, j]) + (abs(uz[i, j + 1]) + abs(uz[i, j])) * ihz
            if s > m:
                m = s
    return m


@njit(cache=True)
def thomas_factor(lower, diag, upper):
    """LU sweep coefficients for independent tridiagonal systems (one per row)."""
    m, n = diag.shape
    c = np.empty((m, n))
    ib = np.empty((m, n))
    for k in range(m):
        beta = diag[k, 0]
        ib[k, 0] = 1.0 / beta
        c[k, 0] = upper[k, 0] / beta
        for i in range(1, n):
            beta = diag[k, i] - lower[k, i] * c[k, i - 1]
            ib[k, i] = 1.0 / beta
            c[k, i] = upper[k, i] / beta
    return c, ib


@njit(cache=True)
def thomas_solve(lower, c, ib, rhs):
    m, n = rhs.shape
    out = np.empty((m, n))
    for k in range(m):
        d = out[k]
        d[0] = rhs[k, 0] * ib[k, 0]
        for i in range(1, n):
            d[i] = (rhs[k, i] - lower[k, i] * d[i - 1]) * ib[k, i]
        for i in range(n - 2, -1, -1):
            d[i] -= c[k, i] * d[i + 1]
    return out
