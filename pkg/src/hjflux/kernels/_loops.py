"""Compiled scalar loops for the explicit monotone update.

Hamiltonians are passed in factored form ``H(p) = outer(combine_i g_i(p_i))``
(see ``hjflux.kernels.KernelData``); ``icfg`` packs
``[kind, dim, mode, limiter_kind, radial]`` and ``fcfg`` packs
``[c, limiter_value, bracket_radius]``.

Hot helpers take scalars only: numba refcounts array arguments on every call,
inlined or not, which costs far more than the arithmetic here.
"""

import math

import numpy as np

from .._jit import njit

SONER, FLUX = 0, 1
BOUNDARY = 1
TABLE = 4
TAU_REGROW = 1.05


@njit
def _table(x, tab_p, tab_h):
    n = tab_p.shape[0]
    if x <= tab_p[0]:
        return tab_h[0] + (tab_h[1] - tab_h[0]) / (tab_p[1] - tab_p[0]) * (x - tab_p[0])
    if x >= tab_p[n - 1]:
        return tab_h[n - 1] + (tab_h[n - 1] - tab_h[n - 2]) / (tab_p[n - 1] - tab_p[n - 2]) * (x - tab_p[n - 1])
    lo, hi = 0, n - 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if tab_p[mid] <= x:
            lo = mid
        else:
            hi = mid
    t = (x - tab_p[lo]) / (tab_p[hi] - tab_p[lo])
    return tab_h[lo] + t * (tab_h[hi] - tab_h[lo])


@njit(inline="always")
def g_scalar(kind, x, q, a):
    """Axis factor for the closed-form kinds (everything but tables)."""
    if kind == 3:
        return a * abs(x - q)
    d = x - q
    return d * d


@njit(inline="always")
def outer(kind, r, c):
    if kind == 1:
        return math.sqrt(r) - c
    if kind == 2:
        return math.sqrt(math.sqrt(r)) - c
    return r - c


@njit(inline="always")
def h_scalar(kind, dim, q0, q1, a0, a1, c, p0, p1):
    r = g_scalar(kind, p0, q0, a0)
    if dim == 2:
        r1 = g_scalar(kind, p1, q1, a1)
        r = max(r, r1) if kind == 3 else r + r1
    return outer(kind, r, c)


@njit
def h_eval(kind, dim, shift, weight, c, tab_p, tab_h, p0, p1):
    if kind == TABLE:
        return _table(p0, tab_p, tab_h) - c
    q1 = shift[1] if dim == 2 else 0.0
    a1 = weight[1] if dim == 2 else 1.0
    return h_scalar(kind, dim, shift[0], q1, weight[0], a1, c, p0, p1)


@njit(inline="always")
def _godunov_axis(kind, uc, has_m, um, inv_m, has_p, up, inv_p, q, a):
    """``max(g(max(D-, q)), g(min(D+, q)))`` with missing sides dropped."""
    gmin = g_scalar(kind, q, q, a)
    tm = gmin
    if has_m:
        tm = g_scalar(kind, max((uc - um) * inv_m, q), q, a)
    tp = gmin
    if has_p:
        tp = g_scalar(kind, min((up - uc) * inv_p, q), q, a)
    return max(tm, tp)


@njit
def _godunov_table(uc, has_m, um, inv_m, has_p, up, inv_p, q, tab_p, tab_h):
    gmin = _table(q, tab_p, tab_h)
    tm = gmin
    if has_m:
        tm = _table(max((uc - um) * inv_m, q), tab_p, tab_h)
    tp = gmin
    if has_p:
        tp = _table(min((up - uc) * inv_p, q), tab_p, tab_h)
    return max(tm, tp)


@njit(inline="always")
def _side(u, slot_idx, slot_w, i, ax, side):
    j0 = slot_idx[i, ax, side, 0]
    if j0 < 0:
        return False, 0.0
    val = slot_w[i, ax, side, 0] * u[j0]
    j1 = slot_idx[i, ax, side, 1]
    if j1 >= 0:
        val += slot_w[i, ax, side, 1] * u[j1]
    return True, val


@njit
def numerical_hamiltonian(i, u, kind, dim, shift, weight, c, tab_p, tab_h, slot_idx, slot_w, slot_inv):
    """Axis-wise Godunov assembly at one node; a missing neighbor drops its one-sided term."""
    uc = u[i]
    acc = 0.0
    for ax in range(dim):
        hm, um = _side(u, slot_idx, slot_w, i, ax, 0)
        hp, up = _side(u, slot_idx, slot_w, i, ax, 1)
        if kind == TABLE:
            gh = _godunov_table(uc, hm, um, slot_inv[i, ax, 0], hp, up, slot_inv[i, ax, 1], shift[ax], tab_p, tab_h)
        else:
            gh = _godunov_axis(kind, uc, hm, um, slot_inv[i, ax, 0], hp, up, slot_inv[i, ax, 1], shift[ax], weight[ax])
        if ax == 0:
            acc = gh
        elif kind == 3:
            acc = max(acc, gh)
        else:
            acc = acc + gh
    return outer(kind, acc, c)


@njit(inline="always")
def _slice(kind, dim, q0, q1, a0, a1, c, pt, s, n0, n1, t0, t1):
    return h_scalar(kind, dim, q0, q1, a0, a1, c, pt * t0 + s * n0, pt * t1 + s * n1)


@njit
def slice_valley(kind, dim, radial, q0, q1, a0, a1, c, pt, n0, n1, t0, t1, R):
    if dim == 1:
        return q0 * n0
    if radial:
        return q0 * n0 + q1 * n1
    lo, hi = -R, R
    for _ in range(90):
        m1 = lo + (hi - lo) / 3.0
        m2 = hi - (hi - lo) / 3.0
        f1 = _slice(kind, dim, q0, q1, a0, a1, c, pt, m1, n0, n1, t0, t1)
        f2 = _slice(kind, dim, q0, q1, a0, a1, c, pt, m2, n0, n1, t0, t1)
        if f1 < f2:
            hi = m2
        elif f1 > f2:
            lo = m1
        else:
            lo, hi = m1, m2
    return 0.5 * (lo + hi)


@njit
def _h_minus(kind, dim, radial, q0, q1, a0, a1, c, pt, q, n0, n1, t0, t1, R):
    pi0 = slice_valley(kind, dim, radial, q0, q1, a0, a1, c, pt, n0, n1, t0, t1, R)
    return _slice(kind, dim, q0, q1, a0, a1, c, pt, min(q, pi0), n0, n1, t0, t1)


@njit
def frame_flux(kind, dim, radial, q0, q1, a0, a1, c, R, q, a, bb, n0, n1, t0, t1):
    """``H-`` at normal slope ``q`` with a Godunov choice of ``p'`` in ``[a, bb]``."""
    if dim == 1:
        return _h_minus(kind, dim, radial, q0, q1, a0, a1, c, 0.0, q, n0, n1, t0, t1, R)
    if a <= bb:
        if radial:
            m = q0 * t0 + q1 * t1
        else:
            lo, hi = -R, R
            for _ in range(90):
                m1 = lo + (hi - lo) / 3.0
                m2 = hi - (hi - lo) / 3.0
                f1 = _h_minus(kind, dim, radial, q0, q1, a0, a1, c, m1, q, n0, n1, t0, t1, R)
                f2 = _h_minus(kind, dim, radial, q0, q1, a0, a1, c, m2, q, n0, n1, t0, t1, R)
                if f1 < f2:
                    hi = m2
                elif f1 > f2:
                    lo = m1
                else:
                    lo, hi = m1, m2
            m = 0.5 * (lo + hi)
        m = min(max(m, a), bb)
        return _h_minus(kind, dim, radial, q0, q1, a0, a1, c, m, q, n0, n1, t0, t1, R)
    ga = _h_minus(kind, dim, radial, q0, q1, a0, a1, c, a, q, n0, n1, t0, t1, R)
    gb = _h_minus(kind, dim, radial, q0, q1, a0, a1, c, bb, q, n0, n1, t0, t1, R)
    return max(ga, gb)


@njit
def boundary_operator(b, i, u, icfg, fcfg, shift, weight, tab_p, tab_h,
                      bn_idx, bn_w, bn_inv, bt_idx, bt_w, bt_inv, bN, bT):
    """``F_A`` at a boundary node: inward interpolated slope, tangential Godunov."""
    kind, dim, radial = icfg[0], icfg[1], icfg[4]
    uc = u[i]
    ui = 0.0
    for k in range(bn_idx.shape[1]):
        if bn_idx[b, k] >= 0:
            ui += bn_w[b, k] * u[bn_idx[b, k]]
    q = (ui - uc) * bn_inv[b]
    a = 0.0
    bb = 0.0
    if dim == 2:
        um = bt_w[b, 0, 0] * u[bt_idx[b, 0, 0]] + bt_w[b, 0, 1] * u[bt_idx[b, 0, 1]]
        up = bt_w[b, 1, 0] * u[bt_idx[b, 1, 0]] + bt_w[b, 1, 1] * u[bt_idx[b, 1, 1]]
        a = (uc - um) * bt_inv[b, 0]
        bb = (up - uc) * bt_inv[b, 1]
    if kind == TABLE:
        # 1D only: the slice s -> H(s n0) has its valley at shift * n0
        g = _table(min(q, shift[0] * bN[b, 0]) * bN[b, 0], tab_p, tab_h) - fcfg[0]
    else:
        g = frame_flux(kind, dim, radial, shift[0], shift[1] if dim == 2 else 0.0, weight[0],
                       weight[1] if dim == 2 else 1.0, fcfg[0], fcfg[2], q, a, bb, bN[b, 0], bN[b, 1], bT[b, 0], bT[b, 1])
    if icfg[3] == 1:
        g = max(g, fcfg[1])
    return g


@njit
def operator_values(u, out, icfg, fcfg, shift, weight, tab_p, tab_h, label, slot_idx, slot_w, slot_inv,
                    b_of_node, bn_idx, bn_w, bn_inv, bt_idx, bt_w, bt_inv, bN, bT):
    kind, dim, mode = icfg[0], icfg[1], icfg[2]
    c = fcfg[0]
    q0 = shift[0]
    q1 = shift[1] if dim == 2 else 0.0
    a0 = weight[0]
    a1 = weight[1] if dim == 2 else 1.0
    radial, limited, lim, R = icfg[4], icfg[3] == 1, fcfg[1], fcfg[2]
    for i in range(u.shape[0]):
        if mode == FLUX and label[i] == BOUNDARY:
            if kind == TABLE:
                out[i] = boundary_operator(b_of_node[i], i, u, icfg, fcfg, shift, weight, tab_p, tab_h,
                                           bn_idx, bn_w, bn_inv, bt_idx, bt_w, bt_inv, bN, bT)
                continue
            # gathers inline, see boundary_operator
            b = b_of_node[i]
            uc = u[i]
            ui = 0.0
            for k in range(bn_idx.shape[1]):
                j = bn_idx[b, k]
                if j >= 0:
                    ui += bn_w[b, k] * u[j]
            q = (ui - uc) * bn_inv[b]
            ta = 0.0
            tb = 0.0
            if dim == 2:
                um = bt_w[b, 0, 0] * u[bt_idx[b, 0, 0]] + bt_w[b, 0, 1] * u[bt_idx[b, 0, 1]]
                up = bt_w[b, 1, 0] * u[bt_idx[b, 1, 0]] + bt_w[b, 1, 1] * u[bt_idx[b, 1, 1]]
                ta = (uc - um) * bt_inv[b, 0]
                tb = (up - uc) * bt_inv[b, 1]
            g = frame_flux(kind, dim, radial, q0, q1, a0, a1, c, R, q, ta, tb, bN[b, 0], bN[b, 1], bT[b, 0], bT[b, 1])
            out[i] = max(g, lim) if limited else g
        elif kind == TABLE:
            out[i] = numerical_hamiltonian(i, u, kind, dim, shift, weight, c, tab_p, tab_h,
                                           slot_idx, slot_w, slot_inv)
        else:
            # same stencil as numerical_hamiltonian, written out by hand: helpers
            # taking arrays pay refcount traffic per call even when inlined
            uc = u[i]
            acc = 0.0
            for ax in range(dim):
                qa = q0 if ax == 0 else q1
                aa = a0 if ax == 0 else a1
                gmin = g_scalar(kind, qa, qa, aa)
                tm = gmin
                j = slot_idx[i, ax, 0, 0]
                if j >= 0:
                    um = slot_w[i, ax, 0, 0] * u[j]
                    j1 = slot_idx[i, ax, 0, 1]
                    if j1 >= 0:
                        um += slot_w[i, ax, 0, 1] * u[j1]
                    tm = g_scalar(kind, max((uc - um) * slot_inv[i, ax, 0], qa), qa, aa)
                tp = gmin
                j = slot_idx[i, ax, 1, 0]
                if j >= 0:
                    up = slot_w[i, ax, 1, 0] * u[j]
                    j1 = slot_idx[i, ax, 1, 1]
                    if j1 >= 0:
                        up += slot_w[i, ax, 1, 1] * u[j1]
                    tp = g_scalar(kind, min((up - uc) * slot_inv[i, ax, 1], qa), qa, aa)
                gh = max(tm, tp)
                if ax == 0:
                    acc = gh
                elif kind == 3:
                    acc = max(acc, gh)
                else:
                    acc += gh
            out[i] = outer(kind, acc, c)


@njit
def stationary_loop(u, tau, tol_base, max_iter, hist, icfg, fcfg, shift, weight, tab_p, tab_h, label,
                    slot_idx, slot_w, slot_inv, b_of_node, bn_idx, bn_w, bn_inv, bt_idx, bt_w, bt_inv, bN, bT):
    """Damped Jacobi iteration ``u <- u - tau_k (u + H_h(u))_k``.

    Every node starts at ``tau``; a node whose residual flips sign without
    shrinking below half is stiffer than ``1 / tau`` there (a Holder valley
    of H) and its damping is halved, then regrown slowly back towards
    ``tau``. Fixed points are unaffected.
    Returns ``(iterations, last_residual, status)`` with status 0 converged,
    1 iteration cap, 2 non-finite field.
    """
    r = np.empty_like(u)
    prev = np.zeros_like(u)
    taus = np.full_like(u, tau)
    for it in range(max_iter):
        operator_values(u, r, icfg, fcfg, shift, weight, tab_p, tab_h, label, slot_idx, slot_w, slot_inv,
                        b_of_node, bn_idx, bn_w, bn_inv, bt_idx, bt_w, bt_inv, bN, bT)
        res = 0.0
        umax = 0.0
        for k in range(u.shape[0]):
            rk = u[k] + r[k]
            r[k] = rk
            res = max(res, abs(rk))
            umax = max(umax, abs(u[k]))
        hist[it] = res
        if not math.isfinite(res):
            return it + 1, res, 2
        if res <= tol_base * (1.0 + umax):
            return it + 1, res, 0
        for k in range(u.shape[0]):
            if r[k] * prev[k] < 0.0 and abs(r[k]) >= 0.5 * abs(prev[k]):
                taus[k] *= 0.5
            elif taus[k] < tau:
                taus[k] = min(tau, TAU_REGROW * taus[k])
            prev[k] = r[k]
            u[k] -= taus[k] * r[k]
    return max_iter, hist[max_iter - 1] if max_iter > 0 else 0.0, 1


@njit
def evolution_loop(u, dt, nsteps, icfg, fcfg, shift, weight, tab_p, tab_h, label,
                   slot_idx, slot_w, slot_inv, b_of_node, bn_idx, bn_w, bn_inv, bt_idx, bt_w, bt_inv, bN, bT):
    """Forward Euler ``u <- u - dt H_h(u)``; returns False on a non-finite field."""
    r = np.empty_like(u)
    for _ in range(nsteps):
        operator_values(u, r, icfg, fcfg, shift, weight, tab_p, tab_h, label, slot_idx, slot_w, slot_inv,
                        b_of_node, bn_idx, bn_w, bn_inv, bt_idx, bt_w, bt_inv, bN, bT)
        for k in range(u.shape[0]):
            u[k] -= dt * r[k]
    for k in range(u.shape[0]):
        if not math.isfinite(u[k]):
            return False
    return True
