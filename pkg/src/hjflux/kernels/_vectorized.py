"""Pure-numpy mirror of ``_loops`` vectorized over nodes."""

import numpy as np

SONER, FLUX = 0, 1
BOUNDARY = 1
TAU_REGROW = 1.05


def _table(x, tab_p, tab_h):
    out = np.interp(x, tab_p, tab_h)
    sl = (tab_h[1] - tab_h[0]) / (tab_p[1] - tab_p[0])
    sr = (tab_h[-1] - tab_h[-2]) / (tab_p[-1] - tab_p[-2])
    out = np.where(x < tab_p[0], tab_h[0] + sl * (x - tab_p[0]), out)
    return np.where(x > tab_p[-1], tab_h[-1] + sr * (x - tab_p[-1]), out)


def g_axis(kind, x, ax, shift, weight, tab_p, tab_h):
    if kind <= 2:
        d = x - shift[ax]
        return d * d
    if kind == 3:
        return weight[ax] * np.abs(x - shift[ax])
    return _table(x, tab_p, tab_h)


def outer(kind, r, c):
    if kind == 1:
        return np.sqrt(r) - c
    if kind == 2:
        return np.sqrt(np.sqrt(r)) - c
    return r - c


def h_eval(kind, dim, shift, weight, c, tab_p, tab_h, p0, p1):
    r = g_axis(kind, p0, 0, shift, weight, tab_p, tab_h)
    if dim == 2:
        r1 = g_axis(kind, p1, 1, shift, weight, tab_p, tab_h)
        r = np.maximum(r, r1) if kind == 3 else r + r1
    return outer(kind, r, c)


def _gather(u, idx, w):
    """Weighted sum over the last axis of ``idx``; -1 entries contribute 0."""
    safe = np.where(idx >= 0, idx, 0)
    return np.sum(np.where(idx >= 0, w * u[safe], 0.0), axis=-1)


def numerical_hamiltonian(nodes, u, kind, dim, shift, weight, c, tab_p, tab_h, slot_idx, slot_w, slot_inv):
    uc = u[nodes]
    acc = None
    for ax in range(dim):
        v = shift[ax]
        gmin = float(g_axis(kind, np.float64(v), ax, shift, weight, tab_p, tab_h))
        terms = []
        for side in (0, 1):
            idx = slot_idx[nodes, ax, side]
            has = idx[:, 0] >= 0
            nb = _gather(u, idx, slot_w[nodes, ax, side])
            if side == 0:
                d = (uc - nb) * slot_inv[nodes, ax, 0]
                arg = np.maximum(d, v)
            else:
                d = (nb - uc) * slot_inv[nodes, ax, 1]
                arg = np.minimum(d, v)
            terms.append(np.where(has, g_axis(kind, np.where(has, arg, v), ax, shift, weight, tab_p, tab_h), gmin))
        gh = np.maximum(terms[0], terms[1])
        if acc is None:
            acc = gh
        elif kind == 3:
            acc = np.maximum(acc, gh)
        else:
            acc = acc + gh
    return outer(kind, acc, c)


def _ternary(f, lo, hi, iters=90):
    for _ in range(iters):
        m1 = lo + (hi - lo) / 3.0
        m2 = hi - (hi - lo) / 3.0
        f1, f2 = f(m1), f(m2)
        new_lo = np.where(f1 > f2, m1, np.where(f1 < f2, lo, m1))
        new_hi = np.where(f1 < f2, m2, np.where(f1 > f2, hi, m2))
        lo, hi = new_lo, new_hi
    return 0.5 * (lo + hi)


def boundary_operator(bs, nodes, u, icfg, fcfg, shift, weight, tab_p, tab_h,
                      bn_idx, bn_w, bn_inv, bt_idx, bt_w, bt_inv, bN, bT):
    kind, dim, radial = int(icfg[0]), int(icfg[1]), int(icfg[4])
    c, R = fcfg[0], fcfg[2]
    uc = u[nodes]
    q = (_gather(u, bn_idx[bs], bn_w[bs]) - uc) * bn_inv[bs]
    n0, n1, t0, t1 = bN[bs, 0], bN[bs, 1], bT[bs, 0], bT[bs, 1]

    def sl(pt, s):
        return h_eval(kind, dim, shift, weight, c, tab_p, tab_h, pt * t0 + s * n0, pt * t1 + s * n1)

    def valley(pt):
        if dim == 1:
            return shift[0] * n0 + 0.0 * pt
        if radial:
            return shift[0] * n0 + shift[1] * n1 + 0.0 * pt
        lo = np.full(np.shape(pt), -R)
        return _ternary(lambda s: sl(pt, s), lo, -lo)

    def hm(pt):
        return sl(pt, np.minimum(q, valley(pt)))

    if dim == 1:
        g = hm(np.zeros_like(q))
    else:
        um = _gather(u, bt_idx[bs, 0], bt_w[bs, 0])
        up = _gather(u, bt_idx[bs, 1], bt_w[bs, 1])
        a = (uc - um) * bt_inv[bs, 0]
        b = (up - uc) * bt_inv[bs, 1]
        if radial:
            m = shift[0] * t0 + shift[1] * t1
        else:
            lo = np.full(q.shape, -R)
            m = _ternary(hm, lo, -lo)
        g_min = hm(np.minimum(np.maximum(m, a), b))
        g_max = np.maximum(hm(a), hm(b))
        g = np.where(a <= b, g_min, g_max)
    if int(icfg[3]) == 1:
        g = np.maximum(g, fcfg[1])
    return g


def operator_values(u, out, icfg, fcfg, shift, weight, tab_p, tab_h, label, slot_idx, slot_w, slot_inv,
                    b_of_node, bn_idx, bn_w, bn_inv, bt_idx, bt_w, bt_inv, bN, bT):
    kind, dim, mode = int(icfg[0]), int(icfg[1]), int(icfg[2])
    is_b = (label == BOUNDARY) if mode == FLUX else np.zeros(label.shape, dtype=bool)
    cart = np.flatnonzero(~is_b)
    out[cart] = numerical_hamiltonian(cart, u, kind, dim, shift, weight, fcfg[0], tab_p, tab_h,
                                      slot_idx, slot_w, slot_inv)
    if np.any(is_b):
        nodes = np.flatnonzero(is_b)
        out[nodes] = boundary_operator(b_of_node[nodes], nodes, u, icfg, fcfg, shift, weight, tab_p, tab_h,
                                       bn_idx, bn_w, bn_inv, bt_idx, bt_w, bt_inv, bN, bT)


def stationary_loop(u, tau, tol_base, max_iter, hist, *args):
    r = np.empty_like(u)
    prev = np.zeros_like(u)
    taus = np.full_like(u, tau)
    res = 0.0
    for it in range(max_iter):
        operator_values(u, r, *args)
        r += u
        res = float(np.max(np.abs(r)))
        hist[it] = res
        if not np.isfinite(res):
            return it + 1, res, 2
        if res <= tol_base * (1.0 + float(np.max(np.abs(u)))):
            return it + 1, res, 0
        stiff = (r * prev < 0.0) & (np.abs(r) >= 0.5 * np.abs(prev))
        taus = np.where(stiff, 0.5 * taus, np.minimum(tau, TAU_REGROW * taus))
        prev[:] = r
        u -= taus * r
    return max_iter, res, 1


def evolution_loop(u, dt, nsteps, *args):
    r = np.empty_like(u)
    for _ in range(nsteps):
        operator_values(u, r, *args)
        u -= dt * r
    return bool(np.all(np.isfinite(u)))
