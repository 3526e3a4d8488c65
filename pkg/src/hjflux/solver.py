"""Monotone explicit schemes for ``u + H(Du) = 0`` and ``u_t + H(Du) = 0`` on a domain.

Two boundary closures are available:

* ``soner``: every inside node (including those next to the boundary) carries
  the axis-wise Godunov Hamiltonian; one-sided terms that would need an
  exterior value are dropped, so boundary nodes only see inward information.
* ``flux``: boundary unknowns sit on the projected boundary points and obey
  ``u + max(A, H-(p', q)) = 0`` with ``q`` the inward normal slope.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import CFLViolation, ConfigError, MaxIterations, MissingNeighbor, NonFiniteField, ThinDomain
from .geometry import (
    BOUNDARY,
    EXTERIOR,
    INTERIOR,
    BoundaryFrame,
    CartesianGrid,
    Domain,
    _frame_from_point,
    cartesian_grid,
    classify_grid,
    project,
)
from .hamiltonian import RADIAL, DirectionalSlice, Hamiltonian, coercivity_bound, valley

logger = logging.getLogger(__name__)

SONER, FLUX = kernels.SONER, kernels.FLUX
NORMAL_REACH = (1.0, 1.5, 2.0, 2.5, 3.0, 4.0)


@dataclass(frozen=True)
class BCMode:
    mode: str = "flux"  # "soner" | "flux"
    limiter: str = "A0"  # "A0" | "constant"
    value: float | None = None

    def __post_init__(self):
        if self.mode not in ("soner", "flux"):
            raise ConfigError(f"bc.mode: expected 'soner' or 'flux', got {self.mode!r}")
        if self.limiter not in ("A0", "constant"):
            raise ConfigError(f"bc.limiter.kind: expected 'A0' or 'constant', got {self.limiter!r}")
        if self.limiter == "constant" and self.value is None:
            raise ConfigError("bc.limiter.value: required for a constant limiter")

    @property
    def code(self) -> int:
        return FLUX if self.mode == "flux" else SONER


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    equation: str
    hamiltonian: Hamiltonian
    domain: Domain
    bc: BCMode = BCMode()
    n: int = 100
    T: float | None = None
    outputs: tuple = ()
    init: dict = field(default_factory=lambda: {"kind": "constant", "params": {"value": 0.0}})
    cfl: float = 0.45
    stop_tol: float = 1e-8
    max_iter: int = 10**6
    name: str = ""

    def __post_init__(self):
        if self.equation not in ("stationary", "evolution"):
            raise ConfigError(f"equation: expected 'stationary' or 'evolution', got {self.equation!r}")
        if self.equation == "evolution" and not (self.T is not None and self.T > 0):
            raise ConfigError("time.T: evolution needs a positive horizon")
        if self.hamiltonian.dim != self.domain.dim:
            raise ConfigError("hamiltonian: dimension does not match the domain")

    def replace(self, **kw) -> "ProblemSpec":
        vals = {k: getattr(self, k) for k in self.__dataclass_fields__}
        vals.update(kw)
        return ProblemSpec(**vals)

    def output_times(self) -> list[float]:
        if self.equation != "evolution":
            return []
        ts = sorted({float(t) for t in self.outputs if 0 < float(t) <= self.T} | {float(self.T)})
        return ts


# -- initial data ------------------------------------------------------------

def depth(domain: Domain, X) -> np.ndarray:
    """Distance-like depth below the boundary (exact for intervals and disks)."""
    X = np.asarray(X, dtype=float)
    if domain.family == "interval":
        a, b = domain.params["a"], domain.params["b"]
        return np.minimum(X[:, 0] - a, b - X[:, 0])
    if domain.family == "disk":
        return domain.params["r"] - np.linalg.norm(X - domain.center, axis=-1)
    return -domain.signed_distance(X)


def initial_field(init: dict, domain: Domain, X) -> np.ndarray:
    kind = init.get("kind", "constant")
    p = init.get("params", {}) or {}
    X = np.asarray(X, dtype=float)
    if kind == "constant":
        return np.full(len(X), float(p.get("value", 0.0)))
    if kind == "linear":
        slope = np.atleast_1d(np.asarray(p.get("slope", [1.0] * domain.dim), dtype=float))
        if slope.shape != (domain.dim,):
            raise ConfigError("init.params.slope: need one entry per dimension")
        return float(p.get("offset", 0.0)) + X @ slope
    if kind == "tent":
        return float(p.get("offset", 0.0)) + float(p.get("scale", 1.0)) * np.maximum(depth(domain, X), 0.0)
    if kind == "table":
        knots = np.asarray(p.get("knots", []), dtype=float)
        if domain.dim != 1 or knots.ndim != 2 or knots.shape[1] != 2:
            raise ConfigError("init.params.knots: 1D table of [x, u] pairs expected")
        return np.interp(X[:, 0], knots[:, 0], knots[:, 1])
    raise ConfigError(f"init.kind: unknown kind {kind!r}")


# -- grid ----------------------------------------------------------------------

@dataclass(eq=False)
class Grid:
    """Non-exterior nodes of a Cartesian grid plus their stencils."""

    domain: Domain
    cart: CartesianGrid
    mode: int
    flat: np.ndarray  # flat Cartesian index of each node
    labels: np.ndarray  # INTERIOR / BOUNDARY per node
    grid_positions: np.ndarray
    positions: np.ndarray  # where each unknown lives
    nbr: np.ndarray  # (M, dim, 2) Cartesian neighbors, -1 if exterior
    slot_idx: np.ndarray
    slot_w: np.ndarray
    slot_inv: np.ndarray
    boundary_nodes: np.ndarray
    frames: list
    b_of_node: np.ndarray
    bn_idx: np.ndarray
    bn_w: np.ndarray
    bn_inv: np.ndarray
    bt_idx: np.ndarray
    bt_w: np.ndarray
    bt_inv: np.ndarray
    bN: np.ndarray
    bT: np.ndarray
    normal_reach: np.ndarray

    @property
    def h(self) -> np.ndarray:
        return self.cart.h

    @property
    def hmin(self) -> float:
        return float(np.min(self.cart.h))

    @property
    def size(self) -> int:
        return len(self.flat)


class _Arc:
    """Linear interpolation of boundary values along the polar angle."""

    def __init__(self, domain: Domain, nodes: np.ndarray, points: np.ndarray):
        self.center = domain.center
        ang = np.arctan2(points[:, 1] - self.center[1], points[:, 0] - self.center[0])
        order = np.lexsort((nodes, ang))
        self.angles = ang[order]
        self.nodes = nodes[order]

    def angle(self, x) -> np.ndarray:
        x = np.atleast_2d(x)
        return np.arctan2(x[:, 1] - self.center[1], x[:, 0] - self.center[0])

    def weights(self, sigma):
        sigma = np.atleast_1d(sigma)
        B = len(self.angles)
        k = np.searchsorted(self.angles, sigma, side="right")
        k0, k1 = (k - 1) % B, k % B
        span = (self.angles[k1] - self.angles[k0]) % (2 * np.pi)
        off = (sigma - self.angles[k0]) % (2 * np.pi)
        t = np.where(span > 0, off / np.where(span > 0, span, 1.0), 0.5)
        t = np.clip(t, 0.0, 1.0)
        return self.nodes[k0], self.nodes[k1], 1.0 - t, t


def build_grid(domain: Domain, n: int, mode: int) -> Grid:
    cart = cartesian_grid(domain, n)
    labels_all = classify_grid(cart)
    Xall = cart.coords()
    keep = labels_all != EXTERIOR
    flat = np.flatnonzero(keep)
    M = len(flat)
    node_of = np.full(len(labels_all), -1, dtype=np.int64)
    node_of[flat] = np.arange(M)
    labels = labels_all[flat].astype(np.int64)
    gpos = Xall[flat]
    dim = domain.dim
    h = cart.h
    hs = float(np.max(h))
    shape = cart.shape

    multi = np.stack(np.unravel_index(flat, shape), axis=-1)
    nbr = np.full((M, dim, 2), -1, dtype=np.int64)
    for ax in range(dim):
        for side, step in ((0, -1), (1, 1)):
            m = multi.copy()
            m[:, ax] += step
            ok = (m[:, ax] >= 0) & (m[:, ax] < shape[ax])
            idx = np.full(M, -1, dtype=np.int64)
            idx[ok] = node_of[np.ravel_multi_index(tuple(m[ok].T), shape)]
            nbr[:, ax, side] = idx
    interior = labels == INTERIOR
    if np.any(nbr[interior] < 0):
        raise MissingNeighbor("an interior node has an exterior neighbor")

    slot_idx = np.full((M, dim, 2, 2), -1, dtype=np.int64)
    slot_w = np.zeros((M, dim, 2, 2))
    slot_inv = np.zeros((M, dim, 2))
    slot_idx[:, :, :, 0] = nbr
    slot_w[:, :, :, 0] = np.where(nbr >= 0, 1.0, 0.0)
    slot_inv[:] = (1.0 / h)[None, :, None]

    bnodes = np.flatnonzero(labels == BOUNDARY)
    B = len(bnodes)
    b_of_node = np.full(M, -1, dtype=np.int64)
    b_of_node[bnodes] = np.arange(B)
    positions = gpos.copy()
    frames: list[BoundaryFrame] = []
    for i in bnodes:
        xb = project(domain, gpos[i])
        frames.append(_frame_from_point(domain, xb))
    bN = np.zeros((B, 2))
    bT = np.zeros((B, 2))
    for k, fr in enumerate(frames):
        bN[k, :dim] = fr.n_in
        if dim == 2:
            bT[k] = fr.tangent_basis[0]
    bn_idx = np.full((B, 4), -1, dtype=np.int64)
    bn_w = np.zeros((B, 4))
    bn_inv = np.zeros(B)
    bt_idx = np.zeros((B, 2, 2), dtype=np.int64)
    bt_w = np.zeros((B, 2, 2))
    bt_inv = np.zeros((B, 2))
    reach = np.zeros(B)

    if mode == FLUX:
        positions[bnodes] = np.array([fr.x for fr in frames]).reshape(B, dim)
        # inward normal sample, interpolated from interior nodes only
        for k, i in enumerate(bnodes):
            for kap in NORMAL_REACH:
                P = frames[k].x + kap * hs * frames[k].n_in
                got = _interp_stencil(cart, P, labels_all, node_of)
                if got is not None:
                    ids, ws = got
                    bn_idx[k, : len(ids)] = ids
                    bn_w[k, : len(ids)] = ws
                    bn_inv[k] = 1.0 / (kap * hs)
                    reach[k] = kap
                    break
            else:
                raise ThinDomain(f"no interpolable inward sample at boundary point {frames[k].x}")
        if dim == 1:
            for i in np.flatnonzero(interior):
                for side in (0, 1):
                    j = nbr[i, 0, side]
                    if labels[j] == BOUNDARY:
                        slot_inv[i, 0, side] = 1.0 / abs(positions[j, 0] - gpos[i, 0])
        else:
            arc = _Arc(domain, bnodes, positions[bnodes])
            # interior stencils reach the boundary where the grid line crosses it
            for i in np.flatnonzero(interior):
                for ax in range(dim):
                    for side, sgn in ((0, -1.0), (1, 1.0)):
                        j = nbr[i, ax, side]
                        if labels[j] != BOUNDARY:
                            continue
                        e = np.zeros(dim)
                        e[ax] = sgn
                        t = _crossing(domain, gpos[i], e, h[ax])
                        c = gpos[i] + t * e
                        k0, k1, w0, w1 = arc.weights(arc.angle(c))
                        slot_idx[i, ax, side] = (k0[0], k1[0])
                        slot_w[i, ax, side] = (w0[0], w1[0])
                        slot_inv[i, ax, side] = 1.0 / t
            # tangential samples at arc distance ~h on both sides
            sig = arc.angle(positions[bnodes])
            eps = 1e-6
            speed = np.linalg.norm(domain.boundary_point(sig + eps) - domain.boundary_point(sig - eps), axis=-1) / (2 * eps)
            dsig = hs / speed
            for side, sgn in ((0, -1.0), (1, 1.0)):
                cpts = domain.boundary_point(sig + sgn * dsig)
                s = sgn * np.einsum("ij,ij->i", cpts - positions[bnodes], bT)
                if np.any(s < 0.5 * hs):
                    raise ThinDomain("tangential boundary samples collapse; refine the grid")
                k0, k1, w0, w1 = arc.weights(arc.angle(cpts))
                bt_idx[:, side, 0], bt_idx[:, side, 1] = k0, k1
                bt_w[:, side, 0], bt_w[:, side, 1] = w0, w1
                bt_inv[:, side] = 1.0 / s
        # boundary nodes use the frame operator, not the Cartesian slots
        slot_idx[bnodes] = -1
        slot_w[bnodes] = 0.0

    return Grid(domain, cart, mode, flat, labels, gpos, positions, nbr, slot_idx, slot_w, slot_inv,
                bnodes, frames, b_of_node, bn_idx, bn_w, bn_inv, bt_idx, bt_w, bt_inv, bN, bT, reach)


def _interp_stencil(cart: CartesianGrid, P, labels_all, node_of):
    """Multilinear weights of ``P``; None unless every weighted corner is interior."""
    dim = len(cart.axes)
    lo = np.array([a[0] for a in cart.axes])
    rel = (np.asarray(P) - lo) / cart.h
    base = np.floor(rel).astype(int)
    base = np.clip(base, 0, np.array(cart.shape) - 2)
    frac = rel - base
    ids, ws = [], []
    for corner in range(2**dim):
        bits = [(corner >> a) & 1 for a in range(dim)]
        w = float(np.prod([frac[a] if bits[a] else 1 - frac[a] for a in range(dim)]))
        if w <= 1e-12:
            continue
        m = tuple(int(base[a] + bits[a]) for a in range(dim))
        if any(x < 0 or x >= s for x, s in zip(m, cart.shape)):
            return None
        f = int(np.ravel_multi_index(m, cart.shape))
        if labels_all[f] != INTERIOR:
            return None
        ids.append(int(node_of[f]))
        ws.append(w)
    total = sum(ws)
    return ids, [w / total for w in ws]


def _crossing(domain: Domain, x, e, h):
    """Distance along ``e`` from inside point ``x`` to the boundary."""
    lo = 0.0
    hi = h
    while domain.phi(x + hi * e) <= 0:
        lo = hi
        hi += h
        if hi > 1e3 * h:
            raise ThinDomain("grid line does not leave the domain")
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if domain.phi(x + mid * e) <= 0:
            lo = mid
        else:
            hi = mid
    return max(0.5 * (lo + hi), h)


# -- discretization ------------------------------------------------------------

@dataclass(eq=False)
class Discretization:
    spec: ProblemSpec
    grid: Grid
    data: kernels.KernelData

    @property
    def H(self) -> Hamiltonian:
        return self.spec.hamiltonian

    def operator_values(self, u, backend=None) -> np.ndarray:
        return kernels.operator_values(self.data, u, backend)

    def residual(self, u, backend=None) -> np.ndarray:
        """Stationary residual ``u + H_h(u)`` at every node."""
        return np.asarray(u, dtype=float) + self.operator_values(u, backend)

    def numerical_hamiltonian(self, node: int, u) -> float:
        if self.grid.labels[node] != INTERIOR and self.grid.mode == FLUX:
            raise MissingNeighbor("numerical_hamiltonian is defined at interior nodes")
        return float(self.operator_values(u)[node])

    def boundary_operator(self, node: int, u, u_t: float | None = None):
        """``(sub_residual, super_residual)``; the Soner closure has no sub residual.

        With ``u_t`` the time-difference analogue ``u_t + F`` is returned,
        otherwise the stationary ``u + F``.
        """
        if self.grid.labels[node] != BOUNDARY:
            raise ValueError("node is not a boundary node")
        val = float(self.operator_values(u)[node])
        lead = float(u_t) if u_t is not None else float(np.asarray(u)[node])
        res = lead + val
        if self.spec.bc.mode == "soner":
            return None, res
        return res, res

    def step_map(self, u, dt, backend=None) -> np.ndarray:
        """One explicit update of the configured equation."""
        u = np.asarray(u, dtype=float)
        if self.spec.equation == "stationary":
            return u - dt * self.residual(u, backend)
        return u - dt * self.operator_values(u, backend)


def _kernel_data(H: Hamiltonian, bc: BCMode, grid: Grid, bracket: float) -> kernels.KernelData:
    limiter_kind = 1 if bc.limiter == "constant" else 0
    icfg = np.array([H.kind, grid.domain.dim, grid.mode, limiter_kind, int(H.family in RADIAL)], dtype=np.int64)
    fcfg = np.array([H.c, float(bc.value or 0.0), float(bracket)])
    tab_p = H.knots_p if len(H.knots_p) else np.zeros(2)
    tab_h = H.knots_h if len(H.knots_h) else np.zeros(2)
    g = grid
    return kernels.KernelData(icfg, fcfg, np.ascontiguousarray(H.shift, dtype=float),
                              np.ascontiguousarray(H.weights, dtype=float), np.ascontiguousarray(tab_p, dtype=float),
                              np.ascontiguousarray(tab_h, dtype=float), g.labels, g.slot_idx, g.slot_w, g.slot_inv,
                              g.b_of_node, g.bn_idx, g.bn_w, g.bn_inv, g.bt_idx, g.bt_w, g.bt_inv, g.bN, g.bT)


def discretize(spec: ProblemSpec) -> Discretization:
    grid = build_grid(spec.domain, spec.n, spec.bc.code)
    H = spec.hamiltonian
    if spec.bc.limiter == "constant" and spec.domain.dim == 1:
        for fr in grid.frames:
            env = valley(DirectionalSlice.from_frame(H, fr, np.zeros(0)))
            if spec.bc.value < env.min_value - 1e-9:
                raise ConfigError(f"bc.limiter.value: {spec.bc.value} is below A0 = {env.min_value}")
    bracket = max(64.0, 4.0 * coercivity_bound(H, max(abs(H.min_value), 1.0) * 16.0))
    return Discretization(spec, grid, _kernel_data(H, spec.bc, grid, bracket))


# -- reports -------------------------------------------------------------------

@dataclass(eq=False)
class SolveReport:
    spec: ProblemSpec
    disc: Discretization
    times: list
    fields: list
    residual_history: np.ndarray
    iterations: int
    converged: bool
    dt: float
    lipschitz: float
    slope_radius: float
    backend: str
    diagnostics: dict = field(default_factory=dict)

    @property
    def field(self) -> np.ndarray:
        return self.fields[-1]

    @property
    def positions(self) -> np.ndarray:
        return self.disc.grid.positions

    @property
    def labels(self) -> np.ndarray:
        return self.disc.grid.labels

    @property
    def h(self) -> float:
        return self.disc.grid.hmin


def _time_step(disc: Discretization, u0: np.ndarray, cfl: float):
    if not 0 < cfl <= 1:
        raise CFLViolation(f"cfl factor {cfl} outside (0, 1]")
    spec, grid, H = disc.spec, disc.grid, disc.H
    op0 = disc.operator_values(u0)
    if spec.equation == "evolution":
        level = float(np.max(np.abs(op0)))
    else:
        level = float(np.max(np.abs(u0 + op0)) + np.max(np.abs(u0)) + abs(H.min_value))
    lip0 = 0.0
    for ax in range(grid.domain.dim):
        for side in (0, 1):
            j = grid.nbr[:, ax, side]
            ok = j >= 0
            if np.any(ok):
                lip0 = max(lip0, float(np.max(np.abs(u0[j[ok]] - u0[ok]))) / grid.h[ax])
    R = 2.0 * max(coercivity_bound(H, level), lip0, float(np.linalg.norm(H.minimizer)) + 1.0)
    L = H.lipschitz(R, resolution=grid.hmin)
    geom = 1.0 if grid.domain.dim == 1 else 3.0
    dt = cfl * grid.hmin / (geom * L)
    return dt, L, R


def solve_stationary(spec: ProblemSpec, disc: Discretization | None = None, u0=None) -> SolveReport:
    if spec.equation != "stationary":
        raise ConfigError("equation: solve_stationary needs a stationary problem")
    disc = disc or discretize(spec)
    u = initial_field(spec.init, spec.domain, disc.grid.positions) if u0 is None else np.array(u0, dtype=float)
    if not np.all(np.isfinite(u)):
        raise NonFiniteField("initial field is not finite")
    dt, L, R = _time_step(disc, u, spec.cfl)
    it, res, status, hist = kernels.stationary_loop(disc.data, u, dt, spec.stop_tol, spec.max_iter)
    if status == 2 or not np.all(np.isfinite(u)):
        raise NonFiniteField(f"field blew up after {it} iterations")
    if status == 1:
        raise MaxIterations(f"residual {res:.3e} after {it} iterations")
    logger.debug("stationary %s n=%d: %d iterations, residual %.3e", spec.name, spec.n, it, res)
    return SolveReport(spec, disc, [math.inf], [u], hist, it, True, dt, L, R, kernels.BACKEND,
                       {"final_residual": res})


def solve_evolution(spec: ProblemSpec, disc: Discretization | None = None, u0=None) -> SolveReport:
    if spec.equation != "evolution":
        raise ConfigError("equation: solve_evolution needs an evolution problem")
    disc = disc or discretize(spec)
    u = initial_field(spec.init, spec.domain, disc.grid.positions) if u0 is None else np.array(u0, dtype=float)
    if not np.all(np.isfinite(u)):
        raise NonFiniteField("initial field is not finite")
    dt, L, R = _time_step(disc, u, spec.cfl)
    times, fields = [], []
    t_prev, steps = 0.0, 0
    for t in spec.output_times():
        nsteps = max(1, int(math.ceil((t - t_prev) / dt - 1e-12)))
        ok = kernels.evolution_loop(disc.data, u, (t - t_prev) / nsteps, nsteps)
        if not ok:
            raise NonFiniteField(f"field blew up before t={t}")
        steps += nsteps
        times.append(t)
        fields.append(u.copy())
        t_prev = t
    return SolveReport(spec, disc, times, fields, np.zeros(0), steps, True, dt, L, R, kernels.BACKEND)


def solve(spec: ProblemSpec) -> SolveReport:
    return solve_stationary(spec) if spec.equation == "stationary" else solve_evolution(spec)
