"""Reference solutions from the control representation (1D, convex H).

For convex ``H`` with Lagrangian ``L = H*``, the state-constrained solution of
``u_t + H(u_x) = 0`` is the value of the control problem whose trajectories
stay in the closed interval:

    u(t, x) = min_q [ dt L(q) + u(t - dt, x - dt q) ],   x - dt q in [a, b]

and the discounted analogue for ``u + H(u_x) = 0``.  Everything here is plain
numpy and shares no code with the finite-difference solver.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NonConvexHamiltonian
from .geometry import Domain
from .hamiltonian import Hamiltonian, coercivity_bound

SENTINEL = 1e30
N_VELOCITIES = 101
FINE_FACTOR = 4
DT_FACTOR = 0.5


@dataclass(frozen=True, eq=False)
class LagrangianTable:
    q: np.ndarray
    L: np.ndarray  # SENTINEL outside the effective domain
    finite: np.ndarray

    def __call__(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        out = np.interp(q, self.q, self.L)
        # linear interpolation next to a sentinel is meaningless
        k = np.clip(np.searchsorted(self.q, q), 1, len(self.q) - 1)
        ok = self.finite[k] & self.finite[k - 1] & (q >= self.q[0]) & (q <= self.q[-1])
        return np.where(ok, out, SENTINEL)

    @property
    def effective_domain(self) -> tuple[float, float]:
        qs = self.q[self.finite]
        return float(qs[0]), float(qs[-1])


def _require_convex(H: Hamiltonian):
    if H.dim != 1:
        raise ConfigError("oracle: only one-dimensional problems are supported")
    if not H.is_convex:
        raise NonConvexHamiltonian(f"{H.family} is not convex; no control representation")


def legendre(H: Hamiltonian, velocity_grid, slope_radius: float | None = None, n_slopes: int = 4001) -> LagrangianTable:
    """``L(q) = max_p (p q - H(p))`` by a max-scan over ``|p| <= slope_radius``.

    The scan maximum is polished by ternary search on the neighbouring cells
    (the objective is concave).  Where the maximum sits only at the end of
    the slope grid, ``q`` is outside the effective domain and gets SENTINEL.
    """
    _require_convex(H)
    q = np.asarray(velocity_grid, dtype=float).ravel()
    if slope_radius is None:
        slope_radius = 2.0 * coercivity_bound(H, float(np.max(np.abs(q))) + abs(H.min_value) + 1.0)
    P = float(slope_radius)
    p = np.linspace(-P, P, n_slopes)
    Hp = H(p[:, None])[:, None]
    obj = q[None, :] * p[:, None] - Hp
    k = np.argmax(obj, axis=0)
    vmax = obj[k, np.arange(len(q))]
    scale = 1e-12 * (1.0 + np.abs(vmax))
    inner = obj[1:-1].max(axis=0)
    finite = inner >= vmax - scale
    # polish on [p_{k-1}, p_{k+1}]
    lo = p[np.clip(k - 1, 0, n_slopes - 1)]
    hi = p[np.clip(k + 1, 0, n_slopes - 1)]
    f = lambda s: q * s - H(s[:, None])
    for _ in range(100):
        m1 = lo + (hi - lo) / 3.0
        m2 = hi - (hi - lo) / 3.0
        better = f(m1) < f(m2)
        lo = np.where(better, m1, lo)
        hi = np.where(better, hi, m2)
    pol = np.maximum(f(0.5 * (lo + hi)), vmax)
    return LagrangianTable(q, np.where(finite, pol, SENTINEL), finite)


def velocity_grid(H: Hamiltonian, slope_radius: float, n: int = N_VELOCITIES) -> LagrangianTable:
    """Table on ``n`` velocities spanning the effective domain of ``L``.

    Candidate velocities are capped by the Lipschitz bound of ``H`` on the
    slope range; the effective domain is detected by sentinel thresholding.
    """
    Q = H.lipschitz(slope_radius)
    probe = legendre(H, np.linspace(-Q, Q, 2001), 2.0 * slope_radius + np.abs(H.minimizer).max() + 1.0)
    qlo, qhi = probe.effective_domain
    qs = np.union1d(np.linspace(qlo, qhi, n), [0.0]) if qlo <= 0 <= qhi else np.linspace(qlo, qhi, n)
    return legendre(H, qs, 2.0 * slope_radius + np.abs(H.minimizer).max() + 1.0)


@dataclass(frozen=True, eq=False)
class ControlProblem:
    H: Hamiltonian
    domain: Domain
    u0: object  # callable x -> u0(x)
    equation: str = "evolution"
    T: float = 0.0
    outputs: tuple = ()
    slope_radius: float = 4.0
    table: LagrangianTable | None = None

    def lagrangian(self) -> LagrangianTable:
        return self.table if self.table is not None else velocity_grid(self.H, self.slope_radius)


@dataclass(eq=False)
class OracleField:
    x: np.ndarray
    times: list
    fields: list
    dt: float
    iterations: int = 0
    info: dict = field(default_factory=dict)

    def at(self, x, k: int = -1) -> np.ndarray:
        return np.interp(np.asarray(x, dtype=float), self.x, self.fields[k])


def _stencil(x, a, b, qs, dt):
    """Interpolation stencil of the feet ``x - dt q`` and their admissibility."""
    y = x[:, None] - dt * qs[None, :]
    ok = (y >= a - 1e-14) & (y <= b + 1e-14)
    yc = np.clip(y, a, b)
    j = np.clip(np.searchsorted(x, yc, side="right") - 1, 0, len(x) - 2)
    w = (yc - x[j]) / (x[j + 1] - x[j])
    return j, w, ok


def _feet(u, j, w):
    return (1.0 - w) * u[j] + w * u[j + 1]


def _dp_step(u, stencil, Lq, dt, discount):
    """One backward step: min over admissible velocities, linear interpolation."""
    j, w, ok = stencil
    vals = _feet(u, j, w)
    if discount is None:
        cand = dt * Lq[None, :] + vals
    else:
        cand = (1.0 - discount) * Lq[None, :] + discount * vals
    return np.where(ok, cand, np.inf).min(axis=1)


def _policy_iteration(u, stencil, Lq, disc, tol, max_iter):
    """Howard's algorithm for ``u = min_q [(1 - disc) L(q) + disc u(x - dt q)]``.

    Solves the same fixed point as value iteration, but each sweep evaluates
    the current policy exactly with a sparse solve.
    """
    from scipy.sparse import csr_matrix, identity
    from scipy.sparse.linalg import spsolve

    j, w, ok = stencil
    M = len(u)
    rows = np.arange(M)
    cost = (1.0 - disc) * Lq

    def improve(v, current=None):
        cand = np.where(ok, cost[None, :] + disc * _feet(v, j, w), np.inf)
        best = np.argmin(cand, axis=1)
        if current is not None:
            keep = cand[rows, current] <= cand[rows, best] + 1e-15 * (1.0 + np.abs(cand[rows, best]))
            best = np.where(keep, current, best)
        return best, cand[rows, best]

    pol, _ = improve(u)
    for it in range(max_iter):
        jj, ww = j[rows, pol], w[rows, pol]
        P = csr_matrix((np.concatenate([1.0 - ww, ww]), (np.concatenate([rows, rows]), np.concatenate([jj, jj + 1]))),
                       shape=(M, M))
        u = spsolve((identity(M, format="csr") - disc * P).tocsc(), cost[pol])
        new, _ = improve(u, pol)
        if np.array_equal(new, pol):
            break
        pol = new
    _, Tu = improve(u)
    return u, it + 1, float(np.max(np.abs(Tu - u)))


def dp_value(problem: ControlProblem, x_fine, dt: float, tol: float = 1e-10, max_iter: int = 10**4) -> OracleField:
    """Backward dynamic programming on ``x_fine`` (which must span the closed interval)."""
    _require_convex(problem.H)
    x = np.asarray(x_fine, dtype=float)
    a, b = problem.domain.params["a"], problem.domain.params["b"]
    if abs(x[0] - a) > 1e-12 or abs(x[-1] - b) > 1e-12:
        raise ConfigError("oracle: fine grid must start and end on the boundary")
    table = problem.lagrangian()
    keep = table.finite
    qs, Lq = table.q[keep], table.L[keep]
    if not np.any(qs == 0.0):
        raise ConfigError("oracle: velocity set must contain 0 (staying put)")
    hx = float(np.min(np.diff(x)))
    if dt * float(np.max(np.abs(qs))) > hx * (1 + 1e-12):
        raise ConfigError("oracle: dt * max|q| exceeds the fine grid spacing")
    u = np.asarray(problem.u0(x), dtype=float).copy()
    if problem.equation == "evolution":
        times = sorted({float(t) for t in problem.outputs if 0 < t <= problem.T} | {float(problem.T)})
        out, t_prev, steps = [], 0.0, 0
        for t in times:
            n = max(1, int(np.ceil((t - t_prev) / dt - 1e-12)))
            step = (t - t_prev) / n
            stencil = _stencil(x, a, b, qs, step)
            for _ in range(n):
                u = _dp_step(u, stencil, Lq, step, None)
            steps += n
            out.append(u.copy())
            t_prev = t
        return OracleField(x, times, out, dt, steps)
    disc = float(np.exp(-dt))
    u, its, fp_res = _policy_iteration(u, _stencil(x, a, b, qs, dt), Lq, disc, tol, max_iter)
    return OracleField(x, [np.inf], [u], dt, its, {"fixed_point_residual": fp_res})


def hopf_lax(table: LagrangianTable, u0, domain: Domain, t: float, x, n_y: int = 20001) -> np.ndarray:
    """Restricted Hopf-Lax ``min_{y in [a,b]} u0(y) + t L((x - y)/t)``.

    With convex ``L`` straight trajectories are optimal and stay inside the
    interval, so this is the state-constrained solution.
    """
    a, b = domain.params["a"], domain.params["b"]
    y = np.linspace(a, b, n_y)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    uy = np.asarray(u0(y), dtype=float)
    out = np.empty(len(x))
    for k, xk in enumerate(x):
        out[k] = np.min(uy + t * table((xk - y) / t))
    return out


def problem_from_spec(spec) -> ControlProblem:
    """Control problem matching a solver :class:`~hjflux.solver.ProblemSpec` (1D only)."""
    from .solver import initial_field

    H, D = spec.hamiltonian, spec.domain
    _require_convex(H)
    u0 = lambda x: initial_field(spec.init, D, np.asarray(x, dtype=float).reshape(-1, 1))
    xs = np.linspace(D.params["a"], D.params["b"], 2001)
    u = u0(xs)
    lip0 = float(np.max(np.abs(np.diff(u)) / np.diff(xs)))
    level = float(np.max(np.abs(H(np.gradient(u, xs)[:, None]))))
    if spec.equation == "stationary":
        level += float(np.max(np.abs(u))) + abs(H.min_value)
    R = 2.0 * max(coercivity_bound(H, level), lip0, float(np.abs(H.minimizer).max()) + 1.0)
    return ControlProblem(H, D, u0, spec.equation, spec.T or 0.0, tuple(spec.outputs), R)


def oracle_for_spec(spec, solver_dt: float, x_nodes=None) -> OracleField:
    """Oracle at ``FINE_FACTOR`` times the solver resolution and half its step."""
    prob = problem_from_spec(spec)
    a, b = spec.domain.params["a"], spec.domain.params["b"]
    x = np.linspace(a, b, FINE_FACTOR * spec.n + 1)
    table = prob.lagrangian()
    qmax = float(np.max(np.abs(table.q[table.finite])))
    dt = DT_FACTOR * solver_dt
    if qmax > 0:
        dt = min(dt, (x[1] - x[0]) / qmax)
    prob = ControlProblem(prob.H, prob.domain, prob.u0, prob.equation, prob.T, prob.outputs, prob.slope_radius, table)
    res = dp_value(prob, x, dt)
    if x_nodes is not None:
        res.info["nodes"] = np.asarray(x_nodes, dtype=float)
        res.info["at_nodes"] = [np.interp(res.info["nodes"], x, f) for f in res.fields]
    return res
