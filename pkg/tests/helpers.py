"""Shared checks for the solver and acceptance tests."""

import numpy as np

from hjflux.solver import initial_field


def stencil_of(disc, i: int) -> list[int]:
    """Every node whose value enters the update at node ``i`` (itself included)."""
    g = disc.grid
    js = {int(j) for j in g.slot_idx[i].ravel() if j >= 0}
    b = int(g.b_of_node[i])
    if b >= 0:
        js |= {int(j) for j in g.bn_idx[b].ravel() if j >= 0}
        js |= {int(j) for j in g.bt_idx[b].ravel() if j >= 0}
    js.add(int(i))
    return sorted(js)


def perturbation_trials(report, trials: int = 1000, seed: int = 0):
    """Raise one stencil value by eps in [h^2, h]; the update must rise by 0..eps.

    Returns ``(violations, trials)`` for the report's field and time step.
    """
    spec, disc = report.spec, report.disc
    if spec.equation == "stationary":
        u = report.fields[0]
    else:
        u = initial_field(spec.init, spec.domain, disc.grid.positions)
    base = disc.step_map(u, report.dt)
    rng = np.random.default_rng(seed)
    h = disc.grid.hmin
    bad = 0
    for _ in range(trials):
        i = int(rng.integers(disc.grid.size))
        j = int(rng.choice(stencil_of(disc, i)))
        eps = float(np.exp(rng.uniform(np.log(h * h), np.log(h))))
        v = u.copy()
        v[j] += eps
        d = disc.step_map(v, report.dt)[i] - base[i]
        tol = 1e-12 * (1 + abs(base[i]))
        bad += int(d < -tol or d > eps + tol)
    return bad, trials


ACCEPTANCE: dict[int, str] = {}


def record_criterion(k: int, ok: bool, detail: str) -> bool:
    """Print and remember one acceptance line; the summary hook replays them in order."""
    line = f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE[k] = line
    print(line)
    return ok
