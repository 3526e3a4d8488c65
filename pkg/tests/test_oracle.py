import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hjflux import catalog, solve
from hjflux.errors import ConfigError, NonConvexHamiltonian
from hjflux.geometry import INTERIOR, Domain
from hjflux.hamiltonian import Hamiltonian
from hjflux.oracle import (
    SENTINEL,
    ControlProblem,
    LagrangianTable,
    dp_value,
    hopf_lax,
    legendre,
    oracle_for_spec,
    velocity_grid,
)
from hjflux.solver import BCMode, discretize

ABS = Hamiltonian.from_config("norm", {"p0": [0.0], "c": 0.0})
EIKONAL = Hamiltonian.from_config("norm", {"p0": [0.0], "c": 1.0})
SQUARE = Hamiltonian.from_config("quadratic", {"p0": [0.0], "c": 0.0})
UNIT = catalog.UNIT
X_FINE = np.linspace(0.0, 1.0, 401)


def _problem(H, u0, equation="evolution", T=0.5, outputs=(), domain=UNIT, R=4.0, table=None):
    return ControlProblem(H, domain, u0, equation, T, outputs, R, table)


# -- Legendre transform -------------------------------------------------------------

def test_legendre_abs():
    q = np.linspace(-2, 2, 41)
    L = legendre(ABS, q, 8.0)
    inside = np.abs(q) <= 1 + 1e-12
    np.testing.assert_allclose(L.L[inside], 0.0, atol=1e-12)
    assert np.all(L.L[~inside] == SENTINEL)


def test_legendre_square():
    q = np.linspace(-3, 3, 61)
    np.testing.assert_allclose(legendre(SQUARE, q, 8.0).L, q**2 / 4, atol=1e-10)


def test_legendre_eikonal():
    q = np.linspace(-1, 1, 21)
    np.testing.assert_allclose(legendre(EIKONAL, q, 8.0).L, 1.0, atol=1e-12)


def test_velocity_grid_spans_effective_domain():
    t = velocity_grid(ABS, 4.0)
    assert t.effective_domain == pytest.approx((-1.0, 1.0))
    assert 0.0 in t.q and np.all(t.finite)


def test_oracle_refuses_nonconvex_and_planar():
    with pytest.raises(NonConvexHamiltonian):
        legendre(catalog.hamiltonian("sqrt_norm_1d"), [0.0])
    with pytest.raises(ConfigError):
        legendre(catalog.hamiltonian("quadratic_2d"), [0.0])


# -- dynamic programming ------------------------------------------------------------

def test_dp_linear_initial_data():
    res = dp_value(_problem(ABS, lambda x: x), X_FINE, 0.0025)
    np.testing.assert_allclose(res.fields[-1], np.maximum(0.0, X_FINE - 0.5), atol=1e-2)


def test_dp_constant_initial_data():
    res = dp_value(_problem(SQUARE, lambda x: np.full_like(x, 0.3), outputs=(0.2,)), X_FINE, 0.0003)
    for u in res.fields:
        np.testing.assert_allclose(u, 0.3, atol=1e-14)


def test_dp_stationary_eikonal():
    res = dp_value(_problem(EIKONAL, lambda x: np.zeros_like(x), "stationary"), X_FINE, 0.0025)
    np.testing.assert_allclose(res.fields[-1], 1.0, atol=1e-9)
    assert res.info["fixed_point_residual"] <= 1e-10


def test_dp_requires_boundary_grid_and_small_steps():
    with pytest.raises(ConfigError):
        dp_value(_problem(ABS, lambda x: x), np.linspace(0.1, 1.0, 50), 0.001)
    with pytest.raises(ConfigError):
        dp_value(_problem(ABS, lambda x: x), X_FINE, 0.1)


def test_dp_smaller_velocity_box_gives_larger_value():
    full = velocity_grid(SQUARE, 4.0)
    keep = np.abs(full.q) <= 0.5 * np.max(np.abs(full.q))
    small = LagrangianTable(full.q[keep], full.L[keep], full.finite[keep])
    u0 = lambda x: np.sin(4 * x)
    a = dp_value(_problem(SQUARE, u0, T=0.3, table=full), X_FINE, 0.0003).fields[-1]
    b = dp_value(_problem(SQUARE, u0, T=0.3, table=small), X_FINE, 0.0003).fields[-1]
    assert np.all(b >= a - 1e-12)


def test_dp_matches_free_hopf_lax_away_from_boundary():
    big = Domain.from_config("interval", {"a": -3.0, "b": 4.0})
    x = np.linspace(-3.0, 4.0, 1401)
    u0 = lambda y: np.abs(y - 0.5)
    table = velocity_grid(SQUARE, 4.0)
    dp = dp_value(_problem(SQUARE, u0, T=0.25, domain=big, table=table), x, 0.0006).fields[-1]
    mid = (x >= 0) & (x <= 1)
    free = hopf_lax(table, u0, big, 0.25, x[mid])
    assert np.max(np.abs(dp[mid] - free)) <= 2e-2


def test_dp_boundary_value_is_limit_of_interior():
    res = dp_value(_problem(SQUARE, lambda x: np.cos(3 * x), T=0.2), X_FINE, 0.0003)
    u = res.fields[-1]
    assert abs(u[0] - u[1]) <= 10 * (X_FINE[1] - X_FINE[0])
    assert abs(u[-1] - u[-2]) <= 10 * (X_FINE[1] - X_FINE[0])


def test_hopf_lax_closed_form():
    table = velocity_grid(ABS, 4.0)
    x = np.linspace(0, 1, 51)
    np.testing.assert_allclose(hopf_lax(table, lambda y: y, UNIT, 0.5, x), np.maximum(0, x - 0.5), atol=1e-4)


@given(st.floats(0.05, 0.5), st.floats(-2.0, 2.0))
def test_hopf_lax_constant_data(t, c):
    table = velocity_grid(SQUARE, 4.0)
    np.testing.assert_allclose(hopf_lax(table, lambda y: np.full_like(y, c), UNIT, t, [0.0, 0.3, 1.0], 201), c,
                               atol=1e-12)


# -- sign convention: the oracle solves the solver's interior equation ---------------

def test_oracle_satisfies_discrete_interior_equation():
    """The stationary oracle, sampled on solver grids, has interior residuals that vanish under refinement."""
    spec = catalog.problems()["shifted_quadratic"]
    res = []
    for n in (50, 100, 200):
        s = spec.replace(n=n)
        rep = solve(s)
        disc = discretize(s)
        orc = oracle_for_spec(s, rep.dt)
        u = orc.at(disc.grid.positions[:, 0])
        r = disc.residual(u)[disc.grid.labels == INTERIOR]
        res.append(float(np.max(np.abs(r))))
    assert res[2] < res[1] < res[0]
    assert res[2] <= 0.1


def test_oracle_flipped_sign_does_not_solve_the_equation():
    """Running the DP with mirrored dynamics gives the reflected problem, not this one."""
    spec = catalog.problems()["shifted_quadratic"].replace(n=100)
    rep = solve(spec)
    orc = oracle_for_spec(spec, rep.dt)
    # with x + dt q the optimal foot for p0 = 1 would run towards x = 0 instead of x = 1;
    # that solution is the mirror image u(1 - x) of the correct one
    mirrored = orc.at(1.0 - rep.positions[:, 0])
    assert np.max(np.abs(orc.at(rep.positions[:, 0]) - rep.field)) < 0.01
    assert np.max(np.abs(mirrored - rep.field)) > 0.05


def test_oracle_for_evolution_spec_matches_solver():
    spec = catalog.problems()["linear_evolution"].replace(n=200, bc=BCMode("flux"))
    rep = solve(spec)
    orc = oracle_for_spec(spec, rep.dt)
    x = rep.positions[:, 0]
    assert np.max(np.abs(orc.at(x) - np.maximum(0.0, x - 0.5))) <= 0.01
