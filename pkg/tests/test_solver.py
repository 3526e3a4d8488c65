import numpy as np
import pytest
from helpers import perturbation_trials
from hypothesis import given
from hypothesis import strategies as st

from hjflux import catalog, solve
from hjflux.errors import CFLViolation, ConfigError, MaxIterations, MissingNeighbor, NonFiniteField
from hjflux.geometry import BOUNDARY, INTERIOR
from hjflux.hamiltonian import Hamiltonian
from hjflux.solver import BCMode, ProblemSpec, discretize

SQUARE = Hamiltonian.from_config("quadratic", {"p0": [0.0], "c": 0.0})
ABS = Hamiltonian.from_config("norm", {"p0": [0.0], "c": 0.0})
EIKONAL = Hamiltonian.from_config("norm", {"p0": [0.0], "c": 1.0})
LINEAR_X = {"kind": "linear", "params": {"slope": [1.0], "offset": 0.0}}


def stationary(H, mode="flux", n=50, **kw):
    return ProblemSpec("stationary", H, catalog.UNIT if H.dim == 1 else catalog.DISK, BCMode(mode), n=n, **kw)


# -- validation ---------------------------------------------------------------------

def test_bc_mode_validation():
    with pytest.raises(ConfigError):
        BCMode("dirichlet")
    with pytest.raises(ConfigError):
        BCMode("flux", "constant")


def test_problem_spec_validation():
    with pytest.raises(ConfigError):
        ProblemSpec("evolution", ABS, catalog.UNIT)  # no horizon
    with pytest.raises(ConfigError):
        ProblemSpec("stationary", catalog.hamiltonian("quadratic_2d"), catalog.UNIT)
    with pytest.raises(ConfigError):
        ProblemSpec("steady", ABS, catalog.UNIT)


def test_constant_limiter_below_minimum_rejected_in_1d():
    with pytest.raises(ConfigError):
        discretize(stationary(SQUARE).replace(bc=BCMode("flux", "constant", -1.0)))


# -- discrete operators -------------------------------------------------------------

def test_numerical_hamiltonian_linear_data():
    disc = discretize(stationary(SQUARE, n=10))
    u = 3.0 * disc.grid.positions[:, 0]
    for i in np.flatnonzero(disc.grid.labels == INTERIOR):
        assert disc.numerical_hamiltonian(int(i), u) == pytest.approx(9.0)


def test_numerical_hamiltonian_rarefaction():
    disc = discretize(stationary(SQUARE, n=10))
    x = disc.grid.positions[:, 0]
    u = np.where(x <= 0.5, -(x - 0.5), 2 * (x - 0.5))  # D- = -1, D+ = 2 at x = 0.5
    i = int(np.argmin(np.abs(x - 0.5)))
    assert disc.numerical_hamiltonian(i, u) == pytest.approx(0.0, abs=1e-12)


def grid_stencil_nodes(disc):
    """Interior nodes whose neighbors are all plain grid nodes (no boundary crossing)."""
    g = disc.grid
    plain = np.all(g.slot_idx[..., 1] < 0, axis=(1, 2)) & np.all(np.isclose(g.slot_inv * g.h, 1.0), axis=(1, 2))
    return np.flatnonzero((g.labels == INTERIOR) & plain)


@pytest.mark.parametrize("mode", ["soner", "flux"])
def test_numerical_hamiltonian_2d_norm(mode):
    H = Hamiltonian.from_config("norm", {"p0": [0.0, 0.0], "c": 0.0})
    disc = discretize(stationary(H, mode, n=16))
    u = disc.grid.positions[:, 0].copy()
    nodes = grid_stencil_nodes(disc) if mode == "flux" else np.flatnonzero(disc.grid.labels == INTERIOR)
    assert len(nodes) > 100
    for i in nodes:
        assert disc.numerical_hamiltonian(int(i), u) == pytest.approx(1.0, abs=1e-12)


def test_numerical_hamiltonian_rejects_flux_boundary_nodes():
    disc = discretize(stationary(SQUARE, n=10))
    with pytest.raises(MissingNeighbor):
        disc.numerical_hamiltonian(0, np.zeros(disc.grid.size))


@pytest.mark.parametrize("mode", ["soner", "flux"])
def test_boundary_operator_examples(mode):
    disc = discretize(stationary(SQUARE, mode, n=10))
    sub, sup = disc.boundary_operator(0, np.full(disc.grid.size, 2.5))
    assert sup == pytest.approx(2.5)
    assert (sub is None) == (mode == "soner")
    disc = discretize(stationary(EIKONAL, mode, n=10))
    _, sup = disc.boundary_operator(0, np.ones(disc.grid.size))
    assert sup == pytest.approx(0.0, abs=1e-12)


def test_boundary_operator_time_difference_form():
    spec = ProblemSpec("evolution", ABS, catalog.UNIT, n=20, T=0.5, init=LINEAR_X)
    disc = discretize(spec)
    t = 0.3
    u = np.maximum(0.0, disc.grid.positions[:, 0] - t)
    sub, sup = disc.boundary_operator(0, u, u_t=0.0)  # u_t = 0 at x = 0 for t > 0
    assert sub == pytest.approx(0.0, abs=1e-12) and sup == pytest.approx(0.0, abs=1e-12)


def _linear_residual_error(H, slope, mode, n, nodes=None):
    disc = discretize(stationary(H, mode, n=n))
    u = disc.grid.positions @ np.asarray(slope)
    if nodes is None:
        nodes = np.flatnonzero(disc.grid.labels == INTERIOR)
    return float(np.max(np.abs(disc.residual(u)[nodes] - u[nodes] - float(H(np.asarray(slope)))))), disc


@given(st.sampled_from(sorted(catalog.hamiltonians())), st.sampled_from(["soner", "flux"]),
       st.floats(-3, 3), st.floats(-3, 3))
def test_consistency_on_linear_fields(name, mode, a, b):
    H = catalog.hamiltonian(name)
    slope = [a, b][: H.dim]
    disc = discretize(stationary(H, mode, n=16))
    plain = mode == "soner" or H.dim == 1
    nodes = np.flatnonzero(disc.grid.labels == INTERIOR) if plain else grid_stencil_nodes(disc)
    err, _ = _linear_residual_error(H, slope, mode, 16, nodes)
    assert err <= 1e-9 * (1 + abs(float(H(np.asarray(slope)))))


@pytest.mark.parametrize("name", ["quadratic_2d", "eikonal_2d", "anisotropic_2d"])
def test_consistency_first_order_at_boundary_crossings(name):
    """Crossing values interpolate along the arc: exact in the limit, first order in h."""
    H = catalog.hamiltonian(name)
    e16, _ = _linear_residual_error(H, [0.7, -1.3], "flux", 16)
    e64, _ = _linear_residual_error(H, [0.7, -1.3], "flux", 64)
    assert e64 <= 0.5 * e16


# -- solves -------------------------------------------------------------------------

@pytest.mark.parametrize("mode", ["soner", "flux"])
def test_eikonal_constant_solution(mode):
    rep = solve(stationary(EIKONAL, mode))
    assert np.max(np.abs(rep.field - 1.0)) <= 1e-6
    assert rep.residual_history[-1] <= rep.spec.stop_tol * (1 + np.max(np.abs(rep.field)))


@pytest.mark.parametrize("mode", ["soner", "flux"])
def test_square_zero_solution(mode):
    rep = solve(stationary(SQUARE, mode))
    assert np.max(np.abs(rep.field)) <= 1e-12


def test_shifted_quadratic_modes_agree():
    a = solve(stationary(catalog.hamiltonian("shifted_quadratic"), "soner", n=100))
    b = solve(stationary(catalog.hamiltonian("shifted_quadratic"), "flux", n=100))
    assert np.max(np.abs(a.field - b.field)) <= 5 * a.h


def test_constants_preserved_by_evolution():
    for name in ("square", "abs", "quadratic_2d"):
        H = catalog.hamiltonian(name)
        if float(H(np.zeros(H.dim))) != 0.0:
            H = Hamiltonian.from_config(H.family, {"p0": [0.0] * H.dim, "c": 0.0})
        spec = ProblemSpec("evolution", H, catalog.UNIT if H.dim == 1 else catalog.DISK, n=24, T=0.3,
                           init={"kind": "constant", "params": {"value": 0.7}})
        rep = solve(spec)
        assert np.max(np.abs(rep.field - 0.7)) <= 1e-14


def test_tent_evolution_against_closed_form():
    spec = catalog.problems()["tent_evolution"].replace(n=200)
    rep = solve(spec)
    x = rep.positions[:, 0]
    tent = np.minimum(x, 1 - x)
    for t, u in zip(rep.times, rep.fields):
        assert np.max(np.abs(u - np.maximum(0.0, tent - t))) <= 2 * np.sqrt(rep.h)


def test_output_times_sorted_and_include_horizon():
    spec = ProblemSpec("evolution", ABS, catalog.UNIT, n=20, T=0.5, outputs=(0.4, 0.1), init=LINEAR_X)
    assert solve(spec).times == [0.1, 0.4, 0.5]


def test_limiter_order():
    """A larger limiter gives a smaller solution, up to 5h."""
    H = catalog.hamiltonian("shifted_quadratic")
    lo = solve(stationary(H, n=100).replace(bc=BCMode("flux", "A0")))
    hi = solve(stationary(H, n=100).replace(bc=BCMode("flux", "constant", 0.5)))
    assert np.all(lo.field >= hi.field - 5 * lo.h)
    assert np.max(lo.field - hi.field) > 0.0


def test_solver_errors():
    with pytest.raises(CFLViolation):
        solve(stationary(SQUARE, cfl=1.5))
    with pytest.raises(MaxIterations):
        solve(stationary(EIKONAL, max_iter=5))
    with pytest.raises(NonFiniteField):
        solve(stationary(SQUARE, init={"kind": "constant", "params": {"value": float("inf")}}))


@pytest.mark.parametrize("name", sorted(catalog.problems()))
def test_monotone_update(name):
    spec = catalog.problems()[name]
    for mode in ("soner", "flux"):
        bad, _ = perturbation_trials(solve(spec.replace(bc=BCMode(mode))), trials=200, seed=1)
        assert bad == 0


def test_boundary_nodes_live_on_boundary_in_flux_mode():
    disc = discretize(catalog.problems()["disk_quadratic"])
    X = disc.grid.positions[disc.grid.labels == BOUNDARY]
    assert np.max(np.abs(catalog.DISK.phi(X))) <= 1e-12
