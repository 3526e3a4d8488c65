import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hjflux import catalog
from hjflux.errors import ConfigError, GraphFold, ThinDomain
from hjflux.geometry import (
    BOUNDARY,
    EXTERIOR,
    INTERIOR,
    Domain,
    cartesian_grid,
    classify,
    classify_grid,
    decompose,
    frame_at,
    local_graph,
    project,
    reconstruct,
)

DOMAINS = {
    "interval": catalog.UNIT,
    "disk": catalog.DISK,
    "ellipse": catalog.ELLIPSE,
    "superellipse": Domain.from_config("superellipse", {"center": [0.1, -0.2], "ax": 1.0, "ay": 0.7}),
}
PLANAR = [k for k, d in DOMAINS.items() if d.dim == 2]


def test_classify_examples():
    g = cartesian_grid(catalog.UNIT, 10)
    assert classify(g, 5) == "interior"
    assert classify(g, 0) == "boundary"
    disk = cartesian_grid(catalog.DISK, 40)
    assert disk.h[0] == pytest.approx(0.05)
    assert classify(disk, (40, 20)) == "boundary"  # node (1, 0)


@pytest.mark.parametrize("name", sorted(DOMAINS))
def test_classification_partition_and_stencils(name):
    g = cartesian_grid(DOMAINS[name], 32)
    labels = classify_grid(g).reshape(g.shape)
    assert set(np.unique(labels)) <= {INTERIOR, BOUNDARY, EXTERIOR}
    interior = np.argwhere(labels == INTERIOR)
    for ax in range(g.domain.dim):
        for s in (-1, 1):
            nb = interior.copy()
            nb[:, ax] += s
            assert np.all(labels[tuple(nb.T)] != EXTERIOR)


def test_interior_connected_on_disk():
    g = cartesian_grid(catalog.DISK, 32)
    inside = classify_grid(g).reshape(g.shape) == INTERIOR
    start = tuple(np.argwhere(inside)[0])
    seen, stack = {start}, [start]
    while stack:
        i, j = stack.pop()
        for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            nb = (i + di, j + dj)
            if 0 <= nb[0] < g.shape[0] and 0 <= nb[1] < g.shape[1] and inside[nb] and nb not in seen:
                seen.add(nb)
                stack.append(nb)
    assert len(seen) == int(inside.sum())


def test_too_coarse_grid():
    with pytest.raises(ThinDomain):
        cartesian_grid(catalog.UNIT, 2)


def test_frame_examples():
    f = frame_at(catalog.UNIT, [0.0])
    assert f.n_out[0] == -1.0 and f.n_in[0] == 1.0
    f = frame_at(catalog.DISK, [1.2, 0.0])
    np.testing.assert_allclose(f.x, [1.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(f.n_out, [1.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(f.n_in, [-1.0, 0.0], atol=1e-12)
    f = frame_at(catalog.DISK, [0.6 * 1.001, 0.8 * 1.001])
    np.testing.assert_allclose(f.x, [0.6, 0.8], atol=1e-12)


def test_decompose_examples():
    pt, pn = decompose([2.0, 3.0], frame_at(catalog.DISK, [1.0, 0.0]))
    assert pn == pytest.approx(-2.0)
    assert abs(pt[0]) == pytest.approx(3.0)
    f = frame_at(catalog.ELLIPSE, [0.3, 0.6])
    pt, pn = decompose(f.n_in, f)
    assert pn == pytest.approx(1.0) and np.allclose(pt, 0.0, atol=1e-12)
    pt, pn = decompose([-5.0], frame_at(catalog.UNIT, [0.0]))
    assert pn == -5.0 and pt.shape == (0,)


def test_psiN_on_disk_matches_circle():
    g = local_graph(catalog.DISK, frame_at(catalog.DISK, [1.0, 0.0]), 0.5)
    t = np.linspace(-0.45, 0.45, 19)
    sign = g.center.tangent_basis[0, 1]  # tangent is +-(0, 1)
    np.testing.assert_allclose(g.psiN((sign * t)[:, None]), 1 - np.sqrt(1 - t**2), atol=1e-12)
    assert g.psiN(np.zeros(1)) == pytest.approx(0.0, abs=1e-13)


def test_psiN_interval_is_zero():
    g = local_graph(catalog.UNIT, frame_at(catalog.UNIT, [1.0]), 0.2)
    assert np.all(g.psiN(np.zeros((3, 0))) == 0.0)


def test_graph_fold():
    thin = Domain.from_config("ellipse", {"center": [0, 0], "ax": 1.0, "ay": 0.1})
    with pytest.raises(GraphFold):
        local_graph(thin, frame_at(thin, [0.0, 0.1]), 0.5)  # normal lines cross both sheets


def test_domain_config_errors():
    with pytest.raises(ConfigError):
        Domain.from_config("interval", {"a": 1.0, "b": 0.0})
    with pytest.raises(ConfigError):
        Domain.from_config("disk", {"center": [0, 0]})
    with pytest.raises(ConfigError):
        Domain.from_config("torus", {})


@pytest.mark.parametrize("name", sorted(DOMAINS))
def test_validate(name):
    DOMAINS[name].validate()


# -- properties -------------------------------------------------------------------

angles = st.floats(0.0, 2 * np.pi, allow_nan=False)


@given(st.sampled_from(PLANAR), angles, st.floats(-0.05, 0.05))
def test_projection_and_frame_invariants(name, theta, offset):
    dom = DOMAINS[name]
    x = dom.boundary_point(theta)
    f = frame_at(dom, x + offset * (x - dom.center))
    assert abs(dom.phi(f.x)) <= 1e-12
    assert abs(np.linalg.norm(f.n_out) - 1) <= 1e-12
    assert abs(f.tangent_basis[0] @ f.n_out) <= 1e-12


@given(st.sampled_from(PLANAR), angles, st.lists(st.floats(-50, 50), min_size=2, max_size=2))
def test_decompose_reconstruct_identity(name, theta, p):
    dom = DOMAINS[name]
    f = frame_at(dom, dom.boundary_point(theta))
    pt, pn = decompose(p, f)
    np.testing.assert_allclose(reconstruct(pt, pn, f), p, atol=1e-12 * (1 + np.max(np.abs(p))))


@given(st.sampled_from(PLANAR), angles)
def test_local_graph_center_conditions(name, theta):
    dom = DOMAINS[name]
    f = frame_at(dom, dom.boundary_point(theta))
    g = local_graph(dom, f, 0.05)
    d = 1e-4
    assert abs(g.psiN(np.zeros(1))) <= 1e-12
    slope = (g.psiN(np.array([d])) - g.psiN(np.array([-d]))) / (2 * d)
    assert abs(slope) <= 1e-6
    Xt = np.linspace(-0.05, 0.05, 7)[:, None]
    pts = f.x + Xt @ f.tangent_basis + g.psiN(Xt)[:, None] * f.n_in
    assert np.all(np.abs(dom.phi(pts)) <= 1e-12)


def test_project_lands_on_boundary_for_all_boundary_nodes():
    for name in PLANAR:
        g = cartesian_grid(DOMAINS[name], 32)
        X = g.coords()[classify_grid(g) == BOUNDARY]
        for x in X:
            y = project(DOMAINS[name], x)
            assert abs(DOMAINS[name].phi(y)) <= 1e-12
            f = frame_at(DOMAINS[name], y)
            p = np.array([0.3, -1.7])
            np.testing.assert_allclose(reconstruct(*decompose(p, f), f), p, atol=1e-12)
