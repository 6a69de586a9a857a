import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from helpers import fd_worst_error

from cellhom.cellsolver import solve_quadratic_direct
from cellhom.errors import DimensionMismatch, ResolutionTooSmall
from cellhom.fespace import CellEnergy, discretize_cell, energy_and_gradient
from cellhom.integrand import make_integrand
from cellhom.structure import CellDomain, build_periodic_graph


def loop_graph():
    return build_periodic_graph(
        {
            "vertices": [[0.0, 0.5], [1.0, 0.5]],
            "edges": [{"from": 0, "to": 1, "length": 1.0, "weight": 5.0}],
            "identify": [[1, 0, [1, 0]]],
        }
    )


def test_interval_counts(euclid1):
    sp = discretize_cell(CellDomain.scaled_cell(euclid1, 1), 4)
    assert sp.n_nodes == 5 and sp.n_free == 3
    assert sp.measure == pytest.approx(1.0, abs=1e-15)


def test_graph_counts(lattice):
    sp = discretize_cell(CellDomain.scaled_cell(lattice, 1), 4)
    # two unit edges, each split into two half-edges of two segments: 8 segments
    assert len(sp.qweights) == 8
    assert sp.measure == pytest.approx(1.0, abs=1e-12)
    # the junction and the two face midpoints shared with neighbours
    assert sp.n_nodes == 9 and sp.n_free == 5


def test_square_measure(euclid2):
    sp = discretize_cell(CellDomain.scaled_cell(euclid2, 2), 8)
    assert sp.measure == pytest.approx(4.0, rel=1e-12)


def test_resolution_too_small(euclid1):
    with pytest.raises(ResolutionTooSmall):
        discretize_cell(CellDomain.scaled_cell(euclid1, 1), 1)


DOMAINS = [
    ("euclid1", lambda s: CellDomain.scaled_cell(s, 3)),
    ("euclid1", lambda s: CellDomain.ball(s, [0.3], 0.75)),
    ("euclid2", lambda s: CellDomain.scaled_cell(s, 2)),
    ("euclid2", lambda s: CellDomain.box(s, [0.25, -0.5], [1.75, 0.5])),
    ("lattice", lambda s: CellDomain.scaled_cell(s, 3)),
    ("lattice", lambda s: CellDomain.ball(s, [0.5, 0.5], 1.3)),
    ("lattice", lambda s: CellDomain.ball(s, [0.5, 0.8], 0.77)),
    ("lattice", lambda s: CellDomain.box(s, [0.2, 0.1], [2.3, 1.7])),
]


@pytest.fixture(params=range(len(DOMAINS)), ids=[f"{n}-{i}" for i, (n, _) in enumerate(DOMAINS)])
def domain(request):
    name, make = DOMAINS[request.param]
    return make(request.getfixturevalue(name))


@pytest.mark.parametrize("res", [4, 16])
def test_quadrature_sums_to_measure(domain, res):
    sp = discretize_cell(domain, res)
    assert np.all(sp.qweights >= 0)
    assert sp.measure == pytest.approx(domain.measure(), rel=1e-12)


def test_disk_quadrature_error_within_boundary_layer(euclid2):
    # the centroid rule misplaces at most a layer of cells along the circle
    d = CellDomain.ball(euclid2, [0.5, 0.5], 1.0)
    for r in (8, 32, 128):
        assert abs(discretize_cell(d, r).measure - np.pi) <= 2 * np.pi / r


def test_grad_annihilates_constants(domain):
    sp = discretize_cell(domain, 8)
    assert np.all(sp.grad @ np.ones(sp.n_nodes) == 0.0)


def test_box_boundary_nodes(euclid2, euclid1):
    sp = discretize_cell(CellDomain.scaled_cell(euclid2, 1), 4)
    on_edge = np.any((sp.nodes <= 1e-12) | (sp.nodes >= 1 - 1e-12), axis=1)
    assert np.array_equal(on_edge, sp.boundary)
    sp1 = discretize_cell(CellDomain.scaled_cell(euclid1, 2), 4)
    assert np.flatnonzero(sp1.boundary).tolist() == [0, 8]


def test_disk_boundary_touches_excluded_elements(euclid2):
    sp = discretize_cell(CellDomain.ball(euclid2, [0.0, 0.0], 1.0), 8)
    c = np.asarray([0.0, 0.0])
    r = np.linalg.norm(sp.nodes - c, axis=1)
    # interior nodes sit inside the disk; every node outside it is a boundary node
    assert np.all(r[~sp.boundary] < 1.0)
    assert np.all(sp.boundary[r >= 1.0])


def test_graph_ball_boundary_is_the_rim(lattice):
    sp = discretize_cell(CellDomain.ball(lattice, [0.5, 0.5], 0.3), 10)
    bd = sp.nodes[sp.boundary]
    d = np.abs(bd - 0.5).sum(axis=1)  # path distance along the arms
    assert len(bd) == 4 and np.allclose(d, 0.3)


def test_mesh_csv(tmp_path, euclid1):
    sp = discretize_cell(CellDomain.scaled_cell(euclid1, 1), 4)
    path = tmp_path / "mesh.csv"
    sp.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "node,x0,boundary" and len(lines) == 6


# -- energy ----------------------------------------------------------------------------


def test_energy_at_zero_dirichlet(euclid1, dirichlet_1d):
    sp = discretize_cell(CellDomain.scaled_cell(euclid1, 1), 8)
    val, g = energy_and_gradient(sp, dirichlet_1d, [[1.0]], np.zeros(sp.n_nodes))
    assert val == pytest.approx(1.0, abs=1e-15)
    assert np.all(g == 0)


def test_energy_on_loop(edge_quadratic):
    s = loop_graph()
    sp = discretize_cell(CellDomain.scaled_cell(s, 1), 8)
    val, _ = energy_and_gradient(sp, edge_quadratic, [[2.0, 0.0]], np.zeros(sp.n_nodes))
    assert val == pytest.approx(4.0, abs=1e-14)


def test_dimension_mismatch(euclid2, dirichlet_1d, laminate):
    sp = discretize_cell(CellDomain.scaled_cell(euclid2, 1), 4)
    with pytest.raises(DimensionMismatch):
        energy_and_gradient(sp, dirichlet_1d, [[1.0]], np.zeros(sp.n_nodes))
    with pytest.raises(DimensionMismatch):
        energy_and_gradient(sp, laminate, [[1.0, 0.0, 0.0]], np.zeros(sp.n_nodes))
    with pytest.raises(DimensionMismatch):
        energy_and_gradient(sp, laminate, [[1.0, 0.0]], np.zeros(3))


EUCLID_DOMAINS = [d for d in DOMAINS if d[0] != "lattice"]


@pytest.mark.parametrize("p", [2.0, 3.0, 4.5])
@pytest.mark.parametrize("case", range(len(EUCLID_DOMAINS)))
def test_mean_value_normalization(request, case, p):
    name, make = EUCLID_DOMAINS[case]
    domain = make(request.getfixturevalue(name))
    N = domain.structure.dim
    L = make_integrand("p_dirichlet_coeff", {"a0": 1.0, "a1": 0.0, "p": p, "dim": N})
    xi = np.full((1, N), 0.6)
    sp = discretize_cell(domain, 8)
    val, _ = energy_and_gradient(sp, L, xi, np.zeros(sp.n_nodes))
    assert val == pytest.approx(float(np.linalg.norm(xi)) ** p, rel=1e-12)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_mean_value_normalization_graph(lattice, edge_quadratic, k):
    # half the mass is horizontal and sees xi_1, half is vertical and sees xi_2
    sp = discretize_cell(CellDomain.scaled_cell(lattice, k), 8)
    val, _ = energy_and_gradient(sp, edge_quadratic, [[0.7, -0.2]], np.zeros(sp.n_nodes))
    assert val == pytest.approx(0.5 * (0.7**2 + 0.2**2), rel=1e-12)


FD_CASES = [
    ("euclid1", "p_dirichlet_coeff", {"a0": 2.0, "a1": 1.0, "p": 3.0}, [[0.8]]),
    ("euclid1", "double_well_1d", {"p": 4}, [[0.3]]),
    ("euclid2", "laminate_2d", {"a1": 1.0, "a2": 3.0, "p": 2.5}, [[1.0, -0.5]]),
    ("euclid2", "checkerboard_2d", {"a1": 1.0, "a2": 4.0, "m": 2}, [[1.0, 0.0], [0.3, 0.2]]),
    ("lattice", "graph_edge_quadratic", {"a0": 2.0, "a1": 1.0}, [[1.0, 0.4]]),
]


@pytest.mark.parametrize("case", FD_CASES, ids=[c[1] for c in FD_CASES])
def test_energy_gradient_central_differences(request, case):
    name, cid, prm, xi = case
    s = request.getfixturevalue(name)
    L = make_integrand(cid, prm)
    sp = discretize_cell(CellDomain.scaled_cell(s, 2), 4, m=L.m)
    E = CellEnergy(sp, L, xi)
    worst = fd_worst_error(E, xi)
    assert worst <= 1e-5


def test_full_gradient_zero_on_boundary(euclid2, laminate):
    sp = discretize_cell(CellDomain.scaled_cell(euclid2, 1), 6)
    w = np.random.default_rng(0).normal(size=sp.n_nodes)
    _, g = energy_and_gradient(sp, laminate, [[1.0, 1.0]], w)
    assert np.all(g[sp.boundary] == 0)
    # boundary entries of w are ignored
    w2 = w.copy()
    w2[sp.boundary] = 123.0
    assert energy_and_gradient(sp, laminate, [[1.0, 1.0]], w2)[0] == energy_and_gradient(
        sp, laminate, [[1.0, 1.0]], w
    )[0]


@pytest.mark.parametrize(
    "name,cid,prm,xi",
    [
        ("euclid1", "p_dirichlet_coeff", {"a0": 2.0, "a1": 1.0, "p": 2}, [[1.0]]),
        ("euclid2", "laminate_2d", {"a1": 1.0, "a2": 3.0}, [[1.0, 0.3]]),
        ("euclid2", "checkerboard_2d", {"a1": 1.0, "a2": 4.0}, [[1.0, 0.0]]),
        ("lattice", "graph_edge_quadratic", {"a0": 2.0, "a1": 1.0}, [[1.0, 0.5]]),
    ],
)
def test_nested_refinement_decreases_minimum(request, name, cid, prm, xi):
    s = request.getfixturevalue(name)
    L = make_integrand(cid, prm)
    d = CellDomain.scaled_cell(s, 1)
    vals = [solve_quadratic_direct(discretize_cell(d, r), L, xi)[0] for r in (4, 8, 16)]
    assert vals[1] <= vals[0] + 1e-10 and vals[2] <= vals[1] + 1e-10


@given(xi=st.floats(-3, 3), k=st.integers(1, 3))
def test_zero_perturbation_energy_is_cell_average(euclid1, sine_coeff, xi, k):
    # with w = 0 the midpoint rule integrates a(y) xi^2 over whole periods exactly
    sp = discretize_cell(CellDomain.scaled_cell(euclid1, k), 16)
    val, _ = energy_and_gradient(sp, sine_coeff, [[xi]], np.zeros(sp.n_nodes))
    assert val == pytest.approx(2.0 * xi * xi, rel=1e-12, abs=1e-14)
