import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cellhom.errors import MissingParameter, NonpositiveScale, UnknownCatalogId
from cellhom.integrand import (
    CATALOG,
    make_integrand,
    rescale_integrand,
    sample_points,
    translate_integrand,
    validate_growth,
)

CATALOG_CASES = {
    "p_dirichlet_coeff": {"a0": 2.0, "a1": 1.0, "p": 2},
    "p_dirichlet_coeff_p3": {"a0": 2.0, "a1": 0.5, "p": 3.0, "dim": 2},
    "laminate_2d": {"a1": 1.0, "a2": 3.0},
    "laminate_1d": {"a1": 1.0, "a2": 3.0, "dim": 1},
    "checkerboard_2d": {"a1": 1.0, "a2": 4.0},
    "double_well_1d": {"p": 4},
    "graph_edge_quadratic": {"a0": 2.0, "a1": 1.0},
    "vector_laminate": {"a1": 1.0, "a2": 3.0, "m": 2},
}


def build(case):
    cid = {"p_dirichlet_coeff_p3": "p_dirichlet_coeff", "laminate_1d": "laminate_2d",
           "vector_laminate": "laminate_2d"}.get(case, case)
    return make_integrand(cid, CATALOG_CASES[case])


@pytest.fixture(params=sorted(CATALOG_CASES))
def catalog_entry(request):
    return build(request.param)


def test_catalog_ids_are_covered():
    ids = {c.split("_p3")[0] for c in CATALOG_CASES} | {"laminate_2d"}
    assert set(CATALOG) <= ids


def test_sine_coefficient_metadata(sine_coeff):
    assert (sine_coeff.p, sine_coeff.alpha, sine_coeff.beta) == (2.0, 1.0, 3.0)
    x = np.array([[0.25]])
    assert sine_coeff.value(x, np.ones((1, 1, 1)))[0] == pytest.approx(3.0)


def test_double_well_metadata(double_well):
    assert double_well.alpha == 0.0 and double_well.coercivity_warning
    z = np.array([1.0, -1.0, 0.0, 2.0]).reshape(-1, 1, 1)
    assert np.allclose(double_well.value(np.zeros((4, 1)), z), [0.0, 0.0, 1.0, 9.0])


def test_laminate_phases(laminate):
    x = np.array([[0.25, 0.7], [0.75, 0.1], [1.25, 0.0], [-0.25, 0.3], [0.5, 0.5]])
    z = np.ones((5, 1, 2)) / np.sqrt(2)
    assert np.allclose(laminate.value(x, z), [1.0, 3.0, 1.0, 3.0, 3.0])


def test_catalog_errors():
    with pytest.raises(UnknownCatalogId):
        make_integrand("nope", {})
    with pytest.raises(MissingParameter):
        make_integrand("p_dirichlet_coeff", {"a0": 2.0})
    with pytest.raises(MissingParameter):
        make_integrand("laminate_2d", {"a1": 1.0})
    with pytest.raises(ValueError):
        make_integrand("double_well_1d", {"p": 2})


def _central_difference(L, x, z, h):
    fd = np.zeros_like(z)
    for i in range(z.shape[1]):
        for j in range(z.shape[2]):
            e = np.zeros_like(z)
            e[:, i, j] = h
            fd[:, i, j] = (L.value(x, z + e) - L.value(x, z - e)) / (2 * h)
    return fd


def test_derivative_matches_central_differences(catalog_entry):
    L = catalog_entry
    x, z = sample_points(L, 200, np.random.default_rng(7))
    norm = np.sqrt(np.sum(z * z, axis=(1, 2)))
    h = 1e-6 * (1 + norm)
    d = L.deriv(x, z)
    fd = _central_difference(L, x, z, h)
    err = np.sqrt(np.sum((d - fd) ** 2, axis=(1, 2)))
    scale = np.maximum(np.sqrt(np.sum(d * d, axis=(1, 2))), 1.0)
    assert np.max(err / scale) <= 1e-5


def test_periodicity(catalog_entry):
    L = catalog_entry
    rng = np.random.default_rng(11)
    x, z = sample_points(L, 100, rng)
    g = rng.integers(-5, 6, size=x.shape).astype(float)
    v0, v1 = L.value(x, z), L.value(x + g, z)
    assert np.all(np.abs(v1 - v0) <= 1e-12 * (1 + v0))


def test_nonnegative(catalog_entry):
    x, z = sample_points(catalog_entry, 500, np.random.default_rng(3))
    assert np.all(catalog_entry.value(x, z) >= 0)


# -- rescaling -------------------------------------------------------------------


def test_rescale_identity(sine_coeff):
    x, z = sample_points(sine_coeff, 50, np.random.default_rng(0))
    L1 = rescale_integrand(sine_coeff, 1.0)
    assert np.array_equal(L1.value(x, z), sine_coeff.value(x, z))


def test_rescale_example(sine_coeff):
    L2 = rescale_integrand(sine_coeff, 2.0)
    assert L2.value(np.array([[0.25]]), np.ones((1, 1, 1)))[0] == pytest.approx(2.0, abs=1e-15)


def test_rescale_composition(laminate):
    rng = np.random.default_rng(5)
    x, z = sample_points(laminate, 100, rng)
    x = rng.uniform(0.01, 0.99, size=x.shape) / 6.0 + rng.integers(0, 3, size=x.shape) / 6.0
    a = rescale_integrand(rescale_integrand(laminate, 2.0), 3.0)
    b = rescale_integrand(laminate, 6.0)
    assert np.max(np.abs(a.value(x, z) - b.value(x, z))) <= 1e-14


@given(s=st.floats(0.1, 10), t=st.floats(0.1, 10))
def test_rescale_composition_smooth(sine_coeff, s, t):
    x, z = sample_points(sine_coeff, 20, np.random.default_rng(1))
    a = rescale_integrand(rescale_integrand(sine_coeff, s), t)
    b = rescale_integrand(sine_coeff, s * t)
    assert np.allclose(a.value(x, z), b.value(x, z), rtol=1e-12, atol=1e-12)


def test_rescale_rejects_nonpositive(sine_coeff):
    for t in (0.0, -1.0):
        with pytest.raises(NonpositiveScale):
            rescale_integrand(sine_coeff, t)


def test_translate_by_lattice_vector_is_identity():
    L = make_integrand("checkerboard_2d", {"a1": 1.0, "a2": 4.0})
    x, z = sample_points(L, 50, np.random.default_rng(2))
    Lg = translate_integrand(L, (2.0, -3.0))
    assert np.allclose(Lg.value(x, z), L.value(x, z), rtol=1e-12)


# -- growth ------------------------------------------------------------------------


def test_growth_dirichlet(dirichlet_1d):
    rep = validate_growth(dirichlet_1d, 1000, seed=0)
    assert rep.passed and rep.alpha_hat == pytest.approx(1.0) and rep.beta_hat <= 1.0


def test_growth_double_well_warns(double_well):
    rep = validate_growth(double_well, 1000, seed=0)
    assert rep.coercivity_warning and rep.passed
    z = np.array([[[1.0 + 1e-6]]])
    assert double_well.value(np.zeros((1, 1)), z)[0] / 1.0 < 1e-10


def test_growth_laminate(laminate):
    rep = validate_growth(laminate, 1000, seed=0)
    assert rep.passed and rep.alpha_hat >= 1.0 - 1e-12 and rep.beta_hat <= 3.0


def test_growth_flags_wrong_constants(sine_coeff):
    from dataclasses import replace

    bad = replace(sine_coeff, beta=1.0)
    assert not validate_growth(bad, 200, seed=0).passed
