import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rotstar.errors import ContractViolation
from rotstar.grid import (EVEN, ODD, AxiGrid, Jet, ScalarField, axi_laplacian, c_norm, derive, holder_norm,
                          holder_seminorm, load_field, quadrature_from_gradient, save_field)

from helpers import slope


def field(grid, f, parity=(EVEN, EVEN)):
    return ScalarField.from_function(grid, f, parity)


def test_grid_geometry():
    g = AxiGrid(4.0, 33)
    assert g.h == pytest.approx(0.125)
    assert g.shape == (33, 33)
    assert g.varpi[5, 0] == pytest.approx(5 * g.h)
    assert g.z[0, 7] == pytest.approx(7 * g.h)
    assert g.refined().n_cells == 65 and g.refined().coarsened() == g
    with pytest.raises(ContractViolation):
        AxiGrid(4.0, 20)


def test_shape_mismatch_rejected():
    with pytest.raises(ContractViolation):
        ScalarField(AxiGrid(1.0, 33), np.zeros((5, 5)))


@pytest.mark.parametrize("which", ["dvarpi", "dz", "dvarpivarpi", "dzz", "dvarpiz"])
def test_derivatives_of_constant_vanish(which):
    g = AxiGrid(3.0, 33)
    assert np.max(np.abs(derive(field(g, lambda v, z: 0 * v + 2.5), which).values)) < 1e-12


def test_second_derivative_of_quadratic_is_exact():
    g = AxiGrid(3.0, 33)
    d = derive(field(g, lambda v, z: v ** 2), "dvarpivarpi").values
    assert np.max(np.abs(d - 2.0)) < 1e-10


def test_derivative_parities():
    g = AxiGrid(3.0, 33)
    f = field(g, lambda v, z: np.cos(v) * np.cos(z))
    assert derive(f, "dvarpi").parity == (ODD, EVEN)
    assert derive(f, "dz").parity == (EVEN, ODD)
    assert derive(f, "dvarpiz").parity == (ODD, ODD)
    assert derive(f, "dzz").parity == (EVEN, EVEN)
    # axis regularity of even fields
    assert np.max(np.abs(derive(f, "dvarpi").values[0])) == 0.0


def test_first_derivative_converges_at_second_order():
    errs = []
    for n in (33, 65, 129):
        g = AxiGrid(3.0, n)
        d = derive(field(g, lambda v, z: np.sin(v) * np.cos(z), (ODD, EVEN)), "dvarpi").values
        errs.append(np.max(np.abs(d - np.cos(g.varpi) * np.cos(g.z))))
    assert slope(errs) == pytest.approx(2.0, abs=0.2)


@pytest.mark.parametrize("n_dim,f,expected", [
    (3, lambda v, z: v ** 2 + z ** 2, 6.0),
    (5, lambda v, z: v ** 2, 8.0),
    (4, lambda v, z: v ** 2 + z ** 2, 8.0),
])
def test_axi_laplacian_of_quadratics(n_dim, f, expected):
    g = AxiGrid(2.0, 33)
    lap = axi_laplacian(field(g, f), n_dim).values
    assert np.max(np.abs(lap[:-1, :-1] - expected)) < 1e-9


def test_axi_laplacian_rejects_odd_fields():
    g = AxiGrid(2.0, 33)
    with pytest.raises(ContractViolation):
        axi_laplacian(field(g, lambda v, z: v, (ODD, EVEN)), 3)


def test_axi_laplacian_matches_lifted_laplacian():
    # Q = r^4 lifted to three dimensions has Laplacian 20 r^2; the stencil
    # truncation error of a quartic is a fixed multiple of h^2
    for n in (33, 65):
        g = AxiGrid(2.0, n)
        lap = axi_laplacian(field(g, lambda v, z: (v ** 2 + z ** 2) ** 2), 3).values
        assert np.max(np.abs(lap - 20 * g.r ** 2)[:-2, :-2]) <= 8 * g.h ** 2 * (1 + 1e-9)
    g = AxiGrid(2.0, 33)
    lap = axi_laplacian(field(g, lambda v, z: v ** 2 + z ** 2), 3).values
    assert np.max(np.abs(lap - 6.0)) < 1e-9


def test_holder_norm_examples():
    g = AxiGrid(1.0, 65)
    assert holder_norm(field(g, lambda v, z: 0 * v - 3.0), 0, 0.5) == pytest.approx(3.0)
    lin = field(g, lambda v, z: v, (ODD, EVEN))
    assert holder_norm(lin, 1, 0.25) == pytest.approx(2.0, abs=1e-9)
    alpha = 0.4
    power = field(g, lambda v, z: np.hypot(v, z) ** alpha)
    assert 0.8 <= holder_seminorm(power.values, g, alpha) <= 1.2


@settings(max_examples=25, deadline=None)
@given(scale=st.floats(0.1, 10.0), alpha=st.floats(0.1, 0.9))
def test_holder_norm_is_homogeneous(scale, alpha):
    g = AxiGrid(2.0, 33)
    f = field(g, lambda v, z: np.cos(v) * np.exp(-z ** 2))
    a = holder_norm(f, 2, alpha)
    b = holder_norm(f * scale, 2, alpha)
    assert b == pytest.approx(scale * a, rel=1e-12)
    assert c_norm(f, 2) <= a


def test_quadrature_of_gradient():
    errs = []
    for n in (33, 65, 129):
        g = AxiGrid(1.5, n)
        phi = lambda v, z: v ** 2 * z ** 2 + np.cos(v) * np.cosh(0.5 * z)
        g1 = field(g, lambda v, z: 2 * v * z ** 2 - np.sin(v) * np.cosh(0.5 * z), (ODD, EVEN))
        g3 = field(g, lambda v, z: 2 * v ** 2 * z + 0.5 * np.cos(v) * np.sinh(0.5 * z), (EVEN, ODD))
        F = quadrature_from_gradient(g1, g3)
        assert F.values[0, 0] == 0.0
        errs.append(np.max(np.abs(F.values - (phi(g.varpi, g.z) - phi(0, 0)))))
    assert slope(errs) >= 3.5


def test_quadrature_of_zero_and_of_a_rotation():
    g = AxiGrid(1.0, 65)
    z0 = ScalarField.zeros(g)
    assert np.all(quadrature_from_gradient(z0, z0).values == 0)
    g1 = field(g, lambda v, z: -z)
    g3 = field(g, lambda v, z: v)
    a = quadrature_from_gradient(g1, g3, "canonical").values[-1, -1]
    b = quadrature_from_gradient(g1, g3, "transposed").values[-1, -1]
    assert b - a == pytest.approx(2.0, abs=g.h ** 2)


def test_quadrature_grid_mismatch():
    with pytest.raises(ContractViolation):
        quadrature_from_gradient(ScalarField.zeros(AxiGrid(1.0, 33)), ScalarField.zeros(AxiGrid(1.0, 65)))


@settings(max_examples=20, deadline=None)
@given(a=st.floats(-3, 3), b=st.floats(-3, 3), c=st.floats(0.2, 2.0))
def test_quadrature_inverts_gradient(a, b, c):
    """Quadrature of the exact gradient recovers the field minus its origin value."""
    g = AxiGrid(2.0, 65)
    phi = lambda v, z: a * v ** 2 + b * z ** 2 * v ** 2 + np.exp(-c * (v ** 2 + z ** 2))
    e = lambda v, z: np.exp(-c * (v ** 2 + z ** 2))
    g1 = field(g, lambda v, z: 2 * a * v + 2 * b * z ** 2 * v - 2 * c * v * e(v, z), (ODD, EVEN))
    g3 = field(g, lambda v, z: 2 * b * v ** 2 * z - 2 * c * z * e(v, z), (EVEN, ODD))
    F = quadrature_from_gradient(g1, g3).values
    scale = 1 + abs(a) + abs(b) + c
    assert np.max(np.abs(F - (phi(g.varpi, g.z) - phi(0, 0)))) < 1e-3 * scale


def test_jet_matches_derive():
    g = AxiGrid(2.0, 33)
    f = field(g, lambda v, z: np.cos(v) * np.cos(2 * z))
    j = Jet.of(f.values, g)
    assert np.allclose(j.d1, derive(f, "dvarpi").values)
    assert np.allclose(j.d33, derive(f, "dzz").values)
    assert np.allclose(j.d13, derive(f, "dvarpiz").values)


@pytest.mark.parametrize("fmt", ["csv", "bin"])
def test_field_round_trip(tmp_path, fmt):
    g = AxiGrid(3.7, 33)
    f = field(g, lambda v, z: np.sin(v) * np.exp(z), (ODD, EVEN))
    p = tmp_path / f"f.{fmt}"
    save_field(f, p, fmt)
    back = load_field(p, (ODD, EVEN))
    assert back.grid == g
    assert np.array_equal(back.values, f.values)
    assert back.parity == (ODD, EVEN)
    if fmt == "bin":
        assert p.read_bytes()[:4] == b"AXF1"
    else:
        assert p.read_text().splitlines()[0] == "varpi,z,value"
