import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from rotstar.errors import ContractViolation
from rotstar.grid import EVEN, ODD, AxiGrid, ScalarField
from rotstar.potential import (Cutoff, PotentialSolver, get_solver, newtonian_potential,
                               origin_subtracted_potential, poisson_residual, ring_kernel,
                               ring_kernel_quadrature)

from helpers import ball_center_value, ball_source, slope

CUT = Cutoff.for_domain(2.0, 4.0)


def solver(n, n_dim):
    return get_solver(AxiGrid(4.0, n), n_dim, CUT)


def gaussian(grid, c=2.0):
    return ScalarField.from_function(grid, lambda v, z: np.exp(-c * (v * v + z * z)))


@pytest.mark.parametrize("n_dim", [3, 4, 5])
def test_unit_ball_central_value_converges(n_dim):
    # the coarsest grids are pre-asymptotic (local slopes above 2.3 from 33 to 65)
    errs = []
    for n in (65, 129, 257):
        s = PotentialSolver(AxiGrid(4.0, n), n_dim, CUT)
        f = newtonian_potential(ScalarField(s.grid, ball_source(s.grid, n_dim)), s)
        errs.append(abs(f.values[0, 0] - ball_center_value(n_dim)))
    assert errs[1] <= 1e-4
    assert slope(errs) == pytest.approx(2.0, abs=0.3)


def test_unit_ball_profile_in_three_dimensions():
    s = solver(129, 3)
    g = s.grid
    f = newtonian_potential(ScalarField(g, ball_source(g, 3)), s).values
    r = g.r
    exact = np.where(r <= 1, 0.5 - r * r / 6, 1 / (3 * np.maximum(r, 1e-300)))
    assert np.max(np.abs(f - exact)) < 5e-4
    k = origin_subtracted_potential(ScalarField(g, ball_source(g, 3)), s).values
    assert k[0, 0] == 0.0
    i = int(round(1.0 / g.h))
    assert k[i, 0] == pytest.approx(-1 / 6, abs=5e-4)


@pytest.mark.parametrize("n_dim", [3, 4, 5])
def test_cut_off_constant_matches_radial_integral(n_dim):
    # for a radial source the potential at the origin is int chi(r) r dr / (n - 2)
    s = solver(65, n_dim)
    f = s.apply(np.ones(s.grid.shape))
    exact = quad(lambda r: float(CUT(r)) * r, 0, CUT.xi_out, points=[CUT.xi_in], epsabs=1e-13)[0] / (n_dim - 2)
    assert f.max() == pytest.approx(f[0, 0])
    assert f[0, 0] == pytest.approx(exact, rel=1e-3)


def test_zero_source_gives_zero():
    s = solver(33, 4)
    assert np.all(newtonian_potential(ScalarField.zeros(s.grid), s).values == 0.0)


@settings(max_examples=20, deadline=None)
@given(a=st.floats(-5, 5), b=st.floats(-5, 5), n_dim=st.sampled_from([3, 4, 5]))
def test_linearity(a, b, n_dim):
    s = solver(33, n_dim)
    g = s.grid
    p = gaussian(g)
    q = ScalarField.from_function(g, lambda v, z: np.cos(v) * np.cos(0.5 * z))
    lhs = s.apply(a * p.values + b * q.values)
    rhs = a * s.apply(p.values) + b * s.apply(q.values)
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * (1 + abs(a) + abs(b)) * np.max(np.abs(rhs) + 1)


def test_poisson_residual():
    # in 3D the solver stencil and the centred Laplacian coincide; in 4D and 5D
    # the finite-volume weights differ from it at O(h^2)
    res = {3: [], 4: [], 5: []}
    for n_dim in res:
        for n in (33, 65, 129):
            s = solver(n, n_dim)
            src = gaussian(s.grid)
            res[n_dim].append(poisson_residual(newtonian_potential(src, s), src, n_dim, CUT))
    assert max(res[3]) < 1e-11
    for n_dim in (4, 5):
        assert slope(res[n_dim]) == pytest.approx(2.0, abs=0.2)


@settings(max_examples=10, deadline=None)
@given(c=st.floats(0.5, 4.0), shift=st.floats(0.0, 1.0))
def test_positive_sources_give_positive_potentials(c, shift):
    s = solver(33, 3)
    g = s.grid
    src = np.exp(-c * ((g.varpi - shift) ** 2 + g.z ** 2)) + np.exp(-c * ((g.varpi + shift) ** 2 + g.z ** 2))
    f = s.apply(src)
    assert f.min() > 0
    # decay: the potential is largest somewhere on the support, not on the edges
    assert f[-1, :].max() < f.max() and f[:, -1].max() < f.max()


def test_radial_source_gives_radial_potential():
    s = solver(65, 5)
    g = s.grid
    f = s.apply(np.exp(-g.r ** 2))
    # compare nodes at equal radius on the two axes
    assert np.max(np.abs(f[:, 0] - f[0, :])) < 5e-4


@settings(max_examples=40, deadline=None)
@given(n_dim=st.sampled_from([3, 4, 5]), v=st.floats(0.0, 4.0), z=st.floats(-4.0, 4.0),
       vs=st.floats(0.01, 2.0), zs=st.floats(-2.0, 2.0))
def test_ring_kernel_closed_form_matches_quadrature(n_dim, v, z, vs, zs):
    if np.hypot(v - vs, z - zs) < 0.5:
        return
    a = ring_kernel(n_dim, v, z, vs, zs)
    b = ring_kernel_quadrature(n_dim, v, z, vs, zs)
    assert float(a) == pytest.approx(float(b), rel=1e-10)


def test_ring_kernel_far_field():
    # a distant ring looks like a point: kernel -> |S^(n-2)| / d^(n-2)
    sphere = {3: 2 * np.pi, 4: 4 * np.pi, 5: 2 * np.pi ** 2}
    for n_dim in (3, 4, 5):
        d = 1e4
        k = float(ring_kernel(n_dim, 0.0, d, 1.0, 0.0))
        assert k * d ** (n_dim - 2) == pytest.approx(sphere[n_dim], rel=1e-6)


def test_cutoff_properties():
    c = Cutoff(1.0, 2.0)
    r = np.linspace(0, 3, 301)
    v = c(r)
    assert np.all(v[r <= 1.0] == 1.0) and np.all(v[r >= 2.0] == 0.0)
    assert np.all(np.diff(v) <= 0)
    assert Cutoff.for_domain(2.0, 4.0).xi_out == 3.0
    with pytest.raises(ContractViolation):
        Cutoff(2.0, 1.0)


def test_contract_violations():
    g = AxiGrid(4.0, 33)
    with pytest.raises(ContractViolation):
        PotentialSolver(g, 3, Cutoff(2.0, 3.9))
    with pytest.raises(ContractViolation):
        PotentialSolver(g, 6, CUT)
    s = solver(33, 3)
    with pytest.raises(ContractViolation):
        newtonian_potential(ScalarField.from_function(g, lambda v, z: v, (ODD, EVEN)), s)
    with pytest.raises(ContractViolation):
        origin_subtracted_potential(gaussian(g), solver(33, 4))
    with pytest.raises(ContractViolation):
        newtonian_potential(gaussian(AxiGrid(4.0, 65)), s)
