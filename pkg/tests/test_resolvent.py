import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rotstar.errors import ContractViolation, SolverError
from rotstar.grid import ODD, EVEN, AxiGrid, ScalarField
from rotstar.lane_emden import default_grid, solve_distorted, solve_lane_emden
from rotstar.resolvent import ResolventContext, anderson_fixed_point, apply_resolvent, resolvent_residual


@pytest.fixture(scope="module")
def dle():
    return solve_distorted(0.02, 1.5, default_grid(solve_lane_emden(1.5).xi1, 65))


def smooth(grid, a=1.0, b=0.5):
    return ScalarField.from_function(grid, lambda v, z: a * np.exp(-0.3 * (v * v + z * z)) + b * np.cos(0.4 * v))


def test_anderson_scalar_fixed_point():
    x, hist = anderson_fixed_point(np.cos, np.array([1.0]), 1e-14)
    assert x[0] == pytest.approx(0.7390851332151607, abs=1e-13)
    assert len(hist) < 20


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10_000), rho=st.floats(0.1, 0.9))
def test_anderson_solves_linear_contractions(seed, rho):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((12, 12))
    A *= rho / np.linalg.norm(A, 2)
    b = rng.standard_normal(12)
    x, _ = anderson_fixed_point(lambda x: A @ x + b, np.zeros(12), 1e-12, max_iter=100)
    exact = np.linalg.solve(np.eye(12) - A, b)
    assert np.max(np.abs(x - exact)) < 1e-9 * max(1, np.max(np.abs(exact)))


def test_anderson_reports_failure():
    with pytest.raises(SolverError) as info:
        anderson_fixed_point(lambda x: x + 1.0, np.zeros(3), 1e-12, max_iter=10)
    assert len(info.value.history) == 10


def test_anderson_accepts_a_roundoff_floor():
    # a map whose residual cannot drop below 2e-12 but is within the floor factor
    rng = np.random.default_rng(1)

    def G(x):
        return 0.5 * x + 1.0 + 2e-12 * rng.choice([-1.0, 1.0], size=x.shape)

    x, hist = anderson_fixed_point(G, np.zeros(4), 1e-13, max_iter=200)
    assert np.max(np.abs(x - 2.0)) < 1e-10
    assert len(hist) < 200


@pytest.mark.parametrize("method", ["anderson", "assembled"])
def test_resolvent_solves_the_fixed_point(dle, method):
    ctx = ResolventContext(dle, method=method, tol=1e-12)
    g = smooth(dle.grid)
    Q = apply_resolvent(g, ctx)
    assert Q.values[0, 0] == 0.0
    back = ctx.potential(ctx.m * Q.values + g.values)
    assert np.max(np.abs(back - Q.values)) < 1e-10 * max(1, np.max(np.abs(Q.values)))
    # the discrete equation holds up to roundoff away from the axis origin pin
    assert resolvent_residual(Q, g, ctx) < 1e-6
    assert ctx.last_history


def test_methods_agree(dle):
    g = smooth(dle.grid, 0.7, -0.2)
    a = apply_resolvent(g, ResolventContext(dle, method="anderson", tol=1e-13)).values
    b = apply_resolvent(g, ResolventContext(dle, method="assembled", tol=1e-13)).values
    assert np.max(np.abs(a - b)) < 1e-10


@settings(max_examples=8, deadline=None)
@given(a=st.floats(-3, 3), b=st.floats(-3, 3))
def test_resolvent_is_linear(dle, a, b):
    ctx = ResolventContext(dle, method="assembled", tol=1e-13)
    p, q = smooth(dle.grid, 1.0, 0.0), smooth(dle.grid, 0.0, 1.0)
    lhs = apply_resolvent(p * a + q * b, ctx).values
    rhs = a * apply_resolvent(p, ctx).values + b * apply_resolvent(q, ctx).values
    assert np.max(np.abs(lhs - rhs)) < 1e-9 * (1 + abs(a) + abs(b))


def test_resolvent_guards(dle):
    with pytest.raises(ContractViolation):
        ResolventContext(dle, method="gmres")
    ctx = ResolventContext(dle)
    with pytest.raises(ContractViolation):
        apply_resolvent(ScalarField.from_function(dle.grid, lambda v, z: z, (EVEN, ODD)), ctx)
    with pytest.raises(ContractViolation):
        apply_resolvent(ScalarField.zeros(AxiGrid(dle.grid.xi0, 33)), ctx)
    assert ResolventContext(dle, check_proxy=True).method == "anderson"
