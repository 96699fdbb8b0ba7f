import time

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rotstar.errors import BoundaryNotFound, ConfigError, DataError, IterationDiverged
from rotstar.grid import AxiGrid, ScalarField
from rotstar.lane_emden import (B_MAX, chebyshev_zeta, default_grid, kernel_proxy, mirrored_spline,
                                monotonicity_margin, ray_root, solve_distorted, solve_lane_emden, xi1_curve)

# first zero and mass coefficient for n = 3/2 from a 30-digit Taylor integrator
XI1_15 = 3.65375373621912
MU1_15 = 2.71405512010865


def mp_lane_emden(n, dps=30):
    """Independent integration with mpmath's Taylor-series ODE solver."""
    mp.mp.dps = dps
    n = mp.mpf(n)
    r0 = mp.mpf("0.01")
    c4, c6 = n / 120, -n * (8 * n - 5) / 15120
    y0 = [1 - r0 ** 2 / 6 + c4 * r0 ** 4 + c6 * r0 ** 6, -r0 / 3 + 4 * c4 * r0 ** 3 + 6 * c6 * r0 ** 5]
    f = mp.odefun(lambda r, y: [y[1], -max(y[0], 0) ** n - 2 * y[1] / r], r0, y0)
    x = mp.findroot(lambda r: f(r)[0], 3.6)
    return float(x), float(-x ** 2 * f(x)[1])


@pytest.mark.parametrize("n,xi1,mu1", [
    (0.0, np.sqrt(6.0), 2 * np.sqrt(6.0)),
    (1.0, np.pi, np.pi),
    (1.5, XI1_15, MU1_15),
])
def test_first_zero_against_closed_forms(n, xi1, mu1):
    t = time.perf_counter()
    le = solve_lane_emden(n)
    assert time.perf_counter() - t < 1.0
    assert abs(le.xi1 - xi1) <= 1e-8
    assert le.mu1 == pytest.approx(mu1, abs=1e-8)


@pytest.mark.slow
def test_frozen_values_match_independent_integrator():
    xi1, mu1 = mp_lane_emden(1.5)
    assert xi1 == pytest.approx(XI1_15, abs=1e-13)
    assert mu1 == pytest.approx(MU1_15, abs=1e-13)


def test_profile_matches_index_one_solution():
    le = solve_lane_emden(1.0)
    r = np.linspace(0.0, np.pi, 200)
    exact = np.sinc(r / np.pi)
    assert np.max(np.abs(le.theta(r) - exact)) < 1e-10
    # harmonic continuation outside
    r = np.array([4.0, 6.0])
    assert np.allclose(le.theta(r), -np.pi * (1 / np.pi - 1 / r))
    assert np.allclose(le.dtheta(r), -np.pi / r ** 2)


@settings(max_examples=15, deadline=None)
@given(n=st.floats(0.5, 4.5))
def test_profile_is_decreasing_with_a_single_zero(n):
    le = solve_lane_emden(n)
    th = le.theta_values
    assert th[0] == 1.0
    assert np.all(np.diff(th) < 0)
    assert np.count_nonzero((th[:-1] > 0) & (th[1:] <= 0)) == 1
    assert le.mu1 > 0


@pytest.mark.parametrize("n", [-0.5, 5.0, 6.0])
def test_index_out_of_range(n):
    with pytest.raises(ConfigError):
        solve_lane_emden(n)


def test_zero_rotation_reproduces_spherical_profile():
    n = 1.5
    xi1 = solve_lane_emden(n).xi1
    for cells in (65, 129):
        d = solve_distorted(0.0, n, default_grid(xi1, cells))
        err = np.max(np.abs(d.theta_field.values - d.spherical.theta(d.grid.r)))
        assert err <= 5 * d.grid.h ** 2
        assert d.residual < 1e-9
    z, x = xi1_curve(d)
    assert np.max(np.abs(x - xi1)) < 5 * d.grid.h ** 2


def test_oblateness_is_linear_in_rotation():
    bs = [0.0025, 0.005, 0.01, 0.02]
    obl = []
    for b in bs:
        z, x = xi1_curve(solve_distorted(b, 1.5))
        assert z[0] == 0.0 and z[-1] == 1.0
        # equator outside the pole, radius decreasing towards the pole
        assert np.all(np.diff(x) < 0)
        obl.append(1 - x[-1] / x[0])
    assert np.polyfit(np.log(bs), np.log(obl), 1)[0] == pytest.approx(1.0, abs=0.2)


def test_kernel_proxy_is_nondegenerate():
    assert kernel_proxy(solve_distorted(0.02, 1.5)) > 1e-3


def test_distorted_guards():
    with pytest.raises(ConfigError):
        solve_distorted(B_MAX * 1.01, 1.5)
    with pytest.raises(ConfigError):
        solve_distorted(-0.01, 1.5)
    with pytest.raises(ConfigError):
        solve_distorted(0.01, 0.8)
    with pytest.raises(ConfigError):
        solve_distorted(0.01, 1.5, AxiGrid(5.0, 65))
    with pytest.raises(IterationDiverged):
        solve_distorted(0.01, 1.5, max_iter=2)


def test_ray_root_and_monotonicity():
    g = AxiGrid(3.0, 65)
    f = ScalarField.from_function(g, lambda v, z: 1 - (v / 2) ** 2 - z ** 2)
    spl = mirrored_spline(f)
    assert ray_root(spl, 0.0, 3.0) == pytest.approx(2.0, abs=1e-10)
    assert ray_root(spl, 1.0, 3.0) == pytest.approx(1.0, abs=1e-10)
    assert monotonicity_margin(f) > 0
    with pytest.raises(BoundaryNotFound):
        ray_root(mirrored_spline(ScalarField.from_function(g, lambda v, z: 1 + 0 * v)), 0.5, 3.0)
    bump = ScalarField.from_function(g, lambda v, z: np.cos(3 * np.hypot(v, z)))
    with pytest.raises(DataError):
        ray_root(mirrored_spline(bump), 0.3, 3.0)
    assert monotonicity_margin(bump) < 0


def test_chebyshev_nodes():
    z = chebyshev_zeta(9)
    assert z[0] == 0.0 and z[-1] == 1.0 and np.all(np.diff(z) > 0)
