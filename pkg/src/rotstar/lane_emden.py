"""Spherical Lane-Emden profiles and their rotational distortion.

The distorted profile ``Theta`` solves the integral equation

    Theta = chi_rot (b/4) varpi^2 + K[(Theta v 0)^n] + 1,

where ``K`` is the origin-subtracted three-dimensional Newtonian potential.
Its positivity set is the rotating Newtonian star.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import RectBivariateSpline
from scipy.optimize import brentq

from .errors import BoundaryNotFound, ConfigError, DataError, IterationDiverged
from .grid import AxiGrid, ScalarField
from .potential import Cutoff, PotentialSolver, get_solver

B_MAX = 0.05


# ---------------------------------------------------------------------------
# spherical profile
# ---------------------------------------------------------------------------

@dataclass
class LaneEmdenSolution:
    """Spherical Lane-Emden function of index ``n_index``.

    Attributes
    ----------
    n_index : float
    xi1 : float
        First zero.
    mu1 : float
        ``-xi1^2 theta'(xi1)``.
    r, theta_values : ndarray
        Profile sampled on ``[0, r_max]``.
    """

    n_index: float
    xi1: float
    mu1: float
    r: np.ndarray
    theta_values: np.ndarray
    _dense: object = field(repr=False, default=None)
    _r0: float = field(repr=False, default=0.0)

    def theta(self, r):
        """Evaluate ``theta`` (continued harmonically beyond ``xi1``)."""
        r = np.abs(np.asarray(r, dtype=float))
        out = np.empty_like(r)
        inner = r <= self._r0
        out[inner] = _series(r[inner], self.n_index)[0]
        mid = (r > self._r0) & (r <= self.xi1)
        if np.any(mid):
            out[mid] = self._dense(r[mid])[0]
        outer = r > self.xi1
        out[outer] = -self.mu1 * (1.0 / self.xi1 - 1.0 / r[outer])
        return out

    def dtheta(self, r):
        r = np.abs(np.asarray(r, dtype=float))
        out = np.empty_like(r)
        inner = r <= self._r0
        out[inner] = _series(r[inner], self.n_index)[1]
        mid = (r > self._r0) & (r <= self.xi1)
        if np.any(mid):
            out[mid] = self._dense(r[mid])[1]
        outer = r > self.xi1
        out[outer] = -self.mu1 / r[outer] ** 2
        return out


def _series(r, n):
    """Regular expansion of ``theta`` and ``theta'`` at the centre."""
    r2 = r * r
    c4 = n / 120.0
    c6 = -n * (8 * n - 5) / 15120.0
    th = 1.0 - r2 / 6.0 + c4 * r2 * r2 + c6 * r2 ** 3
    dth = -r / 3.0 + 4 * c4 * r * r2 + 6 * c6 * r * r2 * r2
    return th, dth


def solve_lane_emden(n_index: float, r_max: float | None = None, rtol: float = 1e-13) -> LaneEmdenSolution:
    """Integrate ``-(r^2 theta')'/r^2 = (theta v 0)^n`` from the centre.

    Parameters
    ----------
    n_index : float
        Polytropic index, ``0 <= n < 5``.
    r_max : float, optional
        Extent of the sampled profile; defaults to ``2.5 xi1``.
    rtol : float
        Relative tolerance of the DOP853 integration.

    Returns
    -------
    LaneEmdenSolution
    """
    n = float(n_index)
    if not 0.0 <= n < 5.0:
        raise ConfigError(f"Lane-Emden index {n} unsupported: no finite zero for n >= 5 (or n < 0)")
    r0 = 1e-3

    def rhs(r, y):
        th, dth = y
        return [dth, -(max(th, 0.0) ** n if n > 0 else (1.0 if th > 0 else 0.0)) - 2.0 * dth / r]

    def hit(r, y):
        return y[0]

    hit.terminal = True
    hit.direction = -1
    th0, dth0 = _series(np.array(r0), n)
    sol = solve_ivp(rhs, (r0, 50.0), [float(th0), float(dth0)], method="DOP853",
                    rtol=rtol, atol=1e-15, dense_output=True, events=hit)
    if sol.status != 1:
        raise ConfigError(f"no zero of the Lane-Emden function found for n={n}")
    # the event is located by root finding on the dense output
    xi1 = float(sol.t_events[0][0])
    mu1 = -xi1 ** 2 * float(sol.sol(xi1)[1])
    res = LaneEmdenSolution(n, xi1, mu1, np.empty(0), np.empty(0), sol.sol, r0)
    if r_max is None:
        r_max = 2.5 * xi1
    res.r = np.linspace(0.0, r_max, 1001)
    res.theta_values = res.theta(res.r)
    return res


# ---------------------------------------------------------------------------
# distorted profile
# ---------------------------------------------------------------------------

def default_grid(xi1: float, n_cells: int = 129, xi0_factor: float = 2.5) -> AxiGrid:
    """Grid on ``[0, xi0_factor * xi1]^2``."""
    return AxiGrid(xi0_factor * xi1, n_cells)


def default_cutoff(xi1: float, grid: AxiGrid) -> Cutoff:
    """Source cutoff with plateau ``Xi = 2 xi1``, vanishing at ``(Xi + Xi0)/2``."""
    return Cutoff.for_domain(2.0 * xi1, grid.xi0)


def rotation_cutoff(xi1: float) -> Cutoff:
    """Cutoff of the centrifugal term: 1 up to ``1.5 xi1``, 0 beyond ``2 xi1``."""
    return Cutoff(1.5 * xi1, 2.0 * xi1)


@dataclass
class DistortedLaneEmden:
    """Converged solution of the rotating integral equation.

    Attributes
    ----------
    theta_field : ScalarField
    b_rot, n_index : float
    spherical : LaneEmdenSolution
    solver : PotentialSolver
        Three-dimensional potential solver used for the iteration.
    rot_cutoff_applied : bool
    iterations : int
    residual : float
        Final sup-norm of ``Theta - RHS(Theta)``.
    history : list of float
        Sup-norm of the update per iteration.
    """

    theta_field: ScalarField
    b_rot: float
    n_index: float
    spherical: LaneEmdenSolution
    solver: PotentialSolver
    rot_cutoff_applied: bool
    iterations: int
    residual: float
    history: list

    @property
    def grid(self) -> AxiGrid:
        return self.theta_field.grid

    @property
    def xi1(self) -> float:
        return self.spherical.xi1

    @cached_property
    def curve(self):
        """``(zeta, Xi1(zeta))`` on the default Chebyshev nodes."""
        return xi1_curve(self)

    @cached_property
    def spline(self) -> RectBivariateSpline:
        return mirrored_spline(self.theta_field)


def centrifugal_term(grid: AxiGrid, b_rot: float, xi1: float, rot_cutoff: bool = True) -> np.ndarray:
    base = 0.25 * b_rot * grid.varpi ** 2
    if rot_cutoff:
        base = base * rotation_cutoff(xi1)(grid.r)
    return base


def integral_rhs(theta: np.ndarray, solver: PotentialSolver, n_index: float, centrifugal: np.ndarray) -> np.ndarray:
    """Right-hand side of the integral equation for node values ``theta``."""
    rho = np.where(theta > 0, np.abs(theta) ** n_index, 0.0)
    pot = solver.apply(rho)
    return centrifugal + (pot - pot[0, 0]) + 1.0


def solve_distorted(b_rot: float, n_index: float, grid: AxiGrid | None = None, cutoff: Cutoff | None = None,
                    damping: float = 0.5, tol: float = 1e-10, max_iter: int = 500,
                    rot_cutoff: bool = True, b_max: float = B_MAX) -> DistortedLaneEmden:
    """Solve for the distorted Lane-Emden function by damped Picard iteration.

    Parameters
    ----------
    b_rot : float
        Rotation parameter, ``0 <= b <= b_max``.
    n_index : float
        Polytropic index in ``(1, 5)``.
    grid, cutoff : optional
        Defaults are :func:`default_grid` and :func:`default_cutoff`.
    damping : float
        Weight of the new iterate.
    tol : float
        Stop when the sup-norm of the undamped update falls below ``tol``.
    rot_cutoff : bool
        Cut off the centrifugal term beyond ``2 xi1``.

    Raises
    ------
    IterationDiverged
        When ``max_iter`` is exhausted or the update grows without bound.
    """
    if not 1.0 < n_index < 5.0:
        raise ConfigError(f"polytropic index {n_index} outside (1, 5)")
    if not 0.0 <= b_rot <= b_max:
        raise ConfigError(f"rotation parameter b={b_rot} outside [0, {b_max}]")
    le = solve_lane_emden(n_index)
    if grid is None:
        grid = default_grid(le.xi1)
    if grid.xi0 < 2.5 * le.xi1 - 1e-12:
        raise ConfigError(f"domain half-width {grid.xi0:g} below 2.5 xi1 = {2.5 * le.xi1:g}")
    if cutoff is None:
        cutoff = default_cutoff(le.xi1, grid)
    solver = get_solver(grid, 3, cutoff)
    cent = centrifugal_term(grid, b_rot, le.xi1, rot_cutoff)
    theta = le.theta(grid.r)
    history = []
    for it in range(1, max_iter + 1):
        new = integral_rhs(theta, solver, n_index, cent)
        diff = float(np.max(np.abs(new - theta)))
        history.append(diff)
        theta = theta + damping * (new - theta)
        if diff < tol:
            break
        if not np.isfinite(diff) or diff > 1e3:
            raise IterationDiverged(f"distorted Lane-Emden iteration diverged at step {it}", history)
    else:
        raise IterationDiverged(
            f"distorted Lane-Emden iteration did not reach {tol:g} in {max_iter} steps", history)
    residual = float(np.max(np.abs(integral_rhs(theta, solver, n_index, cent) - theta)))
    return DistortedLaneEmden(ScalarField(grid, theta), float(b_rot), float(n_index), le, solver,
                              bool(rot_cutoff), it, residual, history)


# ---------------------------------------------------------------------------
# zero curve
# ---------------------------------------------------------------------------

def mirrored_spline(field: ScalarField, k: int = 3) -> RectBivariateSpline:
    """Bicubic spline of an even-even field over ``[-xi0, xi0]^2``."""
    x = field.grid.x
    xm = np.concatenate([-x[:0:-1], x])
    v = field.values
    pv, pz = field.parity
    top = np.concatenate([pv * v[:0:-1, :], v], axis=0)
    full = np.concatenate([pz * top[:, :0:-1], top], axis=1)
    return RectBivariateSpline(xm, xm, full, kx=k, ky=k)


def chebyshev_zeta(n_points: int = 65) -> np.ndarray:
    """Chebyshev-Lobatto nodes on ``[0, 1]`` in increasing order."""
    k = np.arange(n_points)
    return np.sort(0.5 * (1.0 + np.cos(np.pi * k / (n_points - 1))))


def ray_root(spline: RectBivariateSpline, zeta: float, r_max: float, n_samples: int = 400,
             check_monotone: bool = True, xtol: float = 1e-12, name: str = "field") -> float:
    """Radius of the sign change of ``spline`` along the ray of direction ``zeta``.

    ``zeta`` is the cosine of the polar angle.  Raises
    :class:`BoundaryNotFound` without a sign change and :class:`DataError`
    when the field is not decreasing along the ray before the root.
    """
    s = np.sqrt(max(1.0 - zeta * zeta, 0.0))
    r = np.linspace(0.0, r_max, n_samples)
    vals = spline.ev(r * s, r * zeta)
    sign = np.nonzero((vals[:-1] > 0) & (vals[1:] <= 0))[0]
    if sign.size == 0:
        raise BoundaryNotFound(f"{name} has no sign change along the ray zeta={zeta:.6g}")
    if check_monotone:
        dr = spline.ev(r[1:] * s, r[1:] * zeta, dx=1) * s + spline.ev(r[1:] * s, r[1:] * zeta, dy=1) * zeta
        if sign.size > 1 or np.any(dr[: sign[0] + 1] >= 0):
            raise DataError(f"{name} is not decreasing along the ray zeta={zeta:.6g}")
    i = sign[0]
    return brentq(lambda t: float(spline.ev(t * s, t * zeta)), r[i], r[i + 1], xtol=xtol, rtol=1e-15)


def xi1_curve(dle: DistortedLaneEmden, n_points: int = 65):
    """Zero radius ``Xi1(zeta)`` of ``Theta`` on Chebyshev nodes ``zeta in [0, 1]``.

    Returns
    -------
    zeta, xi1 : ndarray
        The curve is even in ``zeta``; mirror it for negative directions.
    """
    zeta = chebyshev_zeta(n_points)
    spl = dle.spline
    r_max = min(dle.grid.xi0, 2.0 * dle.xi1)
    vals = np.array([ray_root(spl, z, r_max, name="Theta") for z in zeta])
    return zeta, vals


def monotonicity_margin(field: ScalarField, r_min: float | None = None, n_rays: int = 33, n_samples: int = 200) -> float:
    """Minimum of ``-d/dr`` of ``field`` over ray samples with ``r_min < r <= xi0``."""
    spl = mirrored_spline(field)
    g = field.grid
    if r_min is None:
        r_min = g.h
    best = np.inf
    for zeta in np.linspace(0.0, 1.0, n_rays):
        s = np.sqrt(1.0 - zeta * zeta)
        r = np.linspace(r_min, g.xi0, n_samples)
        dr = spl.ev(r * s, r * zeta, dx=1) * s + spl.ev(r * s, r * zeta, dy=1) * zeta
        best = min(best, float(np.min(-dr)))
    return best


# ---------------------------------------------------------------------------
# linearization
# ---------------------------------------------------------------------------

def multiplier(theta: np.ndarray, n_index: float) -> np.ndarray:
    """``n (Theta v 0)^(n-1)``, the derivative of ``(Theta v 0)^n``."""
    return np.where(theta > 0, n_index * np.abs(theta) ** (n_index - 1.0), 0.0)


def kernel_proxy(dle: DistortedLaneEmden, coarse_n: int | None = 65) -> float:
    """Smallest singular value of ``I - K[m .]`` on the star nodes.

    ``m = n (Theta v 0)^(n-1)``.  A null vector of the linearized operator is
    determined by its values where ``m > 0``, so the restriction to those
    nodes has a kernel exactly when the full operator does.  The matrix is
    assembled column by column with one multi-right-hand-side solve, on a
    coarser copy of the problem when ``coarse_n`` is given.
    """
    if coarse_n is not None and coarse_n < dle.grid.n_cells:
        g = AxiGrid(dle.grid.xi0, coarse_n)
        dle = solve_distorted(dle.b_rot, dle.n_index, g, Cutoff(dle.solver.cutoff.xi_in, dle.solver.cutoff.xi_out),
                              rot_cutoff=dle.rot_cutoff_applied)
    solver = dle.solver
    m = multiplier(dle.theta_field.values, dle.n_index)
    star = m > 0
    idx = np.flatnonzero(star.ravel())
    k = idx.size
    N = dle.grid.n_cells
    src = np.zeros((N * N, k))
    src[idx, np.arange(k)] = (m * solver.chi).ravel()[idx]
    lu, edge = solver._factor
    rhs = -src
    # edge values: boundary matrix acts on support nodes of the raw source
    sup_idx = np.flatnonzero(solver.support.ravel())
    raw = np.zeros((N * N, k))
    raw[idx, np.arange(k)] = m.ravel()[idx]
    rhs[edge.ravel()] = solver.boundary_matrix @ raw[sup_idx]
    pot = lu.solve(rhs)
    pot = pot - pot[0:1, :]
    A = pot[idx, :]
    s = np.linalg.svd(np.eye(k) - A, compute_uv=False)
    return float(s.min())
