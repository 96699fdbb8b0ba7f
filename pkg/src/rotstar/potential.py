"""Newtonian potential operators of the axisymmetric lifts to 3, 4 and 5 dimensions.

``K^(n)[g]`` is the Newtonian potential ``(1/S_n) int g chi / |x - y|^(n-2) dy``
of the ``n``-dimensional axisymmetric lift of ``g`` with the source cut off
by a smooth radial function ``chi``.  It is computed as a finite-difference
Dirichlet problem on the quarter-plane grid; the Dirichlet data on the outer
edges comes from the integral itself, reduced to the meridional plane with
closed-form ring kernels (the edges are away from the source support, so
these integrals are regular).
"""
from __future__ import annotations

import threading
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from numpy.polynomial.legendre import leggauss
from scipy.sparse.linalg import splu
from scipy.special import ellipe, ellipk, ellipkm1

from .errors import ContractViolation
from .grid import EVEN, AxiGrid, ScalarField, axi_laplacian_values

#: surface measure factors ``(n-2) |S^(n-1)|``
S_N = {3: 4.0 * np.pi, 4: 4.0 * np.pi ** 2, 5: 8.0 * np.pi ** 2}


# ---------------------------------------------------------------------------
# cutoff
# ---------------------------------------------------------------------------

def _sigma(t):
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        return np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)


@dataclass(frozen=True)
class Cutoff:
    """Smooth radial cutoff, 1 on ``[0, xi_in]`` and 0 beyond ``xi_out``."""

    xi_in: float
    xi_out: float

    def __post_init__(self):
        if not 0 < self.xi_in < self.xi_out:
            raise ContractViolation("cutoff needs 0 < xi_in < xi_out")

    @classmethod
    def for_domain(cls, xi_in: float, xi0: float) -> "Cutoff":
        """Roll-off from ``xi_in`` to the midpoint ``(xi_in + xi0)/2``."""
        return cls(xi_in, 0.5 * (xi_in + xi0))

    def __call__(self, eta):
        t = (self.xi_out - np.asarray(eta, dtype=float)) / (self.xi_out - self.xi_in)
        a, b = _sigma(t), _sigma(1.0 - t)
        return np.where(t >= 1, 1.0, np.where(t <= 0, 0.0, a / np.where(a + b > 0, a + b, 1.0)))


# ---------------------------------------------------------------------------
# ring kernels
# ---------------------------------------------------------------------------

_GL48_X, _GL48_W = leggauss(48)
_PHI48 = 0.5 * np.pi * (_GL48_X + 1.0)
_WPHI48 = 0.5 * np.pi * _GL48_W


def ring_kernel(n_dim: int, varpi, z, varpi_s, z_s):
    """Angular integral of ``|x - y|^(2-n)`` over the orbit of a source point.

    For a field point at ``(varpi, z)`` and a source point ``(varpi_s, z_s)``
    this integrates over the ``(n-2)``-sphere of the source's rotations.
    Closed forms: complete elliptic integrals for ``n = 3, 5`` and a
    logarithm for ``n = 4``.
    """
    varpi, z, varpi_s, z_s = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (varpi, z, varpi_s, z_s)))
    d2 = (varpi - varpi_s) ** 2 + (z - z_s) ** 2
    A = varpi ** 2 + varpi_s ** 2 + (z - z_s) ** 2
    B = 2.0 * varpi * varpi_s
    ApB = A + B
    if n_dim == 3:
        m1 = d2 / ApB
        return 4.0 * ellipkm1(m1) / np.sqrt(ApB)
    if n_dim == 4:
        AmB = d2
        x = 2.0 * B / AmB
        small = x < 1e-8
        xs = np.where(small, 1.0, x)
        ratio = np.where(small, 1.0 - 0.5 * x, np.log1p(xs) / xs)
        return 2.0 * np.pi * 2.0 / AmB * ratio
    if n_dim == 5:
        out = np.empty_like(A)
        big = B >= 0.2 * A
        if np.any(big):
            Ab, Bb, Sb = A[big], B[big], ApB[big]
            m = 2.0 * Bb / Sb
            K = ellipk(m)
            E = ellipe(m)
            out[big] = 4.0 / Bb ** 2 * (Ab * K / np.sqrt(Sb) - np.sqrt(Sb) * E)
        if np.any(~big):
            As, Bs = A[~big], B[~big]
            c = np.cos(_PHI48)
            s2 = np.sin(_PHI48) ** 2
            vals = s2 * (As[..., None] - Bs[..., None] * c) ** -1.5
            out[~big] = vals @ _WPHI48
        return 4.0 * np.pi * out
    raise ContractViolation("n_dim must be 3, 4 or 5")


def ring_kernel_quadrature(n_dim: int, varpi, z, varpi_s, z_s, n_points: int = 64, tol: float = 1e-12, max_points: int = 4096):
    """Reference evaluation of :func:`ring_kernel` by Gauss-Legendre doubling.

    The angular integral is taken with ``n_points`` nodes, doubled until two
    successive values agree to ``tol`` relative.
    """
    A = varpi ** 2 + varpi_s ** 2 + (z - z_s) ** 2
    B = 2.0 * varpi * varpi_s
    if n_dim == 3:
        integrand, span, factor = (lambda c, s: (A - B * c) ** -0.5), np.pi, 2.0
    elif n_dim == 4:
        integrand, span, factor = (lambda c, s: s / (A - B * c)), np.pi, 2.0 * np.pi
    elif n_dim == 5:
        integrand, span, factor = (lambda c, s: s * s * (A - B * c) ** -1.5), np.pi, 4.0 * np.pi
    else:
        raise ContractViolation("n_dim must be 3, 4 or 5")
    prev = None
    npts = n_points
    while True:
        x, w = leggauss(npts)
        phi = 0.5 * span * (x + 1.0)
        val = factor * 0.5 * span * np.sum(w * integrand(np.cos(phi), np.sin(phi)))
        if prev is not None and abs(val - prev) <= tol * abs(val):
            return float(val)
        if npts >= max_points:
            return float(val)
        prev = val
        npts *= 2


def axis_weights(grid: AxiGrid, n_dim: int) -> np.ndarray:
    """Quadrature weights in ``varpi'`` for ``int_0^inf varpi'^(n-2) E dvarpi'``.

    ``E`` is even in ``varpi'`` and vanishes near the outer edge.  The
    trapezoid rule is completed by Euler-Maclaurin end corrections at the
    axis, which makes the rule accurate to ``O(h^8)`` for smooth ``E``.
    """
    h = grid.h
    x = grid.x
    w = h * x ** (n_dim - 2)
    w[0] = 0.0
    if n_dim == 3:
        w[0] += h * h * (1 / 12 + 1 / 120 + 1 / 1008)
        w[1] += h * h * (-1 / 120 - 1 / 756)
        w[2] += h * h / 3024
    elif n_dim == 5:
        w[0] += h ** 4 * (-1 / 120 - 1 / 252)
        w[1] += h ** 4 / 252
    return w


# ---------------------------------------------------------------------------
# solver
# ---------------------------------------------------------------------------

class PotentialSolver:
    """Finite-difference realization of ``K^(n)`` on a grid.

    Parameters
    ----------
    grid : AxiGrid
    n_dim : {3, 4, 5}
    cutoff : Cutoff
        Source cutoff; must vanish a few cells before the outer edges.

    Notes
    -----
    The interior operator is a finite-volume form of
    ``varpi^(2-n) d/dvarpi (varpi^(n-2) d/dvarpi) + d^2/dz^2`` (exact on
    even quadratics) with the axis row ``2 (n-1) (f_1 - f_0)/h^2`` and an
    even ghost node at ``z = 0``.  The
    LU factorization and the boundary quadrature matrix are built lazily and
    shared by all calls.
    """

    def __init__(self, grid: AxiGrid, n_dim: int, cutoff: Cutoff):
        if n_dim not in (3, 4, 5):
            raise ContractViolation("n_dim must be 3, 4 or 5")
        if cutoff.xi_out > grid.xi0 - 3 * grid.h:
            raise ContractViolation(
                "source cutoff reaches the outer edges of the grid: need xi_out <= xi0 - 3h")
        self.grid = grid
        self.n_dim = n_dim
        self.cutoff = cutoff
        self._lock = threading.Lock()

    @cached_property
    def chi(self) -> np.ndarray:
        return self.cutoff(self.grid.r)

    @cached_property
    def support(self) -> np.ndarray:
        return self.chi > 0

    # operator assembly ---------------------------------------------------
    def _operator(self):
        """Sparse matrix over all nodes (Dirichlet rows on the outer edges)."""
        g = self.grid
        n = g.n_cells
        h2 = g.h ** 2
        p = self.n_dim - 2
        x = g.x
        idx = np.arange(n * n).reshape(n, n)
        rows, cols, vals = [], [], []

        def add(r, c, v):
            rows.append(r.ravel())
            cols.append(c.ravel())
            vals.append(np.broadcast_to(v, r.shape).ravel())

        I = np.arange(n - 1)[:, None] * np.ones((1, n - 1), dtype=int)
        J = np.ones((n - 1, 1), dtype=int) * np.arange(n - 1)[None, :]
        # varpi part
        axis = I == 0
        xi = x[I]
        # finite-volume weights: exact on even quadratics next to the axis
        vol = ((xi + 0.5 * g.h) ** (p + 1) - np.abs(xi - 0.5 * g.h) ** (p + 1)) / ((p + 1) * g.h)
        vol = np.where(axis, 1.0, vol)
        wp = np.where(axis, 0.0, (xi + 0.5 * g.h) ** p / vol) / h2
        wm = np.where(axis, 0.0, np.abs(xi - 0.5 * g.h) ** p / vol) / h2
        wp = np.where(axis, 2.0 * (p + 1) / h2, wp)
        add(idx[I, J], idx[I + 1, J], wp)
        add(idx[I[~axis], J[~axis]], idx[I[~axis] - 1, J[~axis]], wm[~axis])
        diag = -(wp + wm)
        # z part with the even ghost node on the equator
        eq = J == 0
        add(idx[I, J], idx[I, J + 1], np.where(eq, 2.0, 1.0) / h2)
        add(idx[I[~eq], J[~eq]], idx[I[~eq], J[~eq] - 1], np.full((~eq).sum(), 1.0 / h2))
        diag = diag - 2.0 / h2
        add(idx[I, J], idx[I, J], diag)
        # Dirichlet rows
        edge = np.zeros((n, n), dtype=bool)
        edge[-1, :] = True
        edge[:, -1] = True
        e = idx[edge]
        add(e, e, np.ones(e.size))
        M = sp.csc_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n * n, n * n))
        return M, edge

    @cached_property
    def _factor(self):
        M, edge = self._operator()
        return splu(M.tocsc()), edge

    @cached_property
    def matrix(self):
        """The assembled sparse operator (Dirichlet identity rows on the edges)."""
        return self._operator()[0]

    @cached_property
    def edge_mask(self) -> np.ndarray:
        return self._operator()[1]

    @cached_property
    def boundary_matrix(self) -> np.ndarray:
        """Dense map from source values on the cutoff support to edge values."""
        g = self.grid
        edge = self.edge_mask
        ev, ez = g.varpi[edge], g.z[edge]
        sv, sz = g.varpi[self.support], g.z[self.support]
        wv = axis_weights(g, self.n_dim)
        wz = np.full(g.n_cells, g.h)
        wz[0] *= 0.5
        iv, iz = np.nonzero(self.support)
        weights = wv[iv] * wz[iz] * self.chi[self.support] / S_N[self.n_dim]
        out = np.empty((ev.size, sv.size))
        chunk = max(1, 2_000_000 // max(sv.size, 1))
        for s in range(0, ev.size, chunk):
            fv = ev[s:s + chunk, None]
            fz = ez[s:s + chunk, None]
            k = ring_kernel(self.n_dim, fv, fz, sv[None, :], sz[None, :])
            k = k + ring_kernel(self.n_dim, fv, fz, sv[None, :], -sz[None, :])
            out[s:s + chunk] = k * weights[None, :]
        return out

    # application ---------------------------------------------------------
    def edge_values(self, g_values: np.ndarray) -> np.ndarray:
        """Potential on the outer edges by direct quadrature."""
        return self.boundary_matrix @ g_values[self.support]

    def solve_with_edges(self, source: np.ndarray, edge_values: np.ndarray) -> np.ndarray:
        """Solve ``Lap f = -source`` with prescribed edge values."""
        lu, edge = self._factor
        rhs = -np.asarray(source, dtype=float).copy()
        rhs[edge] = edge_values
        return lu.solve(rhs.ravel()).reshape(self.grid.shape)

    def apply(self, g_values: np.ndarray) -> np.ndarray:
        """``K^(n)`` applied to node values (even-even source)."""
        g_values = np.asarray(g_values, dtype=float)
        with self._lock:
            self._factor
            self.boundary_matrix
        src = g_values * self.chi
        return self.solve_with_edges(src, self.edge_values(g_values))


_SOLVERS: dict = {}
_SOLVERS_LOCK = threading.Lock()


def get_solver(grid: AxiGrid, n_dim: int, cutoff: Cutoff) -> PotentialSolver:
    """Shared solver instance per ``(grid, n_dim, cutoff)``."""
    key = (grid, n_dim, cutoff)
    with _SOLVERS_LOCK:
        s = _SOLVERS.get(key)
        if s is None:
            s = _SOLVERS[key] = PotentialSolver(grid, n_dim, cutoff)
        return s


def _check_source(g: ScalarField, solver: PotentialSolver):
    if g.grid != solver.grid:
        raise ContractViolation("source and solver live on different grids")
    if g.parity != (EVEN, EVEN):
        raise ContractViolation("potential sources must be even in varpi and z")


def newtonian_potential(g: ScalarField, solver: PotentialSolver) -> ScalarField:
    """``K^(n)[g]``: the cut-off Newtonian potential of the axisymmetric lift of ``g``.

    Satisfies ``axi_laplacian(f, n) + chi g = 0`` up to discretization error.
    """
    _check_source(g, solver)
    return ScalarField(g.grid, solver.apply(g.values))


def origin_subtracted_potential(g: ScalarField, solver: PotentialSolver) -> ScalarField:
    """``K[g] = K^(3)[g] - K^(3)[g](0, 0)``."""
    if solver.n_dim != 3:
        raise ContractViolation("the origin-subtracted operator is three-dimensional")
    _check_source(g, solver)
    f = solver.apply(g.values)
    return ScalarField(g.grid, f - f[0, 0])


def poisson_residual(f: ScalarField, g: ScalarField, n_dim: int, cutoff: Cutoff) -> float:
    """Sup over the interior nodes of ``|axi_laplacian(f, n) + chi g|``."""
    grid = f.grid
    if g.grid != grid:
        raise ContractViolation("fields live on different grids")
    lap = axi_laplacian_values(f.values, grid, n_dim)
    res = lap + cutoff(grid.r) * g.values
    return float(np.max(np.abs(res[:-1, :-1])))
