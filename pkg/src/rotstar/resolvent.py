"""Solution operator of the linearized problem ``Q = K[m Q + g]``.

``K`` is the origin-subtracted potential and ``m = n (Theta v 0)^(n-1)``, so
``Q`` solves ``Lap Q + m Q + chi g = 0`` with ``Q(0, 0) = 0``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import ContractViolation, SolverError
from .grid import EVEN, ScalarField
from .lane_emden import DistortedLaneEmden, kernel_proxy, multiplier
from .potential import PotentialSolver

PROXY_THRESHOLD = 1e-3


def anderson_fixed_point(G, x0: np.ndarray, tol: float, max_iter: int = 200, depth: int = 6,
                         patience: int = 8, floor_factor: float = 100.0):
    """Anderson-accelerated iteration for ``x = G(x)``.

    Returns the iterate and the history of ``sup |G(x) - x|``.  Stops when
    that quantity falls below ``tol * max(1, sup |x|)``.  On large grids the
    residual can bottom out at roundoff slightly above ``tol``; when it has
    not improved for ``patience`` steps and the best value is within
    ``floor_factor`` of the target, the best iterate is returned.
    """
    x = x0.ravel().copy()
    shape = x0.shape
    gx = G(x.reshape(shape)).ravel()
    f = gx - x
    dX, dF = [], []
    history = []
    best, best_x, since = np.inf, x, 0
    for _ in range(max_iter):
        err = float(np.max(np.abs(f)))
        history.append(err)
        target = tol * max(1.0, float(np.max(np.abs(x))))
        if err <= target:
            return x.reshape(shape), history
        if err < best:
            best, best_x, since = err, x, 0
        else:
            since += 1
            if since >= patience and best <= floor_factor * target:
                return best_x.reshape(shape), history
        if dF:
            Fm = np.column_stack(dF)
            gamma = np.linalg.lstsq(Fm, f, rcond=None)[0]
            # differences of G(x) are dX + dF
            x_new = gx - (np.column_stack(dX) + Fm) @ gamma
        else:
            x_new = gx
        gx_new = G(x_new.reshape(shape)).ravel()
        f_new = gx_new - x_new
        dX.append(x_new - x)
        dF.append(f_new - f)
        if len(dX) > depth:
            dX.pop(0)
            dF.pop(0)
        x, gx, f = x_new, gx_new, f_new
    raise SolverError(f"fixed-point iteration stalled at residual {history[-1]:.3e}", history)


@dataclass
class ResolventContext:
    """Data shared by all applications of the resolvent.

    Parameters
    ----------
    dle : DistortedLaneEmden
    solver : PotentialSolver
        Three-dimensional solver (defaults to the one used for ``dle``).
    method : {'anderson', 'assembled'}
    tol : float
    check_proxy : bool
        Compute the kernel proxy and refuse to proceed below
        ``PROXY_THRESHOLD``.
    """

    dle: DistortedLaneEmden
    solver: PotentialSolver | None = None
    method: str = "anderson"
    tol: float = 1e-10
    check_proxy: bool = False

    def __post_init__(self):
        if self.solver is None:
            self.solver = self.dle.solver
        if self.solver.n_dim != 3 or self.solver.grid != self.dle.grid:
            raise ContractViolation("resolvent needs the 3-D solver on the grid of Theta")
        if self.method not in ("anderson", "assembled"):
            raise ContractViolation(f"unknown resolvent method {self.method!r}")
        if self.check_proxy:
            s = kernel_proxy(self.dle)
            if s < PROXY_THRESHOLD:
                raise SolverError(f"linearized operator nearly singular (sigma_min={s:.3e})", [s])
        self.last_history: list = []

    @cached_property
    def m(self) -> np.ndarray:
        return multiplier(self.dle.theta_field.values, self.dle.n_index)

    @cached_property
    def _assembled(self):
        """LU of ``L + chi m (I - e_O)`` with Dirichlet edge rows."""
        s = self.solver
        N = s.grid.n_cells
        cm = (s.chi * self.m).ravel()
        cm[s.edge_mask.ravel()] = 0.0
        M = s.matrix.tocsr()
        D = sp.diags(cm)
        col = sp.csr_matrix((-cm[cm != 0], (np.flatnonzero(cm), np.zeros(np.count_nonzero(cm), dtype=int))),
                            shape=(N * N, N * N))
        return splu((M + D + col).tocsc())

    def potential(self, values: np.ndarray) -> np.ndarray:
        f = self.solver.apply(values)
        return f - f[0, 0]


def _apply_anderson(g: np.ndarray, ctx: ResolventContext):
    m = ctx.m
    return anderson_fixed_point(lambda Q: ctx.potential(m * Q + g), np.zeros_like(g), ctx.tol)


def _apply_assembled(g: np.ndarray, ctx: ResolventContext, max_pass: int = 50):
    s = ctx.solver
    lu = ctx._assembled
    m = ctx.m
    edge = s.edge_mask
    rhs = -(s.chi * g)
    P = np.zeros_like(g)
    history = []
    for _ in range(max_pass):
        Q = P - P[0, 0]
        bvals = s.edge_values(m * Q + g)
        r = rhs.copy()
        r[edge] = bvals
        P_new = lu.solve(r.ravel()).reshape(g.shape)
        change = float(np.max(np.abs(P_new - P)))
        history.append(change)
        P = P_new
        if change <= ctx.tol * max(1.0, float(np.max(np.abs(P)))):
            return P - P[0, 0], history
    raise SolverError(f"boundary-data iteration stalled at change {history[-1]:.3e}", history)


def apply_resolvent(g: ScalarField, ctx: ResolventContext) -> ScalarField:
    """Return ``Q`` with ``Q = K[m Q + g]``.

    Raises
    ------
    SolverError
        When the iteration does not reach ``ctx.tol``.
    """
    if g.grid != ctx.solver.grid:
        raise ContractViolation("source and resolvent live on different grids")
    if g.parity != (EVEN, EVEN):
        raise ContractViolation("resolvent sources must be even-even")
    if ctx.method == "anderson":
        Q, hist = _apply_anderson(g.values, ctx)
    else:
        Q, hist = _apply_assembled(g.values, ctx)
    ctx.last_history = hist
    Q = Q - Q[0, 0]
    return ScalarField(g.grid, Q)


def resolvent_residual(Q: ScalarField, g: ScalarField, ctx: ResolventContext) -> float:
    """Sup over interior nodes of ``|Lap Q + m Q + chi g|``."""
    from .grid import axi_laplacian_values

    lap = axi_laplacian_values(Q.values, Q.grid, 3)
    res = lap + ctx.solver.chi * (ctx.m * Q.values + g.values)
    return float(np.max(np.abs(res[:-1, :-1])))
