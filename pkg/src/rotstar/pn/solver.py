"""Nested fixed-point iteration for the post-Newtonian corrections.

The inner map takes ``V`` and returns ``(w, Y, X)`` by Picard iteration of

    Y = K5[S_b],   X = K4[S_c],   w = L[S_a(fresh Y)],

and the outer map rebuilds ``V`` by integrating the K' gradient along the
axis and then along ``varpi``.  All fields are scaled (see
:mod:`rotstar.pn.equations`).
"""
from __future__ import annotations

import logging
import time
import warnings
from dataclasses import asdict, dataclass, field
from functools import cached_property

import numpy as np

from ..eos import EosParams, StarParams, params_from_tau
from ..errors import ConfigError, DegenerateMetric, IterationDiverged
from ..grid import EVEN, ODD, AxiGrid, Jet, ScalarField, c_norm, holder_norm, quadrature_from_gradient
from ..lane_emden import B_MAX, DistortedLaneEmden, default_cutoff, default_grid, solve_distorted, solve_lane_emden
from ..potential import get_solver
from ..resolvent import ResolventContext, apply_resolvent
from . import equations as eq
from .background import Background, newtonian_background

log = logging.getLogger(__name__)

V_NORMALIZATIONS = ("axis", "origin")


@dataclass
class SolveConfig:
    """Inputs of a full solve (all dimensionless)."""

    gamma: float = 5.0 / 3.0
    b: float = 0.02
    tau: float = 1e-3
    grid_n: int = 129
    xi0_factor: float = 2.5
    alpha: float | None = None
    kappa: float | None = None
    tol_inner: float = 1e-10
    tol_outer: float = 1e-9
    max_iter_inner: int = 60
    max_iter_outer: int = 60
    damping: float = 1.0
    resolvent_method: str = "anderson"
    resolvent_tol: float = 1e-13
    dle_tol: float = 1e-12
    lambda_mode: str = "zero"
    lambda1: float = 0.0
    lambda2: float = 0.0
    v_normalization: str = "axis"
    A_poly: float = 1.0
    c_light: float = 1.0
    G_grav: float = 1.0

    def __post_init__(self):
        if not 0 <= self.b <= B_MAX:
            raise ConfigError(f"b={self.b} outside [0, {B_MAX}]: rotation must stay in the small-b regime")
        if not self.tau > 0:
            raise ConfigError("tau must be positive")
        if self.tau > 0.1:
            raise ConfigError(f"tau={self.tau} is outside the weak-field range (tau <= 0.1)")
        if self.grid_n < 33 or self.grid_n % 2 == 0:
            raise ConfigError("grid_n must be odd and at least 33")
        if self.xi0_factor < 2.5:
            raise ConfigError("xi0_factor below 2.5: the cutoff roll-off would not fit")
        if not 0 < self.damping <= 1:
            raise ConfigError("damping must lie in (0, 1]")
        if self.v_normalization not in V_NORMALIZATIONS:
            raise ConfigError(f"v_normalization must be one of {V_NORMALIZATIONS}")
        for name in ("tol_inner", "tol_outer", "resolvent_tol", "dle_tol"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        self.eos  # validates gamma and the correction profile

    @cached_property
    def eos(self) -> EosParams:
        return EosParams(gamma=self.gamma, A_poly=self.A_poly, c_light=self.c_light, G_grav=self.G_grav,
                         lambda_mode=self.lambda_mode, lambda1=self.lambda1, lambda2=self.lambda2)

    @property
    def n_index(self) -> float:
        return 1.0 / (self.gamma - 1.0)

    @property
    def alpha_value(self) -> float:
        if self.alpha is not None:
            return self.alpha
        return min(0.25, 0.5 * (self.n_index - 1.0))

    @property
    def kappa_value(self) -> float:
        if self.kappa is not None:
            return self.kappa
        return default_kappa(self.tau, self.alpha_value)

    def to_dict(self) -> dict:
        return {k: v for k, v in asdict(self).items()}


def default_kappa(tau: float, alpha: float) -> float:
    """Weight of the ``C^{2,alpha}`` part of the combined norm, ``2 tau^(1-alpha)``."""
    return 2.0 * tau ** (1.0 - alpha)


@dataclass
class PnState:
    """Scaled corrections ``w, Y, X, V`` (all even-even)."""

    w: ScalarField
    Y: ScalarField
    X: ScalarField
    V: ScalarField

    @classmethod
    def zeros(cls, grid: AxiGrid) -> "PnState":
        return cls(*(ScalarField.zeros(grid) for _ in range(4)))

    def __sub__(self, other: "PnState") -> "PnState":
        return PnState(self.w - other.w, self.Y - other.Y, self.X - other.X, self.V - other.V)

    def __mul__(self, s: float) -> "PnState":
        return PnState(self.w * s, self.Y * s, self.X * s, self.V * s)

    __rmul__ = __mul__


@dataclass
class PnContext:
    """Everything the iteration needs besides the unknowns."""

    bg: Background
    tau: float
    eos: EosParams
    alpha: float
    kappa: float
    resolvent: ResolventContext
    v_normalization: str = "axis"

    @property
    def grid(self) -> AxiGrid:
        return self.bg.grid

    @property
    def b(self) -> float:
        return self.bg.b

    @cached_property
    def solver4(self):
        return get_solver(self.grid, 4, self.bg.dle.solver.cutoff)

    @cached_property
    def solver5(self):
        return get_solver(self.grid, 5, self.bg.dle.solver.cutoff)

    @cached_property
    def norm_mask(self) -> np.ndarray:
        """Nodes with ``r <= Xi`` (the plateau of the potential cutoff)."""
        return self.grid.r <= self.bg.dle.solver.cutoff.xi_in + 1e-12

    @cached_property
    def params(self) -> StarParams:
        return params_from_tau(self.tau, self.b, self.eos)


def build_context(cfg: SolveConfig, dle: DistortedLaneEmden | None = None) -> PnContext:
    """Solve the Newtonian problem and set up the operators."""
    eos = cfg.eos
    if dle is None:
        le = solve_lane_emden(cfg.n_index)
        grid = default_grid(le.xi1, cfg.grid_n, cfg.xi0_factor)
        dle = solve_distorted(cfg.b, cfg.n_index, grid=grid, cutoff=default_cutoff(le.xi1, grid), tol=cfg.dle_tol)
    bg = newtonian_background(dle, eos)
    rctx = ResolventContext(dle, method=cfg.resolvent_method, tol=cfg.resolvent_tol)
    return PnContext(bg, cfg.tau, eos, cfg.alpha_value, cfg.kappa_value, rctx, cfg.v_normalization)


# ---------------------------------------------------------------------------
# pointwise data on the grid
# ---------------------------------------------------------------------------

def point_data(state: PnState, ctx: PnContext) -> eq.PointData:
    g = ctx.grid
    return eq.PointData(
        varpi=g.varpi, theta=ctx.bg.theta, phi=ctx.bg.phi_jet,
        w=Jet.of(state.w.values, g), Y=Jet.of(state.Y.values, g), X=Jet.of(state.X.values, g),
        V=state.V.values, tau=ctx.tau, b=ctx.b, eos=ctx.eos)


def compute_sources(state: PnState, ctx: PnContext):
    """Sources ``(S_a, S_b, S_c)`` of the three integral equations (``S_a`` with the current ``Y``)."""
    d = point_data(state, ctx)
    _check_range(d)
    return eq.source_a(d), eq.source_b(d), eq.source_c(d)


def _check_range(d: eq.PointData):
    if not np.all(np.isfinite(d.rho)) or not np.all(np.isfinite(d.Fp)):
        raise IterationDiverged("non-finite density or potential during the iteration", [])


# ---------------------------------------------------------------------------
# norms
# ---------------------------------------------------------------------------

def norms(state: PnState, alpha: float, kappa: float, mask=None):
    """``(N, N*, N + kappa N*)`` of ``(w, Y, X)``.

    ``N`` is the largest discrete ``C^1`` norm, ``N*`` the largest discrete
    ``C^{2,alpha}`` norm, both restricted to ``mask``.
    """
    fields = (state.w, state.Y, state.X)
    n1 = max(c_norm(f, 1, mask) for f in fields)
    n2 = max(holder_norm(f, 2, alpha, mask) for f in fields)
    return n1, n2, n1 + kappa * n2


def v_norm(V: ScalarField, alpha: float, kappa: float, mask=None) -> float:
    """Combined norm of a single field, used for the outer iteration."""
    return c_norm(V, 1, mask) + kappa * holder_norm(V, 2, alpha, mask)


# ---------------------------------------------------------------------------
# inner iteration
# ---------------------------------------------------------------------------

@dataclass
class InnerResult:
    state: PnState
    iterations: int
    history: list
    ratios: list


def inner_step(state: PnState, ctx: PnContext) -> PnState:
    """One sweep of the inner map; ``Y`` is refreshed before it enters the w source."""
    g = ctx.grid
    d = point_data(state, ctx)
    _check_range(d)
    Y_new = ctx.solver5.apply(eq.source_b(d))
    X_new = ctx.solver4.apply(eq.source_c(d))
    Yj = Jet.of(Y_new, g)
    Y1_fresh = 2 * Yj.v + g.varpi * Yj.d1
    S_a = eq.source_a(d, Y1_fresh)
    w_new = apply_resolvent(ScalarField(g, S_a), ctx.resolvent)
    return PnState(w_new, ScalarField(g, Y_new), ScalarField(g, X_new), state.V)


def inner_solve(V: ScalarField, ctx: PnContext, tol: float = 1e-10, max_iter: int = 60,
                damping: float = 1.0, start: PnState | None = None) -> InnerResult:
    """Fixed point ``(w, Y, X)`` of the inner map at fixed ``V``.

    Raises
    ------
    IterationDiverged
        When the combined-norm update does not fall below ``tol``.
    """
    g = ctx.grid
    state = start if start is not None else PnState.zeros(g)
    state = PnState(state.w, state.Y, state.X, V)
    history, ratios = [], []
    for it in range(1, max_iter + 1):
        new = inner_step(state, ctx)
        if damping != 1.0:
            new = PnState(*(o + damping * (n - o) for o, n in
                            zip((state.w, state.Y, state.X), (new.w, new.Y, new.X))), V)
        diff = norms(new - state, ctx.alpha, ctx.kappa, ctx.norm_mask)[2]
        if history and history[-1] > 0:
            ratios.append(diff / history[-1])
        history.append(diff)
        state = new
        if not np.isfinite(diff) or (it > 3 and diff > 1e3 * history[0]):
            raise IterationDiverged(f"inner iteration diverged at step {it}", history)
        if diff < tol:
            return InnerResult(state, it, history, ratios)
    raise IterationDiverged(f"inner iteration did not reach {tol:g} in {max_iter} steps", history)


# ---------------------------------------------------------------------------
# outer iteration
# ---------------------------------------------------------------------------

def k_prime_gradient(state: PnState, ctx: PnContext):
    """``(dV/dvarpi, dV/dz)`` as fields of parity (odd, even) and (even, odd).

    Raises
    ------
    DegenerateMetric
        When ``|grad Pi|`` vanishes somewhere.
    """
    d = point_data(state, ctx)
    b2 = eq.b2_factor(d)
    if np.min(b2) <= 0:
        i, j = np.unravel_index(int(np.argmin(b2)), b2.shape)
        raise DegenerateMetric(f"|grad Pi| vanishes near node ({i}, {j})")
    T1, T3 = eq.gradient(d)
    g = ctx.grid
    return ScalarField(g, T1, (ODD, EVEN)), ScalarField(g, T3, (EVEN, ODD))


def v_offset(state: PnState, ctx: PnContext) -> float:
    """Value of ``V`` at the origin.

    ``'origin'`` pins ``V(0, 0) = 0``.  ``'axis'`` chooses the value that makes
    ``K' = log(dPi/dvarpi)`` on the axis (no conical defect); the gradient
    equations keep that difference constant along the axis, so fixing it at
    one point fixes it everywhere.
    """
    if ctx.v_normalization == "origin":
        return 0.0
    t2 = ctx.tau ** 2
    return float(np.log1p(t2 * state.X.values[0, 0]) / t2)


def outer_map(state: PnState, ctx: PnContext) -> ScalarField:
    T1, T3 = k_prime_gradient(state, ctx)
    V = quadrature_from_gradient(T1, T3)
    return V + v_offset(state, ctx)


def path_defect(state: PnState, ctx: PnContext, mask=None) -> float:
    """Largest gap between the two quadrature paths of the K' gradient."""
    T1, T3 = k_prime_gradient(state, ctx)
    a = quadrature_from_gradient(T1, T3, "canonical").values
    b = quadrature_from_gradient(T1, T3, "transposed").values
    diff = np.abs(a - b)
    return float(np.max(diff if mask is None else diff[mask]))


@dataclass
class SolveReport:
    """Diagnostics of :func:`outer_solve` (JSON-serialisable via :meth:`to_dict`)."""

    config: dict
    inner_iterations: list = field(default_factory=list)
    inner_ratios: list = field(default_factory=list)
    inner_histories: list = field(default_factory=list)
    outer_iterations: int = 0
    outer_history: list = field(default_factory=list)
    outer_ratios: list = field(default_factory=list)
    norm_history: list = field(default_factory=list)
    norms: dict = field(default_factory=dict)
    fixed_point_residual: float = float("nan")
    path_defect: float = float("nan")
    support_confined: bool = True
    dle_iterations: int = 0
    timings: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    @property
    def inner_ratio(self) -> float:
        vals = [contraction_estimate(h) for h in self.inner_histories]
        vals = [v for v in vals if np.isfinite(v)]
        return float(max(vals)) if vals else float("nan")

    @property
    def outer_ratio(self) -> float:
        return contraction_estimate(self.outer_history)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["inner_ratio"] = self.inner_ratio
        out["outer_ratio"] = self.outer_ratio
        return out


def contraction_estimate(history, floor: float = 1e-8) -> float:
    """Largest ratio of successive update sizes in ``history``.

    Ratios whose numerator is below ``floor`` times the first update sit at
    the roundoff level and are skipped; the first ratio is always kept.
    ``nan`` when fewer than two updates were recorded.
    """
    h = np.asarray(history, dtype=float)
    if h.size < 2 or not h[0] > 0:
        return float("nan")
    keep = [0] + [i for i in range(1, h.size - 1) if h[i + 1] >= floor * h[0] and h[i] > 0]
    return float(max(h[i + 1] / h[i] for i in keep))


def outer_solve(cfg: SolveConfig, ctx: PnContext | None = None, record_norms: bool = True):
    """Solve the full system.

    Returns
    -------
    state : PnState
    report : SolveReport
    ctx : PnContext

    Raises
    ------
    IterationDiverged
        From the inner level, or when the outer update stalls.  The partial
        report is attached as ``exc.report``.
    """
    t0 = time.perf_counter()
    if ctx is None:
        ctx = build_context(cfg)
    report = SolveReport(cfg.to_dict(), dle_iterations=ctx.bg.dle.iterations)
    report.timings["setup"] = time.perf_counter() - t0
    g = ctx.grid
    mask = ctx.norm_mask
    V = ScalarField.zeros(g)
    state = PnState.zeros(g)
    t1 = time.perf_counter()
    prev_norm = None
    try:
        for it in range(1, cfg.max_iter_outer + 1):
            inner = inner_solve(V, ctx, cfg.tol_inner, cfg.max_iter_inner, cfg.damping, start=state)
            state = inner.state
            report.inner_iterations.append(inner.iterations)
            report.inner_ratios.append(inner.ratios[1:] if len(inner.ratios) > 1 else inner.ratios)
            report.inner_histories.append(inner.history)
            if record_norms:
                nrm = norms(state, ctx.alpha, ctx.kappa, mask)
                report.norm_history.append(list(nrm))
                if prev_norm is not None and it > 2 and nrm[2] > prev_norm * (1 + 1e-3):
                    msg = f"combined norm grew from {prev_norm:.4g} to {nrm[2]:.4g} at outer step {it}"
                    report.warnings.append(msg)
                    warnings.warn(msg, RuntimeWarning, stacklevel=2)
                prev_norm = nrm[2]
            V_new = outer_map(state, ctx)
            if cfg.damping != 1.0:
                V_new = V + cfg.damping * (V_new - V)
            diff = v_norm(V_new - V, ctx.alpha, ctx.kappa, mask)
            if report.outer_history and report.outer_history[-1] > 0:
                report.outer_ratios.append(diff / report.outer_history[-1])
            report.outer_history.append(diff)
            V = V_new
            state = PnState(state.w, state.Y, state.X, V)
            log.info("outer step %d: update %.3e (inner %d steps)", it, diff, inner.iterations)
            if not np.isfinite(diff) or (it > 3 and diff > 1e3 * report.outer_history[0]):
                raise IterationDiverged(f"outer iteration diverged at step {it}", report.outer_history)
            if diff < cfg.tol_outer:
                break
        else:
            raise IterationDiverged(
                f"outer iteration did not reach {cfg.tol_outer:g} in {cfg.max_iter_outer} steps",
                report.outer_history)
    except IterationDiverged as exc:
        exc.report = report
        raise
    # final consistency: refresh (w, Y, X) for the last V
    inner = inner_solve(V, ctx, cfg.tol_inner, cfg.max_iter_inner, cfg.damping, start=state)
    state = inner.state
    report.outer_iterations = it
    report.timings["iterate"] = time.perf_counter() - t1
    report.fixed_point_residual = float(np.max(np.abs(outer_map(state, ctx).values - V.values)[mask]))
    report.path_defect = path_defect(state, ctx, mask)
    n1, n2, nn = norms(state, ctx.alpha, ctx.kappa, mask)
    report.norms = {"N": n1, "N_star": n2, "N_combined": nn, "kappa": ctx.kappa, "alpha": ctx.alpha,
                    "V": v_norm(V, ctx.alpha, ctx.kappa, mask),
                    "sup_w": state.w.sup(mask), "sup_Y": state.Y.sup(mask), "sup_X": state.X.sup(mask),
                    "sup_V": state.V.sup(mask)}
    report.support_confined = support_confined(state, ctx)
    if not report.support_confined:
        msg = "enthalpy is positive beyond 2 xi1"
        report.warnings.append(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    report.timings["total"] = time.perf_counter() - t0
    return state, report, ctx


def support_confined(state: PnState, ctx: PnContext) -> bool:
    """``u <= 0`` on ``r >= 2 xi1``."""
    u = ctx.bg.theta + ctx.tau * state.w.values
    far = ctx.grid.r >= 2 * ctx.bg.dle.xi1
    return bool(np.all(u[far] <= 0))
