"""Metric functions from the scaled corrections, and the frame change.

Scaled metric: lengths in units of ``a``; ``A`` is divided by ``a``;
``beta = Omega a / c``.  In the corotating frame

    ds^2 = e^{2F'} (c dt + A' dphi')^2 - e^{2(K'-F')} (dvarpi^2 + dz^2) - e^{-2F'} Pi^2 dphi'^2.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..errors import DegenerateMetric
from ..grid import AxiGrid, d1
from .solver import PnContext, PnState

X8_TOL = 1e-10


@dataclass
class MetricBundle:
    """Node values of the metric and the fluid variables.

    Attributes
    ----------
    grid : AxiGrid
    beta, tau : float
    Fp, Kp, Ap, Pi : ndarray
        Corotating ``F', K', A'`` and ``Pi``.
    u, rho, P : ndarray
        Scaled enthalpy ``u/u_O``, density ``rho/rho_O`` and pressure
        ``P/(rho_O u_O)``.
    F, K, A : ndarray or None
        Static-frame functions, filled by :func:`to_static_frame`.
    Pi_dev : ndarray or None
        ``Pi - varpi`` computed without cancellation, when available.
    """

    grid: AxiGrid
    beta: float
    tau: float
    Fp: np.ndarray
    Kp: np.ndarray
    Ap: np.ndarray
    Pi: np.ndarray
    u: np.ndarray
    rho: np.ndarray
    P: np.ndarray
    F: np.ndarray | None = None
    K: np.ndarray | None = None
    A: np.ndarray | None = None
    Pi_dev: np.ndarray | None = None

    @property
    def G_pot(self) -> np.ndarray:
        """Redshift potential of the fluid (equal to ``F'``)."""
        return self.Fp

    @property
    def eps(self) -> np.ndarray:
        """``8 pi G a^2 rho / c^2`` in scaled form."""
        return 2 * self.tau * self.rho

    @property
    def p(self) -> np.ndarray:
        """``8 pi G a^2 P / c^4`` in scaled form."""
        return 2 * self.tau ** 2 * self.P


def b1_expression(Fp, Ap, Pi, beta):
    """``e^{2F'}(1 - beta A')^2 - e^{-2F'} beta^2 Pi^2``."""
    return np.exp(2 * Fp) * (1 - beta * Ap) ** 2 - np.exp(-2 * Fp) * (beta * Pi) ** 2


def b2_expression(Pi, grid: AxiGrid):
    """``|grad Pi|^2`` by finite differences (Pi is odd in varpi, even in z)."""
    p1 = d1(Pi, grid.h, 0, -1)
    p3 = d1(Pi, grid.h, 1, 1)
    return p1 ** 2 + p3 ** 2


def assemble_metric(state: PnState, ctx: PnContext, check: bool = True) -> MetricBundle:
    """Corotating metric functions of a converged state.

    Raises
    ------
    DegenerateMetric
        When B1 or B2 fails on the grid.
    """
    from .solver import point_data

    d = point_data(state, ctx)
    g = ctx.grid
    t, b = ctx.tau, ctx.b
    beta = float(np.sqrt(0.5 * b * t))
    vp = g.varpi
    Fp = d.Fp
    Kp = t * (-0.25 * b * vp ** 2 + t * state.V.values)
    Ap = -beta * vp ** 2 * (1 + t * state.Y.values)
    Pi = vp * d.one_X
    mb = MetricBundle(g, beta, t, Fp, Kp, Ap, Pi, d.uhat, d.rho, d.P, Pi_dev=vp * t * t * state.X.values)
    if check:
        check_nondegenerate(mb)
    return mb


def check_nondegenerate(mb: MetricBundle):
    """Raise :class:`DegenerateMetric` when B1 or B2 fails."""
    b1 = b1_expression(mb.Fp, mb.Ap, mb.Pi, mb.beta)
    if np.min(b1) <= 0:
        raise DegenerateMetric(f"corotating norm factor not positive (min {np.min(b1):.3e})")
    b2 = b2_expression(mb.Pi, mb.grid)
    if np.min(b2) <= 0:
        raise DegenerateMetric(f"|grad Pi| vanishes (min {np.min(b2):.3e})")


def _frame_change(F, A, Pi, beta):
    """Static-frame ``(F, A)`` from corotating ``(F', A')`` (or back with ``-beta``)."""
    e2 = np.exp(2 * F)
    em2 = np.exp(-2 * F)
    one = 1 - beta * A
    e2new = e2 * one ** 2 - em2 * (beta * Pi) ** 2
    if np.min(e2new) <= 0:
        raise DegenerateMetric("frame change undefined: corotating norm factor not positive")
    Anew = (e2 * one * A + em2 * beta * Pi ** 2) / e2new
    return 0.5 * np.log(e2new), Anew


def to_static_frame(mb: MetricBundle) -> MetricBundle:
    """Fill ``F, K, A`` of the non-rotating frame and check the ``g_00``-type identity.

    ``(1 - beta A') e^{2F'} = (1 + beta A) e^{2F}`` must hold to ``1e-10``
    relative.
    """
    F, A = _frame_change(mb.Fp, mb.Ap, mb.Pi, mb.beta)
    K = F + mb.Kp - mb.Fp
    lhs = (1 - mb.beta * mb.Ap) * np.exp(2 * mb.Fp)
    rhs = (1 + mb.beta * A) * np.exp(2 * F)
    defect = float(np.max(np.abs(lhs - rhs) / np.abs(lhs)))
    if defect > X8_TOL:
        raise DegenerateMetric(f"frame identity violated by {defect:.3e}")
    return replace(mb, F=F, K=K, A=A)


def to_corotating_frame(F, K, A, Pi, beta):
    """Inverse of :func:`to_static_frame`: returns ``(F', K', A')``."""
    Fp, Ap = _frame_change(F, A, Pi, -beta)
    return Fp, K + Fp - F, Ap


def frame_identity_defect(mb: MetricBundle) -> float:
    lhs = (1 - mb.beta * mb.Ap) * np.exp(2 * mb.Fp)
    rhs = (1 + mb.beta * mb.A) * np.exp(2 * mb.F)
    return float(np.max(np.abs(lhs - rhs) / np.abs(lhs)))
