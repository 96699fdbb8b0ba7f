"""Pointwise algebra of the post-Newtonian system in scaled variables.

Everything here acts on arrays of node (or sample point) values together
with their first and second derivatives, so the same code serves grid
fields and analytic test data.  Scaled quantities:

* ``Theta`` the distorted Lane-Emden function, ``rho_N = Theta^n``,
  ``P_N = k Theta^(n+1)`` with ``k = (gamma-1)/gamma``;
* ``phi`` the Newtonian potential, ``Phi = phi - (b/4) varpi^2``;
* the unknowns ``w, Y, X, V`` and the metric functions

  ``F' = tau (Phi - tau w)``, ``K' = tau (-(b/4) varpi^2 + tau V)``,
  ``A' = -beta varpi^2 (1 + tau Y)``, ``Pi = varpi (1 + tau^2 X)``,

  with ``beta^2 = b tau / 2``.

Two evaluations are provided for every right-hand side.  The *expanded*
forms split a leading term from a remainder written with ``expm1`` style
primitives and are used by the solver.  The *direct* forms evaluate the
field equations literally and extract the same quantity by subtracting the
leading part and dividing by powers of ``tau``; they lose digits to
cancellation and serve only as an independent check of the expansions.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ..eos import EosParams, density_defect_over_tau, expm1_minus_linear, p_hat, rho_hat
from ..grid import Jet


@dataclass
class PointData:
    """Values and derivatives of all inputs at a set of points.

    Attributes
    ----------
    varpi : ndarray
    theta : ndarray
        Distorted Lane-Emden function.
    phi, w, Y, X : Jet
        ``over1`` must hold ``d1 / varpi`` (regular limit on the axis).
    V : ndarray
    tau, b : float
    eos : EosParams
    """

    varpi: np.ndarray
    theta: np.ndarray
    phi: Jet
    w: Jet
    Y: Jet
    X: Jet
    V: np.ndarray
    tau: float
    b: float
    eos: EosParams

    # background -----------------------------------------------------------
    @cached_property
    def n(self) -> float:
        return self.eos.n_index

    @cached_property
    def rhoN(self):
        return np.where(self.theta > 0, np.abs(self.theta) ** self.n, 0.0)

    @cached_property
    def PN(self):
        return self.eos.k_ratio * np.where(self.theta > 0, np.abs(self.theta) ** (self.n + 1), 0.0)

    @cached_property
    def m(self):
        return np.where(self.theta > 0, self.n * np.abs(self.theta) ** (self.n - 1), 0.0)

    @cached_property
    def Phi(self):
        return self.phi.v - 0.25 * self.b * self.varpi ** 2

    @cached_property
    def Phi1(self):
        return self.phi.d1 - 0.5 * self.b * self.varpi

    @cached_property
    def Phi1_over(self):
        return self.phi.over1 - 0.5 * self.b

    # perturbed quantities ---------------------------------------------------
    @cached_property
    def Phip1(self):
        return self.Phi1 - self.tau * self.w.d1

    @cached_property
    def Phip3(self):
        return self.phi.d3 - self.tau * self.w.d3

    @cached_property
    def Phip1_over(self):
        return self.Phi1_over - self.tau * self.w.over1

    @cached_property
    def Fp(self):
        """``F'``."""
        return self.tau * (self.Phi - self.tau * self.w.v)

    @cached_property
    def psi(self):
        """``(K' - F')/tau``."""
        return -self.phi.v + self.tau * (self.V + self.w.v)

    @cached_property
    def e2(self):
        """``exp(2 (K' - F')) - 1``."""
        return np.expm1(2 * self.tau * self.psi)

    @cached_property
    def uhat(self):
        return self.theta + self.tau * self.w.v

    @cached_property
    def rho(self):
        return rho_hat(self.uhat, self.tau, self.eos)

    @cached_property
    def P(self):
        return p_hat(self.rho, self.tau, self.eos)

    @cached_property
    def one_X(self):
        return 1.0 + self.tau ** 2 * self.X.v

    @cached_property
    def Y1(self):
        return 2 * self.Y.v + self.varpi * self.Y.d1

    @cached_property
    def Y3(self):
        return self.Y.d3

    @cached_property
    def X1(self):
        return self.X.v + self.varpi * self.X.d1

    @cached_property
    def Xstar(self):
        return 2 * self.X1 + self.tau ** 2 * (self.X1 ** 2 + (self.varpi * self.X.d3) ** 2)

    @cached_property
    def e4F(self):
        return np.exp(4 * self.Fp)


# ---------------------------------------------------------------------------
# w equation
# ---------------------------------------------------------------------------

def g_a(d: PointData):
    """Leading source of the w equation (without the frame-dragging term)."""
    lam1 = d.eos.lambda1_density
    return -4 * d.b * d.Phi - 2 * d.phi.v * d.rhoN + lam1 * d.rhoN * d.theta + 3 * d.PN


def frame_dragging_term(d: PointData, Y1=None):
    """Linear coupling ``-b Y1`` of the w source to the rotation shape."""
    return -d.b * (d.Y1 if Y1 is None else Y1)


def R_a(d: PointData):
    """Remainder of the w source; O(tau)."""
    t, b = d.tau, d.b
    X = d.X.v
    Fp = d.Fp
    e4 = d.e4F
    one = d.one_X
    E = e4 / one ** 2
    Em1 = np.expm1(4 * Fp) - e4 * t ** 2 * X * (2 + t ** 2 * X) / one ** 2
    curv = expm1_minus_linear(4 * Fp) / t - 4 * t * d.w.v - e4 * t * X * (2 + t ** 2 * X) / one ** 2
    Y1, Y3 = d.Y1, d.Y3
    out = -b * curv
    out = out - b * Em1 * Y1 - 0.25 * b * t * E * (Y1 ** 2 + (d.varpi * Y3) ** 2)
    out = out - t * (d.Phip1 * d.X.d1 + d.Phip3 * d.X.d3) / one
    out = out + density_defect_over_tau(d.theta, d.w.v, t, d.eos)
    out = out + d.e2 * (d.rho - d.rhoN) / t
    out = out + (expm1_minus_linear(2 * t * d.psi) / t + 2 * t * (d.V + d.w.v)) * d.rhoN
    out = out + 3 * d.e2 * d.P + 3 * (d.P - d.PN)
    return out


def source_a(d: PointData, Y1_fresh=None):
    """Full source of ``w = K[m w + S_a]``."""
    return g_a(d) + frame_dragging_term(d, Y1_fresh) + R_a(d)


# ---------------------------------------------------------------------------
# Y and X equations
# ---------------------------------------------------------------------------

def g_b(d: PointData):
    return 8 * d.Phi1_over


def R_b(d: PointData):
    t = d.tau
    one = d.one_X
    Y1, Y3 = d.Y1, d.Y3
    return (-8 * t * d.w.over1
            - t * d.X.over1 * (2 + t * Y1) / one
            + 4 * t * d.Phip1_over * Y1
            + 4 * t * d.Phip3 * Y3
            - t ** 2 * d.X.d3 * Y3 / one)


def source_b(d: PointData):
    """Source of ``Y = K^(5)[S_b]``."""
    return g_b(d) + R_b(d)


def g_c(d: PointData):
    return -4 * d.PN


def R_c(d: PointData):
    t = d.tau
    return -4 * (d.e2 * d.P + (d.P - d.PN) + t ** 2 * (1 + d.e2) * d.P * d.X.v)


def source_c(d: PointData):
    """Source of ``X = K^(4)[S_c]``."""
    return g_c(d) + R_c(d)


# ---------------------------------------------------------------------------
# gradient of V
# ---------------------------------------------------------------------------

def gradient_lead(d: PointData):
    """Leading parts of ``dV/dvarpi`` and ``dV/dz``."""
    vp = d.varpi
    X = d.X
    T1 = (X.d1 + 0.5 * vp * (X.d11 - X.d33) + vp * (d.Phi1 ** 2 - d.phi.d3 ** 2)
          - 2 * d.b * vp * d.Phi - 0.5 * d.b * vp * d.Y1)
    T3 = X.d3 + vp * X.d13 + 2 * vp * d.Phi1 * d.phi.d3 - 0.5 * d.b * vp ** 2 * d.Y3
    return T1, T3


def gradient(d: PointData):
    """``(dV/dvarpi, dV/dz)`` from the K' equations, stable form."""
    t, b, vp = d.tau, d.b, d.varpi
    X = d.X
    one = d.one_X
    X1, X3 = d.X1, X.d3
    Y1, Y3 = d.Y1, d.Y3
    e4 = d.e4F
    Qd = X.d1 + 0.5 * vp * (X.d11 - X.d33) + vp * one * (d.Phip1 ** 2 - d.Phip3 ** 2)
    Qe = X3 + vp * X.d13 + 2 * vp * one * d.Phip1 * d.Phip3
    AdmT = (np.expm1(4 * d.Fp) / t + e4 * (Y1 + 0.25 * t * (Y1 ** 2 - (vp * Y3) ** 2)) - t * X.v) / one
    Ad = 1 + t * AdmT
    Ae = e4 * (1 + 0.5 * t * Y1) / one
    P1 = 1 + t ** 2 * X1
    D = 1 + t ** 2 * d.Xstar
    T1 = (P1 * Qd + t ** 2 * vp * X3 * Qe - 0.5 * b * t ** 2 * vp ** 3 * X3 * Y3 * Ae
          + 0.5 * b * vp * (t * (d.Xstar - X1) - P1 * AdmT)) / D
    T3 = (-t ** 2 * vp * X3 * Qd + 0.5 * b * t * vp ** 2 * X3 * Ad + P1 * Qe
          - 0.5 * b * P1 * vp ** 2 * Y3 * Ae) / D
    return T1, T3


def gradient_remainders(d: PointData):
    T1, T3 = gradient(d)
    L1, L3 = gradient_lead(d)
    return T1 - L1, T3 - L3


def b2_factor(d: PointData):
    """``|grad Pi|^2``; must stay positive."""
    return 1 + d.tau ** 2 * d.Xstar


# ---------------------------------------------------------------------------
# direct evaluation of the field equations
# ---------------------------------------------------------------------------

@dataclass
class MetricJets:
    """Derivatives of ``F', A', Pi`` obtained from the input jets by the chain rule."""

    F: tuple
    A: tuple
    Pi: tuple

    @classmethod
    def from_data(cls, d: PointData) -> "MetricJets":
        t, b, vp = d.tau, d.b, d.varpi
        beta = np.sqrt(0.5 * b * t)
        w, Y, X, phi = d.w, d.Y, d.X, d.phi
        F = (t * (d.Phi - t * w.v),
             t * (d.Phi1 - t * w.d1),
             t * (phi.d3 - t * w.d3),
             t * (phi.d11 - 0.5 * b - t * w.d11),
             t * (phi.d33 - t * w.d33),
             t * (phi.d13 - t * w.d13))
        Z = 1 + t * Y.v
        A = (-beta * vp ** 2 * Z,
             -beta * (2 * vp * Z + t * vp ** 2 * Y.d1),
             -beta * t * vp ** 2 * Y.d3,
             -beta * (2 * Z + 4 * t * vp * Y.d1 + t * vp ** 2 * Y.d11),
             -beta * t * vp ** 2 * Y.d33,
             -beta * (2 * t * vp * Y.d3 + t * vp ** 2 * Y.d13))
        t2 = t * t
        Pi = (vp * (1 + t2 * X.v),
              1 + t2 * (X.v + vp * X.d1),
              t2 * vp * X.d3,
              t2 * (2 * X.d1 + vp * X.d11),
              t2 * vp * X.d33,
              t2 * (X.d3 + vp * X.d13))
        return cls(F, A, Pi)


def direct_residual_a(d: PointData, mj: MetricJets | None = None):
    """LHS - RHS of the F' equation."""
    mj = mj or MetricJets.from_data(d)
    F, A, Pi = mj.F, mj.A, mj.Pi
    t = d.tau
    lhs = (F[3] + F[4] + (F[1] * Pi[1] + F[2] * Pi[2]) / Pi[0]
           + np.exp(4 * F[0]) / (2 * Pi[0] ** 2) * (A[1] ** 2 + A[2] ** 2))
    Kp = t * (-0.25 * d.b * d.varpi ** 2 + t * d.V)
    rhs = np.exp(2 * (Kp - F[0])) * (t * d.rho + 3 * t * t * d.P)
    return lhs - rhs


def direct_R_a(d: PointData):
    """``R_a`` recovered from the literal F' equation."""
    w = d.w
    lap3w = w.d11 + w.over1 + w.d33
    S = -direct_residual_a(d) / d.tau ** 2 - lap3w - d.m * w.v
    return S - g_a(d) - frame_dragging_term(d)


def direct_R_b(d: PointData):
    """``R_b`` recovered from the literal A' equation (needs ``b > 0``, ``varpi > 0``)."""
    mj = MetricJets.from_data(d)
    F, A, Pi = mj.F, mj.A, mj.Pi
    e4 = np.exp(4 * F[0])
    div = (e4 * (4 * F[1] * A[1] / Pi[0] + A[3] / Pi[0] - A[1] * Pi[1] / Pi[0] ** 2)
           + e4 * (4 * F[2] * A[2] / Pi[0] + A[4] / Pi[0] - A[2] * Pi[2] / Pi[0] ** 2))
    t = d.tau
    beta = np.sqrt(0.5 * d.b * t)
    G = e4 / d.one_X
    Y = d.Y
    lap5 = Y.d11 + 3 * Y.over1 + Y.d33
    S = -div / (beta * G * t * d.varpi) - lap5
    return S - g_b(d)


def direct_R_c(d: PointData):
    """``R_c`` recovered from the literal Pi equation (``varpi > 0``)."""
    mj = MetricJets.from_data(d)
    Pi = mj.Pi
    t = d.tau
    X = d.X
    lap4 = X.d11 + 2 * X.over1 + X.d33
    lhs = Pi[3] + Pi[4] - 4 * t * t * (1 + d.e2) * d.P * Pi[0]
    S = lhs / (t * t * d.varpi) - lap4
    return S - g_c(d)


def direct_gradient(d: PointData):
    """``(dV/dvarpi, dV/dz)`` from the literal K' gradient equations."""
    mj = MetricJets.from_data(d)
    F, A, Pi = mj.F, mj.A, mj.Pi
    e4 = np.exp(4 * F[0])
    rhd = (0.5 * (Pi[3] - Pi[4]) + Pi[0] * (F[1] ** 2 - F[2] ** 2)
           - e4 / (4 * Pi[0]) * (A[1] ** 2 - A[2] ** 2))
    rhe = Pi[5] + 2 * Pi[0] * F[1] * F[2] - e4 / (2 * Pi[0]) * A[1] * A[2]
    den = Pi[1] ** 2 + Pi[2] ** 2
    k1 = (Pi[1] * rhd + Pi[2] * rhe) / den
    k3 = (-Pi[2] * rhd + Pi[1] * rhe) / den
    t = d.tau
    return k1 / t ** 2 + 0.5 * d.b * d.varpi / t, k3 / t ** 2
