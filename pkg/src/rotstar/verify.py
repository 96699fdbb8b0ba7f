"""Independent checks of a computed metric.

Scaled conventions (lengths in units of ``a``):

* coordinates ``x^0 = c t / a``, ``x^1 = varpi``, ``x^2 = phi``, ``x^3 = z``;
* Lewis form ``ds^2 = f dx0^2 - 2 k dx0 dphi - l dphi^2 - e^m (dvarpi^2 + dz^2)``;
* the field equations read ``R_mn = T_mn`` with the trace-reversed stress
  scaled by ``8 pi G a^2 / c^4``, so ``c^2 rho -> eps = 2 tau rho`` and
  ``P -> p = 2 tau^2 P`` (``rho, P`` in units of ``rho_O`` and ``rho_O u_O``).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.integrate import solve_ivp

from .eos import EosParams, p_hat, rho_hat
from .errors import ContractViolation, DataError, DomainError
from .grid import EVEN, ODD, AxiGrid, ScalarField, d1, d2, quadrature_from_gradient

IDENTITY_TOL = 1e-12
COMPONENTS = ("00", "02", "22", "11", "33", "13")


# ---------------------------------------------------------------------------
# finite-difference jets with parity
# ---------------------------------------------------------------------------

@dataclass
class FieldJet:
    """Value and derivatives through order two (``d13`` mixed)."""

    v: np.ndarray
    d1: np.ndarray
    d3: np.ndarray
    d11: np.ndarray
    d33: np.ndarray
    d13: np.ndarray

    @classmethod
    def of(cls, values, grid: AxiGrid, parity=(EVEN, EVEN)) -> "FieldJet":
        h = grid.h
        pv, pz = parity
        f3 = d1(values, h, 1, pz)
        return cls(values, d1(values, h, 0, pv), f3, d2(values, h, 0, pv), d2(values, h, 1, pz),
                   d1(f3, h, 0, pv))

    @classmethod
    def of_pi(cls, Pi, grid: AxiGrid, dev=None) -> "FieldJet":
        """Jet of ``Pi = varpi + dev`` with the ``varpi`` part differentiated exactly.

        Differencing ``Pi`` itself hits the roundoff floor ``eps |Pi| / h^2``
        long before the small deviation is resolved.
        """
        dev = Pi - grid.varpi if dev is None else dev
        j = cls.of(dev, grid, (ODD, EVEN))
        return cls(grid.varpi + dev, 1.0 + j.d1, j.d3, j.d11, j.d33, j.d13)


# ---------------------------------------------------------------------------
# Lewis form
# ---------------------------------------------------------------------------

@dataclass
class LewisFields:
    """Lewis-form metric functions on a grid (static and corotating ``f, k``)."""

    grid: AxiGrid
    beta: float
    f: np.ndarray
    k: np.ndarray
    l: np.ndarray
    m: np.ndarray
    Pi: np.ndarray
    fp: np.ndarray
    kp: np.ndarray

    @cached_property
    def jets(self) -> dict:
        g = self.grid
        return {"f": FieldJet.of(self.f, g), "k": FieldJet.of(self.k, g), "l": FieldJet.of(self.l, g),
                "m": FieldJet.of(self.m, g), "Pi": FieldJet.of(self.Pi, g, (ODD, EVEN))}


def lewis_arrays(F, K, A, Pi):
    """``(f, k, l, m)`` from the Lanczos-type functions."""
    e2 = np.exp(2 * F)
    f = e2
    k = -e2 * A
    l = -e2 * A ** 2 + np.exp(-2 * F) * Pi ** 2
    m = 2 * (K - F)
    return f, k, l, m


def lewis_fields(mb, check: bool = True) -> LewisFields:
    """Lewis form of a metric bundle with the static frame filled in.

    Raises
    ------
    DataError
        When one of the algebraic identities fails; the message names the
        worst node.
    """
    if mb.F is None:
        raise ContractViolation("static-frame functions missing: run to_static_frame first")
    f, k, l, m = lewis_arrays(mb.F, mb.K, mb.A, mb.Pi)
    beta = mb.beta
    fp = f - 2 * beta * k - beta ** 2 * l
    kp = k + beta * l
    lf = LewisFields(mb.grid, beta, f, k, l, m, mb.Pi, fp, kp)
    if check:
        defects = lewis_identity_defects(lf, mb.Fp, mb.Ap)
        for name, (val, node) in defects.items():
            if val > IDENTITY_TOL:
                raise DataError(f"identity {name} violated by {val:.3e} at node {node}")
    return lf


def _rel(a, b):
    scale = np.maximum(np.abs(a), np.abs(b))
    scale = np.where(scale > 0, scale, 1.0)
    r = np.abs(a - b) / scale
    idx = np.unravel_index(int(np.argmax(r)), r.shape)
    return float(r[idx]), tuple(int(i) for i in idx)


def lewis_identity_defects(lf: LewisFields, Fp, Ap) -> dict:
    """Relative defects of ``Pi^2 = fl + k^2``, ``f' = e^{2F'}``, ``k' = -e^{2F'} A'`` and the determinant."""
    b = lf.beta
    e4 = np.exp(4 * Fp)
    det = (2 * lf.k + b * lf.l) ** 2 * b ** 2 + lf.f * (lf.f - 4 * b * lf.k - 2 * b ** 2 * lf.l)
    return {
        "Pi^2 = f l + k^2": _rel(lf.Pi ** 2, lf.f * lf.l + lf.k ** 2),
        "f' = exp(2F')": _rel(lf.fp, np.exp(2 * Fp)),
        "k' = -exp(2F') A'": _rel(lf.kp, -np.exp(2 * Fp) * Ap),
        "determinant = exp(4F')": _rel(det, e4),
    }


# ---------------------------------------------------------------------------
# Ricci tensor: closed forms and brute force
# ---------------------------------------------------------------------------

def ricci_from_jets(f: FieldJet, k: FieldJet, l: FieldJet, m: FieldJet, Pi: FieldJet) -> dict:
    """The six non-zero Ricci components of the Lewis metric.

    The divergence terms ``Pi d1(d1 f / Pi)`` are expanded by the product
    rule so that every quotient by ``Pi`` is regular at the axis.
    """
    P = Pi.v
    Sigma = f.d1 * l.d1 + f.d3 * l.d3 + k.d1 ** 2 + k.d3 ** 2
    S = Sigma / P ** 2
    em = np.exp(-m.v)

    def lewis_op(q: FieldJet):
        return q.d11 + q.d33 - (q.d1 * Pi.d1 + q.d3 * Pi.d3) / P

    R = {}
    R["00"] = 0.5 * em * (lewis_op(f) + f.v * S)
    R["02"] = -0.5 * em * (lewis_op(k) + k.v * S)
    R["22"] = -0.5 * em * (lewis_op(l) + l.v * S)
    cross = (m.d1 * Pi.d1 - m.d3 * Pi.d3) / P
    R["11"] = 0.5 * (-m.d11 - m.d33 - 2 * Pi.d11 / P + cross + (f.d1 * l.d1 + k.d1 ** 2) / P ** 2)
    R["33"] = 0.5 * (-m.d11 - m.d33 - 2 * Pi.d33 / P - cross + (f.d3 * l.d3 + k.d3 ** 2) / P ** 2)
    R["13"] = 0.5 * (-2 * Pi.d13 / P + (m.d3 * Pi.d1 + m.d1 * Pi.d3) / P
                     + (f.d1 * l.d3 + l.d1 * f.d3 + 2 * k.d1 * k.d3) / (2 * P ** 2))
    return R


_RICCI_PARITY = {"00": EVEN, "02": EVEN, "22": EVEN, "11": EVEN, "33": EVEN, "13": ODD}


def ricci_components(lf: LewisFields) -> dict:
    """Finite-difference Ricci components on the grid.

    Axis values are filled from the parity of each component: odd ones
    vanish, even ones take the even quadratic extrapolation ``(4 R_1 - R_2)/3``.
    """
    j = lf.jets
    with np.errstate(divide="ignore", invalid="ignore"):
        R = ricci_from_jets(j["f"], j["k"], j["l"], j["m"], j["Pi"])
    for key, arr in R.items():
        if _RICCI_PARITY[key] == ODD:
            arr[0] = 0.0
        else:
            arr[0] = (4 * arr[1] - arr[2]) / 3
    return R


def lewis_metric_matrix(f, k, l, m):
    """Covariant metric ``g_{mu nu}``, shape ``(4, 4) + f.shape``."""
    z = np.zeros_like(f)
    em = -np.exp(m)
    return np.array([[f, z, -k, z], [z, em, z, z], [-k, z, -l, z], [z, z, z, em]])


def ricci_brute_force(g, dg, d2g):
    """Ricci tensor from a metric and its exact derivatives.

    Parameters
    ----------
    g : ndarray, shape (4, 4, N)
    dg : ndarray, shape (4, 4, 4, N)
        ``dg[c, a, b] = d_c g_ab``.
    d2g : ndarray, shape (4, 4, 4, 4, N)
        ``d2g[c, d, a, b] = d_c d_d g_ab``.

    Returns
    -------
    ndarray, shape (4, 4, N)
        ``R_mn = d_a G^a_mn - d_n G^a_ma + G^a_mn G^b_ab - G^b_ma G^a_nb``.
    """
    gm = np.moveaxis(g, -1, 0)
    ginv = np.moveaxis(np.linalg.inv(gm), 0, -1)
    # derivative of the inverse: d_c g^{ab} = -g^{ad} d_c g_de g^{eb}
    dginv = -np.einsum("adN,cdeN,ebN->cabN", ginv, dg, ginv)
    # Christoffel of the first kind and its derivative
    # low[d, a, b] = 1/2 (d_a g_db + d_b g_da - d_d g_ab)
    low = 0.5 * (np.einsum("adbN->dabN", dg) + np.einsum("bdaN->dabN", dg) - dg)
    dlow = 0.5 * (np.einsum("cadbN->cdabN", d2g) + np.einsum("cbdaN->cdabN", d2g) - d2g)
    Gam = np.einsum("edN,dabN->eabN", ginv, low)
    dGam = np.einsum("cedN,dabN->ceabN", dginv, low) + np.einsum("edN,cdabN->ceabN", ginv, dlow)
    term1 = np.einsum("aamnN->mnN", dGam)
    term2 = np.einsum("namaN->mnN", dGam)
    term3 = np.einsum("amnN,babN->mnN", Gam, Gam)
    term4 = np.einsum("bmaN,anbN->mnN", Gam, Gam)
    return term1 - term2 + term3 - term4


def ricci_oracle_from_jets(f: FieldJet, k: FieldJet, l: FieldJet, m: FieldJet) -> dict:
    """Brute-force Ricci components from exact Lewis-function jets (flattened arrays)."""
    shape = np.shape(f.v)
    N = int(np.prod(shape))

    def flat(a):
        return np.reshape(np.asarray(a, dtype=float), N)

    parts = {}
    for name, q in (("f", f), ("k", k), ("l", l), ("m", m)):
        parts[name] = {a: flat(getattr(q, a)) for a in ("v", "d1", "d3", "d11", "d33", "d13")}
    fv, kv, lv, mv = (parts[n]["v"] for n in "fklm")
    g = lewis_metric_matrix(fv, kv, lv, mv)
    em = np.exp(mv)

    def metric_deriv(i, j=None):
        key = {(1, None): "d1", (3, None): "d3", (1, 1): "d11", (3, 3): "d33", (1, 3): "d13", (3, 1): "d13"}
        z = np.zeros(N)
        if j is None:
            a = key[(i, None)]
            dm = -em * parts["m"][a]
        else:
            a = key[(i, j)]
            ai, aj = key[(i, None)], key[(j, None)]
            dm = -em * (parts["m"][a] + parts["m"][ai] * parts["m"][aj])
        return np.array([[parts["f"][a], z, -parts["k"][a], z], [z, dm, z, z],
                         [-parts["k"][a], z, -parts["l"][a], z], [z, z, z, dm]])

    zero2 = np.zeros((4, 4, N))
    dg = np.array([zero2, metric_deriv(1), zero2, metric_deriv(3)])
    d2g = np.zeros((4, 4, 4, 4, N))
    for i in (1, 3):
        for j in (1, 3):
            d2g[i, j] = metric_deriv(i, j)
    R = ricci_brute_force(g, dg, d2g)
    idx = {"00": (0, 0), "02": (0, 2), "22": (2, 2), "11": (1, 1), "33": (3, 3), "13": (1, 3)}
    return {key: R[i, j].reshape(shape) for key, (i, j) in idx.items()}


# ---------------------------------------------------------------------------
# stress tensor
# ---------------------------------------------------------------------------

def stress_components(f, k, l, m, Pi, eps, p, beta) -> dict:
    """Trace-reversed stress of a rigidly rotating perfect fluid in scaled form."""
    e2G = f - 2 * beta * k - beta ** 2 * l
    c = 0.5 * (eps + p) / e2G
    T = {}
    T["00"] = c * ((f - beta * k) ** 2 + beta ** 2 * Pi ** 2) + p * f
    T["02"] = c * (-k * f - 2 * beta * f * l + beta ** 2 * k * l) - p * k
    T["22"] = c * (Pi ** 2 + (k + beta * l) ** 2) - p * l
    T["11"] = 0.5 * np.exp(m) * (eps - p)
    T["33"] = T["11"]
    T["13"] = np.zeros_like(f)
    return T


def stress_oracle(f, k, l, m, eps, p, beta) -> dict:
    """``T_mn - g_mn T / 2`` built from the four-velocity and the full metric."""
    f, k, l, m = (np.atleast_1d(np.asarray(a, dtype=float)) for a in (f, k, l, m))
    eps, p = np.broadcast_to(eps, f.shape).astype(float), np.broadcast_to(p, f.shape).astype(float)
    g = lewis_metric_matrix(f, k, l, m)
    U_up = np.zeros((4,) + f.shape)
    U_up[0] = 1.0
    U_up[2] = beta
    norm = np.einsum("a...,ab...,b...->...", U_up, g, U_up)
    U_up = U_up / np.sqrt(norm)
    U_lo = np.einsum("ab...,b...->a...", g, U_up)
    T = (eps + p) * np.einsum("a...,b...->ab...", U_lo, U_lo) - p * g
    trace = eps - 3 * p
    Tr = T - 0.5 * g * trace
    idx = {"00": (0, 0), "02": (0, 2), "22": (2, 2), "11": (1, 1), "33": (3, 3), "13": (1, 3)}
    return {key: Tr[i, j] for key, (i, j) in idx.items()}


def identity_37(f, k, l, Pi, T, p):
    """``l T00 - 2 k T02 - f T22 - 2 p Pi^2`` and its scale."""
    lhs = l * T["00"] - 2 * k * T["02"] - f * T["22"]
    rhs = 2 * p * Pi ** 2
    scale = np.abs(l * T["00"]) + np.abs(2 * k * T["02"]) + np.abs(f * T["22"]) + np.abs(rhs)
    return lhs - rhs, scale


def identity_w33(f, k, l, T, beta):
    """Rotational combination of the stress that vanishes identically."""
    a = (k + beta * l) * T["00"]
    b = (f + beta ** 2 * l) * T["02"]
    c = beta * (f - beta * k) * T["22"]
    return a + b + c, np.abs(a) + np.abs(b) + np.abs(c)


def relative_identity_defect(pair) -> float:
    val, scale = pair
    scale = np.where(scale > 0, scale, 1.0)
    return float(np.max(np.abs(val) / scale))


def identity_32(lf: LewisFields, R: dict | None = None):
    """``(e^m/Pi)(l R00 - 2k R02 - f R22)`` minus the flat Laplacian of ``Pi`` (grid)."""
    R = R or ricci_components(lf)
    j = lf.jets
    with np.errstate(divide="ignore", invalid="ignore"):
        lhs = np.exp(lf.m) / lf.Pi * (lf.l * R["00"] - 2 * lf.k * R["02"] - lf.f * R["22"])
    return lhs - (j["Pi"].d11 + j["Pi"].d33)


def identity_w34(lf: LewisFields, R: dict | None = None):
    """Rotational Ricci combination minus the divergence form in ``f', k'`` (grid)."""
    R = R or ricci_components(lf)
    b = lf.beta
    g = lf.grid
    comb = (lf.k + b * lf.l) * R["00"] + (lf.f + b ** 2 * lf.l) * R["02"] + b * (lf.f - b * lf.k) * R["22"]
    fpj = FieldJet.of(lf.fp, g)
    kpj = FieldJet.of(lf.kp, g)
    with np.errstate(divide="ignore", invalid="ignore"):
        lhs = -2 * np.exp(lf.m) / lf.Pi * comb
        q1 = (lf.fp * kpj.d1 - lf.kp * fpj.d1) / lf.Pi
        q3 = (lf.fp * kpj.d3 - lf.kp * fpj.d3) / lf.Pi
    q1[0] = 0.0
    rhs = d1(q1, g.h, 0, ODD) + d1(q3, g.h, 1, ODD)
    return lhs - rhs


# ---------------------------------------------------------------------------
# residuals of the field equations
# ---------------------------------------------------------------------------

def regions(grid: AxiGrid, xi1_of_zeta, Xi: float, axis_gap: float, collar: int = 3) -> dict:
    """Boolean masks ``inside``, ``collar`` and ``vacuum``.

    ``xi1_of_zeta`` maps ``zeta = z/r`` to the Newtonian surface radius.
    Nodes closer than ``axis_gap`` to the axis, and the outer ``collar``
    cells, are left out of all three.
    """
    r = grid.r
    with np.errstate(invalid="ignore", divide="ignore"):
        zeta = np.where(r > 0, grid.z / np.where(r > 0, r, 1.0), 0.0)
    R1 = xi1_of_zeta(zeta)
    ok = grid.varpi >= axis_gap
    ok[-collar:, :] = False
    ok[:, -collar:] = False
    return {
        "inside": ok & (r < 0.8 * R1),
        "collar": ok & (r >= 0.8 * R1) & (r <= 1.2 * R1),
        "vacuum": ok & (r > 1.2 * R1) & (r <= Xi),
    }


def _sup(a, mask):
    return float(np.max(np.abs(a[mask]))) if np.any(mask) else 0.0


def einstein_residuals(mb, lf: LewisFields | None = None) -> dict:
    """Fields ``R_mn - T_mn`` for the six components (scaled units)."""
    lf = lf or lewis_fields(mb)
    R = ricci_components(lf)
    T = stress_components(lf.f, lf.k, lf.l, lf.m, lf.Pi, mb.eps, mb.p, lf.beta)
    return {key: R[key] - T[key] for key in COMPONENTS}


def reduced_residuals(mb) -> dict:
    """Fields of the five corotating-frame equations (left minus right side)."""
    g = mb.grid
    F = FieldJet.of(mb.Fp, g)
    K = FieldJet.of(mb.Kp, g)
    A = FieldJet.of(mb.Ap, g)
    Pi = FieldJet.of_pi(mb.Pi, g, mb.Pi_dev)
    P = Pi.v
    e4 = np.exp(4 * F.v)
    conf = np.exp(2 * (K.v - F.v))
    with np.errstate(divide="ignore", invalid="ignore"):
        a = (F.d11 + F.d33 + (F.d1 * Pi.d1 + F.d3 * Pi.d3) / P + e4 / (2 * P ** 2) * (A.d1 ** 2 + A.d3 ** 2)
             - 0.5 * conf * (mb.eps + 3 * mb.p))
        bq = e4 / P * (4 * F.d1 * A.d1 + A.d11 - A.d1 * Pi.d1 / P + 4 * F.d3 * A.d3 + A.d33 - A.d3 * Pi.d3 / P)
        c = Pi.d11 + Pi.d33 - 2 * mb.p * conf * P
        dd = (Pi.d1 * K.d1 - Pi.d3 * K.d3 - 0.5 * (Pi.d11 - Pi.d33) - P * (F.d1 ** 2 - F.d3 ** 2)
              + e4 / (4 * P) * (A.d1 ** 2 - A.d3 ** 2))
        e = Pi.d3 * K.d1 + Pi.d1 * K.d3 - Pi.d13 - 2 * P * F.d1 * F.d3 + e4 / (2 * P) * A.d1 * A.d3
    return {"a": a, "b": bq, "c": c, "d": dd, "e": e}


def bernoulli_defect(mb, mask=None) -> float:
    """Sup over the star of ``|F' + tau u - const|`` (const taken at the centre)."""
    q = mb.Fp + mb.tau * mb.u
    mask = (mb.u > 0) if mask is None else mask
    return float(np.max(np.abs(q[mask] - q[0, 0])))


def region_sups(fields: dict, masks: dict) -> dict:
    return {name: {rk: _sup(arr, m) for rk, m in masks.items()} for name, arr in fields.items()}


# ---------------------------------------------------------------------------
# path independence of the K' quadrature
# ---------------------------------------------------------------------------

def path_independence(g1: ScalarField, g3: ScalarField, mask=None) -> float:
    """Largest difference between the two quadrature paths of ``(g1, g3)``."""
    a = quadrature_from_gradient(g1, g3, "canonical").values
    b = quadrature_from_gradient(g1, g3, "transposed").values
    diff = np.abs(a - b)
    return float(np.max(diff if mask is None else diff[mask]))


def circulation(g1: ScalarField, g3: ScalarField, mask=None) -> float:
    """Largest trapezoid circulation of ``(g1, g3)`` around single grid cells, over ``h^2``."""
    h = g1.grid.h
    a, c = g1.values, g3.values
    # counter-clockwise around [i, i+1] x [j, j+1]
    circ = (0.5 * h * (a[:-1, :-1] + a[1:, :-1]) + 0.5 * h * (c[1:, :-1] + c[1:, 1:])
            - 0.5 * h * (a[:-1, 1:] + a[1:, 1:]) - 0.5 * h * (c[:-1, :-1] + c[:-1, 1:])) / h ** 2
    if mask is not None:
        m = mask[:-1, :-1] & mask[1:, :-1] & mask[:-1, 1:] & mask[1:, 1:]
        circ = circ[m]
    return float(np.max(np.abs(circ))) if np.size(circ) else 0.0


# ---------------------------------------------------------------------------
# spherical oracle
# ---------------------------------------------------------------------------

@dataclass
class TovProfile:
    """Static spherical star in scaled units.

    ``r`` is the areal radius; ``u`` the enthalpy over ``u_O``; ``mu`` the
    mass function ``m / (4 pi rho_O a^3)``; ``F`` the redshift potential
    normalised to vanish at infinity.
    """

    tau: float
    r: np.ndarray
    u: np.ndarray
    mu: np.ndarray
    radius: float
    mass: float
    dense: object = field(repr=False, default=None)

    def u_of_r(self, r):
        r = np.asarray(r, dtype=float)
        out = np.empty_like(r)
        inside = r <= self.radius
        if np.any(inside):
            out[inside] = self.dense(np.maximum(r[inside], self.r[0]))[0]
        if np.any(~inside):
            # vacuum: F = log sqrt(1 - 2 tau M / r) and u = -F/tau + const
            rs = r[~inside]
            t = self.tau
            out[~inside] = (-0.5 * np.log1p(-2 * t * self.mass / rs) + 0.5 * np.log1p(-2 * t * self.mass / self.radius)) / t
        return out

    def F_of_r(self, r):
        """Redshift potential (``g_00 = e^{2F}``) at areal radius ``r``."""
        t = self.tau
        Fs = 0.5 * np.log1p(-2 * t * self.mass / self.radius)
        return Fs - t * self.u_of_r(r)


def tov_oracle(eos: EosParams, tau: float, r_max: float = 20.0, rtol: float = 1e-12) -> TovProfile:
    """Integrate the Tolman-Oppenheimer-Volkoff equations with ``u(0) = u_O``.

    ``du/dr = -(mu + tau r^3 P)/(r^2 (1 - 2 tau mu / r))``, ``dmu/dr = r^2 rho``.
    """
    if not tau > 0:
        raise DomainError("tau must be positive")
    r0 = 1e-4

    def rho_p(u):
        rho = float(rho_hat(np.array(max(u, 0.0)), tau, eos))
        return rho, float(p_hat(np.array(rho), tau, eos))

    rho_c, p_c = rho_p(1.0)
    # series start: u = 1 - a r^2, mu = rho_c r^3 / 3
    a2 = 0.5 * (rho_c / 3 + tau * p_c)
    y0 = [1.0 - a2 * r0 ** 2, rho_c * r0 ** 3 / 3]

    def rhs(r, y):
        u, mu = y
        rho, p = rho_p(u)
        return [-(mu + tau * r ** 3 * p) / (r ** 2 * (1 - 2 * tau * mu / r)), r ** 2 * rho]

    def surface(r, y):
        return y[0]

    surface.terminal = True
    surface.direction = -1
    sol = solve_ivp(rhs, (r0, r_max), y0, method="DOP853", rtol=rtol, atol=1e-14,
                    events=surface, dense_output=True)
    if sol.status != 1:
        raise DataError("TOV integration did not reach the surface")
    R = float(sol.t_events[0][0])
    M = float(sol.y_events[0][0][1])
    return TovProfile(tau, sol.t, sol.y[0], sol.y[1], R, M, sol.sol)


def areal_radius(mb, X=None):
    """Circumferential radius ``e^{-F} Pi / sin(theta)`` of the nodes (static frame)."""
    g = mb.grid
    r = g.r
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(g.varpi > 0, mb.Pi / np.where(g.varpi > 0, g.varpi, 1.0), np.nan)
    if np.isnan(ratio).any():
        # axis: Pi / varpi -> d Pi / d varpi
        ratio = ratio.copy()
        ratio[0] = (4 * ratio[1] - ratio[2]) / 3 if g.shape[0] > 2 else 1.0
    F = mb.F if mb.F is not None else mb.Fp
    return np.exp(-F) * ratio * r


def tov_difference(mb, tov: TovProfile, mask) -> float:
    """Sup over ``mask`` of ``|u_2D - u_TOV(areal radius)|`` (in units of ``u_O``)."""
    rs = areal_radius(mb)
    diff = np.abs(mb.u[mask] - tov.u_of_r(rs[mask]))
    return float(np.max(diff))
