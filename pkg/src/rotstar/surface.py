"""Vacuum boundary of the star: the zero curve of the enthalpy along rays.

Directions are labelled by ``zeta = cos(polar angle)`` and radii are scaled
by ``a`` unless ``length_unit`` says otherwise.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ArtifactIOError, BoundaryNotFound
from .grid import ScalarField
from .lane_emden import chebyshev_zeta, mirrored_spline, monotonicity_margin, ray_root


@dataclass
class SurfaceCurve:
    """Boundary ``r = R(zeta)`` sampled on ``zeta in [0, 1]``.

    Attributes
    ----------
    zeta : ndarray
        Increasing samples in ``[0, 1]``; the curve is even in ``zeta``.
    R : ndarray
        Boundary radius in units of ``a``.
    dR_dzeta : ndarray
        Slope from centred differences of the mirrored samples.
    du_dN : ndarray
        Outward normal derivative of the scaled enthalpy, in ``u_O / a``.
    length_unit : float
        Physical length of one grid unit (``a``); 1 for scaled output.
    """

    zeta: np.ndarray
    R: np.ndarray
    dR_dzeta: np.ndarray
    du_dN: np.ndarray
    length_unit: float = 1.0

    @property
    def dR_dtheta(self) -> np.ndarray:
        """Slope with respect to the polar angle, ``-sqrt(1 - zeta^2) dR/dzeta``."""
        return -np.sqrt(np.clip(1 - self.zeta ** 2, 0, None)) * self.dR_dzeta

    @property
    def R_physical(self) -> np.ndarray:
        return self.length_unit * self.R

    def to_dict(self) -> dict:
        return {
            "zeta": self.zeta.tolist(),
            "R": self.R.tolist(),
            "dRdzeta": self.dR_dzeta.tolist(),
            "du_dN": self.du_dN.tolist(),
            "length_unit": self.length_unit,
        }


def _slope(zeta, R):
    """``dR/dzeta`` by centred differences on the mirrored (even) samples."""
    k = 1 if zeta[0] == 0 else 0
    z = np.concatenate([-zeta[k:][::-1], zeta])
    v = np.concatenate([R[k:][::-1], R])
    return np.gradient(v, z, edge_order=2)[-zeta.size:]


def normal_derivative(spline, zeta, R, dR):
    """``du/dN`` on ``r = R(zeta)`` from the Cartesian gradient of a spline.

    The outward normal is ``grad(r - R(zeta))`` normalised:
    ``e_r + (sin / r) R' e_theta`` with ``e_theta = (zeta, -sin)``.
    """
    s = np.sqrt(np.clip(1 - zeta ** 2, 0, None))
    vp, z = R * s, R * zeta
    u1 = spline.ev(vp, z, dx=1)
    u3 = spline.ev(vp, z, dy=1)
    c = s * dR / R
    n1 = s + c * zeta
    n3 = zeta - c * s
    norm = np.hypot(n1, n3)
    return (u1 * n1 + u3 * n3) / norm


def find_boundary(u: ScalarField, dle=None, params=None, zeta=None, r_max: float | None = None,
                  check_monotone: bool = True) -> SurfaceCurve:
    """Locate ``{u = 0}`` along rays.

    Parameters
    ----------
    u : ScalarField
        Scaled enthalpy ``u / u_O`` (even-even).
    dle : DistortedLaneEmden, optional
        Newtonian background; its ``xi1`` bounds the search to ``2 xi1``.
    params : StarParams, optional
        Supplies the physical length unit ``a``.
    zeta : array_like, optional
        Ray directions; 65 Chebyshev nodes on ``[0, 1]`` by default.

    Raises
    ------
    BoundaryNotFound
        A ray without a sign change, i.e. the support is not confined.
    DataError
        ``u`` is not decreasing along a ray before its zero.
    """
    zeta = chebyshev_zeta() if zeta is None else np.asarray(zeta, dtype=float)
    g = u.grid
    if r_max is None:
        r_max = g.xi0 if dle is None else min(g.xi0, 2.0 * dle.xi1)
    spl = mirrored_spline(u)
    R = np.array([ray_root(spl, float(z), r_max, check_monotone=check_monotone, xtol=1e-12, name="u")
                  for z in zeta])
    dR = _slope(zeta, R)
    dudn = normal_derivative(spl, zeta, R, dR)
    unit = 1.0 if params is None else float(params.a_len)
    return SurfaceCurve(zeta, R, dR, dudn, unit)


def check_monotone(u: ScalarField, r_min: float | None = None) -> float:
    """Minimum of ``-du/dr`` over ray samples in ``(r_min, xi0]``.

    A positive value certifies ``{u > 0} = {r < R(zeta)}``.
    """
    return monotonicity_margin(u, r_min=r_min)


def physical_vacuum_check(u: ScalarField, surface: SurfaceCurve):
    """Extremes of ``du/dN`` on the boundary.

    Returns
    -------
    lo, hi : float
        The condition holds when ``hi < 0`` and both are finite.
    ok : bool
    """
    spl = mirrored_spline(u)
    v = normal_derivative(spl, surface.zeta, surface.R, surface.dR_dzeta)
    lo, hi = float(np.min(v)), float(np.max(v))
    return lo, hi, bool(np.isfinite(lo) and hi < 0)


def sign_consistency(u: ScalarField, surface: SurfaceCurve, n_samples: int = 200, margin: float = 1e-3) -> bool:
    """Check ``u > 0`` inside and ``u <= 0`` outside along every sampled ray."""
    spl = mirrored_spline(u)
    for z, R in zip(surface.zeta, surface.R):
        s = np.sqrt(max(1 - z * z, 0.0))
        r_in = np.linspace(0, R * (1 - margin), n_samples)
        r_out = np.linspace(R * (1 + margin), u.grid.xi0, n_samples)
        if np.any(spl.ev(r_in * s, r_in * z) <= 0) or np.any(spl.ev(r_out * s, r_out * z) > 0):
            return False
    return True


def support_confined(u: ScalarField, radius: float) -> bool:
    """``u <= 0`` at every node with ``r >= radius``."""
    g = u.grid
    mask = g.r >= radius
    return bool(not np.any(u.values[mask] > 0))


def write_surface(surface: SurfaceCurve, out_dir, stem: str = "surface"):
    """Write ``<stem>.json`` and a plot-ready ``<stem>.csv``."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        with open(out / f"{stem}.json", "w") as fh:
            json.dump(surface.to_dict(), fh, indent=2, sort_keys=True)
        with open(out / f"{stem}.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["zeta", "R", "dRdzeta", "du_dN"])
            for row in zip(surface.zeta, surface.R, surface.dR_dzeta, surface.du_dN):
                w.writerow([repr(float(x)) for x in row])
    except OSError as exc:
        raise ArtifactIOError(f"cannot write surface files to {out}: {exc}") from exc
    return out / f"{stem}.json", out / f"{stem}.csv"


__all__ = [
    "SurfaceCurve", "find_boundary", "check_monotone", "physical_vacuum_check", "normal_derivative",
    "sign_consistency", "support_confined", "write_surface", "BoundaryNotFound",
]
