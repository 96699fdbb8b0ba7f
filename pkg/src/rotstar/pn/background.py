"""Newtonian background star in scaled units.

Lengths are in units of ``a``, enthalpies in units of ``u_O`` and densities
in units of ``rho_O``.  The potential is normalised so that
``Lap phi = rho_N`` (that is ``phi = -K3[rho_N]``) and ``Phi = phi - b varpi^2 / 4``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ..eos import EosParams
from ..grid import AxiGrid, Jet, ScalarField
from ..lane_emden import DistortedLaneEmden, rotation_cutoff


@dataclass
class Background:
    """Newtonian profiles on the grid of ``dle``.

    Attributes
    ----------
    dle : DistortedLaneEmden
    theta : ndarray
        ``u_N / u_O``; negative outside the star.
    rhoN, PN, phi : ndarray
    const : float
        Bernoulli constant ``1 + phi(0)``.
    """

    dle: DistortedLaneEmden
    theta: np.ndarray
    rhoN: np.ndarray
    PN: np.ndarray
    phi: np.ndarray
    const: float

    @property
    def grid(self) -> AxiGrid:
        return self.dle.grid

    @property
    def b(self) -> float:
        return self.dle.b_rot

    @cached_property
    def Phi(self) -> np.ndarray:
        """Newtonian potential minus the centrifugal potential."""
        return self.phi - 0.25 * self.b * self.grid.varpi ** 2

    @cached_property
    def phi_jet(self) -> Jet:
        return Jet.of(self.phi, self.grid)

    def bernoulli_residual(self, mask=None) -> float:
        """Sup of ``|Theta + Phi - const|`` over the star (or ``mask``)."""
        if mask is None:
            mask = self.theta > 0
        res = self.theta + self.Phi - self.const
        return float(np.max(np.abs(res[mask]))) if np.any(mask) else 0.0


def newtonian_background(dle: DistortedLaneEmden, eos: EosParams) -> Background:
    """Build the Newtonian background from a converged distorted Lane-Emden solution."""
    n = dle.n_index
    if abs(n - eos.n_index) > 1e-12:
        raise ValueError(f"equation of state index {eos.n_index} differs from Theta's {n}")
    theta = dle.theta_field.values
    pos = theta > 0
    rhoN = np.where(pos, np.abs(theta) ** n, 0.0)
    PN = eos.k_ratio * np.where(pos, np.abs(theta) ** (n + 1), 0.0)
    phi = -dle.solver.apply(rhoN)
    # the star must sit inside the plateau of the centrifugal cutoff
    chi_rot = rotation_cutoff(dle.xi1)(dle.grid.r)
    if np.any(pos & (chi_rot < 1.0)):
        raise ValueError("star reaches the roll-off of the centrifugal cutoff")
    return Background(dle, theta, rhoN, PN, phi, float(1.0 + phi[0, 0]))


