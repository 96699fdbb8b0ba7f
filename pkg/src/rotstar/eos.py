"""Polytropic equation of state with a relativistic correction profile.

The pressure is ``P = A rho^gamma (1 + Lambda(A rho^(gamma-1) / c^2))``.
The default profile is ``Lambda = 0``; a polynomial profile
``Lambda(x) = lambda1 x + lambda2 x^2`` is available as well.

Besides the physical functions the module provides the dimensionless
closures used by the solvers: densities in units of the central density
``rho_O``, pressures in units of ``rho_O u_O`` and enthalpies in units of
``u_O``, with ``tau = u_O / c^2`` the only small parameter.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import ConfigError, DomainError

_GL_X, _GL_W = leggauss(48)


# ---------------------------------------------------------------------------
# stable primitives
# ---------------------------------------------------------------------------

def expm1_minus_linear(y):
    """Return ``exp(y) - 1 - y`` without cancellation for small ``|y|``."""
    y = np.asarray(y, dtype=float)
    small = np.abs(y) < 1e-2
    ys = np.where(small, y, 0.0)
    series = ys * ys * (0.5 + ys * (1 / 6 + ys * (1 / 24 + ys * (1 / 120 + ys * (1 / 720 + ys / 5040)))))
    return np.where(small, series, np.expm1(y) - y)


def exprel_minus_one(y):
    """Return ``(exp(y) - 1)/y - 1``, continuous at ``y = 0``."""
    y = np.asarray(y, dtype=float)
    small = np.abs(y) < 1e-2
    ys = np.where(small, y, 0.0)
    series = ys * (0.5 + ys * (1 / 6 + ys * (1 / 24 + ys * (1 / 120 + ys * (1 / 720 + ys / 5040)))))
    safe = np.where(small, 1.0, y)
    return np.where(small, series, (np.expm1(safe) - safe) / safe)


def powm1_minus_linear(s, n):
    """Return ``(1 + s)^n - 1 - n s`` for ``s > -1``, stable near ``s = 0``."""
    s = np.asarray(s, dtype=float)
    small = np.abs(s) < 1e-2
    ss = np.where(small, s, 0.0)
    c2 = n * (n - 1) / 2
    c3 = c2 * (n - 2) / 3
    c4 = c3 * (n - 3) / 4
    c5 = c4 * (n - 4) / 5
    c6 = c5 * (n - 5) / 6
    series = ss * ss * (c2 + ss * (c3 + ss * (c4 + ss * (c5 + ss * c6))))
    sl = np.where(small, 0.0, s)
    direct = np.expm1(n * np.log1p(sl)) - n * sl
    return np.where(small, series, direct)


def _positive_power(x, p):
    """``(x v 0)^p`` with the convention ``0^0 = 0`` outside the support."""
    x = np.asarray(x, dtype=float)
    xp = np.where(x > 0, x, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(x > 0, xp ** p, 0.0)
    return out


# ---------------------------------------------------------------------------
# parameters
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EosParams:
    """Equation of state constants.

    Parameters
    ----------
    gamma : float
        Adiabatic exponent, ``6/5 < gamma < 2``.
    A_poly, c_light, G_grav : float
        Pressure constant, speed of light and gravitational constant.
    lambda_mode : {'zero', 'linear_quadratic'}
        ``'zero'`` is the exact polytrope.  ``'linear_quadratic'`` uses
        ``Lambda(x) = lambda1 x + lambda2 x^2`` for the pressure correction.
    """

    gamma: float = 5.0 / 3.0
    A_poly: float = 1.0
    c_light: float = 1.0
    G_grav: float = 1.0
    lambda_mode: str = "zero"
    lambda1: float = 0.0
    lambda2: float = 0.0

    def __post_init__(self):
        if not (6.0 / 5.0 < self.gamma < 2.0):
            raise ConfigError(
                f"gamma={self.gamma} outside (6/5, 2): the polytropic exponent "
                "must keep the Lane-Emden index in (1, 5)")
        for name in ("A_poly", "c_light", "G_grav"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.lambda_mode not in ("zero", "linear_quadratic"):
            raise ConfigError(f"unknown lambda_mode {self.lambda_mode!r}")

    @property
    def n_index(self) -> float:
        return 1.0 / (self.gamma - 1.0)

    @property
    def k_ratio(self) -> float:
        """``(gamma - 1)/gamma``."""
        return (self.gamma - 1.0) / self.gamma

    @property
    def is_exact_polytrope(self) -> bool:
        return self.lambda_mode == "zero" or (self.lambda1 == 0 and self.lambda2 == 0)

    # correction profile -------------------------------------------------
    def Lambda(self, x):
        x = np.asarray(x, dtype=float)
        if self.is_exact_polytrope:
            return np.zeros_like(x)
        return x * (self.lambda1 + self.lambda2 * x)

    def dLambda(self, x):
        x = np.asarray(x, dtype=float)
        if self.is_exact_polytrope:
            return np.zeros_like(x)
        return self.lambda1 + 2.0 * self.lambda2 * x

    @cached_property
    def lambda1_density(self) -> float:
        """Linear coefficient of the density correction in ``u / c^2``.

        ``rho = rho_Newton(u) (1 + lambda_1 u/c^2 + ...)``.  Equals
        ``1/(2 gamma)`` for the exact polytrope.
        """
        g = self.gamma
        l1 = 0.0 if self.is_exact_polytrope else self.lambda1
        return (1.0 - l1 * (2.0 * g - 1.0) / g) / (2.0 * g)

    # x = A rho^(gamma-1)/c^2 <-> u/c^2 ------------------------------------
    def _enthalpy_integrand(self, s):
        lam = self.Lambda(s)
        return (self.gamma * (1.0 + lam) + (self.gamma - 1.0) * s * self.dLambda(s)) / (1.0 + s * (1.0 + lam))

    def scaled_enthalpy(self, x):
        """``u / c^2`` as a function of ``x = A rho^(gamma-1)/c^2``."""
        x = np.asarray(x, dtype=float)
        if self.is_exact_polytrope:
            return np.log1p(x) / self.k_ratio
        nodes = 0.5 * (x[..., None] * (_GL_X + 1.0))
        integral = 0.5 * x * np.sum(_GL_W * self._enthalpy_integrand(nodes), axis=-1)
        return integral / (self.gamma - 1.0)

    def scaled_enthalpy_inverse(self, y):
        """Inverse of :meth:`scaled_enthalpy` for ``y >= 0``."""
        y = np.asarray(y, dtype=float)
        if self.is_exact_polytrope:
            return np.expm1(self.k_ratio * y)
        x = np.expm1(self.k_ratio * y)
        target = (self.gamma - 1.0) * y
        for _ in range(60):
            f = (self.gamma - 1.0) * self.scaled_enthalpy(x) - target
            step = f / self._enthalpy_integrand(x)
            x = np.maximum(x - step, 0.5 * x)
            if np.all(np.abs(step) <= 1e-15 * np.maximum(np.abs(x), 1e-300)):
                break
        return x


# ---------------------------------------------------------------------------
# physical functions
# ---------------------------------------------------------------------------

def _check_density(rho):
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0) or np.any(~np.isfinite(rho)):
        raise DomainError("density must be finite and non-negative")
    return rho


def pressure_of_density(rho, eos: EosParams):
    """Pressure ``A rho^gamma (1 + Lambda(A rho^(gamma-1)/c^2))``."""
    rho = _check_density(rho)
    x = eos.A_poly * rho ** (eos.gamma - 1.0) / eos.c_light ** 2
    return eos.A_poly * rho ** eos.gamma * (1.0 + eos.Lambda(x))


def enthalpy_of_density(rho, eos: EosParams):
    """Relativistic specific enthalpy ``int_0^rho dP / (rho' + P/c^2)``."""
    rho = _check_density(rho)
    x = eos.A_poly * rho ** (eos.gamma - 1.0) / eos.c_light ** 2
    return eos.c_light ** 2 * eos.scaled_enthalpy(x)


def density_of_enthalpy(u, eos: EosParams):
    """Inverse of :func:`enthalpy_of_density`; zero for ``u <= 0``."""
    u = np.asarray(u, dtype=float)
    y = np.where(u > 0, u, 0.0) / eos.c_light ** 2
    x = eos.scaled_enthalpy_inverse(y)
    rho = (eos.c_light ** 2 * x / eos.A_poly) ** eos.n_index
    return np.where(u > 0, rho, 0.0)


def newtonian_density_of_enthalpy(u, eos: EosParams):
    """``f_rho(u) = ((gamma-1)/(A gamma))^n (u v 0)^n``."""
    return (eos.k_ratio / eos.A_poly) ** eos.n_index * _positive_power(u, eos.n_index)


def h_rho(w, u_N, eos: EosParams):
    """Second-order remainder of the Newtonian density map.

    ``H(w) = f(u_N + w/c^2) - f(u_N) - Df(u_N) w/c^2`` where ``f`` is
    :func:`newtonian_density_of_enthalpy` and ``Df`` is set to zero where
    ``u_N <= 0``.
    """
    w = np.asarray(w, dtype=float)
    u_N = np.asarray(u_N, dtype=float)
    n = eos.n_index
    dw = w / eos.c_light ** 2
    coef = (eos.k_ratio / eos.A_poly) ** n
    u = u_N + dw
    both = (u_N > 0) & (u > 0)
    safe_uN = np.where(both, u_N, 1.0)
    inner = coef * safe_uN ** n * powm1_minus_linear(np.where(both, dw / safe_uN, 0.0), n)
    f_u = newtonian_density_of_enthalpy(u, eos)
    f_uN = newtonian_density_of_enthalpy(u_N, eos)
    df = coef * n * _positive_power(u_N, n - 1.0)
    other = f_u - f_uN - df * dw
    return np.where(both, inner, other)


def sound_speed_squared(rho, eos: EosParams):
    """``dP/drho`` in closed form."""
    rho = _check_density(rho)
    x = eos.A_poly * rho ** (eos.gamma - 1.0) / eos.c_light ** 2
    lam = eos.Lambda(x)
    return eos.c_light ** 2 * x * (eos.gamma * (1.0 + lam) + (eos.gamma - 1.0) * x * eos.dLambda(x))


def check_sound_speed(eos: EosParams, rho_max: float, rho_min: float | None = None, n_samples: int = 100):
    """Verify ``P > 0`` and ``0 < dP/drho < c^2`` on log-spaced densities.

    The derivative is estimated by centred finite differences.  Raises
    :class:`ConfigError` on violation and returns the largest ratio
    ``(dP/drho)/c^2`` otherwise.
    """
    if rho_min is None:
        rho_min = rho_max * 1e-8
    rho = np.geomspace(rho_min, rho_max, n_samples)
    eps = 1e-6
    dp = (pressure_of_density(rho * (1 + eps), eos) - pressure_of_density(rho * (1 - eps), eos)) / (2 * eps * rho)
    p = pressure_of_density(rho, eos)
    ratio = dp / eos.c_light ** 2
    if np.any(p <= 0) or np.any(ratio <= 0) or np.any(ratio >= 1):
        bad = rho[np.argmax((p <= 0) | (ratio <= 0) | (ratio >= 1))]
        raise ConfigError(
            f"equation of state violates 0 < dP/drho < c^2 (or P > 0) at rho={bad:.6g}")
    return float(ratio.max())


# ---------------------------------------------------------------------------
# star parameters
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StarParams:
    """Derived scales of a star with central enthalpy ``u_O``.

    Attributes
    ----------
    u_O, tau, a_len, b_rot, Omega, rho_O, n_index : float
    """

    u_O: float
    tau: float
    a_len: float
    b_rot: float
    Omega: float
    rho_O: float
    n_index: float

    @property
    def beta(self) -> float:
        """Dimensionless ``Omega a / c = sqrt(b tau / 2)``."""
        return float(np.sqrt(0.5 * self.b_rot * self.tau))


def newtonian_params(u_O: float, b_rot: float, eos: EosParams) -> StarParams:
    """Scales of the Newtonian star with central enthalpy ``u_O``.

    ``rho_O`` is the Newtonian central density, ``a`` the Lane-Emden length
    and ``Omega`` follows from ``b = Omega^2 / (2 pi G rho_O)``.
    """
    if not u_O > 0:
        raise ConfigError("central enthalpy u_O must be positive")
    if b_rot < 0:
        raise ConfigError("rotation parameter b must be non-negative")
    g = eos.gamma
    rho_O = float(newtonian_density_of_enthalpy(u_O, eos))
    a = np.sqrt(eos.A_poly * g / (4 * np.pi * eos.G_grav * (g - 1))) * rho_O ** (-(2 - g) / 2)
    Omega = np.sqrt(2 * np.pi * eos.G_grav * rho_O * b_rot)
    return StarParams(u_O=float(u_O), tau=float(u_O / eos.c_light ** 2), a_len=float(a),
                      b_rot=float(b_rot), Omega=float(Omega), rho_O=rho_O, n_index=eos.n_index)


def params_from_tau(tau: float, b_rot: float, eos: EosParams) -> StarParams:
    """Convenience wrapper: choose ``u_O = tau c^2``."""
    return newtonian_params(tau * eos.c_light ** 2, b_rot, eos)


# ---------------------------------------------------------------------------
# dimensionless closures
# ---------------------------------------------------------------------------

def rho_hat(uhat, tau: float, eos: EosParams):
    """Density over ``rho_O`` at scaled enthalpy ``uhat = u/u_O``."""
    uhat = np.asarray(uhat, dtype=float)
    pos = uhat > 0
    up = np.where(pos, uhat, 0.0)
    n = eos.n_index
    if eos.is_exact_polytrope:
        q = exprel_minus_one(eos.k_ratio * tau * up)
        out = up ** n * np.exp(n * np.log1p(q))
    else:
        x = eos.scaled_enthalpy_inverse(tau * up)
        out = (x / (eos.k_ratio * tau)) ** n
    return np.where(pos, out, 0.0)


def p_hat(rhohat, tau: float, eos: EosParams):
    """Pressure over ``rho_O u_O`` at scaled density ``rhohat``."""
    rhohat = np.asarray(rhohat, dtype=float)
    rg = rhohat ** eos.gamma
    if eos.is_exact_polytrope:
        return eos.k_ratio * rg
    x = eos.k_ratio * tau * rhohat ** (eos.gamma - 1.0)
    return eos.k_ratio * rg * (1.0 + eos.Lambda(x))


def density_defect_over_tau(theta, w, tau: float, eos: EosParams):
    """Return ``(rho - rho_N)/tau - n theta^(n-1) w - lambda1 rho_N theta``.

    ``rho = rho_hat(theta + tau w)`` and ``rho_N = (theta v 0)^n``.  This is
    the density part of the w-equation remainder; it is O(tau) and is
    assembled from stable pieces for the exact polytrope.
    """
    theta = np.asarray(theta, dtype=float)
    w = np.asarray(w, dtype=float)
    n = eos.n_index
    lam1 = eos.lambda1_density
    u = theta + tau * w
    rho_N = _positive_power(theta, n)
    m = n * _positive_power(theta, n - 1.0)
    if not eos.is_exact_polytrope:
        return (rho_hat(u, tau, eos) - rho_N) / tau - m * w - lam1 * rho_N * theta
    both = (theta > 0) & (u > 0)
    th = np.where(both, theta, 1.0)
    s = np.where(both, tau * w / th, 0.0)
    # Newtonian curvature part
    curv = th ** n * powm1_minus_linear(s, n) / tau
    # relativistic density factor part: f(u) u (Lambda_rho(x)/x - lambda1)
    up = np.where(both, u, 1.0)
    x = tau * up
    q = exprel_minus_one(eos.k_ratio * x)
    lam_ratio = _lambda_rho_over_x(x, q, n, lam1)
    fu = up ** n
    rel = fu * up * (lam_ratio - lam1) + lam1 * th ** (n + 1) * np.expm1((n + 1) * np.log1p(s))
    inner = curv + rel
    other = (rho_hat(u, tau, eos) - rho_N) / tau - m * w - lam1 * rho_N * theta
    return np.where(both, inner, other)


def _lambda_rho_over_x(x, q, n, lam1):
    """``Lambda_rho(x)/x`` with ``1 + Lambda_rho = (1 + q)^n``."""
    tiny = x < 1e-12
    xs = np.where(tiny, 1.0, x)
    val = np.expm1(n * np.log1p(q)) / xs
    return np.where(tiny, lam1, val)
