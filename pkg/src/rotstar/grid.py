"""Uniform grids on the quarter plane, axisymmetric fields and discrete calculus.

A field is stored on ``[0, xi0] x [0, xi0]`` in the dimensionless
cylindrical coordinates ``(varpi, z)``; the rest of the meridional plane is
represented through the parities of the field in ``varpi`` and ``z``.
Arrays are indexed ``values[i, j]`` with ``i`` along ``varpi`` and ``j``
along ``z``.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field as dc_field
from functools import cached_property

import numpy as np
from scipy.integrate import cumulative_simpson

from .errors import ArtifactIOError, ContractViolation

EVEN, ODD = 1, -1


@dataclass(frozen=True)
class AxiGrid:
    """Square node grid with ``n_cells`` points per axis on ``[0, xi0]``."""

    xi0: float
    n_cells: int

    def __post_init__(self):
        if self.n_cells < 33:
            raise ContractViolation("n_cells must be at least 33")
        if not self.xi0 > 0:
            raise ContractViolation("xi0 must be positive")

    @property
    def h(self) -> float:
        return self.xi0 / (self.n_cells - 1)

    @cached_property
    def x(self) -> np.ndarray:
        """1-D node coordinates, shared by both axes."""
        return np.linspace(0.0, self.xi0, self.n_cells)

    @cached_property
    def varpi(self) -> np.ndarray:
        return np.broadcast_to(self.x[:, None], self.shape)

    @cached_property
    def z(self) -> np.ndarray:
        return np.broadcast_to(self.x[None, :], self.shape)

    @cached_property
    def r(self) -> np.ndarray:
        return np.hypot(self.varpi, self.z)

    @property
    def shape(self):
        return (self.n_cells, self.n_cells)

    def refined(self) -> "AxiGrid":
        """Grid with the spacing halved."""
        return AxiGrid(self.xi0, 2 * self.n_cells - 1)

    def coarsened(self) -> "AxiGrid":
        return AxiGrid(self.xi0, (self.n_cells + 1) // 2)

    def interior_mask(self, radius: float, collar: int = 0) -> np.ndarray:
        """Nodes with ``r <= radius`` and at least ``collar`` nodes off the outer edges."""
        m = self.r <= radius + 1e-12
        if collar:
            m = m.copy()
            m[-collar:, :] = False
            m[:, -collar:] = False
        return m


@dataclass
class ScalarField:
    """Node values of an axisymmetric field with definite parities.

    Parameters
    ----------
    grid : AxiGrid
    values : ndarray, shape ``grid.shape``
    parity : tuple of int
        ``(parity in varpi, parity in z)``, each ``+1`` (even) or ``-1``.
    """

    grid: AxiGrid
    values: np.ndarray
    parity: tuple = (EVEN, EVEN)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise ContractViolation(
                f"values shape {self.values.shape} does not match grid {self.grid.shape}")
        self.parity = (int(self.parity[0]), int(self.parity[1]))

    @classmethod
    def from_function(cls, grid: AxiGrid, func, parity=(EVEN, EVEN)) -> "ScalarField":
        return cls(grid, func(grid.varpi, grid.z), parity)

    @classmethod
    def zeros(cls, grid: AxiGrid, parity=(EVEN, EVEN)) -> "ScalarField":
        return cls(grid, np.zeros(grid.shape), parity)

    def with_values(self, values, parity=None) -> "ScalarField":
        return ScalarField(self.grid, values, self.parity if parity is None else parity)

    def sup(self, mask=None) -> float:
        v = self.values if mask is None else self.values[mask]
        return float(np.max(np.abs(v))) if v.size else 0.0

    def __add__(self, other):
        return self.with_values(self.values + _vals(other))

    def __sub__(self, other):
        return self.with_values(self.values - _vals(other))

    def __mul__(self, s):
        return self.with_values(self.values * _vals(s))

    __rmul__ = __mul__

    def __neg__(self):
        return self.with_values(-self.values)


def _vals(obj):
    return obj.values if isinstance(obj, ScalarField) else obj


def same_grid(*fields: ScalarField) -> AxiGrid:
    g = fields[0].grid
    for f in fields[1:]:
        if f.grid != g:
            raise ContractViolation("fields live on different grids")
    return g


# ---------------------------------------------------------------------------
# array-level finite differences
# ---------------------------------------------------------------------------

def _move(a, axis):
    return np.moveaxis(a, axis, 0)


def d1(a: np.ndarray, h: float, axis: int, parity: int) -> np.ndarray:
    """First derivative along ``axis`` with a parity ghost node at 0."""
    a = np.asarray(a, dtype=float)
    b = _move(a, axis)
    out = np.empty_like(b)
    out[1:-1] = (b[2:] - b[:-2]) / (2 * h)
    out[0] = (1 - parity) * b[1] / (2 * h)
    out[-1] = (3 * b[-1] - 4 * b[-2] + b[-3]) / (2 * h)
    return np.moveaxis(out, 0, axis)


def d2(a: np.ndarray, h: float, axis: int, parity: int) -> np.ndarray:
    """Second derivative along ``axis`` with a parity ghost node at 0."""
    a = np.asarray(a, dtype=float)
    b = _move(a, axis)
    out = np.empty_like(b)
    h2 = h * h
    out[1:-1] = (b[2:] - 2 * b[1:-1] + b[:-2]) / h2
    out[0] = ((1 + parity) * b[1] - 2 * b[0]) / h2
    out[-1] = (2 * b[-1] - 5 * b[-2] + 4 * b[-3] - b[-4]) / h2
    return np.moveaxis(out, 0, axis)


def over_varpi(dv: np.ndarray, dvv: np.ndarray, grid: AxiGrid) -> np.ndarray:
    """``f_varpi / varpi`` for an even-in-varpi field, regular limit on the axis."""
    out = np.empty_like(dv)
    out[1:] = dv[1:] / grid.x[1:, None]
    out[0] = dvv[0]
    return out


@dataclass
class Jet:
    """Value and derivatives up to second order of a field at the nodes."""

    v: np.ndarray
    d1: np.ndarray
    d3: np.ndarray
    d11: np.ndarray
    d33: np.ndarray
    d13: np.ndarray
    over1: np.ndarray = dc_field(default=None)

    @classmethod
    def of(cls, values: np.ndarray, grid: AxiGrid, parity=(EVEN, EVEN)) -> "Jet":
        h = grid.h
        pv, pz = parity
        fv = d1(values, h, 0, pv)
        fz = d1(values, h, 1, pz)
        fvv = d2(values, h, 0, pv)
        fzz = d2(values, h, 1, pz)
        fvz = d1(fz, h, 0, pv)
        ov = over_varpi(fv, fvv, grid) if pv == EVEN else None
        return cls(values, fv, fz, fvv, fzz, fvz, ov)

    @classmethod
    def zeros_like(cls, shape) -> "Jet":
        z = np.zeros(shape)
        return cls(z, z, z, z, z, z, z)


# ---------------------------------------------------------------------------
# field-level operations
# ---------------------------------------------------------------------------

_WHICH = {
    "dvarpi": (1, 0), "dϖ": (1, 0),
    "dz": (0, 1),
    "dvarpivarpi": (2, 0), "dϖϖ": (2, 0),
    "dzz": (0, 2),
    "dvarpiz": (1, 1), "dϖz": (1, 1),
}


def derive(field: ScalarField, which: str) -> ScalarField:
    """Finite-difference derivative of ``field``.

    ``which`` is one of ``dvarpi, dz, dvarpivarpi, dzz, dvarpiz`` (the Greek
    spellings ``dϖ, dϖϖ, dϖz`` are accepted too).  Second-order centred
    stencils, parity ghost nodes on the axis and the equator, second-order
    one-sided stencils on the outer edges.
    """
    try:
        kv, kz = _WHICH[which]
    except KeyError:
        raise ContractViolation(f"unknown derivative {which!r}") from None
    g = field.grid
    pv, pz = field.parity
    v = field.values
    if kv == 1:
        v = d1(v, g.h, 0, pv)
        pv = -pv
    elif kv == 2:
        v = d2(v, g.h, 0, pv)
    if kz == 1:
        v = d1(v, g.h, 1, pz)
        pz = -pz
    elif kz == 2:
        v = d2(v, g.h, 1, pz)
    return ScalarField(g, v, (pv, pz))


def axi_laplacian_values(values: np.ndarray, grid: AxiGrid, n_dim: int, pz: int = EVEN) -> np.ndarray:
    h = grid.h
    fv = d1(values, h, 0, EVEN)
    fvv = d2(values, h, 0, EVEN)
    fzz = d2(values, h, 1, pz)
    return fvv + (n_dim - 2) * over_varpi(fv, fvv, grid) + fzz


def axi_laplacian(field: ScalarField, n_dim: int) -> ScalarField:
    """Laplacian of the ``n_dim``-dimensional axisymmetric lift of ``field``.

    ``Q_vv + (n-2)/varpi Q_v + Q_zz``; on the axis the singular term is
    replaced by its limit ``(n-2) Q_vv``.
    """
    if n_dim not in (3, 4, 5):
        raise ContractViolation("n_dim must be 3, 4 or 5")
    if field.parity[0] != EVEN:
        raise ContractViolation("axi_laplacian needs a field even in varpi")
    return ScalarField(field.grid, axi_laplacian_values(field.values, field.grid, n_dim, field.parity[1]),
                       field.parity)


# ---------------------------------------------------------------------------
# Hölder-type norms
# ---------------------------------------------------------------------------

_DIRECTIONS = ((1, 0), (0, 1), (1, 1), (1, -1))


def holder_seminorm(values: np.ndarray, grid: AxiGrid, alpha: float, mask=None) -> float:
    """Sampled Hölder seminorm ``sup |f(x)-f(y)| / |x-y|^alpha``.

    Pairs are taken along the axis and diagonal directions at node
    separations ``1, 2, 4, ...`` up to a quarter of the domain; with a mask
    both nodes of a pair must lie inside it.
    """
    if not 0 < alpha < 1:
        raise ContractViolation("alpha must lie in (0, 1)")
    n = grid.n_cells
    if mask is None:
        mask = np.ones(grid.shape, dtype=bool)
    best = 0.0
    s = 1
    smax = max(1, (n - 1) // 4)
    while s <= smax:
        for di, dj in _DIRECTIONS:
            si, sj = di * s, dj * s
            i0, i1 = 0, n - si
            if sj >= 0:
                j0, j1 = 0, n - sj
            else:
                j0, j1 = -sj, n
            a = values[i0:i1, j0:j1]
            b = values[i0 + si:i1 + si, j0 + sj:j1 + sj]
            m = mask[i0:i1, j0:j1] & mask[i0 + si:i1 + si, j0 + sj:j1 + sj]
            if not m.any():
                continue
            dist = grid.h * s * np.hypot(di, dj)
            q = np.max(np.abs(b - a)[m]) / dist ** alpha
            best = max(best, float(q))
        s *= 2
    return best


def _derivative_arrays(field: ScalarField, order: int):
    """All derivatives of exact order ``order`` (multi-indices in varpi, z)."""
    if order == 0:
        return [field.values]
    if order == 1:
        return [derive(field, "dvarpi").values, derive(field, "dz").values]
    return [derive(field, "dvarpivarpi").values, derive(field, "dvarpiz").values,
            derive(field, "dzz").values]


def holder_norm(field: ScalarField, l: int, alpha: float, mask=None) -> float:
    """Discrete ``C^{l, alpha}`` norm estimate.

    Sum of the sup norms of all derivatives of order ``<= l`` plus the
    largest sampled Hölder seminorm of the order-``l`` derivatives.
    """
    if l not in (0, 1, 2):
        raise ContractViolation("l must be 0, 1 or 2")
    g = field.grid
    total = 0.0
    top = []
    for order in range(l + 1):
        arrs = _derivative_arrays(field, order)
        for a in arrs:
            total += float(np.max(np.abs(a if mask is None else a[mask])))
        if order == l:
            top = arrs
    semi = max(holder_seminorm(a, g, alpha, mask) for a in top)
    return total + semi


def c_norm(field: ScalarField, l: int, mask=None) -> float:
    """Discrete ``C^l`` norm (sup norms of derivatives through order ``l``)."""
    total = 0.0
    for order in range(l + 1):
        for a in _derivative_arrays(field, order):
            total += float(np.max(np.abs(a if mask is None else a[mask])))
    return total


# ---------------------------------------------------------------------------
# quadrature of a gradient field
# ---------------------------------------------------------------------------

def _cumsimpson(a: np.ndarray, h: float, axis: int) -> np.ndarray:
    return cumulative_simpson(a, dx=h, axis=axis, initial=0.0)


def quadrature_from_gradient(g1: ScalarField, g3: ScalarField, path: str = "canonical") -> ScalarField:
    """Integrate ``(g1, g3) = grad F`` with ``F(0, 0) = 0``.

    ``path='canonical'`` goes up the axis, then along ``varpi``:
    ``F = int_0^z g3(0, z') dz' + int_0^varpi g1(varpi', z) dvarpi'``.
    ``path='transposed'`` goes along the equator first, then along ``z``.
    Composite Simpson rule on the grid lines.
    """
    g = same_grid(g1, g3)
    h = g.h
    a1, a3 = g1.values, g3.values
    if path == "canonical":
        axis_part = _cumsimpson(a3[0, :], h, 0)
        F = axis_part[None, :] + _cumsimpson(a1, h, 0)
    elif path == "transposed":
        eq_part = _cumsimpson(a1[:, 0], h, 0)
        F = eq_part[:, None] + _cumsimpson(a3, h, 1)
    else:
        raise ContractViolation(f"unknown path {path!r}")
    F[0, 0] = 0.0
    return ScalarField(g, F, (EVEN, EVEN))


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

_MAGIC = b"AXF1"


def save_field(field: ScalarField, path, fmt: str = "csv") -> None:
    """Write a field as CSV (``varpi,z,value``) or the ``AXF1`` binary format."""
    g = field.grid
    try:
        if fmt == "csv":
            data = np.column_stack([g.varpi.ravel(), g.z.ravel(), field.values.ravel()])
            np.savetxt(path, data, delimiter=",", header="varpi,z,value", comments="", fmt="%.17g")
        elif fmt == "bin":
            with open(path, "wb") as fh:
                fh.write(_MAGIC)
                fh.write(struct.pack("<qd", g.n_cells, g.xi0))
                fh.write(struct.pack("<ii", *field.parity))
                fh.write(np.ascontiguousarray(field.values, dtype="<f8").tobytes())
        else:
            raise ContractViolation(f"unknown format {fmt!r}")
    except OSError as exc:
        raise ArtifactIOError(str(exc)) from exc


def load_field(path, parity=(EVEN, EVEN)) -> ScalarField:
    """Read a field written by :func:`save_field` (format from the content)."""
    try:
        with open(path, "rb") as fh:
            head = fh.read(4)
            if head == _MAGIC:
                n, xi0 = struct.unpack("<qd", fh.read(16))
                par = struct.unpack("<ii", fh.read(8))
                vals = np.frombuffer(fh.read(), dtype="<f8").reshape(n, n).copy()
                return ScalarField(AxiGrid(float(xi0), int(n)), vals, par)
        data = np.loadtxt(path, delimiter=",", skiprows=1)
    except OSError as exc:
        raise ArtifactIOError(str(exc)) from exc
    n = int(round(np.sqrt(data.shape[0])))
    xi0 = float(data[:, 0].max())
    return ScalarField(AxiGrid(xi0, n), data[:, 2].reshape(n, n), parity)
