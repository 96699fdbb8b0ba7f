"""Shared test utilities: exact sources and refinement slopes."""
import numpy as np
from scipy.integrate import quad


def ball_source(grid, n_dim, radius=1.0):
    """Exact control-volume averages of the indicator of ``r <= radius``.

    The average uses the measure ``varpi^(n-2) dvarpi dz`` over the cell
    ``[x_i - h/2, x_i + h/2] x [x_j - h/2, x_j + h/2]`` (clipped at 0).
    """
    p = n_dim - 2
    h = grid.h
    x = grid.x
    lo = np.maximum(x - 0.5 * h, 0.0)
    hi = x + 0.5 * h
    out = np.zeros(grid.shape)
    for i in range(grid.n_cells):
        a, b = lo[i], hi[i]
        mass = (b ** (p + 1) - a ** (p + 1)) / (p + 1)
        for j in range(grid.n_cells):
            c, d = lo[j], hi[j]
            rmin = np.hypot(a, c)
            rmax = np.hypot(b, d)
            if rmax <= radius:
                out[i, j] = 1.0
                continue
            if rmin >= radius:
                continue

            def inner(zz):
                top = min(b, np.sqrt(max(radius * radius - zz * zz, 0.0)))
                return max(top ** (p + 1) - a ** (p + 1), 0.0) / (p + 1)

            zmax = min(d, radius)
            val = quad(inner, c, zmax, epsabs=1e-15, epsrel=1e-13, limit=200,
                       points=[np.sqrt(max(radius ** 2 - b * b, 0.0))] if c < np.sqrt(max(radius ** 2 - b * b, 0.0)) < zmax else None)[0]
            out[i, j] = val / (mass * (d - c))
    return out


def ball_center_value(n_dim):
    """Potential at the centre of the unit ball of unit density."""
    return 1.0 / (2.0 * (n_dim - 2))


def slope(errors):
    """Least-squares log2 slope for errors at successively halved spacings."""
    e = np.log2(np.abs(np.asarray(errors, dtype=float)))
    k = np.arange(len(e))
    return -np.polyfit(k, e, 1)[0]


def manufactured_point_data(tau, b, eos, n_points=400, seed=0, varpi_min=0.05, extent=1.5):
    """Analytic jets at random points for the expanded-vs-literal checks.

    ``phi`` is a polynomial whose three-dimensional Laplacian is positive on
    the sample region; ``Theta`` is defined from it so that
    ``Lap3 phi = Theta^n`` holds exactly.
    """
    import sympy as s
    from rotstar.grid import Jet
    from rotstar.pn.equations import PointData

    v, z = s.symbols("varpi z", real=True)
    phi = -2 + s.Rational(3, 10) * v ** 2 + s.Rational(1, 5) * z ** 2 - s.Rational(1, 20) * v ** 2 * z ** 2 \
        + s.Rational(1, 100) * v ** 4
    exprs = {
        "w": s.Rational(3, 10) * s.cos(v) * s.exp(-z ** 2) - s.Rational(3, 10) + s.Rational(1, 10) * v ** 2 * z ** 2,
        "Y": s.Rational(1, 2) + s.Rational(1, 5) * v ** 2 - s.Rational(1, 4) * s.cos(z) * s.exp(-v ** 2 / 3),
        "X": -s.Rational(2, 5) + s.Rational(1, 3) * s.exp(-(v ** 2 + 2 * z ** 2) / 4) + s.Rational(1, 10) * z ** 2,
        "phi": phi,
    }
    rng = np.random.default_rng(seed)
    pv = rng.uniform(varpi_min, extent, n_points)
    pz = rng.uniform(0.0, extent, n_points)

    def jet(e):
        f = lambda ex: s.lambdify((v, z), ex, "numpy")
        ev = lambda ex: np.broadcast_to(np.asarray(f(ex)(pv, pz), dtype=float), pv.shape).copy()
        d1 = s.diff(e, v)
        return Jet(ev(e), ev(d1), ev(s.diff(e, z)), ev(s.diff(e, v, 2)), ev(s.diff(e, z, 2)),
                   ev(s.diff(e, v, z)), ev(s.simplify(d1 / v)))

    lap = s.diff(phi, v, 2) + s.diff(phi, v) / v + s.diff(phi, z, 2)
    rhoN = np.asarray(s.lambdify((v, z), lap, "numpy")(pv, pz), dtype=float)
    theta = rhoN ** (1.0 / eos.n_index)
    V = np.asarray(s.lambdify((v, z), s.Rational(1, 2) * v ** 2 - s.Rational(3, 10) * z ** 2 + s.sin(v * z), "numpy")(pv, pz), dtype=float)
    return PointData(pv, theta, jet(exprs["phi"]), jet(exprs["w"]), jet(exprs["Y"]), jet(exprs["X"]), V,
                     tau, b, eos)


def manufactured_lewis(seed):
    """Random smooth stationary axisymmetric metric with exact jets.

    Returns a function ``jets(varpi, z)`` giving ``FieldJet`` objects for
    ``f, k, l, m, Pi``.  The Lanczos-type functions are

    ``F = -a1 / (1 + c1 r^2)``, ``K = F + a2 cos(c2 varpi) cos(c3 z)``,
    ``A = a3 varpi^2 exp(-c4 r^2)``, ``Pi = varpi (1 + a4 exp(-c5 r^2))``

    with coefficients drawn from ``seed``.
    """
    import sympy as s
    from rotstar.verify import FieldJet

    rng = np.random.default_rng(seed)
    a1, a2, a3, a4 = (s.Float(x, 17) for x in rng.uniform([0.05, -0.2, -0.4, -0.3], [0.4, 0.2, 0.4, 0.3]))
    c1, c2, c3, c4, c5 = (s.Float(x, 17) for x in rng.uniform(0.3, 1.5, 5))
    v, z = s.symbols("varpi z", real=True)
    r2 = v ** 2 + z ** 2
    F = -a1 / (1 + c1 * r2)
    K = F + a2 * s.cos(c2 * v) * s.cos(c3 * z)
    A = a3 * v ** 2 * s.exp(-c4 * r2)
    Pi = v * (1 + a4 * s.exp(-c5 * r2))
    exprs = {
        "f": s.exp(2 * F),
        "k": -s.exp(2 * F) * A,
        "l": -s.exp(2 * F) * A ** 2 + s.exp(-2 * F) * Pi ** 2,
        "m": 2 * (K - F),
        "Pi": Pi,
    }
    funcs = {}
    for name, e in exprs.items():
        parts = (e, s.diff(e, v), s.diff(e, z), s.diff(e, v, 2), s.diff(e, z, 2), s.diff(e, v, z))
        funcs[name] = [s.lambdify((v, z), p, "numpy") for p in parts]

    def jets(pv, pz):
        out = {}
        for name, fs in funcs.items():
            vals = [np.broadcast_to(np.asarray(f(pv, pz), dtype=float), np.shape(pv)).copy() for f in fs]
            out[name] = FieldJet(*vals)
        return out

    return jets


def ricci_refinement(seed, grids=(33, 65, 129), extent=2.0, axis_gap=0.5):
    """Sup errors per component of the grid Ricci tensor against the brute-force oracle.

    Nodes closer than ``axis_gap`` to the axis and the last two rows and
    columns are left out.
    """
    from rotstar.grid import AxiGrid
    from rotstar.verify import COMPONENTS, LewisFields, ricci_components, ricci_oracle_from_jets

    J = manufactured_lewis(seed)
    errs = {k: [] for k in COMPONENTS}
    for n in grids:
        g = AxiGrid(extent, n)
        j = J(g.varpi, g.z)
        lf = LewisFields(g, 0.0, j["f"].v, j["k"].v, j["l"].v, j["m"].v, j["Pi"].v, j["f"].v, j["k"].v)
        R = ricci_components(lf)
        m = g.varpi >= axis_gap
        m[-2:] = False
        m[:, -2:] = False
        jo = J(g.varpi[m], g.z[m])
        O = ricci_oracle_from_jets(jo["f"], jo["k"], jo["l"], jo["m"])
        for k in COMPONENTS:
            errs[k].append(float(np.max(np.abs(R[k][m] - O[k]))))
    return errs


def random_fluid_state(rng, n=200):
    """Random Lewis fields of a rigidly rotating fluid with ``B1 > 0``."""
    from rotstar.verify import lewis_arrays

    F = rng.uniform(-0.3, 0.1, n)
    K = rng.uniform(-0.3, 0.3, n)
    A = rng.uniform(-0.5, 0.5, n)
    Pi = rng.uniform(0.05, 3.0, n)
    beta = float(rng.uniform(0.0, 0.1))
    f, k, l, m = lewis_arrays(F, K, A, Pi)
    ok = f - 2 * beta * k - beta ** 2 * l > 0.05
    eps = rng.uniform(0.0, 0.1, n)
    p = rng.uniform(0.0, 0.02, n)
    return dict(f=f[ok], k=k[ok], l=l[ok], m=m[ok], Pi=Pi[ok], eps=eps[ok], p=p[ok], beta=beta)
