"""Command line runner.

Every subcommand writes into ``--out`` (default from the config): JSON
reports, field files and a ``manifest.json`` with the build id, the config
hash and the SHA-256 of each artifact.  Reports are deterministic; wall-clock
timings go to ``timings.json``, which the manifest lists but does not hash.

Exit codes: 0 success, 2 invalid input, 3 convergence or data failure (the
report is still written), 4 input/output failure.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import subprocess
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np
import yaml

from .config import FORMATS, RunConfig, build_config, read_document
from .errors import ArtifactIOError, ConfigError, IterationDiverged, RotstarError
from .grid import EVEN, ODD, ScalarField, load_field, save_field
from .lane_emden import (default_cutoff, default_grid, kernel_proxy, mirrored_spline, solve_distorted,
                         solve_lane_emden)

log = logging.getLogger("rotstar")

SUBCOMMANDS = ("lane-emden", "distorted", "solve", "verify", "tov-compare", "sweep", "export")
FIELD_PARITY = {"w": (EVEN, EVEN), "Y": (EVEN, EVEN), "X": (EVEN, EVEN), "V": (EVEN, EVEN),
                "Fp": (EVEN, EVEN), "Kp": (EVEN, EVEN), "Ap": (EVEN, EVEN), "Pi": (ODD, EVEN),
                "u": (EVEN, EVEN)}
VOLATILE = ("timings.json", "manifest.json")


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------

def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if np.isfinite(v) else str(v)
    return obj


def write_json(path, obj):
    """Deterministic JSON (sorted keys, non-finite numbers as strings)."""
    try:
        with open(path, "w") as fh:
            json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise ArtifactIOError(f"cannot write {path}: {exc}") from exc


def read_json(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ArtifactIOError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ArtifactIOError(f"{path} is not valid JSON: {exc}") from exc


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def build_id() -> str:
    """``git describe`` of the source tree, or the package version."""
    here = Path(__file__).resolve().parent
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"], cwd=here,
                             capture_output=True, text=True, timeout=10)
        if out.returncode == 0 and out.stdout.strip():
            return out.stdout.strip()
    except (OSError, subprocess.SubprocessError):
        pass
    try:
        from importlib.metadata import version
        return f"v{version('artifact')}"
    except Exception:
        return "unknown"


def prepare_out(path) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write_probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise ArtifactIOError(f"output directory {out} is not writable: {exc}") from exc
    return out


def write_manifest(out: Path, rc: RunConfig, subcommand: str, config_path=None, extra=None):
    arts = {}
    for p in sorted(out.rglob("*")):
        if p.is_file() and p.name not in VOLATILE and not p.name.startswith("."):
            arts[str(p.relative_to(out))] = _sha256(p)
    man = {
        "subcommand": subcommand,
        "build_id": build_id(),
        "config_hash": rc.hash(),
        "inputs": {"config": str(config_path) if config_path else None,
                   "config_sha256": _sha256(config_path) if config_path else None},
        "artifacts": arts,
        "volatile": [v for v in VOLATILE if (out / v).exists() or v == "manifest.json"],
    }
    if extra:
        man.update(extra)
    write_json(out / "manifest.json", man)
    return man


def save_config(out: Path, rc: RunConfig):
    try:
        with open(out / "config.yaml", "w") as fh:
            yaml.safe_dump(rc.to_dict(), fh, sort_keys=True)
    except OSError as exc:
        raise ArtifactIOError(f"cannot write config copy: {exc}") from exc


def _field_name(name, fmt):
    return f"{name}.{'csv' if fmt == 'csv' else 'bin'}"


def save_fields(out: Path, fields: dict, grid, fmt: str):
    fdir = out / "fields"
    fdir.mkdir(exist_ok=True)
    for name, values in fields.items():
        save_field(ScalarField(grid, values, FIELD_PARITY.get(name, (EVEN, EVEN))), fdir / _field_name(name, fmt), fmt)


def load_fields(solve_dir: Path, names) -> dict:
    fdir = solve_dir / "fields"
    out = {}
    for name in names:
        cands = [fdir / f"{name}.bin", fdir / f"{name}.csv"]
        path = next((c for c in cands if c.exists()), None)
        if path is None:
            raise ArtifactIOError(f"missing field {name} in {fdir}")
        out[name] = load_field(path, FIELD_PARITY.get(name, (EVEN, EVEN)))
    return out


def workers_from(args) -> int:
    if args.workers is not None:
        return max(1, int(args.workers))
    env = os.environ.get("ROTSTAR_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError(f"ROTSTAR_WORKERS must be an integer, got {env!r}") from exc
    return 1


def loglog_slope(x, y) -> float:
    """Least-squares slope of ``log|y|`` against ``log x``."""
    x, y = np.asarray(x, float), np.abs(np.asarray(y, float))
    ok = (x > 0) & (y > 0) & np.isfinite(y)
    if ok.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(x[ok]), np.log(y[ok]), 1)[0])


# ---------------------------------------------------------------------------
# solve pipeline pieces (also used by sweep workers)
# ---------------------------------------------------------------------------

def _xi1_of(dle):
    zc, xc = dle.curve
    return zc, xc, (lambda z: np.interp(np.abs(z), zc, xc))


def run_solve(cfg):
    """Solve and post-process one configuration.

    Returns ``(state, report, ctx, mb, surface, summary)``; ``mb`` and
    ``surface`` are ``None`` when the corresponding step failed (the
    reason is in ``summary['errors']``).
    """
    from .pn.metric import assemble_metric, b1_expression, b2_expression, to_static_frame
    from .pn.solver import outer_solve
    from .surface import find_boundary, physical_vacuum_check

    state, rep, ctx = outer_solve(cfg)
    summary = {"errors": []}
    mb = surface = None
    try:
        mb = to_static_frame(assemble_metric(state, ctx))
        b1 = b1_expression(mb.Fp, mb.Ap, mb.Pi, mb.beta)
        b2 = b2_expression(mb.Pi, mb.grid)
        m = ctx.norm_mask
        summary["B1_min"] = float(np.min(b1))
        summary["B1_deviation"] = float(np.max(np.abs(b1[m] - 1)))
        summary["B2_min"] = float(np.min(b2))
    except RotstarError as exc:
        summary["errors"].append(f"metric: {exc}")
    if mb is not None:
        zc, xc, _ = _xi1_of(ctx.bg.dle)
        try:
            u = ScalarField(ctx.grid, mb.u)
            surface = find_boundary(u, ctx.bg.dle, ctx.params)
            lo, hi, ok = physical_vacuum_check(u, surface)
            summary["surface"] = {
                "R_equator": float(surface.R[0]), "R_pole": float(surface.R[-1]),
                "oblate": bool(surface.R[0] > surface.R[-1]),
                "gap_to_newtonian": float(np.max(np.abs(surface.R - xc))),
                "du_dN_min": lo, "du_dN_max": hi, "du_dN_variation": float(np.ptp(surface.du_dN)),
                "physical_vacuum": ok,
            }
        except RotstarError as exc:
            summary["errors"].append(f"surface: {exc}")
    p = ctx.params
    summary["physical"] = {"a_len": p.a_len, "Omega": p.Omega, "rho_O": p.rho_O, "u_O": p.u_O,
                           "beta": p.beta}
    return state, rep, ctx, mb, surface, summary


def solve_report(rep, summary) -> dict:
    d = rep.to_dict()
    d.pop("timings", None)
    d.update(summary)
    return d


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_lane_emden(args, rc: RunConfig, out: Path):
    n = args.n_index if args.n_index is not None else rc.solve.n_index
    if not 0 <= n < 5:
        raise ConfigError(f"n_index={n} outside [0, 5): no finite first zero")
    le = solve_lane_emden(n)
    report = {"n_index": n, "xi1": le.xi1, "mu1": le.mu1}
    r = np.linspace(0.0, le.xi1, 513)
    try:
        np.savetxt(out / "theta.csv", np.column_stack([r, le.theta(r)]), delimiter=",", header="r,theta",
                   comments="", fmt="%.17g")
    except OSError as exc:
        raise ArtifactIOError(str(exc)) from exc
    write_json(out / "report.json", report)
    return report, 0


def cmd_distorted(args, rc: RunConfig, out: Path):
    cfg = rc.solve
    le = solve_lane_emden(cfg.n_index)
    grid = default_grid(le.xi1, cfg.grid_n, cfg.xi0_factor)
    t0 = time.perf_counter()
    dle = solve_distorted(cfg.b, cfg.n_index, grid=grid, cutoff=default_cutoff(le.xi1, grid), tol=cfg.dle_tol)
    zc, xc, _ = _xi1_of(dle)
    report = {"b": cfg.b, "n_index": cfg.n_index, "xi1": le.xi1, "mu1": le.mu1,
              "xi1_curve": {"zeta": zc, "Xi1": xc}, "iterations": dle.iterations, "residual": dle.residual,
              "rot_cutoff_applied": dle.rot_cutoff_applied}
    if args.kernel_proxy:
        report["kernel_proxy"] = kernel_proxy(dle)
    save_fields(out, {"Theta": dle.theta_field.values}, grid, rc.fmt)
    write_json(out / "report.json", report)
    write_json(out / "timings.json", {"distorted": time.perf_counter() - t0})
    return report, 0


def cmd_solve(args, rc: RunConfig, out: Path):
    from .surface import write_surface

    cfg = rc.solve
    t0 = time.perf_counter()
    try:
        state, rep, ctx, mb, surface, summary = run_solve(cfg)
    except IterationDiverged as exc:
        rep = getattr(exc, "report", None)
        d = rep.to_dict() if rep is not None else {"config": cfg.to_dict()}
        d.pop("timings", None)
        d["error"] = str(exc)
        d["history"] = list(exc.history)
        write_json(out / "report.json", d)
        save_config(out, rc)
        log.error("solve failed: %s", exc)
        return d, exc.exit_code
    zc, xc, _ = _xi1_of(ctx.bg.dle)
    fields = {"w": state.w.values, "Y": state.Y.values, "X": state.X.values, "V": state.V.values}
    if mb is not None:
        fields.update({"Fp": mb.Fp, "Kp": mb.Kp, "Ap": mb.Ap, "Pi": mb.Pi, "u": mb.u})
    save_fields(out, fields, ctx.grid, rc.fmt)
    write_json(out / "xi1_curve.json", {"zeta": zc, "Xi1": xc, "xi1": ctx.bg.dle.xi1})
    if surface is not None:
        write_surface(surface, out)
    report = solve_report(rep, summary)
    write_json(out / "report.json", report)
    timings = dict(rep.timings)
    timings["total"] = time.perf_counter() - t0
    write_json(out / "timings.json", timings)
    save_config(out, rc)
    code = 3 if summary["errors"] else 0
    return report, code


def _load_solve_dir(solve_dir: Path):
    from .pn.solver import PnState, build_context

    if not (solve_dir / "config.yaml").exists():
        raise ArtifactIOError(f"{solve_dir} has no config.yaml (run `solve` first)")
    man = solve_dir / "manifest.json"
    if man.exists():
        m = read_json(man)
        if m.get("subcommand") != "solve":
            raise ArtifactIOError(f"{solve_dir} holds a {m.get('subcommand')!r} run, not a solve")
    rc = build_config(read_document(solve_dir / "config.yaml"))
    f = load_fields(solve_dir, ("w", "Y", "X", "V"))
    ctx = build_context(rc.solve)
    if f["w"].grid != ctx.grid:
        raise ArtifactIOError("stored fields do not match the grid of the stored config")
    state = PnState(f["w"], f["Y"], f["X"], f["V"])
    return rc, ctx, state


def residual_report(state, ctx) -> tuple[dict, dict]:
    """Residuals, identities and defects of a converged state, per region."""
    from . import verify as V
    from .pn.metric import assemble_metric, frame_identity_defect, to_static_frame
    from .pn.solver import path_defect

    mb = to_static_frame(assemble_metric(state, ctx))
    lf = V.lewis_fields(mb)
    dle = ctx.bg.dle
    _, _, xi1_of = _xi1_of(dle)
    masks = V.regions(ctx.grid, xi1_of, 2 * dle.xi1, 0.1 * dle.xi1)
    E = V.einstein_residuals(mb, lf)
    Rr = V.reduced_residuals(mb)
    T = V.stress_components(lf.f, lf.k, lf.l, lf.m, lf.Pi, mb.eps, mb.p, lf.beta)
    report = {
        "grid_n": ctx.grid.n_cells,
        "h": ctx.grid.h,
        "einstein": V.region_sups(E, masks),
        "reduced": V.region_sups(Rr, masks),
        "identity_37": V.relative_identity_defect(V.identity_37(lf.f, lf.k, lf.l, lf.Pi, T, mb.p)),
        "identity_w33": V.relative_identity_defect(V.identity_w33(lf.f, lf.k, lf.l, T, lf.beta)),
        "lewis_identities": V.lewis_identity_defects(lf, mb.Fp, mb.Ap),
        "frame_identity": frame_identity_defect(mb),
        "bernoulli_defect": V.bernoulli_defect(mb),
        "path_defect": path_defect(state, ctx, ctx.norm_mask),
        "region_nodes": {k: int(v.sum()) for k, v in masks.items()},
    }
    fields = {f"einstein_{k}": v for k, v in E.items()}
    fields.update({f"reduced_{k}": v for k, v in Rr.items()})
    return report, fields


def verify_dir(solve_dir: Path) -> tuple[dict, dict]:
    """Residual report of a solve directory; also returns the residual fields."""
    rc, ctx, state = _load_solve_dir(solve_dir)
    return residual_report(state, ctx)


def cmd_verify(args, rc: RunConfig, out: Path):
    dirs = [Path(d) for d in args.solve_dirs]
    reports = []
    for d in dirs:
        rep, fields = verify_dir(d)
        rdir = d / "residuals"
        rdir.mkdir(exist_ok=True)
        fmt = args.format or rc.fmt
        grid = ScalarField.zeros(load_fields(d, ("w",))["w"].grid).grid
        for name, vals in fields.items():
            save_field(ScalarField(grid, np.nan_to_num(vals), (EVEN, EVEN)), rdir / _field_name(name, fmt), fmt)
        write_json(d / "residuals.json", rep)
        reports.append(rep)
    summary = {"runs": [{"dir": str(d), "grid_n": r["grid_n"]} for d, r in zip(dirs, reports)]}
    if len(reports) > 1:
        summary["slopes"] = residual_slopes(reports)
    write_json(out / "verify.json", summary)
    return summary, 0


def residual_slopes(reports) -> list:
    """Per-region refinement slopes ``log2(e_coarse / e_fine)`` for consecutive grid pairs."""
    reps = sorted(reports, key=lambda r: r["grid_n"])
    out = []
    for a, b in zip(reps[:-1], reps[1:]):
        ratio = a["h"] / b["h"]
        pair = {"grids": [a["grid_n"], b["grid_n"]]}
        for sec in ("einstein", "reduced"):
            pair[sec] = {k: {reg: float(np.log(a[sec][k][reg] / b[sec][k][reg]) / np.log(ratio))
                             if a[sec][k][reg] > 0 and b[sec][k][reg] > 0 else float("nan")
                             for reg in a[sec][k]} for k in a[sec]}
        out.append(pair)
    return out


def tov_study(base, grids, workers=1) -> dict:
    """Compare non-rotating solves on ``grids`` with the spherical oracle."""
    from .verify import tov_oracle

    cfgs = [replace(base, b=0.0, grid_n=int(n)) for n in grids]
    tov = tov_oracle(base.eos, base.tau)
    results = _map(_tov_one, [(c, tov) for c in cfgs], workers)
    out = {"tau": base.tau, "tov_radius": tov.radius, "tov_mass": tov.mass, "runs": []}
    for n, (diff, u, xi0) in zip(grids, results):
        out["runs"].append({"grid_n": int(n), "sup_diff": diff})
    hs = [xi0 / (n - 1) for n, (_, _, xi0) in zip(grids, results)]
    out["slope"] = loglog_slope(hs, [r["sup_diff"] for r in out["runs"]])
    # Richardson combination on nested grid pairs
    rich = []
    for i in range(len(grids) - 1):
        nc, nf = int(grids[i]), int(grids[i + 1])
        if nf == 2 * nc - 1:
            rich.append({"grids": [nc, nf], "sup_diff": _richardson_diff(cfgs[i], results[i][1], results[i + 1][1], tov)})
    out["richardson"] = rich
    return out


def _tov_one(args):
    from .pn.metric import assemble_metric, to_static_frame
    from .pn.solver import outer_solve
    from .verify import tov_difference

    cfg, tov = args
    state, rep, ctx = outer_solve(cfg, record_norms=False)
    mb = to_static_frame(assemble_metric(state, ctx))
    return tov_difference(mb, tov, mb.u > 0), mb, ctx.grid.xi0


def _richardson_diff(cfg_coarse, mb_c, mb_f, tov) -> float:
    """Sup of the extrapolated difference ``(4 D_fine - D_coarse) / 3`` on shared nodes inside the star.

    ``D = u_2D - u_TOV(areal radius)``; the combination removes the ``h^2``
    term of both grids.
    """
    from .verify import areal_radius

    Dc = mb_c.u - tov.u_of_r(areal_radius(mb_c))
    Df = (mb_f.u - tov.u_of_r(areal_radius(mb_f)))[::2, ::2]
    mask = (mb_c.u > 0) & (mb_f.u[::2, ::2] > 0)
    return float(np.max(np.abs((4 * Df - Dc)[mask] / 3)))


def _map(fn, items, workers):
    if workers > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(items))) as ex:
            return list(ex.map(fn, items))
    return [fn(it) for it in items]


def cmd_tov_compare(args, rc: RunConfig, out: Path):
    grids = args.grids or rc.tov_grids
    res = tov_study(rc.solve, grids, workers_from(args))
    from .verify import tov_oracle

    tov = tov_oracle(rc.solve.eos, rc.solve.tau)
    try:
        np.savetxt(out / "tov_profile.csv", np.column_stack([tov.r, tov.u, tov.mu]), delimiter=",",
                   header="r,u,mass", comments="", fmt="%.17g")
    except OSError as exc:
        raise ArtifactIOError(str(exc)) from exc
    write_json(out / "tov.json", res)
    return res, 0


def sweep_row(cfg):
    try:
        state, rep, ctx, mb, surface, summary = run_solve(cfg)
    except IterationDiverged as exc:
        return {"tau": cfg.tau, "b": cfg.b, "error": str(exc)}
    row = {"tau": cfg.tau, "b": cfg.b, "inner_ratio": rep.inner_ratio, "outer_ratio": rep.outer_ratio,
           "B1_deviation": summary.get("B1_deviation", float("nan"))}
    for k in ("sup_w", "sup_Y", "sup_X", "V", "N_combined"):
        row[k] = rep.norms[k]
    s = summary.get("surface", {})
    row["surface_gap"] = s.get("gap_to_newtonian", float("nan"))
    row["du_dN_variation"] = s.get("du_dN_variation", float("nan"))
    row["physical_vacuum"] = s.get("physical_vacuum", False)
    return row


SWEEP_SLOPES = ("inner_ratio", "outer_ratio", "B1_deviation", "surface_gap")
SWEEP_BOUNDED = ("sup_w", "sup_Y", "sup_X", "V")


def sweep_table(rows, key) -> dict:
    ok = [r for r in rows if "error" not in r]
    xs = [r[key] for r in ok]
    out = {"parameter": key, "rows": rows, "slopes": {}, "spread": {}}
    if key == "tau":
        for k in SWEEP_SLOPES:
            out["slopes"][k] = loglog_slope(xs, [r[k] for r in ok])
        for k in SWEEP_BOUNDED:
            v = np.abs([r[k] for r in ok])
            out["spread"][k] = float(v.max() / v.min()) if len(v) and v.min() > 0 else float("nan")
    else:
        out["slopes"]["du_dN_variation"] = loglog_slope(xs, [r["du_dN_variation"] for r in ok])
        out["slopes"]["surface_gap"] = loglog_slope(xs, [r["surface_gap"] for r in ok])
    return out


def cmd_sweep(args, rc: RunConfig, out: Path):
    base = rc.solve
    workers = workers_from(args)
    result = {}
    taus = args.taus or rc.sweep_tau
    rows = _map(sweep_row, [replace(base, tau=float(t)) for t in taus], workers)
    result["tau"] = sweep_table(rows, "tau")
    bs = args.bs or rc.sweep_b
    if bs:
        rows_b = _map(sweep_row, [replace(base, b=float(b)) for b in bs], workers)
        result["b"] = sweep_table(rows_b, "b")
    for key, tab in result.items():
        cols = list(tab["rows"][0].keys())
        lines = [",".join(cols)]
        for r in tab["rows"]:
            lines.append(",".join(repr(r.get(c)) if not isinstance(r.get(c), str) else r.get(c) for c in cols))
        (out / f"sweep_{key}.csv").write_text("\n".join(lines) + "\n")
    write_json(out / "sweep.json", result)
    failed = any("error" in r for tab in result.values() for r in tab["rows"])
    return result, 3 if failed else 0


def _ratio_field(values, grid, power):
    """``values / varpi^power`` with the axis filled by quadratic extrapolation."""
    vp = grid.varpi
    out = np.empty_like(values)
    out[1:] = values[1:] / vp[1:] ** power
    out[0] = 3 * out[1] - 3 * out[2] + out[3]
    return out


def export_profiles(solve_dir: Path, lines, n_rays: int = 5, n_samples: int = 401) -> dict:
    """Plot-ready slices of ``u, F', K', A'/varpi^2, Pi/varpi``."""
    f = load_fields(solve_dir, ("u", "Fp", "Kp", "Ap", "Pi"))
    g = f["u"].grid
    cols = {
        "u": f["u"].values, "Fp": f["Fp"].values, "Kp": f["Kp"].values,
        "Ap_over_varpi2": _ratio_field(f["Ap"].values, g, 2), "Pi_over_varpi": _ratio_field(f["Pi"].values, g, 1),
    }
    splines = {k: mirrored_spline(ScalarField(g, v)) for k, v in cols.items()}
    written = {}
    s = np.linspace(0.0, g.xi0, n_samples)
    targets = []
    if "equator" in lines:
        targets.append(("equator", [(0.0, s, s, np.zeros_like(s))]))
    if "axis" in lines:
        targets.append(("axis", [(1.0, s, np.zeros_like(s), s)]))
    if "rays" in lines:
        rays = []
        for z in np.linspace(0.0, 1.0, n_rays):
            sn = np.sqrt(1 - z * z)
            rays.append((float(z), s, s * sn, s * z))
        targets.append(("rays", rays))
    for name, segs in targets:
        rows = []
        for zeta, dist, vp, zz in segs:
            vals = [spl.ev(vp, zz) for spl in splines.values()]
            rows.append(np.column_stack([np.full_like(dist, zeta), dist, *vals]))
        data = np.vstack(rows)
        path = solve_dir / f"profile_{name}.csv"
        try:
            np.savetxt(path, data, delimiter=",", header="zeta,r," + ",".join(cols), comments="", fmt="%.17g")
        except OSError as exc:
            raise ArtifactIOError(str(exc)) from exc
        written[name] = str(path)
    ap_axis = f["Ap"].values[0, :]
    return {"files": written, "Ap_axis_max": float(np.max(np.abs(ap_axis)))}


def cmd_export(args, rc: RunConfig, out: Path):
    res = export_profiles(Path(args.solve_dir), args.lines, args.n_rays)
    write_json(out / "export.json", res)
    return res, 0


COMMANDS = {
    "lane-emden": cmd_lane_emden,
    "distorted": cmd_distorted,
    "solve": cmd_solve,
    "verify": cmd_verify,
    "tov-compare": cmd_tov_compare,
    "sweep": cmd_sweep,
    "export": cmd_export,
}


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def make_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML or JSON run configuration")
    common.add_argument("--out", help="output directory (overrides io.output_dir)")
    common.add_argument("--grid-n", type=int, dest="grid_n")
    common.add_argument("--tau", type=float)
    common.add_argument("--b", type=float)
    common.add_argument("--workers", type=int, help="parallel runs for sweep and tov-compare (env ROTSTAR_WORKERS)")
    common.add_argument("--format", choices=FORMATS, help="field file format")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="rotstar", description="Slowly rotating relativistic polytropes.")
    sub = p.add_subparsers(dest="command", required=True)
    le = sub.add_parser("lane-emden", parents=[common], help="spherical Lane-Emden function")
    le.add_argument("--n-index", type=float, dest="n_index")
    d = sub.add_parser("distorted", parents=[common], help="rotating Newtonian background")
    d.add_argument("--kernel-proxy", action="store_true", dest="kernel_proxy")
    sub.add_parser("solve", parents=[common], help="full relativistic solve")
    v = sub.add_parser("verify", parents=[common], help="residual report of saved solves")
    v.add_argument("solve_dirs", nargs="+")
    t = sub.add_parser("tov-compare", parents=[common], help="non-rotating comparison with the spherical oracle")
    t.add_argument("--grids", type=int, nargs="+")
    s = sub.add_parser("sweep", parents=[common], help="scaling study over tau (and b)")
    s.add_argument("--taus", type=float, nargs="+")
    s.add_argument("--bs", type=float, nargs="+")
    e = sub.add_parser("export", parents=[common], help="1-D profiles of a saved solve")
    e.add_argument("solve_dir")
    e.add_argument("--lines", nargs="+", choices=("rays", "equator", "axis"), default=["equator", "axis"])
    e.add_argument("--n-rays", type=int, default=5, dest="n_rays")
    return p


def run(argv=None) -> int:
    """Execute a subcommand and return the exit status."""
    parser = make_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        overrides = {"numerics.grid_n": args.grid_n, "star.tau": args.tau, "star.b": args.b,
                     "io.output_dir": args.out, "io.format": args.format}
        doc = read_document(args.config) if args.config else {}
        rc = build_config(doc, overrides)
        workers_from(args)
        if args.command in ("verify", "export") and args.out is None:
            out_path = Path(args.solve_dirs[-1] if args.command == "verify" else args.solve_dir)
        else:
            out_path = Path(rc.output_dir)
        out = prepare_out(out_path)
        report, code = COMMANDS[args.command](args, rc, out)
        if args.command not in ("verify", "export"):
            write_manifest(out, rc, args.command, args.config)
        print(json.dumps(_summary_line(args.command, report), sort_keys=True))
        return code
    except RotstarError as exc:
        print(f"rotstar {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code


def _summary_line(command, report) -> dict:
    keys = ("xi1", "mu1", "iterations", "residual", "outer_iterations", "fixed_point_residual", "path_defect",
            "slope", "error")
    return {"command": command, **{k: report[k] for k in keys if isinstance(report, dict) and k in report}}


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
