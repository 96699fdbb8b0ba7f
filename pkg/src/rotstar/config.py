"""Run configuration: a nested YAML (or JSON) document validated before any compute.

Blocks and keys::

    eos:      gamma, A_poly, c_light, G_grav, lambda_mode, lambda1, lambda2
    star:     tau, b, xi0_factor
    numerics: grid_n, alpha, kappa, tol_inner, tol_outer, max_iter_inner,
              max_iter_outer, damping, resolvent_method, resolvent_tol,
              dle_tol, v_normalization
    io:       output_dir, format
    sweep:    tau (list), b (list)
    tov:      grids (list)
"""
from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .errors import ArtifactIOError, ConfigError
from .pn.solver import SolveConfig

_SOLVE_KEYS = {
    "eos": ("gamma", "A_poly", "c_light", "G_grav", "lambda_mode", "lambda1", "lambda2"),
    "star": ("tau", "b", "xi0_factor"),
    "numerics": ("grid_n", "alpha", "kappa", "tol_inner", "tol_outer", "max_iter_inner", "max_iter_outer",
                 "damping", "resolvent_method", "resolvent_tol", "dle_tol", "v_normalization"),
}
_OTHER = {
    "io": ("output_dir", "format"),
    "sweep": ("tau", "b"),
    "tov": ("grids",),
}
FORMATS = ("csv", "bin")


@dataclass
class RunConfig:
    """Validated configuration of one CLI run."""

    solve: SolveConfig
    output_dir: str = "rotstar_out"
    fmt: str = "csv"
    sweep_tau: list = field(default_factory=lambda: [1e-2, 1e-3, 1e-4])
    sweep_b: list = field(default_factory=list)
    tov_grids: list = field(default_factory=lambda: [65, 129])

    def to_dict(self) -> dict:
        """Canonical nested form (also the input of :meth:`hash`)."""
        s = self.solve.to_dict()
        out = {block: {k: s[k] for k in keys} for block, keys in _SOLVE_KEYS.items()}
        out["io"] = {"output_dir": self.output_dir, "format": self.fmt}
        out["sweep"] = {"tau": list(self.sweep_tau), "b": list(self.sweep_b)}
        out["tov"] = {"grids": list(self.tov_grids)}
        return out

    def hash(self) -> str:
        """SHA-256 of the physics and numerics blocks (io settings excluded)."""
        d = self.to_dict()
        d.pop("io")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()


def read_document(path) -> dict:
    """Parse a YAML or JSON file into a dict."""
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ArtifactIOError(f"cannot read config {p}: {exc}") from exc
    try:
        doc = json.loads(text) if p.suffix == ".json" else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"config {p} is not valid {'JSON' if p.suffix == '.json' else 'YAML'}: {exc}") from exc
    if doc is None:
        return {}
    if not isinstance(doc, dict):
        raise ConfigError(f"config {p} must be a mapping of blocks")
    return doc


def _check_keys(doc: dict):
    allowed = {**_SOLVE_KEYS, **_OTHER}
    for block, body in doc.items():
        if block not in allowed:
            raise ConfigError(f"unknown config block {block!r} (expected one of {sorted(allowed)})")
        if not isinstance(body, dict):
            raise ConfigError(f"config block {block!r} must be a mapping")
        for key in body:
            if key not in allowed[block]:
                raise ConfigError(f"unknown key {block}.{key}")


def _as_list(value, name, cast=float, allow_empty=False):
    if not isinstance(value, (list, tuple)) or not (value or allow_empty):
        raise ConfigError(f"{name} must be a {'' if allow_empty else 'non-empty '}list")
    try:
        return [cast(v) for v in value]
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name} must contain numbers") from exc


def build_config(doc: dict | None = None, overrides: dict | None = None) -> RunConfig:
    """Validate a nested config document plus flat ``block.key`` overrides.

    Raises
    ------
    ConfigError
        Naming the offending key and the guard it violates.
    """
    doc = copy.deepcopy(doc or {})
    for dotted, value in (overrides or {}).items():
        if value is None:
            continue
        block, key = dotted.split(".")
        doc.setdefault(block, {})[key] = value
    _check_keys(doc)
    kwargs = {}
    for block, keys in _SOLVE_KEYS.items():
        for k in keys:
            if k in doc.get(block, {}):
                kwargs[k] = doc[block][k]
    try:
        for k in ("grid_n", "max_iter_inner", "max_iter_outer"):
            if k in kwargs:
                if isinstance(kwargs[k], bool) or int(kwargs[k]) != kwargs[k]:
                    raise ConfigError(f"numerics.{k} must be an integer")
                kwargs[k] = int(kwargs[k])
        for k, v in kwargs.items():
            if k not in ("lambda_mode", "resolvent_method", "v_normalization", "grid_n", "max_iter_inner",
                         "max_iter_outer") and v is not None:
                kwargs[k] = float(v)
        solve = SolveConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid config value: {exc}") from exc
    io = doc.get("io", {})
    fmt = io.get("format", "csv")
    if fmt not in FORMATS:
        raise ConfigError(f"io.format must be one of {FORMATS}")
    rc = RunConfig(solve, str(io.get("output_dir", "rotstar_out")), fmt)
    sw = doc.get("sweep", {})
    if "tau" in sw:
        rc.sweep_tau = _as_list(sw["tau"], "sweep.tau")
    if "b" in sw:
        rc.sweep_b = _as_list(sw["b"], "sweep.b", allow_empty=True)
    for t in rc.sweep_tau:
        SolveConfig(**{**solve.to_dict(), "tau": t})
    for b in rc.sweep_b:
        SolveConfig(**{**solve.to_dict(), "b": b})
    if "grids" in doc.get("tov", {}):
        rc.tov_grids = _as_list(doc["tov"]["grids"], "tov.grids", int)
        for n in rc.tov_grids:
            SolveConfig(**{**solve.to_dict(), "grid_n": n, "b": 0.0})
    return rc


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    return build_config(read_document(path) if path else {}, overrides)


def config_from_dict(d: dict) -> RunConfig:
    """Inverse of :meth:`RunConfig.to_dict`."""
    return build_config(d)
