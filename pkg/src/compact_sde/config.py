"""Experiment configuration: JSON documents, validation and built-in presets.

A configuration is a single JSON object. Missing keys take the defaults of
:data:`DEFAULTS`; unknown keys are rejected. :func:`validate` reports every
problem it finds without running anything, and :func:`parse_config` raises
:class:`ConfigError` carrying the same list.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .geometry import GeometryError, Polyhedron, contains
from .nets import Activation
from .targets import TARGETS

KINDS = ("trajectories", "stationary", "weights", "conditions")
PARAMETERIZATIONS = ("unconstrained", "sigmoid_ito", "absorbed", "wsp", "wsp_stationary")
SOLVERS = ("milstein", "euler", "kl_ode")
UNIT_INTERVAL_ONLY = ("sigmoid_ito", "absorbed")

DEFAULTS = {
    "name": "experiment",
    "kind": "trajectories",
    "polyhedra": [{"name": "unit_interval", "box": {"lo": [0.0], "hi": [1.0]}}],
    "parameterizations": ["wsp"],
    "network": {"hidden": [64, 64, 64], "activation": "celu"},
    "wsp": {"alpha": 10.0, "beta": 10.0, "gamma": 1.0, "eps": 0.01},
    "solver": {"name": "milstein", "dt": 0.001, "T": 5.0, "R": 40, "method": "fixed",
               "rtol": 1e-6, "atol": 1e-9},
    "z0": [0.99],
    "seeds": [0, 1, 2, 3, 4],
    "samples_per_seed": 3,
    "targets": [{"name": "gauss", "params": {}}],
    "stationary": {"burn_in": 100.0, "subsample": 0.5, "ks_threshold": 0.05,
                   "flux_points": 1000, "flux_threshold": 1e-6, "n_grid": 32769},
    "conditions": {"n_boundary_samples": 1000, "t_samples": [0.0], "n_pairs": 1000},
    "plot": {"resolution": 60},
    "assert": [],
    "output": None,
    "workers": 1,
}


class ConfigError(ValueError):
    """Invalid configuration; ``errors`` lists every problem found."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    kind: str
    polyhedra: tuple           # ((name, Polyhedron), ...)
    parameterizations: tuple
    network: dict
    wsp: dict
    solver: dict
    z0: np.ndarray
    seeds: tuple
    samples_per_seed: int
    targets: tuple
    stationary: dict
    conditions: dict
    plot: dict
    assertions: tuple
    output: Optional[str]
    workers: int
    raw: dict

    @property
    def poly(self) -> Polyhedron:
        return self.polyhedra[0][1]

    @property
    def dim(self) -> int:
        return self.poly.dim

    def with_overrides(self, seeds=None, output=None) -> "ExperimentConfig":
        raw = copy.deepcopy(self.raw)
        if seeds is not None:
            raw["seeds"] = list(seeds)
        if output is not None:
            raw["output"] = str(output)
        return parse_config(raw)


def _merge(raw: dict, errors: list) -> dict:
    cfg = copy.deepcopy(DEFAULTS)
    for key, value in raw.items():
        if key not in DEFAULTS:
            errors.append(f"{key}: unknown field")
            continue
        if isinstance(DEFAULTS[key], dict) and isinstance(value, dict):
            for sub in value:
                if sub not in DEFAULTS[key]:
                    errors.append(f"{key}.{sub}: unknown field")
            cfg[key].update(value)
        else:
            cfg[key] = value
    return cfg


def _positive(cfg, errors, section, key, label=None, integer=False):
    value = cfg[section][key]
    label = label or key
    ok = isinstance(value, (int, float)) and not isinstance(value, bool) and value > 0
    if integer:
        ok = ok and float(value).is_integer()
    if not ok:
        errors.append(f"{section}.{key}: {label} must be positive" + (" integer" if integer else ""))


def _check(cfg: dict) -> tuple:
    """Return ``(errors, polyhedra)``."""
    errors = []
    if not isinstance(cfg["name"], str) or not cfg["name"]:
        errors.append("name: must be a nonempty string")
    kind = cfg["kind"]
    if kind not in KINDS:
        errors.append(f"kind: unknown kind {kind!r}; choose from {', '.join(KINDS)}")

    polys = []
    if not isinstance(cfg["polyhedra"], list) or not cfg["polyhedra"]:
        errors.append("polyhedra: need at least one polyhedron")
    else:
        for i, spec in enumerate(cfg["polyhedra"]):
            try:
                poly = Polyhedron.from_dict(spec)
                poly.center  # forces the feasibility and compactness checks
                polys.append((str(spec.get("name", f"poly{i}")), poly))
            except (GeometryError, KeyError, TypeError, ValueError) as exc:
                errors.append(f"polyhedra[{i}]: {exc}")
        if kind in ("trajectories", "stationary") and len(cfg["polyhedra"]) != 1:
            errors.append(f"polyhedra: {kind} runs take exactly one polyhedron")

    params = cfg["parameterizations"]
    if not isinstance(params, list) or not params:
        errors.append("parameterizations: need at least one parameterization")
        params = []
    for p in params:
        if p not in PARAMETERIZATIONS:
            errors.append(f"parameterizations: unknown parameterization {p!r}")
    if kind == "stationary" and params != ["wsp_stationary"]:
        errors.append("parameterizations: stationary runs use ['wsp_stationary']")
    if kind == "conditions" and "sigmoid_ito" in params:
        errors.append("parameterizations: sigmoid-transformed dynamics are undefined on the boundary")
    if kind != "stationary" and "wsp_stationary" in params:
        errors.append("parameterizations: 'wsp_stationary' needs kind 'stationary'")

    net = cfg["network"]
    if (not isinstance(net["hidden"], list) or not net["hidden"]
            or not all(isinstance(h, int) and h > 0 for h in net["hidden"])):
        errors.append("network.hidden: must be a nonempty list of positive integers")
    if net["activation"] not in [a.value for a in Activation]:
        errors.append(f"network.activation: unknown activation {net['activation']!r}")

    for key in ("alpha", "beta", "gamma", "eps"):
        _positive(cfg, errors, "wsp", key)

    solver = cfg["solver"]
    if solver["name"] not in SOLVERS:
        errors.append(f"solver.name: unknown solver {solver['name']!r}; choose from {', '.join(SOLVERS)}")
    if solver["method"] not in ("fixed", "adaptive"):
        errors.append("solver.method: must be 'fixed' or 'adaptive'")
    _positive(cfg, errors, "solver", "dt")
    _positive(cfg, errors, "solver", "T")
    _positive(cfg, errors, "solver", "R", integer=True)
    _positive(cfg, errors, "solver", "rtol")
    _positive(cfg, errors, "solver", "atol")
    dt, T = solver["dt"], solver["T"]
    if (isinstance(dt, (int, float)) and isinstance(T, (int, float)) and dt > 0 and T > 0
            and abs(round(T / dt) * dt - T) > 1e-9):
        errors.append("solver.dt: dt must divide T")
    if kind == "stationary" and solver["name"] == "kl_ode":
        errors.append("solver.name: stationary runs need an Ito scheme")

    seeds = cfg["seeds"]
    if not isinstance(seeds, list) or not seeds:
        errors.append("seeds: seeds must be nonempty")
    elif not all(isinstance(s, int) and 0 <= s < 2 ** 64 for s in seeds):
        errors.append("seeds: seeds must be unsigned 64-bit integers")
    elif len(set(seeds)) != len(seeds):
        errors.append("seeds: duplicate seed")
    n = cfg["samples_per_seed"]
    if not isinstance(n, int) or n < 1:
        errors.append("samples_per_seed: must be a positive integer")

    z0 = cfg["z0"]
    if not isinstance(z0, list) or not all(isinstance(x, (int, float)) for x in z0):
        errors.append("z0: must be a list of numbers")
    elif polys and kind in ("trajectories", "stationary"):
        poly = polys[0][1]
        if len(z0) != poly.dim:
            errors.append(f"z0: has length {len(z0)}, polyhedron dimension is {poly.dim}")
        elif any(p in ("wsp", "absorbed", "sigmoid_ito", "wsp_stationary") for p in params) \
                and not contains(poly, np.asarray(z0, dtype=float), 0.0):
            errors.append("z0: z0 outside polyhedron")
        elif "sigmoid_ito" in params and not all(0.0 < x < 1.0 for x in z0):
            errors.append("z0: sigmoid-transformed dynamics need z0 strictly inside (0, 1)")

    for i, (pname, poly) in enumerate(polys):
        if any(p in UNIT_INTERVAL_ONLY for p in params) and not (
                poly.dim == 1 and np.allclose([poly.lo[0], poly.hi[0]], [0.0, 1.0], atol=0.0)):
            errors.append(f"polyhedra[{i}]: sigmoid and absorbed dynamics need K = [0, 1]")
        if kind == "stationary" and poly.dim != 1:
            errors.append(f"polyhedra[{i}]: stationary runs are one-dimensional")
        if kind == "weights" and poly.dim > 2:
            errors.append(f"polyhedra[{i}]: weight plots support dimension 1 or 2")

    targets = cfg["targets"]
    if not isinstance(targets, list) or (kind == "stationary" and not targets):
        errors.append("targets: need a list of target densities")
    else:
        for i, tg in enumerate(targets):
            if not isinstance(tg, dict) or tg.get("name") not in TARGETS:
                errors.append(f"targets[{i}]: unknown target; choose from {', '.join(sorted(TARGETS))}")
            elif not isinstance(tg.get("params", {}), dict):
                errors.append(f"targets[{i}].params: must be an object")

    st = cfg["stationary"]
    if kind == "stationary":
        for key in ("subsample", "ks_threshold", "flux_threshold"):
            _positive(cfg, errors, "stationary", key)
        for key in ("flux_points", "n_grid"):
            _positive(cfg, errors, "stationary", key, integer=True)
        if not isinstance(st["burn_in"], (int, float)) or not 0 <= st["burn_in"] < T:
            errors.append("stationary.burn_in: must lie in [0, T)")
        elif isinstance(st["subsample"], (int, float)) and st["subsample"] > 0 and dt > 0:
            k = st["subsample"] / dt
            if abs(k - round(k)) > 1e-6 or round(T / dt) % round(k):
                errors.append("stationary.subsample: must be a multiple of dt dividing T")

    cd = cfg["conditions"]
    _positive(cfg, errors, "conditions", "n_boundary_samples", integer=True)
    _positive(cfg, errors, "conditions", "n_pairs", integer=True)
    if not isinstance(cd["t_samples"], list) or not cd["t_samples"]:
        errors.append("conditions.t_samples: need at least one time")
    _positive(cfg, errors, "plot", "resolution", integer=True)

    if not isinstance(cfg["assert"], list) or not all(isinstance(a, str) for a in cfg["assert"]):
        errors.append("assert: must be a list of metric name patterns")
    if cfg["output"] is not None and not isinstance(cfg["output"], str):
        errors.append("output: must be a path string")
    if not isinstance(cfg["workers"], int) or cfg["workers"] < 1:
        errors.append("workers: must be a positive integer")
    return errors, polys


def validate(raw: dict) -> list:
    """All problems with a raw configuration; empty when it is valid."""
    if not isinstance(raw, dict):
        return ["config: must be a JSON object"]
    errors = []
    cfg = _merge(raw, errors)
    more, _ = _check(cfg)
    return errors + more


def parse_config(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError(["config: must be a JSON object"])
    errors = []
    cfg = _merge(raw, errors)
    more, polys = _check(cfg)
    errors += more
    if errors:
        raise ConfigError(errors)
    return ExperimentConfig(
        name=cfg["name"],
        kind=cfg["kind"],
        polyhedra=tuple(polys),
        parameterizations=tuple(cfg["parameterizations"]),
        network={"hidden": tuple(cfg["network"]["hidden"]), "activation": cfg["network"]["activation"]},
        wsp={k: float(v) for k, v in cfg["wsp"].items()},
        solver=dict(cfg["solver"]),
        z0=np.asarray(cfg["z0"], dtype=float),
        seeds=tuple(cfg["seeds"]),
        samples_per_seed=int(cfg["samples_per_seed"]),
        targets=tuple((t["name"], dict(t.get("params", {}))) for t in cfg["targets"]),
        stationary=dict(cfg["stationary"]),
        conditions=dict(cfg["conditions"]),
        plot=dict(cfg["plot"]),
        assertions=tuple(cfg["assert"]),
        output=cfg["output"],
        workers=int(cfg["workers"]),
        raw=copy.deepcopy(raw),
    )


def load_config(path) -> ExperimentConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError([f"config: cannot read {path}: {exc.strerror}"]) from exc
    except json.JSONDecodeError as exc:
        raise ConfigError([f"config: invalid JSON at line {exc.lineno}: {exc.msg}"]) from exc
    return parse_config(raw)


# built-in presets -------------------------------------------------------------

_UNIT = {"name": "unit_interval", "box": {"lo": [0.0], "hi": [1.0]}}
_SQUARE = {"name": "unit_square", "box": {"lo": [0.0, 0.0], "hi": [1.0, 1.0]}}
_TRIANGLE = {"name": "triangle", "halfspaces": [
    {"u": [0.0, 0.0], "v": [1.0, 0.0]},
    {"u": [0.0, 0.0], "v": [0.0, 1.0]},
    {"u": [1.0, 0.0], "v": [-1.0, -1.0]},
]}

BUILTINS = {
    "fig1_weights": {
        "name": "fig1_weights",
        "kind": "weights",
        "polyhedra": [_UNIT, _SQUARE, _TRIANGLE],
        "plot": {"resolution": 80},
    },
    "fig2_top": {
        "name": "fig2_top",
        "kind": "trajectories",
        "polyhedra": [_UNIT],
        "parameterizations": ["unconstrained", "absorbed", "wsp"],
        "solver": {"name": "milstein", "dt": 0.001, "T": 5.0},
        "z0": [0.99],
        "assert": ["wsp.viability.*"],
    },
    "fig2_stationary": {
        "name": "fig2_stationary",
        "kind": "stationary",
        "polyhedra": [_UNIT],
        "parameterizations": ["wsp_stationary"],
        "solver": {"name": "milstein", "dt": 0.001, "T": 2000.0},
        "z0": [0.5],
        "samples_per_seed": 1,
        "targets": [{"name": "gauss", "params": {}}, {"name": "bimodal", "params": {}}],
        "assert": ["*.flux_max", "*.viability.*", "gauss.*.ks"],
    },
    "fig3_kl": {
        "name": "fig3_kl",
        "kind": "trajectories",
        "polyhedra": [_UNIT],
        "parameterizations": ["unconstrained", "sigmoid_ito", "wsp", "absorbed"],
        "solver": {"name": "kl_ode", "dt": 0.001, "T": 5.0, "R": 40, "method": "fixed"},
        "z0": [0.99],
        "assert": ["wsp.viability.*"],
    },
    "conditions_suite": {
        "name": "conditions_suite",
        "kind": "conditions",
        "polyhedra": [_SQUARE, _TRIANGLE],
        "parameterizations": ["unconstrained", "wsp"],
        "assert": ["*.wsp.*.passed"],
    },
}


def list_builtins() -> list:
    return sorted(BUILTINS)


def builtin_config(name: str) -> ExperimentConfig:
    try:
        raw = BUILTINS[name]
    except KeyError:
        raise ConfigError([f"config: no builtin named {name!r}"]) from None
    return parse_config(copy.deepcopy(raw))
