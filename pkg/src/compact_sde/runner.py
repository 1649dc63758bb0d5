"""Run an :class:`~compact_sde.config.ExperimentConfig` and write its artifacts.

Each run writes, into its output directory:

* ``<parameterization>.csv``: states with header ``seed,sample,t,z_1..z_D,in_k``
  (one file per parameterization, or per target for stationary runs);
* one SVG panel per parameterization, target or polyhedron;
* ``report.txt``: one ``name value PASS|FAIL|INFO`` line per metric;
* ``networks/``: text dumps of the base networks that were used.

Rows of a run are split into ``workers`` groups of seeds, simulated
concurrently, then written in (seed, sample) order. A path's numbers do not
depend on the grouping.
"""

from __future__ import annotations

import fnmatch
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import svg
from .analysis import (Metric, check_boundary_conditions, distribution_distance, format_report,
                       merge_viability, sample_facet, stationary_flux_max, target_cdf, viability)
from .config import ExperimentConfig
from .dynamics import (Calculus, StationaryConfig, WspConfig, base_networks, make_absorbed,
                       make_sigmoid_transformed, make_stationary, make_unconstrained, make_wsp,
                       stacked_base_networks, tabulate_1d)
from .geometry import contains
from .nets import mlp_init, save_mlp
from .rng import derive_seed
from .solvers import VIABILITY_TOL, NoiseStream, integrate_ito, simulate_kl_sde
from .targets import make_target
from .trajectory import NumericalAbort, time_grid
from .weights import WeightParams, weight

log = logging.getLogger("compact_sde")


class RunAbort(RuntimeError):
    """A simulation blew up; the message names the seed, sample and step."""


@dataclass
class RunResult:
    name: str
    out_dir: Path
    metrics: list = field(default_factory=list)
    files: list = field(default_factory=list)
    failed_assertions: list = field(default_factory=list)

    @property
    def exit_code(self) -> int:
        return 1 if self.failed_assertions else 0


# dynamics construction ----------------------------------------------------------

def _weights(cfg: ExperimentConfig) -> WeightParams:
    return WeightParams(cfg.wsp["alpha"], cfg.wsp["beta"])


def build_dynamics(param: str, cfg: ExperimentConfig, row_seeds, poly=None, stacked: bool = True):
    """Dynamics for a batch whose row ``i`` uses the networks of ``row_seeds[i]``.

    With ``stacked=False`` a single seed is expected and the fields accept
    arbitrary batches (used for boundary-condition checks).
    """
    poly = poly if poly is not None else cfg.poly
    calculus = Calculus.STRATONOVICH if cfg.solver["name"] == "kl_ode" else Calculus.ITO
    net = dict(hidden=cfg.network["hidden"], activation=cfg.network["activation"])
    if stacked:
        h, g = stacked_base_networks(list(row_seeds), poly.dim, **net)
    else:
        (seed,) = set(row_seeds)
        h, g = base_networks(seed, poly.dim, **net)
    base = make_unconstrained(h, g, poly.dim, calculus)
    if param == "unconstrained":
        return base
    if param == "sigmoid_ito":
        return make_sigmoid_transformed(base, calculus)
    if param == "absorbed":
        return make_absorbed(h, g, 1, calculus)
    if param == "wsp":
        return make_wsp(WspConfig(base, poly, _weights(cfg), cfg.wsp["gamma"], cfg.wsp["eps"]))
    raise ValueError(f"parameterization {param!r} cannot be built here")


def _rows(cfg: ExperimentConfig) -> list:
    return [(s, j) for s in cfg.seeds for j in range(cfg.samples_per_seed)]


def _groups(cfg: ExperimentConfig) -> list:
    rows = _rows(cfg)
    n = min(cfg.workers, len(cfg.seeds))
    seed_groups = [list(g) for g in np.array_split(np.array(cfg.seeds, dtype=object), n)]
    return [[r for r in rows if r[0] in set(g)] for g in seed_groups]


def _abort(exc: NumericalAbort, rows, label) -> RunAbort:
    if exc.row is not None:
        seed, sample = rows[exc.row]
        where = f"seed {seed}, sample {sample}"
    else:
        where = "seeds " + ",".join(str(s) for s in sorted({r[0] for r in rows}))
    step = f", step {exc.step}" if exc.step is not None else ""
    return RunAbort(f"{label}: simulation aborted at {where}{step}: {exc}")


def _simulate_group(param, cfg, rows):
    spec = build_dynamics(param, cfg, [s for s, _ in rows])
    sv = cfg.solver
    n_steps = int(round(sv["T"] / sv["dt"]))
    streams = [NoiseStream(s, j, cfg.dim, sv["dt"], n_steps) for s, j in rows]
    try:
        if sv["name"] == "kl_ode":
            t_eval = time_grid(0.0, sv["T"], sv["dt"]) if sv["method"] == "adaptive" else None
            return simulate_kl_sde(spec, cfg.z0, sv["T"], int(sv["R"]), streams, sv["method"],
                                   dt=sv["dt"], rtol=sv["rtol"], atol=sv["atol"], t_eval=t_eval,
                                   poly=cfg.poly, tol=VIABILITY_TOL)
        return integrate_ito(spec, cfg.z0, 0.0, sv["T"], sv["dt"], streams, sv["name"],
                             poly=cfg.poly, tol=VIABILITY_TOL)
    except NumericalAbort as exc:
        raise _abort(exc, rows, param) from exc


def _run_groups(fn, groups, workers):
    if workers == 1 or len(groups) == 1:
        return [fn(g) for g in groups]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, groups))


# output helpers -------------------------------------------------------------------

def _csv(rows, trajs, poly) -> str:
    D = poly.dim
    lines = ["seed,sample,t," + ",".join(f"z_{d + 1}" for d in range(D)) + ",in_k"]
    for (seed, sample), tr in zip(rows, trajs):
        in_k = contains(poly, tr.states, VIABILITY_TOL)
        for t, z, flag in zip(tr.times, tr.states, in_k):
            lines.append(f"{seed},{sample},{t:.17g}," + ",".join(f"{v:.17g}" for v in z)
                         + f",{int(flag)}")
    return "\n".join(lines) + "\n"


def _write(out: Path, name: str, text: str, files: list):
    path = out / name
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    files.append(path)


def _dump_networks(cfg: ExperimentConfig, out: Path, files: list, dim: int):
    sizes = [dim, *cfg.network["hidden"], dim]
    for seed in cfg.seeds:
        for tag, role in ((0, "drift"), (1, "diffusion")):
            p = mlp_init(sizes, cfg.network["activation"], derive_seed(seed, tag))
            path = out / "networks" / f"seed{seed}_{role}.txt"
            path.parent.mkdir(parents=True, exist_ok=True)
            save_mlp(p, path)
            files.append(path)


# experiment kinds -------------------------------------------------------------------

def _run_trajectories(cfg: ExperimentConfig, out: Path, res: RunResult):
    poly = cfg.poly
    groups = _groups(cfg)
    rows = [r for g in groups for r in g]
    order = sorted(range(len(rows)), key=lambda i: rows[i])
    rows = [rows[i] for i in order]
    for param in cfg.parameterizations:
        log.info("simulating %s over %d paths", param, len(rows))
        parts = _run_groups(lambda g: _simulate_group(param, cfg, g), groups, cfg.workers)
        trajs = [t for part in parts for t in part]
        trajs = [trajs[i] for i in order]
        _write(out, f"{param}.csv", _csv(rows, trajs, poly), res.files)
        bounds = [float(poly.lo.min()), float(poly.hi.max())]
        series = [(tr.times, tr.states[:, d]) for tr in trajs for d in range(poly.dim)]
        title = f"{param} ({cfg.solver['name']})"
        _write(out, f"{param}.svg", svg.trajectory_panel(series, title, bounds), res.files)
        reports = [viability(tr, poly, VIABILITY_TOL) for tr in trajs]
        res.metrics += merge_viability(reports).metrics(f"{param}.viability")
        for (seed, sample), rep, tr in zip(rows, reports, trajs):
            key = f"{param}.seed{seed}.sample{sample}"
            exit_time = np.nan if rep.first_exit_time is None else rep.first_exit_time
            res.metrics.append(Metric(f"{key}.first_exit_time", exit_time))
            res.metrics.append(Metric(f"{key}.std", float(np.std(tr.states[:, 0]))))
    _dump_networks(cfg, out, res.files, poly.dim)


def _stationary_specs(cfg, target_name, target_params):
    poly = cfg.poly
    net = dict(hidden=cfg.network["hidden"], activation=cfg.network["activation"])
    out = {}
    for seed in cfg.seeds:
        h, g = base_networks(seed, 1, **net)
        wsp = make_wsp(WspConfig(make_unconstrained(h, g, 1), poly, _weights(cfg),
                                 cfg.wsp["gamma"], cfg.wsp["eps"]))
        out[seed] = StationaryConfig(wsp.diffusion, make_target(target_name, **target_params), 1)
    return out


def _run_stationary(cfg: ExperimentConfig, out: Path, res: RunResult):
    poly = cfg.poly
    sv, st = cfg.solver, cfg.stationary
    lo, hi = float(poly.lo[0]), float(poly.hi[0])
    support = (lo, hi)
    every = int(round(st["subsample"] / sv["dt"]))
    n_steps = int(round(sv["T"] / sv["dt"]))
    flux_grid = np.linspace(lo, hi, int(st["flux_points"]) + 2)[1:-1]
    for tname, tparams in cfg.targets:
        scfgs = _stationary_specs(cfg, tname, tparams)
        for seed, scfg in scfgs.items():
            flux = stationary_flux_max(scfg, flux_grid)
            res.metrics.append(Metric(f"{tname}.seed{seed}.flux_max", flux, flux < st["flux_threshold"]))
        groups = _groups(cfg)

        def simulate(rows):
            tab = tabulate_1d([make_stationary(scfgs[s]) for s, _ in rows], lo, hi, int(st["n_grid"]))
            streams = [NoiseStream(s, j, 1, sv["dt"], n_steps) for s, j in rows]
            try:
                return integrate_ito(tab, cfg.z0, 0.0, sv["T"], sv["dt"], streams, sv["name"],
                                     poly=poly, tol=VIABILITY_TOL, record_every=every)
            except NumericalAbort as exc:
                raise _abort(exc, rows, tname) from exc

        log.info("sampling %s over %d paths, T=%g", tname, sum(map(len, groups)), sv["T"])
        parts = _run_groups(simulate, groups, cfg.workers)
        rows = [r for g in groups for r in g]
        trajs = [t for part in parts for t in part]
        order = sorted(range(len(rows)), key=lambda i: rows[i])
        rows, trajs = [rows[i] for i in order], [trajs[i] for i in order]
        _write(out, f"{tname}.csv", _csv(rows, trajs, poly), res.files)
        reports = [viability(tr, poly, VIABILITY_TOL) for tr in trajs]
        res.metrics += merge_viability(reports).metrics(f"{tname}.viability")
        worst = min(tr.meta["min_facet_distance"] for tr in trajs)
        res.metrics.append(Metric(f"{tname}.min_facet_distance_all_steps", worst))
        log_p = make_target(tname, **tparams)
        pooled = []
        for (seed, sample), tr in zip(rows, trajs):
            x = tr.states[tr.times >= st["burn_in"], 0]
            x = np.clip(x, lo, hi)  # states within the tolerance band count as boundary points
            pooled.append(x)
            ks, tv = distribution_distance(x, log_p, support)
            key = f"{tname}.seed{seed}.sample{sample}"
            res.metrics.append(Metric(f"{key}.ks", ks, ks < st["ks_threshold"]))
            res.metrics.append(Metric(f"{key}.tv", tv))
        grid, cdf = target_cdf(log_p, support)
        density = np.gradient(cdf, grid)
        samples = np.concatenate(pooled)
        title = f"stationary samples vs {tname} target"
        _write(out, f"{tname}.svg", svg.histogram_panel(samples, grid, density, 50, support, title),
               res.files)
    _dump_networks(cfg, out, res.files, 1)


def _run_weights(cfg: ExperimentConfig, out: Path, res: RunResult):
    params = _weights(cfg)
    res_px = int(cfg.plot["resolution"])
    for name, poly in cfg.polyhedra:
        doc = svg.plot_weight_field(poly, params, res_px, cfg.wsp["gamma"], cfg.wsp["eps"],
                                    title=f"boundary weight on {name}")
        _write(out, f"weights_{name}.svg", doc, res.files)
        for d, c in enumerate(poly.center):
            res.metrics.append(Metric(f"{name}.center_{d + 1}", float(c)))
        res.metrics.append(Metric(f"{name}.radius", poly.radius))
        res.metrics.append(Metric(f"{name}.weight_at_center", float(weight(poly, params, poly.center))))
        probes = []
        for s in range(poly.n_facets):
            pts = sample_facet(poly, s, 200)
            if pts is not None:
                probes.append(pts + 1e-3 * poly.unit_normals[s])
        probes = np.concatenate(probes)
        probes = probes[contains(poly, probes, 0.0)]
        near = float(np.max(weight(poly, params, probes)))
        res.metrics.append(Metric(f"{name}.max_weight_1e-3_inside", near))


def _run_conditions(cfg: ExperimentConfig, out: Path, res: RunResult):
    cd = cfg.conditions
    lines = []
    for name, poly in cfg.polyhedra:
        for param in cfg.parameterizations:
            for seed in cfg.seeds:
                spec = build_dynamics(param, cfg, [seed], poly, stacked=False)
                rep = check_boundary_conditions(spec, poly, int(cd["n_boundary_samples"]),
                                                tuple(cd["t_samples"]), seed, int(cd["n_pairs"]))
                key = f"{name}.{param}.seed{seed}"
                res.metrics += rep.metrics(key)
                lines.append(f"{key}: {'PASS' if rep.passed else 'FAIL'}")
                log.info("%s: %s", key, "PASS" if rep.passed else "FAIL")
    _write(out, "conditions_summary.txt", "\n".join(lines) + "\n", res.files)


_KINDS = {
    "trajectories": _run_trajectories,
    "stationary": _run_stationary,
    "weights": _run_weights,
    "conditions": _run_conditions,
}


def check_assertions(metrics, patterns) -> list:
    """Messages for every asserted metric that failed (or pattern that matched nothing)."""
    failed = []
    for pat in patterns:
        hits = [m for m in metrics if fnmatch.fnmatchcase(m.name, pat) and m.passed is not None]
        if not hits:
            failed.append(f"{pat}: no checked metric matches")
        failed += [f"{m.name} = {m.value!r} FAIL" for m in hits if not m.passed]
    return failed


def run_experiment(cfg: ExperimentConfig, out_dir=None) -> RunResult:
    """Run ``cfg``, write its artifacts and evaluate its assertions.

    Raises :class:`RunAbort` if a simulation produced non-finite values or
    left the domain of its dynamics.
    """
    out = Path(out_dir or cfg.output or Path("out") / cfg.name)
    out.mkdir(parents=True, exist_ok=True)
    res = RunResult(cfg.name, out)
    _write(out, "config.json", json.dumps(cfg.raw, indent=2, sort_keys=True) + "\n", res.files)
    _KINDS[cfg.kind](cfg, out, res)
    res.failed_assertions = check_assertions(res.metrics, cfg.assertions)
    header = f"# {cfg.name}\n"
    _write(out, "report.txt", header + format_report(res.metrics), res.files)
    return res
