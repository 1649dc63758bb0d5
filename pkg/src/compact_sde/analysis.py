"""Numerical checks of viability, boundary conditions and stationarity.

Every check returns a small report object that can be flattened into
``Metric`` lines (name, value, PASS/FAIL/INFO) for the text reports written
by the experiment runner.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import dual
from .dynamics import DynamicsSpec, StationaryConfig, stationary_drift
from .geometry import Polyhedron, contains, min_distance
from .rng import NormalStream, Purpose
from .simplex import InfeasibleLP, LPError, linprog_max
from .trajectory import Trajectory

DRIFT_TOL = 1e-9
DIFFUSION_TOL = 1e-9
NEAR_PAIRS = 100
# sampled pairs live on a dyadic lattice: their coordinate differences are exact,
# so difference quotients of affine maps carry no cancellation error
NEAR_GAP = 2.0 ** -13
_LATTICE = 2.0 ** 30
QUADRATURE_POINTS = 10_000


# report lines -------------------------------------------------------------

@dataclass(frozen=True)
class Metric:
    name: str
    value: float
    passed: Optional[bool] = None

    @property
    def status(self) -> str:
        if self.passed is None:
            return "INFO"
        return "PASS" if self.passed else "FAIL"

    def line(self) -> str:
        return f"{self.name} {self.value!r} {self.status}"


def format_report(metrics: Sequence[Metric]) -> str:
    return "".join(m.line() + "\n" for m in metrics)


def parse_report(text: str) -> list:
    """Inverse of :func:`format_report`."""
    out = []
    for raw in text.splitlines():
        if not raw.strip() or raw.startswith("#"):
            continue
        name, value, status = raw.rsplit(" ", 2)
        passed = {"PASS": True, "FAIL": False, "INFO": None}[status]
        out.append(Metric(name, float(value), passed))
    return out


# viability ----------------------------------------------------------------

@dataclass(frozen=True)
class ViabilityReport:
    fraction_in_k: float
    max_violation: float
    first_exit_time: Optional[float]
    n_points: int
    tol: float

    @property
    def viable(self) -> bool:
        return self.first_exit_time is None

    def metrics(self, prefix: str = "viability") -> list:
        exit_time = math.nan if self.first_exit_time is None else self.first_exit_time
        return [
            Metric(f"{prefix}.fraction_in_k", self.fraction_in_k, self.fraction_in_k == 1.0),
            Metric(f"{prefix}.max_violation", self.max_violation, self.max_violation <= self.tol),
            Metric(f"{prefix}.first_exit_time", exit_time),
            Metric(f"{prefix}.n_points", float(self.n_points)),
        ]


def viability(traj: Trajectory, poly: Polyhedron, tol: float = 1e-6) -> ViabilityReport:
    """Membership of every stored state, with a tolerance band of ``tol``."""
    if len(traj.times) == 0:
        raise ValueError("empty trajectory")
    dist = min_distance(poly, traj.states)
    inside = dist >= -tol
    n = len(inside)
    exits = np.flatnonzero(~inside)
    return ViabilityReport(
        fraction_in_k=float(np.count_nonzero(inside)) / n,
        max_violation=float(max(0.0, -np.min(dist))),
        first_exit_time=float(traj.times[exits[0]]) if len(exits) else None,
        n_points=n,
        tol=tol,
    )


def merge_viability(reports: Sequence[ViabilityReport]) -> ViabilityReport:
    """Pool reports of several trajectories (exit time is the earliest one)."""
    reports = list(reports)
    n = sum(r.n_points for r in reports)
    inside = sum(round(r.fraction_in_k * r.n_points) for r in reports)
    exits = [r.first_exit_time for r in reports if r.first_exit_time is not None]
    return ViabilityReport(inside / n, max(r.max_violation for r in reports),
                           min(exits) if exits else None, n, reports[0].tol)


# sampling helpers -----------------------------------------------------------

class _UniformSource:
    """Prefix-stable uniforms from one keyed stream."""

    def __init__(self, seed: int, tag: int):
        self._stream = NormalStream(seed, Purpose.SAMPLING, tag)

    def take(self, n: int) -> np.ndarray:
        return self._stream.uniforms(n)


def sample_interior(poly: Polyhedron, n: int, seed: int = 0, tag: int = 0) -> np.ndarray:
    """``n`` points uniform in ``poly`` by rejection from its bounding box.

    Accepted points come out in stream order, so the first ``m`` points of a
    request for ``n > m`` equal a request for ``m``.
    """
    src = _UniformSource(seed, tag)
    span = poly.hi - poly.lo
    out = []
    have = 0
    while have < n:
        cand = poly.lo + span * src.take(256 * poly.dim).reshape(256, poly.dim)
        keep = cand[min_distance(poly, cand) >= 0.0]
        out.append(keep)
        have += len(keep)
    return np.concatenate(out)[:n]


def _face_frame(poly: Polyhedron, s: int):
    """Origin, orthonormal basis of facet ``s``'s hyperplane and the face's extent in it."""
    v = poly.unit_normals[s]
    u = poly.U[s]
    D = poly.dim
    # orthonormal complement of v
    q, _ = np.linalg.qr(np.column_stack([v, np.eye(D)]))
    basis = q[:, 1:D]
    origin = poly.center - np.dot(poly.center - u, v) * v
    if D == 1:
        return origin, basis, np.zeros(0), np.zeros(0)
    # K restricted to the hyperplane, in coordinates c with z = origin + basis @ c
    A = -poly.unit_normals @ basis
    b = np.einsum("sd,sd->s", origin - poly.U, poly.unit_normals)
    keep = np.arange(poly.n_facets) != s
    A, b = A[keep], b[keep]
    free = np.ones(D - 1, dtype=bool)
    lo = np.empty(D - 1)
    hi = np.empty(D - 1)
    for j in range(D - 1):
        e = np.zeros(D - 1)
        e[j] = 1.0
        hi[j] = linprog_max(e, A, b, free=free)[1]
        lo[j] = -linprog_max(-e, A, b, free=free)[1]
    return origin, basis, lo, hi


def _snap(poly: Polyhedron, s: int, z: np.ndarray) -> np.ndarray:
    """Move points onto facet ``s`` exactly where the normal is axis-aligned."""
    v = poly.V[s]
    nz = np.flatnonzero(v)
    if len(nz) == 1:
        z[:, nz[0]] = poly.U[s, nz[0]]
    else:
        z = z - np.outer(poly.distances(z)[:, s], poly.unit_normals[s])
    return z


def sample_facet(poly: Polyhedron, s: int, n: int, seed: int = 0) -> Optional[np.ndarray]:
    """``n`` points uniform on facet ``s``; ``None`` if the face has no area."""
    try:
        origin, basis, lo, hi = _face_frame(poly, s)
    except (InfeasibleLP, LPError):
        return None
    if poly.dim == 1:
        z = _snap(poly, s, origin[None, :].copy())
        return np.repeat(z, n, axis=0) if min_distance(poly, z)[0] >= -1e-12 else None
    if np.any(hi - lo <= 1e-12):
        return None
    src = _UniformSource(seed, 1000 + s)
    out, have, tries = [], 0, 0
    k = poly.dim - 1
    while have < n:
        c = lo + (hi - lo) * src.take(256 * k).reshape(256, k)
        z = _snap(poly, s, origin + c @ basis.T)
        others = np.delete(poly.distances(z), s, axis=1)
        keep = z[np.min(others, axis=1) >= 0.0]
        out.append(keep)
        have += len(keep)
        tries += 1
        if tries > 1000 and have == 0:
            return None
    return np.concatenate(out)[:n]


# boundary conditions --------------------------------------------------------

@dataclass
class ConditionReport:
    """Worst sampled values of the boundary conditions, per facet.

    ``min_drift_inner[s]`` is the minimum of ``<h, v_s>/|v_s|`` and
    ``max_diffusion_component[s]`` the maximum of ``|g_d v_s,d|/|v_s|`` over
    the sampled points of facet ``s`` (NaN for skipped facets). Lipschitz
    constants and the growth ratio are sampled lower bounds.
    """

    min_drift_inner: np.ndarray
    max_diffusion_component: np.ndarray
    lipschitz_drift: float
    lipschitz_diffusion: float
    growth_ratio: float
    skipped_facets: list = field(default_factory=list)
    n_samples: int = 0

    @property
    def drift_ok(self) -> bool:
        vals = self.min_drift_inner[~np.isnan(self.min_drift_inner)]
        return bool(np.all(vals >= -DRIFT_TOL))

    @property
    def diffusion_ok(self) -> bool:
        vals = self.max_diffusion_component[~np.isnan(self.max_diffusion_component)]
        return bool(np.all(vals <= DIFFUSION_TOL))

    @property
    def passed(self) -> bool:
        return self.drift_ok and self.diffusion_ok

    def metrics(self, prefix: str = "conditions") -> list:
        out = []
        for s, (a, b) in enumerate(zip(self.min_drift_inner, self.max_diffusion_component)):
            if s in self.skipped_facets:
                out.append(Metric(f"{prefix}.facet{s}.skipped", 1.0))
                continue
            out.append(Metric(f"{prefix}.facet{s}.min_drift_inner", float(a), a >= -DRIFT_TOL))
            out.append(Metric(f"{prefix}.facet{s}.max_diffusion_component", float(b), b <= DIFFUSION_TOL))
        out += [
            Metric(f"{prefix}.lipschitz_drift_lower_bound", self.lipschitz_drift),
            Metric(f"{prefix}.lipschitz_diffusion_lower_bound", self.lipschitz_diffusion),
            Metric(f"{prefix}.growth_ratio", self.growth_ratio),
            Metric(f"{prefix}.passed", float(self.passed), self.passed),
        ]
        return out


def check_boundary_conditions(spec: DynamicsSpec, poly: Polyhedron, n_boundary_samples: int = 1000,
                              t_samples: Sequence[float] = (0.0,), seed: int = 0,
                              n_pairs: int = 1000) -> ConditionReport:
    """Evaluate the inward-drift and vanishing-diffusion conditions on every facet."""
    if spec.dim != poly.dim:
        raise ValueError("dynamics and polyhedron differ in dimension")
    S = poly.n_facets
    min_inner = np.full(S, np.nan)
    max_diff = np.full(S, np.nan)
    skipped = []
    growth = 0.0
    for s in range(S):
        pts = sample_facet(poly, s, n_boundary_samples, seed)
        if pts is None:
            warnings.warn(f"facet {s} has no sampleable face; skipped", RuntimeWarning, stacklevel=2)
            skipped.append(s)
            continue
        vhat = poly.unit_normals[s]
        inner, comp = np.inf, 0.0
        for t in t_samples:
            h = np.asarray(spec.drift(t, pts))
            g = np.asarray(spec.diffusion(t, pts))
            inner = min(inner, float(np.min(h @ vhat)))
            comp = max(comp, float(np.max(np.abs(g * vhat))))
            growth = max(growth, _growth(h, g, pts))
        min_inner[s], max_diff[s] = inner, comp
    interior = sample_interior(poly, n_pairs, seed, tag=1)
    for t in t_samples:
        growth = max(growth, _growth(np.asarray(spec.drift(t, interior)),
                                     np.asarray(spec.diffusion(t, interior)), interior))
    t0 = t_samples[0]
    lip_h = lipschitz_estimate(lambda z: spec.drift(t0, z), poly, n_pairs, seed)
    lip_g = lipschitz_estimate(lambda z: spec.diffusion(t0, z), poly, n_pairs, seed)
    return ConditionReport(min_inner, max_diff, lip_h, lip_g, growth, skipped, n_boundary_samples)


def _growth(h, g, z):
    num = np.sum(h * h, axis=-1) + np.sum(g * g, axis=-1)
    return float(np.max(num / (1.0 + np.sum(z * z, axis=-1))))


# Lipschitz estimate ---------------------------------------------------------

def _near_pairs(poly: Polyhedron, n: int, seed: int):
    base = np.round(sample_interior(poly, n, seed, tag=2) * _LATTICE) / _LATTICE
    dirs = NormalStream(seed, Purpose.SAMPLING, 3).read(n * poly.dim).reshape(n, poly.dim)
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    step = np.round(NEAR_GAP * dirs * _LATTICE) / _LATTICE
    partner = base + step
    flip = min_distance(poly, partner) < 0.0
    partner[flip] = base[flip] - step[flip]
    ok = (min_distance(poly, partner) >= 0.0) & (min_distance(poly, base) >= 0.0)
    return base[ok], partner[ok]


def lipschitz_estimate(f: Callable, domain: Polyhedron, n_pairs: int, seed: int = 0) -> float:
    """Largest sampled difference quotient ``|f(a) - f(b)| / |a - b|``.

    ``f`` maps a batch ``(N, D)`` to ``(N, D')``. Pairs are drawn uniformly
    from ``domain``, plus a fixed set of near-coincident pairs. This is a
    lower bound on the Lipschitz constant; it cannot certify one. Growing
    ``n_pairs`` only adds pairs, so the estimate never decreases.
    """
    if n_pairs < 1:
        raise ValueError("n_pairs must be at least 1")
    pts = np.round(sample_interior(domain, 2 * n_pairs, seed, tag=4) * _LATTICE) / _LATTICE
    a = np.concatenate([pts[0::2], _near_pairs(domain, NEAR_PAIRS, seed)[0]])
    b = np.concatenate([pts[1::2], _near_pairs(domain, NEAR_PAIRS, seed)[1]])
    fa = np.asarray(f(a)).reshape(len(a), -1)
    fb = np.asarray(f(b)).reshape(len(b), -1)
    gap = np.linalg.norm(a - b, axis=1)
    ok = gap > 0
    return float(np.max(np.linalg.norm(fa - fb, axis=1)[ok] / gap[ok]))


# stationarity ---------------------------------------------------------------

def stationary_flux(cfg: StationaryConfig, grid) -> np.ndarray:
    """``h p~ - 1/2 d/dz (g^2 p~)`` on a 1D grid, derivative by forward mode."""
    if cfg.dim != 1:
        raise ValueError("the flux check is one-dimensional")
    z = np.asarray(grid, dtype=float).reshape(-1, 1)
    h = stationary_drift(cfg, z)[:, 0]
    zd = dual.seed_direction(z, np.ones(1))
    g = cfg.diffusion(0.0, zd)
    mass = g * g * dual.exp(cfg.log_ptilde(zd))[..., None]
    dmass = np.broadcast_to(dual.tangent_of(mass), z.shape)[:, 0]
    p = np.exp(cfg.log_ptilde(z))
    return h * p - 0.5 * dmass


def stationary_flux_max(cfg: StationaryConfig, grid) -> float:
    return float(np.max(np.abs(stationary_flux(cfg, grid))))


# distribution distance ------------------------------------------------------

def target_cdf(log_ptilde: Callable, support, n_points: int = QUADRATURE_POINTS):
    """Grid and normalized CDF of ``exp(log_ptilde)`` by the trapezoid rule."""
    a, b = support
    grid = np.linspace(a, b, n_points)
    logp = np.asarray(log_ptilde(grid[:, None]), dtype=float)
    p = np.exp(logp - np.max(logp))
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (p[1:] + p[:-1]) * np.diff(grid))])
    return grid, cdf / cdf[-1]


def distribution_distance(samples, log_ptilde: Callable, support, n_bins: int = 50):
    """Kolmogorov-Smirnov and binned total-variation distance to a target.

    Returns ``(ks, tv)``.
    """
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    a, b = support
    if n_bins < 1:
        raise ValueError("n_bins must be at least 1")
    if len(x) == 0:
        raise ValueError("no samples")
    if x[0] < a or x[-1] > b:
        raise ValueError("samples outside the support")
    if x[0] == x[-1]:
        warnings.warn("all samples are equal; the empirical CDF is degenerate",
                      RuntimeWarning, stacklevel=2)
    grid, cdf = target_cdf(log_ptilde, support)
    F = np.interp(x, grid, cdf)
    n = len(x)
    ks = max(np.max(np.arange(1, n + 1) / n - F), np.max(F - np.arange(n) / n))
    edges = np.linspace(a, b, n_bins + 1)
    hist = np.histogram(x, bins=edges)[0] / n
    target = np.diff(np.interp(edges, grid, cdf))
    tv = 0.5 * float(np.sum(np.abs(hist - target)))
    return float(ks), tv
