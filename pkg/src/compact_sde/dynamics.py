"""Drift/diffusion pairs for SDEs on compact polyhedra and their baselines.

Fields are callables ``f(t, z)`` where ``z`` has shape ``(D,)`` or ``(N, D)``
(or is a :class:`~compact_sde.dual.Dual` of either) and the result has the
same shape. Diffusions are diagonal: ``g(t, z)[..., d]`` scales the ``d``-th
Brownian component.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from . import dual
from .geometry import BOUNDARY_TOL, DomainError, Polyhedron, require_inside
from .nets import mlp_field, mlp_init, mlp_stack_field, value_and_diag_jacobian
from .rng import derive_seed
from .weights import WeightParams, weight

Field = Callable


class Calculus(str, enum.Enum):
    ITO = "ito"
    STRATONOVICH = "stratonovich"


@dataclass(frozen=True)
class DynamicsSpec:
    drift: Field
    diffusion: Field
    dim: int
    calculus: Calculus = Calculus.ITO
    name: str = ""
    # optional fast path returning (g, dg_d/dz_d) in one call
    diffusion_jacobian: Optional[Callable] = None
    # optional fast path returning (h, g, dg_d/dz_d) in one call
    coefficients: Optional[Callable] = None

    def __post_init__(self):
        object.__setattr__(self, "calculus", Calculus(self.calculus))

    def drift_diffusion_and_diag(self, t, z):
        if self.coefficients is not None:
            return self.coefficients(t, z)
        return (self.drift(t, z),) + tuple(self.diffusion_and_diag(t, z))

    def diffusion_and_diag(self, t, z):
        if self.diffusion_jacobian is not None:
            return self.diffusion_jacobian(t, z)
        return value_and_diag_jacobian(self.diffusion, z, t)


def _zero(t, z):
    return 0.0 * z


def base_networks(seed: int, dim: int = 1, hidden=(64, 64, 64), activation="celu"):
    """Randomly initialized unconstrained drift and (softplus) diffusion fields.

    The two networks get independent seeds derived from ``seed``.
    """
    sizes = [dim, *hidden, dim]
    h = mlp_field(mlp_init(sizes, activation, derive_seed(seed, 0)))
    g = mlp_field(mlp_init(sizes, activation, derive_seed(seed, 1)), positive=True)
    return h, g


def stacked_base_networks(row_seeds, dim: int = 1, hidden=(64, 64, 64), activation="celu"):
    """Base fields for a batch whose row ``i`` uses the networks of ``row_seeds[i]``.

    Row ``i`` of the output equals ``base_networks(row_seeds[i], ...)``
    evaluated on row ``i`` of the input, so a whole seed grid can be
    simulated as one batch.
    """
    sizes = [dim, *hidden, dim]
    hs = [mlp_init(sizes, activation, derive_seed(s, 0)) for s in row_seeds]
    gs = [mlp_init(sizes, activation, derive_seed(s, 1)) for s in row_seeds]
    return mlp_stack_field(hs), mlp_stack_field(gs, positive=True)


def make_unconstrained(drift: Field, diffusion: Field, dim: int,
                       calculus=Calculus.ITO) -> DynamicsSpec:
    return DynamicsSpec(drift, diffusion, dim, calculus, name="unconstrained")


# weighted sums parameterization -------------------------------------------

def center_pull(poly: Polyhedron, gamma: float, eps: float, z):
    """Push of magnitude below ``gamma`` towards the Chebyshev center."""
    delta = poly.center - z
    return gamma * delta / (dual.norm(delta, axis=-1)[..., None] + eps)


@dataclass(frozen=True)
class WspConfig:
    base: DynamicsSpec
    poly: Polyhedron
    weights: WeightParams = WeightParams()
    gamma: float = 1.0
    eps: float = 0.01
    domain_tol: float = BOUNDARY_TOL

    def __post_init__(self):
        if not (self.gamma > 0 and self.eps > 0):
            raise ValueError(f"gamma and eps must be positive, got {self.gamma}, {self.eps}")
        if self.base.dim != self.poly.dim:
            raise ValueError(f"base dynamics have dimension {self.base.dim}, "
                             f"polyhedron has {self.poly.dim}")


def make_wsp(cfg: WspConfig) -> DynamicsSpec:
    """Blend base dynamics with constraint-satisfying fallbacks.

    drift = w * h_base + (1 - w) * center_pull, diffusion = w * g_base.
    Both vanish-or-point-inward on the boundary, where ``w = 0``.
    """
    poly, params, tol = cfg.poly, cfg.weights, cfg.domain_tol
    h_base, g_base = cfg.base.drift, cfg.base.diffusion

    def drift(t, z):
        require_inside(poly, z, tol, what="WSP drift")
        w = weight(poly, params, z, tol)[..., None]
        return w * h_base(t, z) + (1.0 - w) * center_pull(poly, cfg.gamma, cfg.eps, z)

    def diffusion(t, z):
        require_inside(poly, z, tol, what="WSP diffusion")
        return weight(poly, params, z, tol)[..., None] * g_base(t, z)

    return DynamicsSpec(drift, diffusion, poly.dim, cfg.base.calculus, name="wsp")


# chain-rule baselines on (0, 1) ------------------------------------------

def _sigmoid_poly(z):
    one = z - z * z
    two = (2.0 * z * z * z - 3.0 * z * z + z) / 2.0
    return one, two


def make_sigmoid_transformed(base_y: DynamicsSpec, calculus=Calculus.ITO,
                             squared_diffusion: bool = False) -> DynamicsSpec:
    """Push a y-space SDE through the sigmoid and re-express it in z.

    Ito mode reproduces the commonly quoted form whose second-order term is
    linear in the y-space diffusion. That only coincides with Ito's lemma
    when the diffusion is 0 or 1; ``squared_diffusion=True`` uses the
    exact ``g**2`` term instead. Stratonovich mode applies the ordinary
    chain rule and has no second-order term.
    """
    calculus = Calculus(calculus)
    if base_y.dim != 1:
        raise ValueError("the sigmoid transform is defined for one-dimensional dynamics")

    def _y(z):
        zv = dual.value_of(z)
        if np.any(zv <= 0.0) or np.any(zv >= 1.0):
            raise DomainError("singular logit: sigmoid-transformed dynamics need z in (0, 1)")
        return dual.logit(z)

    def drift(t, z):
        y = _y(z)
        one, two = _sigmoid_poly(z)
        out = base_y.drift(t, y) * one
        if calculus is Calculus.ITO:
            g = base_y.diffusion(t, y)
            out = out + (g * g if squared_diffusion else g) * two
        return out

    def diffusion(t, z):
        one, _ = _sigmoid_poly(z)
        return base_y.diffusion(t, _y(z)) * one

    return DynamicsSpec(drift, diffusion, base_y.dim, calculus, name="sigmoid_ito")


def make_absorbed(h: Field, g: Field, dim: int = 1, calculus=Calculus.ITO) -> DynamicsSpec:
    """Sigmoid-transformed form with the logit absorbed into ``h`` and ``g``."""
    calculus = Calculus(calculus)
    if dim != 1:
        raise ValueError("absorbed dynamics are defined on the unit interval only")

    def drift(t, z):
        one, two = _sigmoid_poly(z)
        out = h(t, z) * one
        if calculus is Calculus.ITO:
            out = out + g(t, z) * two
        return out

    def diffusion(t, z):
        one, _ = _sigmoid_poly(z)
        return g(t, z) * one

    return DynamicsSpec(drift, diffusion, dim, calculus, name="absorbed")


# stationary construction ----------------------------------------------------

@dataclass(frozen=True)
class StationaryConfig:
    """Autonomous diffusion ``g(t, z)`` plus an unnormalized log density."""

    diffusion: Field
    log_ptilde: Callable
    dim: int


def score(log_ptilde: Callable, z) -> np.ndarray:
    """Gradient of ``log_ptilde`` at ``z`` (batched), by forward-mode passes."""
    z = np.asarray(z, dtype=float)
    D = z.shape[-1]
    out = np.empty_like(z)
    for d in range(D):
        out[..., d] = dual.tangent_of(log_ptilde(dual.seed_direction(z, np.eye(D)[d])))
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("score of the target density is not finite")
    return out


def stationary_drift(cfg: StationaryConfig, z) -> np.ndarray:
    """Drift that makes the per-dimension probability flux vanish.

    h = 1/2 diag(grad g^2) + 1/2 g^2 * grad log p~, with the first term
    evaluated as g * diag(grad g).
    """
    if isinstance(z, dual.Dual):
        raise TypeError("stationary drift is not differentiable through duals")
    g, dg = value_and_diag_jacobian(cfg.diffusion, z)
    return g * dg + 0.5 * g * g * score(cfg.log_ptilde, z)


def make_stationary(cfg: StationaryConfig) -> DynamicsSpec:
    def drift(t, z):
        return stationary_drift(cfg, z)

    def jac(t, z):
        return value_and_diag_jacobian(cfg.diffusion, z, t)

    return DynamicsSpec(drift, cfg.diffusion, cfg.dim, Calculus.ITO,
                        name="wsp_stationary", diffusion_jacobian=jac)


# calculus conversion --------------------------------------------------------

def stratonovich_correction(spec: DynamicsSpec, t, z) -> np.ndarray:
    """``1/2 diag(grad g) * g``, the drift shift between the two calculi."""
    g, dg = spec.diffusion_and_diag(t, np.asarray(z, dtype=float))
    return 0.5 * dg * g


def stratonovich_to_ito(spec: DynamicsSpec) -> DynamicsSpec:
    if spec.calculus is Calculus.ITO:
        warnings.warn("dynamics are already Ito; returning them unchanged", RuntimeWarning, stacklevel=2)
        return spec

    def drift(t, z):
        return spec.drift(t, z) + stratonovich_correction(spec, t, z)

    return replace(spec, drift=drift, calculus=Calculus.ITO)


def ito_to_stratonovich(spec: DynamicsSpec) -> DynamicsSpec:
    if spec.calculus is Calculus.STRATONOVICH:
        warnings.warn("dynamics are already Stratonovich; returning them unchanged",
                      RuntimeWarning, stacklevel=2)
        return spec

    def drift(t, z):
        return spec.drift(t, z) - stratonovich_correction(spec, t, z)

    return replace(spec, drift=drift, calculus=Calculus.STRATONOVICH)


# tabulated fast path --------------------------------------------------------

def tabulate_1d(specs, lo: float, hi: float, n_grid: int = 2 ** 15 + 1,
                tol: float = BOUNDARY_TOL) -> DynamicsSpec:
    """Replace autonomous 1D dynamics by piecewise-linear tables on ``[lo, hi]``.

    Row ``i`` of a state batch of shape ``(len(specs), 1)`` follows
    ``specs[i]``. Drift, diffusion and the diffusion's derivative are
    computed exactly at the nodes and interpolated between them, which
    removes per-step network evaluations from long simulations.
    """
    specs = list(specs)
    if any(s.dim != 1 for s in specs):
        raise ValueError("tabulation is only available for one-dimensional dynamics")
    grid = np.linspace(lo, hi, n_grid)[:, None]
    drift_tab = np.stack([np.asarray(s.drift(0.0, grid))[:, 0] for s in specs])
    diff_tab, ddiff_tab = [], []
    for s in specs:
        g, dg = s.diffusion_and_diag(0.0, grid)
        diff_tab.append(g[:, 0])
        ddiff_tab.append(dg[:, 0])
    table = np.stack([drift_tab, np.stack(diff_tab), np.stack(ddiff_tab)])  # (3, M, n_grid)
    # node values and per-cell slopes side by side, flattened so one gather serves a lookup
    cells = np.stack([table[..., :-1], table[..., 1:] - table[..., :-1]], axis=-1)  # (3, M, n-1, 2)
    cells = cells.reshape(3, -1, 2)
    row_offset = np.arange(len(specs)) * (n_grid - 1)
    step = (hi - lo) / (n_grid - 1)
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo) + tol

    def lookup(z, which):
        zv = np.asarray(z, dtype=float)[:, 0]
        if np.abs(zv - mid).max() > half:
            raise DomainError("tabulated dynamics evaluated outside their table")
        pos = np.minimum(np.maximum(zv - lo, 0.0) / step, n_grid - 1)
        idx = np.minimum(pos.astype(np.int64), n_grid - 2)
        cell = cells[which][..., row_offset + idx, :]
        return (cell[..., 0] + cell[..., 1] * (pos - idx))[..., None]

    def drift(t, z):
        return lookup(z, 0)

    def diffusion(t, z):
        return lookup(z, 1)

    def jac(t, z):
        g, dg = lookup(z, slice(1, 3))
        return g, dg

    def coefficients(t, z):
        h, g, dg = lookup(z, slice(0, 3))
        return h, g, dg

    return DynamicsSpec(drift, diffusion, 1, specs[0].calculus,
                        name=f"tabulated:{specs[0].name}", diffusion_jacobian=jac,
                        coefficients=coefficients)
