"""Boundary weight that fades unconstrained dynamics out near the facets of K.

For facet distances ``d_s`` the weight is

    w(z) = tanh(beta * prod_s softmin(d)_s * tanh(alpha * d_s))

with the softmin taken at temperature one. ``w`` vanishes whenever any
``d_s`` is zero and lies in ``(0, 1]`` on the interior.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import dual
from .geometry import BOUNDARY_TOL, Polyhedron, require_inside


@dataclass(frozen=True)
class WeightParams:
    alpha: float = 10.0
    beta: float = 10.0

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise ValueError(f"alpha and beta must be positive, got {self.alpha}, {self.beta}")


def weight(poly: Polyhedron, params: WeightParams, z, tol: float = BOUNDARY_TOL):
    """Boundary weight at ``z``; accepts batches and duals.

    Points within ``tol`` outside K are treated as lying on the boundary.
    """
    require_inside(poly, z, tol, what="boundary weight")
    d = dual.clamp_min(poly.distances(z), 0.0)
    terms = dual.softmin(d) * dual.tanh(params.alpha * d)
    return dual.tanh(params.beta * dual.prod(terms, axis=-1))


def weight_gradient(poly: Polyhedron, params: WeightParams, z) -> np.ndarray:
    """Gradient of :func:`weight` at a single point by forward-mode passes."""
    z = np.asarray(z, dtype=float).reshape(poly.dim)
    if np.min(poly.distances(z)) <= 0.0:
        warnings.warn("weight gradient requested on the boundary; returning the one-sided value",
                      RuntimeWarning, stacklevel=2)
    grad = np.empty(poly.dim)
    for d in range(poly.dim):
        grad[d] = weight(poly, params, dual.seed_direction(z, np.eye(poly.dim)[d])).tangent
    return grad
