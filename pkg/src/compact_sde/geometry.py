"""Compact polyhedra as finite intersections of closed half-spaces.

A half-space is ``H(u, v) = {z : <z - u, v> >= 0}`` with anchor ``u`` and
inward normal ``v``. All point arguments may be a single point of shape
``(D,)``, a batch ``(..., D)``, or a :class:`~compact_sde.dual.Dual`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import dual
from .simplex import InfeasibleLP, UnboundedLP, linprog_max

BOUNDARY_TOL = 1e-9


class GeometryError(ValueError):
    pass


class DomainError(ValueError):
    """A field defined only on K was evaluated outside it."""


@dataclass(frozen=True)
class HalfSpace:
    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float).reshape(-1)
        v = np.asarray(self.v, dtype=float).reshape(-1)
        if u.shape != v.shape:
            raise GeometryError(f"anchor and normal differ in length: {u.shape} vs {v.shape}")
        if np.linalg.norm(v) <= 1e-12:
            raise GeometryError("half-space normal must be nonzero")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)

    @property
    def dim(self) -> int:
        return self.u.shape[0]


def halfspace_distance(hs: HalfSpace, z):
    """Signed distance ``<z - u, v> / |v|`` from ``z`` to the boundary of ``hs``.

    Nonnegative exactly when ``z`` lies in the half-space.
    """
    return ((z - hs.u) * hs.v).sum(axis=-1) / np.linalg.norm(hs.v)


@dataclass(frozen=True, eq=False)
class Polyhedron:
    """Bounded, nonempty intersection of half-spaces.

    Construction solves the Chebyshev-center LP and one LP per coordinate
    direction; an empty or unbounded set raises :class:`GeometryError`.
    """

    halfspaces: tuple
    center: np.ndarray = field(init=False, repr=False)
    radius: float = field(init=False)
    lo: np.ndarray = field(init=False, repr=False)
    hi: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        hs = tuple(h if isinstance(h, HalfSpace) else HalfSpace(*h) for h in self.halfspaces)
        if not hs:
            raise GeometryError("a polyhedron needs at least one half-space")
        dims = {h.dim for h in hs}
        if len(dims) != 1:
            raise GeometryError(f"half-spaces have inconsistent dimensions {sorted(dims)}")
        object.__setattr__(self, "halfspaces", hs)
        U = np.array([h.u for h in hs])
        V = np.array([h.v for h in hs])
        norms = np.linalg.norm(V, axis=1)
        for name, arr in (("U", U), ("V", V), ("norms", norms), ("unit_normals", V / norms[:, None])):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        center, radius = _solve_chebyshev(self)
        lo, hi = _bounding_box(self)
        for name, val in (("center", center), ("radius", radius), ("lo", lo), ("hi", hi)):
            if isinstance(val, np.ndarray):
                val.setflags(write=False)
            object.__setattr__(self, name, val)

    @classmethod
    def box(cls, lo, hi) -> "Polyhedron":
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        if lo.shape != hi.shape:
            raise GeometryError("box bounds differ in length")
        hs = []
        for d in range(lo.shape[0]):
            e = np.zeros(lo.shape[0])
            e[d] = 1.0
            lower = np.zeros_like(lo)
            lower[d] = lo[d]
            upper = np.zeros_like(hi)
            upper[d] = hi[d]
            hs.append(HalfSpace(lower, e))
            hs.append(HalfSpace(upper, -e))
        return cls(tuple(hs))

    @classmethod
    def simplex(cls, dim: int) -> "Polyhedron":
        """The standard simplex ``{z >= 0, sum(z) <= 1}``."""
        hs = []
        for d in range(dim):
            e = np.zeros(dim)
            e[d] = 1.0
            hs.append(HalfSpace(np.zeros(dim), e))
        corner = np.zeros(dim)
        corner[0] = 1.0
        hs.append(HalfSpace(corner, -np.ones(dim)))
        return cls(tuple(hs))

    @property
    def dim(self) -> int:
        return self.halfspaces[0].dim

    @property
    def n_facets(self) -> int:
        return len(self.halfspaces)

    def distances(self, z):
        """Signed distances to every facet, shape ``(..., S)``."""
        if isinstance(z, dual.Dual):
            zz = z[..., None, :]
        else:
            zz = np.asarray(z, dtype=float)[..., None, :]
        return ((zz - self.U) * self.V).sum(axis=-1) / self.norms

    def to_dict(self) -> dict:
        return {"halfspaces": [{"u": h.u.tolist(), "v": h.v.tolist()} for h in self.halfspaces]}

    @classmethod
    def from_dict(cls, spec: dict) -> "Polyhedron":
        if "box" in spec:
            return cls.box(spec["box"]["lo"], spec["box"]["hi"])
        if "halfspaces" in spec:
            return cls(tuple(HalfSpace(h["u"], h["v"]) for h in spec["halfspaces"]))
        raise GeometryError("polyhedron spec needs a 'box' or 'halfspaces' entry")


def contains(poly: Polyhedron, z, tol: float = BOUNDARY_TOL):
    """Membership with an absolute tolerance band; vectorized over leading axes."""
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    d = poly.distances(dual.value_of(z))
    out = np.min(d, axis=-1) >= -tol
    return bool(out) if np.ndim(out) == 0 else out


def min_distance(poly: Polyhedron, z):
    return np.min(poly.distances(dual.value_of(z)), axis=-1)


def require_inside(poly: Polyhedron, z, tol: float = BOUNDARY_TOL, what: str = "field"):
    """Raise :class:`DomainError` if any point of the batch lies outside ``poly``."""
    worst = np.min(min_distance(poly, z))
    if worst < -tol:
        raise DomainError(f"{what} evaluated outside the polyhedron (facet distance {worst:.3g})")


def active_facets(poly: Polyhedron, z, tol: float = BOUNDARY_TOL) -> set:
    d = poly.distances(np.asarray(z, dtype=float).reshape(poly.dim))
    return {int(s) for s in np.flatnonzero(np.abs(d) <= tol)}


def chebyshev_center(poly: Polyhedron):
    """Center and radius of the largest ball inscribed in ``poly``."""
    return poly.center.copy(), poly.radius


def _chebyshev_lp(U, unit):
    # variables (z, r): maximize r  s.t.  -<z, v_s> + r <= -<u_s, v_s>
    S, D = unit.shape
    A = np.hstack([-unit, np.ones((S, 1))])
    b = -np.einsum("sd,sd->s", U, unit)
    c = np.zeros(D + 1)
    c[-1] = 1.0
    free = np.r_[np.ones(D, dtype=bool), False]
    return c, A, b, free


def _solve_chebyshev(poly):
    c, A, b, free = _chebyshev_lp(poly.U, poly.unit_normals)
    try:
        x, r = linprog_max(c, A, b, free=free)
    except InfeasibleLP as exc:
        raise GeometryError("empty polyhedron") from exc
    except UnboundedLP as exc:
        raise GeometryError("polyhedron not compact") from exc
    if r <= 1e-12:
        raise GeometryError("empty polyhedron (no interior)")
    return x[:-1], float(r)


def _bounding_box(poly):
    D = poly.dim
    # K = {z : -<z, v_s> <= -<u_s, v_s>}
    A = -poly.unit_normals
    b = -np.einsum("sd,sd->s", poly.U, poly.unit_normals)
    lo = np.empty(D)
    hi = np.empty(D)
    free = np.ones(D, dtype=bool)
    for d in range(D):
        e = np.zeros(D)
        e[d] = 1.0
        try:
            _, hi[d] = linprog_max(e, A, b, free=free)
            _, neg = linprog_max(-e, A, b, free=free)
        except UnboundedLP as exc:
            raise GeometryError("polyhedron not compact") from exc
        lo[d] = 0.0 - neg
    return lo, hi
