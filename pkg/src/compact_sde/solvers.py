"""Seeded Brownian noise, Ito SDE schemes and Karhunen-Loeve path simulation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .dynamics import Calculus, DynamicsSpec
from .geometry import DomainError, Polyhedron, contains, min_distance
from .ode import rk_adaptive, rk_fixed
from .rng import NormalStream, Purpose, normals
from .trajectory import NumericalAbort, Trajectory, time_grid

# in-K flag tolerance used when a polyhedron is attached to a run
VIABILITY_TOL = 1e-6


@dataclass(frozen=True)
class NoiseStream:
    seed: int
    sample_index: int
    dim: int
    dt: float
    n_steps: int

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.n_steps < 1:
            raise ValueError("n_steps must be at least 1")


class _IncrementReader:
    """Sequential reader over a stream's Normal(0, dt) increments."""

    def __init__(self, stream: NoiseStream):
        self.stream = stream
        self._normals = NormalStream(stream.seed, Purpose.NOISE, stream.sample_index)
        self._scale = np.sqrt(stream.dt)

    def read(self, n_steps: int) -> np.ndarray:
        return self._scale * self._normals.read(n_steps * self.stream.dim).reshape(n_steps, self.stream.dim)


def brownian_increments(stream: NoiseStream) -> np.ndarray:
    """All ``(n_steps, dim)`` increments; entry ``(k, d)`` is normal draw ``k*dim + d``."""
    return np.sqrt(stream.dt) * normals(stream.seed, Purpose.NOISE, stream.sample_index,
                                        stream.n_steps * stream.dim).reshape(stream.n_steps, stream.dim)


def _as_batch(z0, dim):
    z0 = np.asarray(z0, dtype=float)
    single = z0.ndim <= 1
    z = z0.reshape(1, dim) if single else z0
    if z.shape[-1] != dim:
        raise ValueError(f"initial state has dimension {z.shape[-1]}, dynamics have {dim}")
    return z.copy(), single


def integrate_ito(spec: DynamicsSpec, z0, t0: float, T: float, dt: float,
                  streams: Sequence[NoiseStream], scheme: str = "milstein",
                  poly: Optional[Polyhedron] = None, tol: float = VIABILITY_TOL,
                  record_every: int = 1, chunk: int = 4096) -> list:
    """Integrate a batch of paths, one noise stream per row of ``z0``.

    Returns one :class:`Trajectory` per stream. With ``record_every > 1``
    only every ``record_every``-th state is stored; when a polyhedron is
    given the smallest facet distance over all steps is still tracked in
    ``meta["min_facet_distance"]``.
    """
    if spec.calculus is not Calculus.ITO:
        raise ValueError("Ito schemes need Ito dynamics; convert with stratonovich_to_ito first")
    if scheme not in ("euler", "milstein"):
        raise ValueError(f"unknown scheme {scheme!r}")
    times = time_grid(t0, T, dt)
    n = len(times) - 1
    if n % record_every:
        raise ValueError("record_every must divide the number of steps")
    streams = list(streams)
    z, _ = _as_batch(z0, spec.dim)
    if z.shape[0] == 1 and len(streams) > 1:
        z = np.repeat(z, len(streams), axis=0)
    if z.shape[0] != len(streams):
        raise ValueError(f"{z.shape[0]} initial states for {len(streams)} noise streams")
    for s in streams:
        if s.dim != spec.dim or s.n_steps != n or abs(s.dt - dt) > 1e-15:
            raise ValueError("noise stream does not match the time grid or dimension")
    readers = [_IncrementReader(s) for s in streams]
    rec_times = times[::record_every]
    out = np.empty((len(rec_times), z.shape[0], spec.dim))
    out[0] = z
    min_dist = min_distance(poly, z) if poly is not None else None
    milstein = scheme == "milstein"
    k = 0
    try:
        while k < n:
            m = min(chunk, n - k)
            dB = np.stack([r.read(m) for r in readers], axis=1)
            if milstein:
                half_sq = 0.5 * (dB * dB - dt)
            # states of this chunk; facet distances are tracked once per chunk
            buf = np.empty((m,) + z.shape)
            for j in range(m):
                t = times[k]
                if milstein:
                    h, g, dg = spec.drift_diffusion_and_diag(t, z)
                    z = z + h * dt + g * (dB[j] + dg * half_sq[j])
                else:
                    z = z + spec.drift(t, z) * dt + spec.diffusion(t, z) * dB[j]
                k += 1
                if not np.isfinite(z.sum()):
                    bad = int(np.flatnonzero(~np.all(np.isfinite(z), axis=-1))[0])
                    raise NumericalAbort("state became non-finite", step=k, time=times[k], row=bad)
                buf[j] = z
                if k % record_every == 0:
                    out[k // record_every] = z
            if poly is not None:
                min_dist = np.minimum(min_dist, min_distance(poly, buf).min(axis=0))
    except DomainError as exc:
        raise NumericalAbort(f"dynamics left their domain: {exc}", step=k, time=times[k]) from exc
    trajs = []
    for i, s in enumerate(streams):
        meta = {"solver": scheme, "seed": s.seed, "sample": s.sample_index, "dt": dt}
        in_k = None
        if poly is not None:
            in_k = np.asarray(contains(poly, out[:, i], tol))
            meta["min_facet_distance"] = float(min_dist[i])
        trajs.append(Trajectory(rec_times.copy(), out[:, i].copy(), in_k, meta))
    return trajs


def _single(spec, z0, t0, T, dt, stream, scheme, poly, tol):
    z0 = np.asarray(z0, dtype=float).reshape(spec.dim)
    return integrate_ito(spec, z0, t0, T, dt, [stream], scheme, poly, tol)[0]


def euler_maruyama(spec: DynamicsSpec, z0, t0: float, T: float, dt: float, stream: NoiseStream,
                   poly: Optional[Polyhedron] = None, tol: float = VIABILITY_TOL) -> Trajectory:
    """z_{k+1} = z_k + h dt + g * dB."""
    return _single(spec, z0, t0, T, dt, stream, "euler", poly, tol)


def milstein(spec: DynamicsSpec, z0, t0: float, T: float, dt: float, stream: NoiseStream,
             poly: Optional[Polyhedron] = None, tol: float = VIABILITY_TOL) -> Trajectory:
    """Euler-Maruyama plus the diagonal-noise correction 1/2 g g' (dB^2 - dt)."""
    return _single(spec, z0, t0, T, dt, stream, "milstein", poly, tol)


# Karhunen-Loeve expansion ---------------------------------------------------

@dataclass(frozen=True)
class KlExpansion:
    """Coefficients ``xi`` of shape ``(R,)`` or ``(R, D)`` for a horizon ``T``."""

    xi: np.ndarray
    T: float

    def __post_init__(self):
        xi = np.asarray(self.xi, dtype=float)
        if xi.shape[0] < 1:
            raise ValueError("R must be at least 1")
        if self.T <= 0:
            raise ValueError("horizon must be positive")
        object.__setattr__(self, "xi", xi)

    @property
    def R(self) -> int:
        return self.xi.shape[0]


def kl_expansion(seed: int, sample_index: int, R: int, T: float, dim: int = 1) -> KlExpansion:
    xi = normals(seed, Purpose.KL, sample_index, R * dim).reshape(R, dim)
    return KlExpansion(xi if dim > 1 else xi[:, 0], T)


def _frequencies(R, T):
    return (2 * np.arange(1, R + 1) - 1) * np.pi / (2 * T)


def kl_velocity(exp: KlExpansion, t: float):
    """Sum_r sqrt(2/T) cos((2r-1) pi t / (2T)) xi_r, the smoothed white noise at ``t``."""
    if not 0.0 <= t <= exp.T:
        raise DomainError(f"t={t} outside the expansion horizon [0, {exp.T}]")
    basis = np.sqrt(2.0 / exp.T) * np.cos(_frequencies(exp.R, exp.T) * t)
    return basis @ exp.xi


def kl_path(exp: KlExpansion, t):
    """Integral of :func:`kl_velocity` from 0 to ``t`` (closed form)."""
    w = _frequencies(exp.R, exp.T)
    basis = np.sqrt(2.0 / exp.T) * np.sin(np.multiply.outer(t, w)) / w
    return basis @ exp.xi


def simulate_kl_sde(spec: DynamicsSpec, z0, T: float, R: int, streams, method: str = "fixed",
                    dt: float = 1e-3, rtol: float = 1e-6, atol: float = 1e-9, t_eval=None,
                    poly: Optional[Polyhedron] = None, tol: float = VIABILITY_TOL) -> list:
    """Integrate dz/dt = h(t, z) + g(t, z) * v(t) with KL velocities ``v``.

    ``streams`` supplies one ``(seed, sample_index)`` per path (anything with
    those attributes, e.g. :class:`NoiseStream`). The ODE runs on ``[0, T]``.
    """
    if spec.calculus is not Calculus.STRATONOVICH:
        raise ValueError("pathwise expansions converge to Stratonovich dynamics; "
                         "tag the dynamics as Stratonovich")
    if isinstance(streams, NoiseStream):
        streams = [streams]
    streams = list(streams)
    z, _ = _as_batch(z0, spec.dim)
    if z.shape[0] == 1 and len(streams) > 1:
        z = np.repeat(z, len(streams), axis=0)
    xi = np.stack([kl_expansion(s.seed, s.sample_index, R, T, spec.dim).xi.reshape(R, spec.dim)
                   for s in streams])  # (N, R, D)
    w = _frequencies(R, T)
    amp = np.sqrt(2.0 / T)

    def rhs(t, y):
        v = np.einsum("r,nrd->nd", amp * np.cos(w * min(max(t, 0.0), T)), xi)
        return spec.drift(t, y) + spec.diffusion(t, y) * v

    meta = {"R": R}
    try:
        if method == "fixed":
            traj = rk_fixed(rhs, z, 0.0, T, dt, meta=meta)
        elif method == "adaptive":
            traj = rk_adaptive(rhs, z, 0.0, T, rtol, atol, t_eval=t_eval, meta=meta)
        else:
            raise ValueError(f"unknown ODE method {method!r}")
    except DomainError as exc:
        raise NumericalAbort(f"dynamics left their domain: {exc}") from exc
    out = []
    for i, s in enumerate(streams):
        states = traj.states[:, i]
        meta_i = dict(traj.meta, seed=s.seed, sample=s.sample_index, solver="kl_ode_" + method)
        in_k = None
        if poly is not None:
            in_k = np.asarray(contains(poly, states, tol))
            meta_i["min_facet_distance"] = float(np.min(min_distance(poly, states)))
        out.append(Trajectory(traj.times.copy(), states.copy(), in_k, meta_i))
    return out
