"""Explicit Dormand-Prince 5(4) integration, fixed-step and adaptive.

The adaptive driver uses a PI step-size controller on the embedded error
estimate and Shampine's free quartic interpolant for dense output.
"""

from __future__ import annotations

import numpy as np

from .trajectory import NumericalAbort, StiffnessError, Trajectory, time_grid

C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
# fifth-order minus embedded fourth-order weights
E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])
# dense output: y(t + theta h) = y + h * K^T (P @ [theta, theta^2, theta^3, theta^4])
P = np.array([
    [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0
MIN_STEP = 1e-12


def _stages(rhs, t, y, h, k0):
    """All seven stages; ``k0 = rhs(t, y)`` is passed in (FSAL)."""
    K = np.empty((7,) + y.shape)
    K[0] = k0
    for s in range(1, 7):
        dy = np.tensordot(np.asarray(A[s]), K[:s], axes=1)
        K[s] = rhs(t + C[s] * h, y + h * dy)
    return K


def _finite(x, step, t):
    if not np.all(np.isfinite(x)):
        raise NumericalAbort("non-finite value in ODE right-hand side", step=step, time=t)


def rk_fixed(rhs, z0, t0: float, T: float, dt: float, meta=None) -> Trajectory:
    """Fixed-step fifth-order Dormand-Prince; stores every step."""
    times = time_grid(t0, T, dt)
    y = np.array(z0, dtype=float)
    out = np.empty((len(times),) + y.shape)
    out[0] = y
    for k in range(len(times) - 1):
        t = times[k]
        h = times[k + 1] - t
        K = np.empty((6,) + y.shape)
        K[0] = rhs(t, y)
        for s in range(1, 6):
            K[s] = rhs(t + C[s] * h, y + h * np.tensordot(np.asarray(A[s]), K[:s], axes=1))
        y = y + h * np.tensordot(B[:6], K, axes=1)
        _finite(y, k + 1, times[k + 1])
        out[k + 1] = y
    info = {"solver": "rk_fixed", "dt": dt}
    info.update(meta or {})
    return Trajectory(times, out, meta=info)


def _error_norm(err, y, y_new, rtol, atol):
    scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
    return float(np.sqrt(np.mean((err / scale) ** 2)))


def _initial_step(rhs, t0, y0, f0, span, rtol, atol):
    scale = atol + rtol * np.abs(y0)
    d0 = np.sqrt(np.mean((y0 / scale) ** 2))
    d1 = np.sqrt(np.mean((f0 / scale) ** 2))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, span)
    f1 = rhs(t0 + h0, y0 + h0 * f0)
    d2 = np.sqrt(np.mean(((f1 - f0) / scale) ** 2)) / h0
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1, span)


def rk_adaptive(rhs, z0, t0: float, T: float, rtol: float = 1e-6, atol: float = 1e-9,
                t_eval=None, first_step=None, max_steps: int = 1_000_000, meta=None) -> Trajectory:
    """Adaptive Dormand-Prince 5(4) with PI step control.

    Without ``t_eval`` the accepted step endpoints are returned; otherwise the
    solution is interpolated onto ``t_eval`` (which must lie in ``[t0, T]``).
    """
    span = T - t0
    if span <= 0:
        raise ValueError("T must exceed t0")
    y = np.array(z0, dtype=float)
    f = np.asarray(rhs(t0, y), dtype=float)
    _finite(f, 0, t0)
    h = first_step or _initial_step(rhs, t0, y, f, span, rtol, atol)
    if t_eval is not None:
        t_eval = np.asarray(t_eval, dtype=float)
        if np.any(np.diff(t_eval) <= 0) or t_eval[0] < t0 or t_eval[-1] > T:
            raise ValueError("t_eval must be increasing and inside [t0, T]")
        dense = np.empty((len(t_eval),) + y.shape)
        n_done = int(np.searchsorted(t_eval, t0, side="right"))
        dense[:n_done] = y
    times, states = [t0], [y.copy()]
    t = t0
    err_prev = 1e-4
    n_accept = n_reject = 0
    while t < T:
        if n_accept + n_reject >= max_steps:
            raise NumericalAbort(f"adaptive ODE solver exceeded {max_steps} steps", step=n_accept, time=t)
        if h < MIN_STEP:
            raise StiffnessError(f"step size {h:.3g} underflowed; the problem may be stiff",
                                 step=n_accept, time=t)
        h = min(h, T - t)
        K = _stages(rhs, t, y, h, f)
        y_new = y + h * np.tensordot(B, K, axes=1)
        _finite(K, n_accept + 1, t + h)
        err = _error_norm(h * np.tensordot(E, K, axes=1), y, y_new, rtol, atol)
        if err <= 1.0:
            t_new = T if T - (t + h) < 1e-14 * max(1.0, abs(T)) else t + h
            if t_eval is not None:
                stop = int(np.searchsorted(t_eval, t_new, side="right"))
                if stop > n_done:
                    theta = (t_eval[n_done:stop] - t) / h
                    powers = np.stack([theta ** p for p in range(1, 5)], axis=1)
                    Q = np.tensordot(K, P, axes=([0], [0]))  # (..., 4)
                    dense[n_done:stop] = y + h * np.moveaxis(Q @ powers.T, -1, 0)
                    n_done = stop
            t, y, f = t_new, y_new, K[6]
            times.append(t)
            states.append(y.copy())
            n_accept += 1
            factor = SAFETY * max(err, 1e-10) ** (-0.7 / 5) * err_prev ** (0.4 / 5)
            h *= min(MAX_FACTOR, max(MIN_FACTOR, factor))
            err_prev = max(err, 1e-4)
        else:
            n_reject += 1
            h *= max(MIN_FACTOR, SAFETY * err ** (-1 / 5))
    info = {"solver": "rk_adaptive", "rtol": rtol, "atol": atol,
            "n_accepted": n_accept, "n_rejected": n_reject}
    info.update(meta or {})
    if t_eval is not None:
        return Trajectory(t_eval, dense, meta=info)
    return Trajectory(np.array(times), np.array(states), meta=info)
