"""Dense two-phase tableau simplex for small linear programs.

Solves ``maximize c @ x  s.t.  A_ub @ x <= b_ub`` where a subset of the
variables may be free (all others are >= 0). Bland's rule is used for both
the entering and the leaving variable, so the method terminates on
degenerate problems. Intended for a few dozen constraints at most.
"""

from __future__ import annotations

import numpy as np


class LPError(ArithmeticError):
    pass


class InfeasibleLP(LPError):
    pass


class UnboundedLP(LPError):
    pass


def _pivot(T, basis, row, col):
    T[row] /= T[row, col]
    for i in range(T.shape[0]):
        if i != row and T[i, col] != 0.0:
            T[i] -= T[i, col] * T[row]
    basis[row] = col


def _run(T, basis, allowed, tol, max_iter):
    """Iterate until optimal; the last row holds reduced costs and the objective."""
    n_rows = T.shape[0] - 1
    for _ in range(max_iter):
        candidates = [j for j in allowed if T[-1, j] < -tol]
        if not candidates:
            return
        col = candidates[0]
        best = None
        for i in range(n_rows):
            a = T[i, col]
            if a > tol:
                ratio = T[i, -1] / a
                if best is None or ratio < best[0] - tol or (
                        abs(ratio - best[0]) <= tol and basis[i] < basis[best[1]]):
                    best = (ratio, i)
        if best is None:
            raise UnboundedLP("objective is unbounded")
        _pivot(T, basis, best[1], col)
    raise LPError(f"simplex did not converge in {max_iter} iterations")


def linprog_max(c, A_ub, b_ub, free=None, tol=1e-10, max_iter=10_000):
    """Maximize ``c @ x`` subject to ``A_ub @ x <= b_ub``.

    Parameters
    ----------
    c : array (n,)
    A_ub : array (m, n)
    b_ub : array (m,)
    free : boolean array (n,), optional
        Variables without a sign constraint. Default: none are free.

    Returns
    -------
    x : array (n,)
    value : float

    Raises
    ------
    InfeasibleLP, UnboundedLP
    """
    c = np.asarray(c, dtype=float)
    A = np.atleast_2d(np.asarray(A_ub, dtype=float))
    b = np.asarray(b_ub, dtype=float)
    m, n = A.shape
    free = np.zeros(n, dtype=bool) if free is None else np.asarray(free, dtype=bool)

    # columns: x+ (n) | x- (free vars) | slacks (m) | artificials (rows with b < 0)
    free_idx = np.flatnonzero(free)
    neg_rows = np.flatnonzero(b < 0)
    n_struct = n + len(free_idx)
    n_cols = n_struct + m + len(neg_rows)
    T = np.zeros((m + 1, n_cols + 1))
    T[:m, :n] = A
    T[:m, n:n_struct] = -A[:, free_idx]
    T[:m, n_struct:n_struct + m] = np.eye(m)
    T[:m, -1] = b
    basis = list(range(n_struct, n_struct + m))
    art_cols = []
    for k, i in enumerate(neg_rows):
        T[i, :-1] *= -1.0
        T[i, -1] *= -1.0
        col = n_struct + m + k
        T[i, col] = 1.0
        basis[i] = col
        art_cols.append(col)

    non_art = list(range(n_struct + m))
    if art_cols:
        # phase 1: maximize -sum(artificials)
        T[-1, :] = 0.0
        T[-1, art_cols] = 1.0
        for i in neg_rows:
            T[-1] -= T[i]
        _run(T, basis, non_art + art_cols, tol, max_iter)
        if T[-1, -1] < -1e-9:
            raise InfeasibleLP("constraints are infeasible")
        keep = []
        for i in range(m):
            if basis[i] in art_cols:
                pivots = [j for j in non_art if abs(T[i, j]) > tol]
                if pivots:
                    _pivot(T, basis, i, pivots[0])
                    keep.append(i)
                # otherwise the row is redundant and is dropped
            else:
                keep.append(i)
        T = np.vstack([T[keep][:, non_art + [n_cols]], T[-1:, non_art + [n_cols]]])
        basis = [basis[i] for i in keep]

    # phase 2
    T[-1, :] = 0.0
    T[-1, :n] = -c
    T[-1, n:n_struct] = c[free_idx]
    for i, j in enumerate(basis):
        if T[-1, j] != 0.0:
            T[-1] -= T[-1, j] * T[i]
    _run(T, basis, non_art, tol, max_iter)

    sol = np.zeros(n_struct + m)
    for i, j in enumerate(basis):
        sol[j] = T[i, -1]
    x = sol[:n].copy()
    x[free_idx] -= sol[n:n_struct]
    return x, float(c @ x)
