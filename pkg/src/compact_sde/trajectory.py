"""Trajectory container and the errors raised by the integrators."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np


class NumericalAbort(RuntimeError):
    """Integration stopped because the state or a coefficient became unusable."""

    def __init__(self, message, step=None, time=None, row=None):
        super().__init__(message)
        self.step = step
        self.time = time
        self.row = row

    def __str__(self):
        where = []
        if self.step is not None:
            where.append(f"step {self.step}")
        if self.time is not None:
            where.append(f"t={self.time:.6g}")
        if self.row is not None:
            where.append(f"path {self.row}")
        base = super().__str__()
        return f"{base} ({', '.join(where)})" if where else base


class StiffnessError(NumericalAbort):
    pass


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    in_k: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.asarray(self.states, dtype=float)
        if self.states.ndim == 1:
            self.states = self.states[:, None]
        if len(self.times) != len(self.states):
            raise ValueError("times and states differ in length")

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


def time_grid(t0: float, T: float, dt: float) -> np.ndarray:
    """Uniform grid from ``t0`` to ``T``; ``dt`` must divide the span."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    span = T - t0
    if span <= 0:
        raise ValueError("T must exceed t0")
    n = int(round(span / dt))
    if n < 1 or abs(n * dt - span) > 1e-9:
        raise ValueError(f"dt={dt} does not divide the horizon {span} within 1e-9")
    return np.linspace(t0, T, n + 1)
