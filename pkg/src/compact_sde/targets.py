"""Built-in unnormalized target densities for stationary runs.

Each factory returns ``log_ptilde(z)`` accepting points ``(..., D)`` or duals
and returning shape ``(...)``; multi-dimensional inputs are treated as
independent coordinates.
"""

from __future__ import annotations

from . import dual


def gauss(mu: float = 0.5, s: float = 0.15):
    """log p~(z) = -(z - mu)^2 / (2 s^2)."""
    if s <= 0:
        raise ValueError("s must be positive")

    def log_ptilde(z):
        return (-((z - mu) * (z - mu)) / (2.0 * s * s)).sum(axis=-1)

    return log_ptilde


def bimodal(centers=(0.3, 0.7), width: float = 0.005):
    """log(exp(-(z - a)^2 / width) + exp(-(z - b)^2 / width))."""
    a, b = centers
    if width <= 0:
        raise ValueError("width must be positive")

    def log_ptilde(z):
        return dual.logaddexp(-((z - a) * (z - a)) / width, -((z - b) * (z - b)) / width).sum(axis=-1)

    return log_ptilde


TARGETS = {"gauss": gauss, "bimodal": bimodal}


def make_target(name: str, **params):
    try:
        factory = TARGETS[name]
    except KeyError:
        raise ValueError(f"unknown target density {name!r}; choose from {sorted(TARGETS)}") from None
    return factory(**params)
