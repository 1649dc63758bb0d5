"""Forward-mode dual numbers over numpy arrays.

A :class:`Dual` carries a value array and a tangent array of the same shape;
the tangent is the directional derivative of the value along a fixed input
direction. The elementary functions in this module accept either plain
arrays or duals, so field code written against them can be evaluated both
ways without modification.
"""

from __future__ import annotations

import numpy as np
from scipy import special


class Dual:
    """Value plus tangent, both broadcastable numpy arrays."""

    __slots__ = ("value", "tangent")
    # ndarray <op> Dual must defer to Dual's reflected operators
    __array_ufunc__ = None

    def __init__(self, value, tangent=None):
        self.value = np.asarray(value, dtype=float)
        if tangent is None:
            self.tangent = np.zeros_like(self.value)
        else:
            self.tangent = np.asarray(tangent, dtype=float)

    def __repr__(self):
        return f"Dual(value={self.value!r}, tangent={self.tangent!r})"

    @property
    def shape(self):
        return self.value.shape

    @property
    def ndim(self):
        return self.value.ndim

    def __len__(self):
        return len(self.value)

    def __getitem__(self, idx):
        return Dual(self.value[idx], np.broadcast_to(self.tangent, self.value.shape)[idx])

    def __neg__(self):
        return Dual(-self.value, -self.tangent)

    def __add__(self, other):
        if isinstance(other, Dual):
            return Dual(self.value + other.value, self.tangent + other.tangent)
        return Dual(self.value + other, self.tangent + np.zeros_like(other, dtype=float))

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Dual):
            return Dual(self.value - other.value, self.tangent - other.tangent)
        return Dual(self.value - other, self.tangent + np.zeros_like(other, dtype=float))

    def __rsub__(self, other):
        return Dual(other - self.value, -self.tangent + np.zeros_like(other, dtype=float))

    def __mul__(self, other):
        if isinstance(other, Dual):
            return Dual(self.value * other.value,
                        self.tangent * other.value + self.value * other.tangent)
        return Dual(self.value * other, self.tangent * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Dual):
            v = self.value / other.value
            return Dual(v, (self.tangent - v * other.tangent) / other.value)
        return Dual(self.value / other, self.tangent / other)

    def __rtruediv__(self, other):
        v = other / self.value
        return Dual(v, -v * self.tangent / self.value)

    def __pow__(self, n):
        if isinstance(n, Dual):
            raise TypeError("dual exponents are not supported")
        if n == 0:
            return Dual(np.ones_like(self.value))
        return Dual(self.value ** n, n * self.value ** (n - 1) * self.tangent)

    def __matmul__(self, mat):
        # only constant right operands appear in this package (x @ W.T)
        return Dual(self.value @ mat, self.tangent @ mat)

    def sum(self, axis=None, keepdims=False):
        return Dual(self.value.sum(axis=axis, keepdims=keepdims),
                    np.broadcast_to(self.tangent, self.value.shape).sum(axis=axis, keepdims=keepdims))


def value_of(x):
    """Strip the tangent, if any."""
    return x.value if isinstance(x, Dual) else np.asarray(x, dtype=float)


def tangent_of(x):
    return x.tangent if isinstance(x, Dual) else np.zeros_like(np.asarray(x, dtype=float))


def seed_direction(z, direction) -> Dual:
    """Lift a point to a dual along ``direction`` (broadcast against ``z``)."""
    z = np.asarray(z, dtype=float)
    return Dual(z, np.broadcast_to(np.asarray(direction, dtype=float), z.shape).copy())


def _unary(x, f, df):
    if isinstance(x, Dual):
        return Dual(f(x.value), df(x.value) * x.tangent)
    return f(np.asarray(x, dtype=float))


def exp(x):
    if isinstance(x, Dual):
        v = np.exp(x.value)
        return Dual(v, v * x.tangent)
    return np.exp(x)


def expm1(x):
    return _unary(x, np.expm1, np.exp)


def log(x):
    return _unary(x, np.log, lambda v: 1.0 / v)


def log1p(x):
    return _unary(x, np.log1p, lambda v: 1.0 / (1.0 + v))


def tanh(x):
    if isinstance(x, Dual):
        v = np.tanh(x.value)
        return Dual(v, (1.0 - v * v) * x.tangent)
    return np.tanh(x)


def sin(x):
    return _unary(x, np.sin, np.cos)


def cos(x):
    return _unary(x, np.cos, lambda v: -np.sin(v))


def sqrt(x):
    """Square root with a zero tangent at 0 instead of an infinite one."""
    if isinstance(x, Dual):
        v = np.sqrt(x.value)
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(v > 0, x.tangent / (2.0 * np.where(v > 0, v, 1.0)), 0.0)
        return Dual(v, t)
    return np.sqrt(x)


def sigmoid(x):
    if isinstance(x, Dual):
        v = special.expit(x.value)
        return Dual(v, v * (1.0 - v) * x.tangent)
    return special.expit(x)


def logit(x):
    return _unary(x, special.logit, lambda v: 1.0 / (v * (1.0 - v)))


def softplus(x):
    """log(1 + e^x), evaluated without overflow."""
    return _unary(x, lambda v: np.logaddexp(0.0, v), special.expit)


def clamp_min(x, lo):
    """max(x, lo); the tangent is dropped where the bound is active."""
    if isinstance(x, Dual):
        keep = x.value >= lo
        return Dual(np.where(keep, x.value, lo), np.where(keep, x.tangent, 0.0))
    return np.maximum(x, lo)


def norm(x, axis=-1):
    return sqrt((x * x).sum(axis=axis))


def prod(x, axis=-1):
    """Product along ``axis`` with an exact tangent even when factors are 0."""
    if not isinstance(x, Dual):
        return np.prod(x, axis=axis)
    v = np.moveaxis(x.value, axis, -1)
    t = np.moveaxis(np.broadcast_to(x.tangent, x.value.shape), axis, -1)
    ones = np.ones(v.shape[:-1] + (1,))
    before = np.concatenate([ones, np.cumprod(v[..., :-1], axis=-1)], axis=-1)
    after = np.concatenate([np.cumprod(v[..., :0:-1], axis=-1)[..., ::-1], ones], axis=-1)
    return Dual(np.prod(v, axis=-1), (t * before * after).sum(axis=-1))


def softmin(x, axis=-1):
    """Softmax of ``-x`` along ``axis`` using the max-subtraction guard."""
    if isinstance(x, Dual):
        shift = np.min(x.value, axis=axis, keepdims=True)
        e = exp(-(x - shift))
        return e / e.sum(axis=axis, keepdims=True)
    shift = np.min(x, axis=axis, keepdims=True)
    e = np.exp(-(x - shift))
    return e / e.sum(axis=axis, keepdims=True)


def logaddexp(a, b):
    if not isinstance(a, Dual) and not isinstance(b, Dual):
        return np.logaddexp(a, b)
    a = a if isinstance(a, Dual) else Dual(a)
    b = b if isinstance(b, Dual) else Dual(b)
    v = np.logaddexp(a.value, b.value)
    wa = np.exp(a.value - v)
    wb = np.exp(b.value - v)
    return Dual(v, wa * a.tangent + wb * b.tangent)


# activations --------------------------------------------------------------

def celu(x):
    """CELU with shape parameter 1: max(0, x) + min(0, e^x - 1)."""
    if isinstance(x, Dual):
        pos = x.value > 0
        v = np.where(pos, x.value, np.expm1(np.minimum(x.value, 0.0)))
        d = np.where(pos, 1.0, np.exp(np.minimum(x.value, 0.0)))
        return Dual(v, d * x.tangent)
    x = np.asarray(x, dtype=float)
    return np.where(x > 0, x, np.expm1(np.minimum(x, 0.0)))


# CELU(alpha=1) and ELU(alpha=1) coincide
elu = celu

_SELU_ALPHA = 1.6732632423543772848170429916717
_SELU_SCALE = 1.0507009873554804934193349852946


def selu(x):
    def f(v):
        return _SELU_SCALE * np.where(v > 0, v, _SELU_ALPHA * np.expm1(np.minimum(v, 0.0)))

    def df(v):
        return _SELU_SCALE * np.where(v > 0, 1.0, _SELU_ALPHA * np.exp(np.minimum(v, 0.0)))

    return _unary(x, f, df)


def gelu(x):
    """Exact (erf-based) GELU."""
    def f(v):
        return 0.5 * v * (1.0 + special.erf(v / np.sqrt(2.0)))

    def df(v):
        return 0.5 * (1.0 + special.erf(v / np.sqrt(2.0))) + v * np.exp(-0.5 * v * v) / np.sqrt(2.0 * np.pi)

    return _unary(x, f, df)


def silu(x):
    def df(v):
        s = special.expit(v)
        return s * (1.0 + v * (1.0 - s))

    return _unary(x, lambda v: v * special.expit(v), df)
