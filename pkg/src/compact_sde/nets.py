"""Small inference-only MLPs with keyed Glorot-normal initialization."""

from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import dual
from .rng import Purpose, normals


class Activation(str, enum.Enum):
    CELU = "celu"
    GELU = "gelu"
    ELU = "elu"
    SELU = "selu"
    SILU = "silu"

    @property
    def fn(self):
        return {"celu": dual.celu, "gelu": dual.gelu, "elu": dual.elu,
                "selu": dual.selu, "silu": dual.silu}[self.value]


@dataclass(frozen=True, eq=False)
class MlpParams:
    """Weights ``(fan_out, fan_in)`` and biases per layer."""

    layers: tuple
    activation: Activation
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "activation", Activation(self.activation))
        layers = []
        for k, (W, b) in enumerate(self.layers):
            W = np.array(W, dtype=float, ndmin=2)
            b = np.array(b, dtype=float).reshape(-1)
            if b.shape[0] != W.shape[0]:
                raise ValueError(f"layer {k}: bias length {b.shape[0]} != fan_out {W.shape[0]}")
            if layers and layers[-1][0].shape[0] != W.shape[1]:
                raise ValueError(f"layer {k}: fan_in {W.shape[1]} does not chain with "
                                 f"previous fan_out {layers[-1][0].shape[0]}")
            W.setflags(write=False)
            b.setflags(write=False)
            layers.append((W, b))
        if not layers:
            raise ValueError("an MLP needs at least one layer")
        object.__setattr__(self, "layers", tuple(layers))

    @property
    def sizes(self) -> list:
        return [self.layers[0][0].shape[1]] + [W.shape[0] for W, _ in self.layers]

    @property
    def fan_in(self) -> int:
        return self.layers[0][0].shape[1]

    @property
    def fan_out(self) -> int:
        return self.layers[-1][0].shape[0]

    def checksum(self) -> str:
        h = hashlib.sha256()
        for W, b in self.layers:
            h.update(np.ascontiguousarray(W).tobytes())
            h.update(np.ascontiguousarray(b).tobytes())
        return h.hexdigest()


def mlp_init(layer_sizes, activation="celu", seed: int = 0) -> MlpParams:
    """Glorot-normal weights and zero biases.

    Entry ``(row, col)`` of layer ``k`` is normal draw ``row * fan_in + col``
    of the stream keyed by ``(seed, k)``, so initialization does not depend
    on the order in which layers are built.
    """
    sizes = [int(s) for s in layer_sizes]
    if len(sizes) < 2:
        raise ValueError("layer_sizes needs at least an input and an output size")
    if min(sizes) < 1:
        raise ValueError(f"layer sizes must be positive, got {sizes}")
    layers = []
    for k, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        std = np.sqrt(2.0 / (fan_in + fan_out))
        W = std * normals(seed, Purpose.INIT, k, fan_in * fan_out).reshape(fan_out, fan_in)
        layers.append((W, np.zeros(fan_out)))
    return MlpParams(tuple(layers), Activation(activation), int(seed))


def _forward(p: MlpParams, x):
    act = p.activation.fn
    last = len(p.layers) - 1
    for k, (W, b) in enumerate(p.layers):
        x = x @ W.T + b
        if k < last:
            x = act(x)
    return x


def mlp_eval(p: MlpParams, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != p.fan_in:
        raise ValueError(f"input has length {x.shape[-1]}, network expects {p.fan_in}")
    return _forward(p, x)


def mlp_eval_dual(p: MlpParams, x: dual.Dual) -> dual.Dual:
    if x.shape[-1] != p.fan_in:
        raise ValueError(f"input has length {x.shape[-1]}, network expects {p.fan_in}")
    return _forward(p, x)


def mlp_field(p: MlpParams, positive: bool = False):
    """Wrap a network as an autonomous field ``f(t, z)``.

    With ``positive`` the output is passed through softplus, which is how
    networks are turned into nonnegative diffusions.
    """
    if positive:
        def field(t, z):
            return dual.softplus(_forward(p, z))
    else:
        def field(t, z):
            return _forward(p, z)
    field.params = p
    return field


def mlp_stack_field(params, positive: bool = False):
    """Evaluate several same-shaped networks side by side.

    The returned field expects ``z`` of shape ``(M, D)`` where ``M`` is the
    number of networks; row ``i`` is fed to network ``i``. Results equal
    ``mlp_field(params[i], positive)(t, z[i])`` row by row, but the whole
    batch costs one pass, which matters for per-step solver overhead.
    """
    params = list(params)
    if not params:
        raise ValueError("need at least one network")
    if any(q.sizes != params[0].sizes or q.activation != params[0].activation for q in params):
        raise ValueError("stacked networks must share layer sizes and activation")
    act = params[0].activation.fn
    weights = [np.stack([q.layers[k][0].T for q in params]) for k in range(len(params[0].layers))]
    biases = [np.stack([q.layers[k][1] for q in params]) for k in range(len(params[0].layers))]
    last = len(weights) - 1
    M = len(params)

    def field(t, z):
        if z.shape != (M, params[0].fan_in):
            raise ValueError(f"stacked field expects shape {(M, params[0].fan_in)}, got {z.shape}")
        x = z[:, None, :]
        for k, (WT, b) in enumerate(zip(weights, biases)):
            x = x @ WT + b[:, None, :]
            if k < last:
                x = act(x)
        x = x[:, 0, :]
        return dual.softplus(x) if positive else x

    field.params = tuple(params)
    return field


def diag_jacobian(f, z, t: float = 0.0) -> np.ndarray:
    """Diagonal partials ``d f_d / d z_d`` by one forward pass per dimension.

    ``f`` is a field ``f(t, z)``; ``z`` may be a batch ``(N, D)``.
    """
    z = np.asarray(z, dtype=float)
    D = z.shape[-1]
    out = np.empty_like(z)
    for d in range(D):
        y = f(t, dual.seed_direction(z, np.eye(D)[d]))
        out[..., d] = np.broadcast_to(dual.tangent_of(y), z.shape)[..., d]
    return out


def value_and_diag_jacobian(f, z, t: float = 0.0):
    """Like :func:`diag_jacobian` but also returns ``f(t, z)`` from the first pass."""
    z = np.asarray(z, dtype=float)
    D = z.shape[-1]
    jac = np.empty_like(z)
    value = None
    for d in range(D):
        y = f(t, dual.seed_direction(z, np.eye(D)[d]))
        if value is None:
            value = np.broadcast_to(dual.value_of(y), z.shape).copy()
        jac[..., d] = np.broadcast_to(dual.tangent_of(y), z.shape)[..., d]
    return value, jac


# text dump -----------------------------------------------------------------

def save_mlp(p: MlpParams, path) -> None:
    """Write a plain-text dump: header lines, then each layer row-major."""
    lines = ["# compact_sde mlp v1",
             "sizes " + " ".join(str(s) for s in p.sizes),
             f"activation {p.activation.value}",
             f"seed {p.seed}"]
    for k, (W, b) in enumerate(p.layers):
        lines.append(f"layer {k} weight")
        lines.extend(" ".join(float(x).hex() for x in row) for row in W)
        lines.append(f"layer {k} bias")
        lines.append(" ".join(float(x).hex() for x in b))
    Path(path).write_text("\n".join(lines) + "\n")


def load_mlp(path) -> MlpParams:
    rows = [ln.strip() for ln in Path(path).read_text().splitlines()]
    rows = [ln for ln in rows if ln and not ln.startswith("#")]
    header = {}
    i = 0
    while i < len(rows) and not rows[i].startswith("layer"):
        key, _, rest = rows[i].partition(" ")
        header[key] = rest
        i += 1
    try:
        sizes = [int(s) for s in header["sizes"].split()]
        activation = header["activation"]
        seed = int(header["seed"])
    except KeyError as exc:
        raise ValueError(f"weights file is missing header field {exc}") from None
    layers = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        i += 1  # "layer k weight"
        W = np.array([[float.fromhex(x) for x in rows[i + r].split()] for r in range(fan_out)])
        i += fan_out + 1  # rows, then "layer k bias"
        b = np.array([float.fromhex(x) for x in rows[i].split()])
        i += 1
        if W.shape != (fan_out, fan_in):
            raise ValueError(f"weights file layer has shape {W.shape}, expected {(fan_out, fan_in)}")
        layers.append((W, b))
    return MlpParams(tuple(layers), Activation(activation), seed)
