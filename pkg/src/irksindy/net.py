"""Fully connected network predicting all s*d stage values at once.

The network maps the sample time (rescaled to [-1, 1] over the record)
together with the state at that time to the stage states of the interval
starting there.  Its output layer is affine and is read in s segments of
d neurons: segment i is stage i.  Two activations are supported: tanh
with Xavier-uniform initialization, and SIREN sine layers
(sin(omega0 * (Wz + b)), first layer U(+-1/fan_in), later layers
U(+-sqrt(6/fan_in)/omega0)).
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import grad
from ._rng import SplitMix64
from .errors import DimensionMismatch, InvalidArchitecture


@dataclass
class MlpParams:
    """Layer weights/biases plus the activation convention."""

    weights: list
    biases: list
    activation: str
    siren_omega0: float
    layer_sizes: tuple

    def as_list(self):
        """Flat parameter list [W0, b0, W1, b1, ...] (shared arrays)."""
        out = []
        for W, b in zip(self.weights, self.biases):
            out.append(W)
            out.append(b)
        return out

    def copy(self) -> "MlpParams":
        return MlpParams([W.copy() for W in self.weights],
                         [b.copy() for b in self.biases],
                         self.activation, self.siren_omega0, self.layer_sizes)

    @property
    def output_width(self) -> int:
        return self.layer_sizes[-1]


def init(layer_sizes, activation: str = "tanh", seed: int = 0,
         omega0: float = 30.0) -> MlpParams:
    """Seeded, reproducible initialization.

    tanh: Xavier-uniform weights U(+-sqrt(6/(fan_in+fan_out))), zero biases.
    siren: first layer U(+-1/fan_in), later layers U(+-sqrt(6/fan_in)/omega0),
    zero biases.
    """
    sizes = tuple(int(n) for n in layer_sizes)
    if len(sizes) < 2 or any(n < 1 for n in sizes):
        raise InvalidArchitecture(f"layer sizes must be >= 2 positive ints, got {sizes}")
    if activation not in ("tanh", "siren"):
        raise InvalidArchitecture(f"unknown activation {activation!r}")
    if omega0 <= 0:
        raise InvalidArchitecture(f"omega0 must be positive, got {omega0}")
    rng = SplitMix64(seed)
    weights, biases = [], []
    for layer, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        if activation == "siren":
            if layer == 0:
                bound = 1.0 / fan_in
            else:
                bound = math.sqrt(6.0 / fan_in) / omega0
        else:
            bound = math.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform_array((fan_in, fan_out), -bound, bound))
        biases.append(np.zeros(fan_out))
    return MlpParams(weights=weights, biases=biases, activation=activation,
                     siren_omega0=float(omega0), layer_sizes=sizes)


def forward_core(params: MlpParams, inputs, weights=None, biases=None):
    """Forward pass; polymorphic over ndarrays and recorded `grad.Var`s.

    `weights`/`biases` override the stored arrays so training can feed
    tape variables through the same code path.
    """
    Ws = params.weights if weights is None else weights
    bs = params.biases if biases is None else biases
    z = inputs
    last = len(Ws) - 1
    for k, (W, b) in enumerate(zip(Ws, bs)):
        z = grad.matmul(z, W) + b
        if k < last:
            if params.activation == "siren":
                z = grad.sin(z * params.siren_omega0)
            else:
                z = grad.tanh(z)
    return z


def encode_time(t, t_start: float, t_end: float):
    """Map record times onto [-1, 1]."""
    if t_end <= t_start:
        raise InvalidArchitecture("time window must have positive length")
    return 2.0 * (np.asarray(t, dtype=float) - t_start) / (t_end - t_start) - 1.0


def forward(params: MlpParams, t: float, x) -> np.ndarray:
    """Predicted stage block chi(t, x), reshaped to (s, d).

    The input layer takes the (already encoded) time followed by the d
    state coordinates, or the state alone when the architecture's input
    width equals d.  Segment i of the affine output layer is stage i.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    d = x.size
    in_width = params.layer_sizes[0]
    if in_width == d + 1:
        inp = np.concatenate([[float(t)], x])
    elif in_width == d:
        inp = x
    else:
        raise DimensionMismatch(
            f"network input width {in_width} fits neither (t, x) [{d + 1}]"
            f" nor x alone [{d}]")
    out = forward_core(params, inp[None, :])[0]
    if out.size % d != 0:
        raise DimensionMismatch(
            f"output width {out.size} is not a multiple of the state dimension {d}")
    return out.reshape(-1, d)


def parameter_gradient(params: MlpParams, loss_program):
    """Reverse-mode gradient of a recorded loss over every weight/bias.

    `loss_program` receives tape variables in [W0, b0, W1, b1, ...] order
    and must return a scalar node; the result matches that order.
    """
    return grad.gradient(loss_program, params.as_list())
