"""Dense embedding network with an L2-normalized output, written directly in numpy.

One parameter set serves all three towers of the triplet network: the
trainer stacks ``x_i``, ``x_j`` and ``x_k`` into one batch and runs a single
forward/backward pass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .geometry import NORM_FLOOR

ACTIVATIONS = ("relu", "identity")
DEFAULT_HIDDEN = (64, 64)
DEFAULT_EMBEDDING_DIM = 100


class DegenerateOutputError(ArithmeticError):
    """The pre-normalization output vector is (numerically) zero."""

    def __init__(self, message: str, rows=None):
        super().__init__(message)
        self.rows = rows


@dataclass
class Layer:
    weight: np.ndarray  # (out, in)
    bias: np.ndarray  # (out,)
    activation: str = "relu"

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[0],):
            raise ValueError(
                f"layer shapes do not agree: weight {self.weight.shape}, bias {self.bias.shape}"
            )

    @property
    def shape(self) -> tuple[int, int]:
        return self.weight.shape


@dataclass
class NetworkParameters:
    layers: list[Layer]
    normalize: bool = True

    def __post_init__(self):
        if not self.layers:
            raise ValueError("network needs at least one layer")
        for k in range(1, len(self.layers)):
            if self.layers[k].shape[1] != self.layers[k - 1].shape[0]:
                raise ValueError(
                    f"layer {k} expects {self.layers[k].shape[1]} inputs "
                    f"but layer {k - 1} produces {self.layers[k - 1].shape[0]}"
                )

    @property
    def input_dim(self) -> int:
        return self.layers[0].shape[1]

    @property
    def embedding_dim(self) -> int:
        return self.layers[-1].shape[0]

    def arrays(self) -> list[np.ndarray]:
        """Flat list ``[W0, b0, W1, b1, ...]``; the order used by gradients and Adam."""
        out = []
        for layer in self.layers:
            out.extend((layer.weight, layer.bias))
        return out

    def with_arrays(self, arrays: Sequence[np.ndarray]) -> "NetworkParameters":
        if len(arrays) != 2 * len(self.layers):
            raise ValueError("wrong number of parameter arrays")
        layers = [
            Layer(arrays[2 * k], arrays[2 * k + 1], layer.activation)
            for k, layer in enumerate(self.layers)
        ]
        return NetworkParameters(layers, self.normalize)

    def copy(self) -> "NetworkParameters":
        return self.with_arrays([a.copy() for a in self.arrays()])

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in self.arrays())


def init_network(
    input_dim: int,
    rng: np.random.Generator,
    hidden: Sequence[int] = DEFAULT_HIDDEN,
    embedding_dim: int = DEFAULT_EMBEDDING_DIM,
    final_activation: str = "identity",
    normalize: bool = True,
) -> NetworkParameters:
    """He-uniform weights (bound ``sqrt(6 / fan_in)``), biases uniform in ``+-1/sqrt(fan_in)``.

    Non-zero biases matter: ordinal encodings map the lowest level of every
    attribute to 0, so an all-zero input row is legitimate and must not
    collapse to a zero output.
    """
    if embedding_dim < 2:
        raise ValueError("embedding dimension must be at least 2")
    sizes = [input_dim, *hidden, embedding_dim]
    layers = []
    for k in range(len(sizes) - 1):
        fan_in, fan_out = sizes[k], sizes[k + 1]
        bound = math.sqrt(6.0 / fan_in)
        w = rng.uniform(-bound, bound, size=(fan_out, fan_in))
        b_bound = 1.0 / math.sqrt(fan_in)
        b = rng.uniform(-b_bound, b_bound, size=fan_out)
        act = final_activation if k == len(sizes) - 2 else "relu"
        layers.append(Layer(w, b, act))
    return NetworkParameters(layers, normalize)


@dataclass
class ForwardTrace:
    inputs: list[np.ndarray] = field(default_factory=list)  # input to each layer
    pre_activations: list[np.ndarray] = field(default_factory=list)
    output: np.ndarray | None = None  # pre-normalization output h
    norms: np.ndarray | None = None  # ||h|| per row
    embedding: np.ndarray | None = None  # h / ||h||
    single: bool = False


def forward(params: NetworkParameters, x) -> tuple[np.ndarray, ForwardTrace]:
    """Embed one vector ``(d,)`` or a batch ``(n, d)``.

    Raises:
        ValueError: input width does not match the first layer.
        DegenerateOutputError: some pre-normalization output has norm below
            the norm floor; ``err.rows`` lists the offending rows.
    """
    a = np.asarray(x, dtype=np.float64)
    single = a.ndim == 1
    if single:
        a = a[None, :]
    if a.ndim != 2 or a.shape[1] != params.input_dim:
        raise ValueError(f"expected inputs of width {params.input_dim}, got shape {np.shape(x)}")

    trace = ForwardTrace(single=single)
    for layer in params.layers:
        trace.inputs.append(a)
        pre = a @ layer.weight.T + layer.bias
        trace.pre_activations.append(pre)
        a = np.maximum(pre, 0.0) if layer.activation == "relu" else pre
    trace.output = a

    if params.normalize:
        norms = np.sqrt(np.einsum("ij,ij->i", a, a))
        bad = np.flatnonzero(norms < NORM_FLOOR)
        if bad.size:
            raise DegenerateOutputError(
                f"{bad.size} input(s) map to a zero pre-normalization output", rows=bad
            )
        trace.norms = norms
        z = a / norms[:, None]
    else:
        z = a
    trace.embedding = z
    return (z[0] if single else z), trace


def normalization_backward(z: np.ndarray, norms: np.ndarray, grad_z: np.ndarray) -> np.ndarray:
    """Pull ``grad_z`` back through ``z = h / ||h||``: ``(I - z z^T) grad_z / ||h||``."""
    radial = np.einsum("ij,ij->i", z, grad_z)
    return (grad_z - z * radial[:, None]) / norms[:, None]


def backward(params: NetworkParameters, trace: ForwardTrace, grad_z) -> list[np.ndarray]:
    """Gradients ``[dW0, db0, dW1, db1, ...]`` for upstream gradient ``grad_z``.

    Per-row gradients are summed over the batch.
    """
    if len(trace.inputs) != len(params.layers) or trace.embedding is None:
        raise ValueError("trace was not produced by a forward pass of this network")
    g = np.asarray(grad_z, dtype=np.float64)
    if trace.single and g.ndim == 1:
        g = g[None, :]
    if g.shape != trace.embedding.shape:
        raise ValueError(f"grad_z has shape {g.shape}, expected {trace.embedding.shape}")

    if params.normalize:
        g = normalization_backward(trace.embedding, trace.norms, g)

    grads: list[np.ndarray] = [None] * (2 * len(params.layers))  # type: ignore[list-item]
    for k in range(len(params.layers) - 1, -1, -1):
        layer = params.layers[k]
        if layer.shape != trace.pre_activations[k].shape[1:] + trace.inputs[k].shape[1:]:
            raise ValueError(f"trace does not match layer {k}")
        if layer.activation == "relu":
            g = g * (trace.pre_activations[k] > 0.0)
        grads[2 * k] = g.T @ trace.inputs[k]
        grads[2 * k + 1] = g.sum(axis=0)
        if k:
            g = g @ layer.weight
    return grads


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0
    learning_rate: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, params: NetworkParameters, **hyper) -> "AdamState":
        arrays = params.arrays()
        return cls([np.zeros_like(a) for a in arrays], [np.zeros_like(a) for a in arrays], **hyper)


def adam_step(
    params: NetworkParameters, grads: Sequence[np.ndarray], state: AdamState
) -> tuple[NetworkParameters, AdamState]:
    """One bias-corrected Adam update. Inputs are left untouched."""
    arrays = params.arrays()
    if len(grads) != len(arrays) or len(state.m) != len(arrays):
        raise ValueError("gradient / optimizer state count does not match the parameters")
    t = state.t + 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    new_arrays, new_m, new_v = [], [], []
    for p, g, m, v in zip(arrays, grads, state.m, state.v):
        if g.shape != p.shape or m.shape != p.shape:
            raise ValueError(f"shape mismatch: parameter {p.shape}, gradient {g.shape}")
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * (g * g)
        new_arrays.append(p - state.learning_rate * (m / c1) / (np.sqrt(v / c2) + state.eps))
        new_m.append(m)
        new_v.append(v)
    return params.with_arrays(new_arrays), replace(state, m=new_m, v=new_v, t=t)
