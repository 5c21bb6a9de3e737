"""Small dense networks in float64 numpy with hand-written reverse mode and Adam.

Inputs are batched row-wise: an MLP maps ``(B, in_dim)`` to ``(B, out_dim)``.
Hidden layers apply the network's activation; the last layer is affine.
Sine layers compute ``sin(omega * z)`` with ``omega = first_omega`` on the
first layer and ``hidden_omega`` afterwards.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ACTIVATIONS = ("swish", "sine", "tanh", "identity")


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def activation_eval(kind: str, z, omega: float = 1.0):
    if kind == "swish":
        return z * _sigmoid(z)
    if kind == "sine":
        return np.sin(omega * z)
    if kind == "tanh":
        return np.tanh(z)
    if kind == "identity":
        return z
    raise ValueError(f"unknown activation {kind!r}")


def activation_grad(kind: str, z, omega: float = 1.0):
    if kind == "swish":
        s = _sigmoid(z)
        return s * (1.0 + z * (1.0 - s))
    if kind == "sine":
        return omega * np.cos(omega * z)
    if kind == "tanh":
        return 1.0 - np.tanh(z) ** 2
    if kind == "identity":
        return np.ones_like(z)
    raise ValueError(f"unknown activation {kind!r}")


@dataclass
class LayerParams:
    weights: np.ndarray  # (out, in)
    biases: np.ndarray  # (out,)

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]


@dataclass
class MLPParams:
    layers: list[LayerParams]
    activation: str = "swish"
    first_omega: float = 30.0
    hidden_omega: float = 1.0

    def __post_init__(self):
        if not self.layers:
            raise ValueError("an MLP needs at least one layer")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        for a, b in zip(self.layers, self.layers[1:]):
            if a.out_dim != b.in_dim:
                raise ValueError(f"layer dims {a.weights.shape} -> {b.weights.shape} do not chain")

    @property
    def dims(self) -> list[int]:
        return [self.layers[0].in_dim] + [layer.out_dim for layer in self.layers]

    @property
    def n_params(self) -> int:
        return sum(layer.weights.size + layer.biases.size for layer in self.layers)

    def omega(self, i: int) -> float:
        if self.activation != "sine":
            return 1.0
        return self.first_omega if i == 0 else self.hidden_omega

    def flatten(self) -> np.ndarray:
        """Layer order; each layer's weights row-major, then its biases."""
        return np.concatenate([np.concatenate([l.weights.ravel(), l.biases]) for l in self.layers])

    def with_flat(self, vec: np.ndarray) -> "MLPParams":
        """Same architecture with parameters taken (as views) from ``vec``."""
        return MLPParams(unflatten_layers(vec, self.dims), self.activation,
                         self.first_omega, self.hidden_omega)

    def copy(self) -> "MLPParams":
        return self.with_flat(self.flatten().copy())

    def describe(self) -> dict:
        return {"dims": self.dims, "activation": self.activation,
                "first_omega": self.first_omega, "hidden_omega": self.hidden_omega}


def param_count(dims) -> int:
    return sum(a * b + b for a, b in zip(dims[:-1], dims[1:]))


def unflatten_layers(vec: np.ndarray, dims) -> list[LayerParams]:
    vec = np.asarray(vec, dtype=float)
    if vec.size != param_count(dims):
        raise ValueError(f"parameter vector has {vec.size} entries, dims {list(dims)} need "
                         f"{param_count(dims)}")
    layers = []
    pos = 0
    for a, b in zip(dims[:-1], dims[1:]):
        w = vec[pos : pos + a * b].reshape(b, a)
        pos += a * b
        layers.append(LayerParams(w, vec[pos : pos + b]))
        pos += b
    return layers


@dataclass
class Tape:
    inputs: list[np.ndarray] = field(default_factory=list)
    preacts: list[np.ndarray] = field(default_factory=list)


def mlp_forward(params: MLPParams, x) -> tuple[np.ndarray, Tape]:
    x = np.asarray(x, dtype=float)
    squeeze = x.ndim == 1
    h = np.atleast_2d(x)
    if h.shape[1] != params.dims[0]:
        raise ValueError(f"input dim {h.shape[1]} does not match first layer {params.dims[0]}")
    tape = Tape()
    last = len(params.layers) - 1
    for i, layer in enumerate(params.layers):
        tape.inputs.append(h)
        z = h @ layer.weights.T + layer.biases
        tape.preacts.append(z)
        h = z if i == last else activation_eval(params.activation, z, params.omega(i))
    return (h[0] if squeeze else h), tape


def mlp_backward(params: MLPParams, tape: Tape, output_grad) -> tuple[MLPParams, np.ndarray]:
    """Gradients of ``sum(output * output_grad)`` w.r.t. parameters and input."""
    if len(tape.preacts) != len(params.layers):
        raise ValueError("tape does not come from a forward pass of these params")
    g = np.atleast_2d(np.asarray(output_grad, dtype=float))
    if g.shape != tape.preacts[-1].shape:
        raise ValueError(f"output_grad shape {g.shape} != output shape {tape.preacts[-1].shape}")
    grads = [None] * len(params.layers)
    last = len(params.layers) - 1
    for i in range(last, -1, -1):
        layer = params.layers[i]
        z = tape.preacts[i]
        dz = g if i == last else g * activation_grad(params.activation, z, params.omega(i))
        grads[i] = LayerParams(dz.T @ tape.inputs[i], dz.sum(axis=0))
        g = dz @ layer.weights
    gp = MLPParams(grads, params.activation, params.first_omega, params.hidden_omega)
    return gp, (g[0] if np.ndim(output_grad) == 1 else g)


def init_mlp(dims, activation: str = "swish", seed: int | np.random.Generator = 0,
             first_omega: float = 30.0, hidden_omega: float = 1.0) -> MLPParams:
    """Glorot-uniform for swish/tanh/identity, SIREN-style uniform for sine."""
    dims = [int(d) for d in dims]
    if len(dims) < 2 or min(dims) < 1:
        raise ValueError(f"invalid layer dims {dims}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    layers = []
    for i, (a, b) in enumerate(zip(dims[:-1], dims[1:])):
        if activation == "sine":
            omega = first_omega if i == 0 else hidden_omega
            bound = 1.0 / a if i == 0 else np.sqrt(6.0 / a) / omega
            w = rng.uniform(-bound, bound, size=(b, a))
            bb = rng.uniform(-bound, bound, size=b)
        else:
            bound = np.sqrt(6.0 / (a + b))
            w = rng.uniform(-bound, bound, size=(b, a))
            bb = np.zeros(b)
        layers.append(LayerParams(w, bb))
    return MLPParams(layers, activation, first_omega, hidden_omega)


@dataclass
class AdamState:
    first_moment: np.ndarray
    second_moment: np.ndarray
    step_count: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, params: np.ndarray) -> "AdamState":
        return cls(np.zeros_like(params), np.zeros_like(params))


def adam_step(params: np.ndarray, grads: np.ndarray, state: AdamState,
              learning_rate: float) -> tuple[np.ndarray, AdamState]:
    """One bias-corrected Adam update on a flat parameter vector."""
    if params.shape != grads.shape or state.first_moment.shape != params.shape:
        raise ValueError(f"shape mismatch: params {params.shape}, grads {grads.shape}, "
                         f"moments {state.first_moment.shape}")
    if not np.all(np.isfinite(grads)):
        bad = np.flatnonzero(~np.isfinite(grads))
        raise FloatingPointError(
            f"non-finite gradient in {bad.size} entries (first at index {bad[0]})"
        )
    b1, b2 = state.beta1, state.beta2
    t = state.step_count + 1
    m = b1 * state.first_moment + (1 - b1) * grads
    v = b2 * state.second_moment + (1 - b2) * grads * grads
    mhat = m / (1 - b1**t)
    vhat = v / (1 - b2**t)
    new = params - learning_rate * mhat / (np.sqrt(vhat) + state.eps)
    return new, AdamState(m, v, t, b1, b2, state.eps)


def numerical_gradient(f, theta: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central finite differences of scalar ``f`` at flat ``theta``."""
    theta = np.array(theta, dtype=float)
    g = np.empty_like(theta)
    for i in range(theta.size):
        old = theta[i]
        theta[i] = old + h
        fp = f(theta)
        theta[i] = old - h
        fm = f(theta)
        theta[i] = old
        g[i] = (fp - fm) / (2 * h)
    return g


def gradient_rel_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Max relative error, with the scale floored at the gradient's overall size."""
    scale = np.maximum(np.abs(analytic), np.abs(numeric))
    floor = 1e-3 * max(np.max(np.abs(numeric)), 1e-12)
    return float(np.max(np.abs(analytic - numeric) / np.maximum(scale, floor)))
