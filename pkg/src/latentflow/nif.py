"""Neural Implicit Flow: a hypernetwork that generates every ShapeNet weight from a latent code.

ParameterNet maps normalized time to a latent vector ``z``; a linear
expansion ``theta = E z + e`` produces the full flattened parameter vector of
ShapeNet, which maps normalized space to ``u``. All points sharing a time
value share one generated ShapeNet.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataset import CoordNormalizer, SnapshotDataset, fit_normalizer
from .nn import (
    MLPParams,
    activation_eval,
    activation_grad,
    init_mlp,
    mlp_backward,
    mlp_forward,
    param_count,
    unflatten_layers,
)
from .training import TrainConfig, fit

DEFAULT_HIDDEN = (30, 30)
DEFAULT_ACTIVATION = "swish"
# a sine first layer lets z(t) follow the many oscillations per window seen in fKdV and SG
DEFAULT_PNET_ACTIVATION = "sine"
DEFAULT_LR = 5e-3


@dataclass(frozen=True)
class ShapeNetArch:
    input_dim: int = 1
    hidden: tuple = DEFAULT_HIDDEN
    output_dim: int = 1
    activation: str = DEFAULT_ACTIVATION

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if self.input_dim < 1 or self.output_dim < 1 or any(h < 1 for h in self.hidden):
            raise ValueError(f"invalid ShapeNet widths {self.dims}")

    @property
    def dims(self) -> list[int]:
        return [self.input_dim, *self.hidden, self.output_dim]


def shape_param_count(arch: ShapeNetArch) -> int:
    return param_count(arch.dims)


def _shape_layers(arch: ShapeNetArch, thetas: np.ndarray):
    """Split generated parameters ``(U, n_shape)`` into per-layer ``(W, b)`` stacks."""
    U = thetas.shape[0]
    out = []
    pos = 0
    for a, b in zip(arch.dims[:-1], arch.dims[1:]):
        W = thetas[:, pos : pos + a * b].reshape(U, b, a)
        pos += a * b
        out.append((W, thetas[:, pos : pos + b]))
        pos += b
    return out


def shapenet_forward(arch: ShapeNetArch, thetas: np.ndarray, x: np.ndarray):
    """Evaluate ``U`` generated ShapeNets; ``x`` is ``(P, in)`` shared or ``(U, P, in)``.

    Returns ``(U, P, out)`` and a tape.
    """
    U = thetas.shape[0]
    h = np.asarray(x, dtype=float)
    if h.ndim == 2:
        h = np.broadcast_to(h, (U,) + h.shape)
    layers = _shape_layers(arch, thetas)
    inputs, preacts = [], []
    last = len(layers) - 1
    for i, (W, b) in enumerate(layers):
        inputs.append(h)
        z = np.matmul(h, W.transpose(0, 2, 1)) + b[:, None, :]
        preacts.append(z)
        h = z if i == last else activation_eval(arch.activation, z)
    return h, (layers, inputs, preacts)


def shapenet_backward(arch: ShapeNetArch, tape, out_grad: np.ndarray):
    """Gradient w.r.t. the generated parameters, ``(U, n_shape)``, and w.r.t. ``x``."""
    layers, inputs, preacts = tape
    g = out_grad
    parts = []
    last = len(layers) - 1
    for i in range(last, -1, -1):
        W, _ = layers[i]
        dz = g if i == last else g * activation_grad(arch.activation, preacts[i])
        dW = np.matmul(dz.transpose(0, 2, 1), inputs[i])
        parts.append(np.concatenate([dW.reshape(dW.shape[0], -1), dz.sum(axis=1)], axis=1))
        g = np.matmul(dz, W)
    return np.concatenate(parts[::-1], axis=1), g


@dataclass
class NIFModel:
    pnet_dims: list
    shape_arch: ShapeNetArch
    theta: np.ndarray
    pnet_activation: str = DEFAULT_PNET_ACTIVATION
    normalizer: CoordNormalizer = CoordNormalizer()

    kind = "nif"

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=float)
        need = param_count(self.pnet_dims) + self.n_shape * (self.latent_dim + 1)
        if self.theta.size != need:
            raise ValueError(f"theta has {self.theta.size} entries, architecture needs {need}")

    @property
    def latent_dim(self) -> int:
        return self.pnet_dims[-1]

    @property
    def n_shape(self) -> int:
        return shape_param_count(self.shape_arch)

    def _split(self, theta):
        npn = param_count(self.pnet_dims)
        r, ns = self.latent_dim, self.n_shape
        pnet = MLPParams(unflatten_layers(theta[:npn], self.pnet_dims), self.pnet_activation)
        E = theta[npn : npn + ns * r].reshape(ns, r)
        e = theta[npn + ns * r :]
        return pnet, E, e

    @property
    def parameter_net(self) -> MLPParams:
        return self._split(self.theta)[0]

    @property
    def expansion(self) -> tuple[np.ndarray, np.ndarray]:
        _, E, e = self._split(self.theta)
        return E, e

    def generated_params(self, tn) -> tuple[np.ndarray, np.ndarray]:
        """Latent codes and generated ShapeNet parameters at normalized times."""
        pnet, E, e = self._split(self.theta)
        z, _ = mlp_forward(pnet, np.reshape(tn, (-1, 1)))
        return z, z @ E.T + e

    def grid_forward(self, theta, tn, xn):
        pnet, E, e = self._split(theta)
        z, tape_p = mlp_forward(pnet, np.reshape(tn, (-1, 1)))
        thetas = z @ E.T + e
        x = np.asarray(xn, dtype=float)
        x = x[..., None] if x.ndim <= 2 and self.shape_arch.input_dim == 1 else x
        out, tape_s = shapenet_forward(self.shape_arch, thetas, x)
        return out[..., 0], (pnet, E, z, tape_p, tape_s)

    def grid_backward(self, theta, cache, dpred):
        return nif_backward(self, cache, dpred, theta)

    def predict(self, x, t) -> np.ndarray:
        """Raw-unit prediction at paired raw coordinates; one ShapeNet per distinct time."""
        x, t = np.broadcast_arrays(np.asarray(x, float), np.asarray(t, float))
        xn, tn = self.normalizer.apply(x=x.ravel(), t=t.ravel())
        ut, inv = np.unique(tn, return_inverse=True)
        _, thetas = self.generated_params(ut)
        out, _ = shapenet_forward(self.shape_arch, thetas[inv], xn[:, None, None])
        return self.normalizer.invert(u=out[:, 0, 0]).reshape(x.shape)

    def describe(self) -> dict:
        return {"kind": self.kind, "pnet_dims": list(self.pnet_dims),
                "pnet_activation": self.pnet_activation,
                "shape_dims": self.shape_arch.dims, "shape_activation": self.shape_arch.activation}


def nif_backward(model: NIFModel, cache, dpred, theta=None) -> np.ndarray:
    """Flat gradient of ``sum(pred * dpred)`` w.r.t. ParameterNet and expansion."""
    pnet, E, z, tape_p, tape_s = cache
    dpred = np.asarray(dpred, dtype=float)
    if dpred.shape != tape_s[2][-1].shape[:2]:
        raise ValueError(f"loss gradient shape {dpred.shape} does not match the forward pass")
    dthetas, _ = shapenet_backward(model.shape_arch, tape_s, dpred[..., None])
    dE = dthetas.T @ z
    de = dthetas.sum(axis=0)
    dz = dthetas @ E
    gp, _ = mlp_backward(pnet, tape_p, dz)
    return np.concatenate([gp.flatten(), dE.ravel(), de])


def init_nif(latent_dim: int = 3, hidden=DEFAULT_HIDDEN, activation: str = DEFAULT_ACTIVATION,
             seed: int = 0, normalizer: CoordNormalizer | None = None,
             shape_arch: ShapeNetArch | None = None, expansion_scale: float = 1e-3,
             pnet_activation: str = DEFAULT_PNET_ACTIVATION) -> NIFModel:
    """Expansion starts near zero with biases set to a Glorot-initialized ShapeNet.

    ``activation`` applies to ShapeNet, ``pnet_activation`` to ParameterNet.
    """
    rng = np.random.default_rng(seed)
    arch = shape_arch or ShapeNetArch(hidden=tuple(hidden), activation=activation)
    pnet = init_mlp([1, *hidden, latent_dim], pnet_activation, rng)
    static = init_mlp(arch.dims, arch.activation, rng).flatten()
    E = expansion_scale * rng.standard_normal((static.size, latent_dim))
    theta = np.concatenate([pnet.flatten(), E.ravel(), static])
    return NIFModel([1, *hidden, latent_dim], arch, theta, pnet_activation,
                    normalizer or CoordNormalizer())


def nif_eval(model: NIFModel, x: float, t: float) -> tuple[float, np.ndarray]:
    tn = model.normalizer.apply(t=np.array([t]))
    z, _ = model.generated_params(tn)
    return float(model.predict(x, t)), z[0]


def train_nif(ds: SnapshotDataset, cfg: TrainConfig | None = None, progress=None):
    cfg = cfg or TrainConfig(learning_rate=DEFAULT_LR)
    model = init_nif(cfg.latent_dim, cfg.hidden or DEFAULT_HIDDEN,
                     cfg.activation or DEFAULT_ACTIVATION, cfg.seed, fit_normalizer(ds),
                     pnet_activation=cfg.pnet_activation or DEFAULT_PNET_ACTIVATION)
    history = fit(model, ds, cfg, progress)
    return model, history


def nif_latent_series(model: NIFModel, times):
    from .analysis import LatentTrajectory

    times = np.asarray(times, dtype=float)
    z, _ = model.generated_params(model.normalizer.apply(t=times))
    labels = [f"z_{k + 1}" for k in range(model.latent_dim)]
    return LatentTrajectory(times, z, "nif", labels)
