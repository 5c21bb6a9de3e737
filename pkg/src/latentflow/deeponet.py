"""DeepONet used as a space-time separation: ``u(x, t) = sum_k b_k(t) tau_k(x) + c``.

The branch net takes normalized time and returns the latent series; the
trunk net takes normalized space and returns ``p`` basis functions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import CoordNormalizer, SnapshotDataset, fit_normalizer
from .nn import MLPParams, init_mlp, mlp_backward, mlp_forward, param_count, unflatten_layers
from .training import TrainConfig, fit

DEFAULT_HIDDEN = (20, 20, 20)
DEFAULT_ACTIVATION = "sine"
DEFAULT_LR = 1e-3


@dataclass
class DeepONetModel:
    """Branch and trunk parameters plus output bias, packed in one flat ``theta``."""

    branch_dims: list
    trunk_dims: list
    theta: np.ndarray
    activation: str = DEFAULT_ACTIVATION
    normalizer: CoordNormalizer = CoordNormalizer()
    first_omega: float = 30.0
    hidden_omega: float = 1.0

    kind = "deeponet"

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=float)
        if self.branch_dims[-1] != self.trunk_dims[-1]:
            raise ValueError("branch and trunk must share the output (latent) dimension")
        need = param_count(self.branch_dims) + param_count(self.trunk_dims) + 1
        if self.theta.size != need:
            raise ValueError(f"theta has {self.theta.size} entries, architecture needs {need}")

    @property
    def latent_dim(self) -> int:
        return self.branch_dims[-1]

    def _split(self, theta):
        nb = param_count(self.branch_dims)
        nt = param_count(self.trunk_dims)
        return theta[:nb], theta[nb : nb + nt], theta[nb + nt]

    def _net(self, dims, flat) -> MLPParams:
        return MLPParams(unflatten_layers(flat, dims), self.activation,
                         self.first_omega, self.hidden_omega)

    @property
    def branch(self) -> MLPParams:
        return self._net(self.branch_dims, self._split(self.theta)[0])

    @property
    def trunk(self) -> MLPParams:
        return self._net(self.trunk_dims, self._split(self.theta)[1])

    @property
    def output_bias(self) -> float:
        return float(self._split(self.theta)[2])

    def grid_forward(self, theta, tn, xn):
        """Normalized prediction on the tensor grid ``tn x xn`` -> ``(len(tn), len(xn))``."""
        fb, ft, bias = self._split(theta)
        branch = self._net(self.branch_dims, fb)
        trunk = self._net(self.trunk_dims, ft)
        B, tape_b = mlp_forward(branch, np.reshape(tn, (-1, 1)))
        T, tape_t = mlp_forward(trunk, np.reshape(xn, (-1, 1)))
        return B @ T.T + bias, (branch, trunk, B, T, tape_b, tape_t)

    def grid_backward(self, theta, cache, dpred):
        branch, trunk, B, T, tape_b, tape_t = cache
        gb, _ = mlp_backward(branch, tape_b, dpred @ T)
        gt, _ = mlp_backward(trunk, tape_t, dpred.T @ B)
        return np.concatenate([gb.flatten(), gt.flatten(), [dpred.sum()]])

    def predict(self, x, t) -> np.ndarray:
        """Raw-unit prediction at paired raw coordinates (broadcast)."""
        x, t = np.broadcast_arrays(np.asarray(x, float), np.asarray(t, float))
        xn, tn = self.normalizer.apply(x=x.ravel(), t=t.ravel())
        B, _ = mlp_forward(self.branch, tn[:, None])
        T, _ = mlp_forward(self.trunk, xn[:, None])
        un = np.sum(B * T, axis=1) + self.output_bias
        return self.normalizer.invert(u=un).reshape(x.shape)

    def describe(self) -> dict:
        return {"kind": self.kind, "branch_dims": list(self.branch_dims),
                "trunk_dims": list(self.trunk_dims), "activation": self.activation,
                "first_omega": self.first_omega, "hidden_omega": self.hidden_omega}


def init_deeponet(latent_dim: int = 3, hidden=DEFAULT_HIDDEN, activation: str = DEFAULT_ACTIVATION,
                  seed: int = 0, normalizer: CoordNormalizer | None = None) -> DeepONetModel:
    rng = np.random.default_rng(seed)
    dims = [1, *hidden, latent_dim]
    branch = init_mlp(dims, activation, rng)
    trunk = init_mlp(dims, activation, rng)
    theta = np.concatenate([branch.flatten(), trunk.flatten(), [0.0]])
    return DeepONetModel(dims, list(dims), theta, activation, normalizer or CoordNormalizer())


def deeponet_eval(model: DeepONetModel, x: float, t: float) -> float:
    return float(model.predict(x, t))


def train_deeponet(ds: SnapshotDataset, cfg: TrainConfig | None = None, progress=None):
    cfg = cfg or TrainConfig(learning_rate=DEFAULT_LR)
    model = init_deeponet(cfg.latent_dim, cfg.hidden or DEFAULT_HIDDEN,
                          cfg.activation or DEFAULT_ACTIVATION, cfg.seed, fit_normalizer(ds))
    history = fit(model, ds, cfg, progress)
    return model, history


def deeponet_latent_series(model: DeepONetModel, times):
    from .analysis import LatentTrajectory

    times = np.asarray(times, dtype=float)
    coords, _ = mlp_forward(model.branch, model.normalizer.apply(t=times)[:, None])
    labels = [f"branch_{k + 1}" for k in range(model.latent_dim)]
    return LatentTrajectory(times, coords, "deeponet", labels)
