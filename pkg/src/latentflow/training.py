"""Mini-batch Adam training shared by the DeepONet and NIF models."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .nn import AdamState, adam_step

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    epochs: int = 5000
    learning_rate: float = 1e-3
    batch_size: int = 1024
    seed: int = 0
    latent_dim: int = 3
    activation: str | None = None
    pnet_activation: str | None = None  # NIF only
    hidden: tuple | None = None
    lr_schedule: str = "cosine"  # or "constant"
    final_lr_factor: float = 0.01

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if self.latent_dim < 1:
            raise ValueError("latent_dim must be positive")
        if self.lr_schedule not in ("constant", "cosine"):
            raise ValueError(f"unknown lr_schedule {self.lr_schedule!r}")
        if self.hidden is not None:
            self.hidden = tuple(int(h) for h in self.hidden)

    def lr_at(self, epoch: int) -> float:
        if self.lr_schedule == "constant" or self.epochs <= 1:
            return self.learning_rate
        frac = epoch / (self.epochs - 1)
        lo = self.learning_rate * self.final_lr_factor
        return lo + 0.5 * (self.learning_rate - lo) * (1 + math.cos(math.pi * frac))

    def as_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden) if self.hidden is not None else None
        return d


class TrainingDivergence(RuntimeError):
    def __init__(self, epoch: int, history: list[float]):
        super().__init__(f"training diverged (non-finite loss) at epoch {epoch}")
        self.epoch = epoch
        self.history = history


def snapshot_batches(n_times: int, n_points: int, batch_size: int,
                     rng: np.random.Generator) -> list[np.ndarray]:
    """Shuffle snapshot indices and split so each batch holds ~``batch_size`` points."""
    per = max(1, batch_size // n_points)
    perm = rng.permutation(n_times)
    return [perm[i : i + per] for i in range(0, n_times, per)]


def fit(model, ds, cfg: TrainConfig, progress=None):
    """Train ``model`` in place on ``ds``; returns the per-epoch loss history.

    ``model`` must provide ``theta``, ``normalizer``, ``grid_forward`` and
    ``grid_backward``. The loss is the mean squared error of normalized ``u``
    over every (x, t) point; an epoch visits each point once.
    """
    norm = model.normalizer
    tn = norm.apply(t=ds.times)
    xn = norm.apply(x=ds.grid.nodes)
    un = norm.apply(u=ds.values)
    rng = np.random.default_rng(cfg.seed)
    theta = model.theta
    adam = AdamState.zeros_like(theta)
    history: list[float] = []
    n = ds.grid.n_points
    for epoch in range(cfg.epochs):
        lr = cfg.lr_at(epoch)
        total = 0.0
        for idx in snapshot_batches(ds.n_times, n, cfg.batch_size, rng):
            # overflow shows up as a non-finite gradient and is reported below
            with np.errstate(over="ignore", invalid="ignore"):
                pred, cache = model.grid_forward(theta, tn[idx], xn)
                resid = pred - un[idx]
                total += float(np.sum(resid * resid))
                grad = model.grid_backward(theta, cache, (2.0 / resid.size) * resid)
            if not np.all(np.isfinite(grad)):
                model.theta = theta
                raise TrainingDivergence(epoch, history)
            theta, adam = adam_step(theta, grad, adam, lr)
        loss = total / un.size
        if not math.isfinite(loss):
            model.theta = theta
            raise TrainingDivergence(epoch, history)
        history.append(loss)
        if progress is not None:
            progress(epoch, loss)
    model.theta = theta
    return history
