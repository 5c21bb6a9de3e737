"""Error metrics, latent trajectories, Fourier baselines and transition diagnostics."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.cluster.vq import kmeans2

from .fourier import dominant_modes, rfft

SOURCES = ("nif", "deeponet", "fourier")


@dataclass
class LatentTrajectory:
    times: np.ndarray
    coords: np.ndarray  # (Nt, d)
    source: str
    labels: list

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.coords = np.asarray(self.coords, dtype=float)
        if self.coords.ndim == 1:
            self.coords = self.coords[:, None]
        if self.coords.shape[0] != len(self.times):
            raise ValueError(f"{self.coords.shape[0]} latent rows for {len(self.times)} times")
        if self.coords.shape[1] < 1:
            raise ValueError("latent dimension must be at least 1")
        if self.source not in SOURCES:
            raise ValueError(f"unknown latent source {self.source!r}")
        if len(self.labels) != self.coords.shape[1]:
            raise ValueError("one label per latent axis required")

    @property
    def dim(self) -> int:
        return self.coords.shape[1]

    def to_csv(self, path) -> Path:
        """Columns ``t`` then one per latent axis (named by ``labels``)."""
        path = Path(path)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", *self.labels])
            for t, row in zip(self.times, self.coords):
                w.writerow([repr(float(t)), *(repr(float(v)) for v in row)])
        return path


@dataclass
class ErrorReport:
    relative_error_percent: float
    pointwise_error: np.ndarray  # pred - truth, (Nt, n)
    per_time_error: np.ndarray  # row-wise relative error, (Nt,)

    def to_csv(self, pointwise_path, per_time_path, times, nodes) -> tuple[Path, Path]:
        """``t,x,error`` long format and ``t,relative_error`` per snapshot."""
        pointwise_path, per_time_path = Path(pointwise_path), Path(per_time_path)
        with open(pointwise_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "x", "error"])
            for t, row in zip(times, self.pointwise_error):
                for x, e in zip(nodes, row):
                    w.writerow([repr(float(t)), repr(float(x)), repr(float(e))])
        with open(per_time_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "relative_error"])
            for t, e in zip(times, self.per_time_error):
                w.writerow([repr(float(t)), repr(float(e))])
        return pointwise_path, per_time_path


def reconstruction_error(pred, truth) -> ErrorReport:
    """Global relative Frobenius error in percent, plus pointwise and per-snapshot errors."""
    pred = np.asarray(pred, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if pred.shape != truth.shape:
        raise ValueError(f"prediction shape {pred.shape} != truth shape {truth.shape}")
    norm = np.linalg.norm(truth)
    if norm == 0.0:
        raise ValueError("truth is identically zero; relative error undefined")
    diff = pred - truth
    row_norm = np.linalg.norm(truth, axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        per_time = np.where(row_norm > 0, np.linalg.norm(diff, axis=-1) / row_norm, np.nan)
    return ErrorReport(float(100.0 * np.linalg.norm(diff) / norm), diff, np.atleast_1d(per_time))


def fourier_latent(ds, variant: str = "complex") -> LatentTrajectory:
    """3-D coordinates from the two dominant nonzero wavenumbers.

    ``variant="complex"`` gives ``(Re a_k1, Im a_k1, Re a_k2)``;
    ``variant="modulus"`` gives ``(|a_k1|, |a_k2|, |a_k3|)``. Amplitudes are
    scaled by ``2 / n`` so a mode ``A cos(kx + phi)`` has modulus ``A``.
    """
    values = np.asarray(ds.values, dtype=float)
    n = values.shape[1]
    energy = np.mean(np.abs(rfft(values)[:, 1:]) ** 2, axis=0)
    if values.shape[0] == 0 or not np.any(energy > 0):
        raise ValueError("dataset has no energetic nonzero Fourier mode (spatially uniform data)")
    scale = 2.0 / n
    if variant == "complex":
        (k1, a1), (k2, a2) = dominant_modes(values, 2)
        coords = scale * np.column_stack([a1.real, a1.imag, a2.real])
        labels = [f"Re a{k1}", f"Im a{k1}", f"Re a{k2}"]
    elif variant == "modulus":
        modes = dominant_modes(values, 3)
        coords = scale * np.column_stack([np.abs(a) for _, a in modes])
        labels = [f"|a{k}|" for k, _ in modes]
    else:
        raise ValueError(f"unknown Fourier latent variant {variant!r}")
    return LatentTrajectory(np.asarray(ds.times, dtype=float), coords, "fourier", labels)


def model_predictions(model, ds) -> np.ndarray:
    """Evaluate ``model`` on every grid point of ``ds``; shape ``(Nt, n_points)``."""
    norm = model.normalizer
    tn = norm.apply(t=ds.times)
    xn = norm.apply(x=ds.grid.nodes)
    pred, _ = model.grid_forward(model.theta, tn, xn)
    return norm.invert(u=pred)


def mode_energy_series(ds) -> np.ndarray:
    """Per-snapshot energy ``|a_k|^2`` of the dominant nonzero mode."""
    (_, a), = dominant_modes(ds, 1)
    return np.abs(a) ** 2


def change_points(series, percentile: float = 90.0, merge_gap: int = 1) -> np.ndarray:
    """Indices of transitions in a (possibly multi-dimensional) series.

    Steps whose derivative magnitude exceeds the given percentile are
    flagged; flagged steps closer than ``merge_gap`` are merged into one
    event located at its largest step.
    """
    s = np.asarray(series, dtype=float)
    if s.ndim == 1:
        s = s[:, None]
    if s.shape[0] < 2:
        return np.array([], dtype=int)
    d = np.linalg.norm(np.diff(s, axis=0), axis=1)
    thresh = np.percentile(d, percentile)
    flagged = np.flatnonzero(d > thresh)
    if flagged.size == 0:
        return np.array([], dtype=int)
    events = []
    start = prev = flagged[0]
    for i in list(flagged[1:]) + [None]:
        if i is not None and i - prev <= merge_gap + 1:
            prev = i
            continue
        run = np.arange(start, prev + 1)
        events.append(int(run[np.argmax(d[run])]))
        if i is not None:
            start = prev = i
    return np.array(events, dtype=int)


def transition_alignment(latent, ds, tolerance: int = 2, percentile: float = 90.0) -> float:
    """Fraction of dataset transitions matched by a latent transition within ``tolerance`` snapshots.

    Returns ``nan`` when the dataset shows no transition (score undefined).
    """
    coords = latent.coords if isinstance(latent, LatentTrajectory) else np.asarray(latent)
    ref = change_points(mode_energy_series(ds), percentile)
    if ref.size == 0:
        return float("nan")
    got = change_points(coords, percentile)
    if got.size == 0:
        return 0.0
    matched = [np.min(np.abs(got - r)) <= tolerance for r in ref]
    return float(np.mean(matched))


def cluster_separation(coords, k: int = 2, seed: int = 0) -> tuple[np.ndarray, float, np.ndarray]:
    """k-means split of ``coords``; returns labels, separation ratio and cluster sizes.

    The ratio is the smallest centroid distance divided by the sum of the two
    clusters' rms radii; values above 1 mean the clusters do not overlap.
    """
    coords = np.asarray(coords, dtype=float)
    centroids, labels = kmeans2(coords, k, seed=np.random.default_rng(seed), minit="++")
    sizes = np.bincount(labels, minlength=k)
    radii = np.array([
        np.sqrt(np.mean(np.sum((coords[labels == c] - centroids[c]) ** 2, axis=1)))
        if sizes[c] else 0.0
        for c in range(k)
    ])
    best = np.inf
    for a in range(k):
        for b in range(a + 1, k):
            dist = np.linalg.norm(centroids[a] - centroids[b])
            best = min(best, dist / max(radii[a] + radii[b], 1e-300))
    return labels, float(best), sizes


def recurrence_fraction(coords, radius_fraction: float = 0.05) -> float:
    """Share of points that leave their neighbourhood and later come back to it.

    The neighbourhood radius is ``radius_fraction`` times the trajectory
    diameter.
    """
    coords = np.asarray(coords, dtype=float)
    dist = np.linalg.norm(coords[:, None, :] - coords[None, :, :], axis=-1)
    diameter = dist.max()
    if diameter == 0.0:
        return 1.0
    r = radius_fraction * diameter
    n = len(coords)
    hits = 0
    for i in range(n):
        row = dist[i, i + 1 :]
        away = np.flatnonzero(row > r)
        if away.size and np.any(row[away[0] :] <= r):
            hits += 1
    return hits / n
