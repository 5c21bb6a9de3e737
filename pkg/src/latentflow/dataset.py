"""Simulation datasets: generation, coordinate normalization and file I/O.

Dataset file layout::

    LATENTFLOW-DATASET <schema_version> <header_bytes>\n
    <header_bytes of UTF-8 JSON metadata>\n
    <Nt * n_points little-endian float64, row-major (time-major)>

The JSON header carries the equation, parameters, initial condition, grid,
integrator settings and a ``times`` description ``{start, interval, count}``.
"""

from __future__ import annotations

import csv
import json
import logging
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .fourier import PeriodicGrid
from .integrators import (
    IntegrationConfig,
    IntegrationError,
    integrate_etdrk4,
    integrate_if_rk45,
)
from .pde import InitialCondition, build_system, conserved_mean, default_params, sg_energy

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
_MAGIC = "LATENTFLOW-DATASET"


class DatasetError(ValueError):
    pass


class DatasetVersionError(DatasetError):
    pass


class DatasetFormatError(DatasetError):
    pass


class DatasetShapeError(DatasetError):
    pass


@dataclass
class SimulationConfig:
    """Everything besides the initial condition needed to regenerate a dataset."""

    n_points: int = 64
    x_min: float = -np.pi
    x_max: float = np.pi
    params: dict = field(default_factory=dict)
    transient_cutoff: float = 300.0
    window_length: float = 100.0
    snapshot_interval: float = 0.2
    rel_tol: float = 1e-6
    abs_tol: float = 1e-6
    initial_step: float = 1e-2
    max_steps: int = 2_000_000
    integrator: str = "auto"

    def __post_init__(self):
        if self.transient_cutoff < 0:
            raise ValueError("transient_cutoff must be non-negative")
        if self.window_length < 0:
            raise ValueError("window_length must be non-negative")
        if self.snapshot_interval <= 0:
            raise ValueError("snapshot_interval must be positive")
        if self.integrator not in ("auto", "if_rk45", "etdrk4"):
            raise ValueError(f"unknown integrator {self.integrator!r}")

    @property
    def grid(self) -> PeriodicGrid:
        return PeriodicGrid(self.n_points, self.x_min, self.x_max)


@dataclass
class SnapshotDataset:
    times: np.ndarray
    grid: PeriodicGrid
    values: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (len(self.times), self.grid.n_points):
            raise DatasetShapeError(
                f"values shape {self.values.shape} does not match "
                f"({len(self.times)} times, {self.grid.n_points} points)"
            )
        if len(self.times) > 1 and not np.all(np.diff(self.times) > 0):
            raise DatasetShapeError("times must be strictly increasing")
        if not np.all(np.isfinite(self.values)):
            raise DatasetError("dataset contains non-finite values")

    @property
    def n_times(self) -> int:
        return len(self.times)

    @property
    def equation(self) -> str:
        return self.metadata.get("equation", "")

    def coordinates(self) -> tuple[np.ndarray, np.ndarray]:
        """Flattened ``(x, t)`` of every value, time-major."""
        t, x = np.meshgrid(self.times, self.grid.nodes, indexing="ij")
        return x.ravel(), t.ravel()


def _integrator_for(equation: str, choice: str):
    if choice == "auto":
        choice = "etdrk4" if equation == "sg" else "if_rk45"
    return choice, {"if_rk45": integrate_if_rk45, "etdrk4": integrate_etdrk4}[choice]


def generate_dataset(equation: str, sim: SimulationConfig | None = None,
                     ic: InitialCondition | None = None) -> SnapshotDataset:
    """Integrate from ``t = 0`` and keep ``[T, T + window_length]``."""
    sim = sim or SimulationConfig()
    ic = ic or InitialCondition()
    grid = sim.grid
    params = {**default_params(equation), **sim.params}
    system = build_system(equation, grid, params)
    name, integrate = _integrator_for(equation, sim.integrator)

    u0 = ic.evaluate(grid)
    state0 = np.stack([u0, np.zeros_like(u0)]) if system.state_dim == 2 else u0[None]
    mean0 = conserved_mean(u0)

    def run(state, t0, t1, interval, stage):
        cfg = IntegrationConfig(t_start=t0, t_end=t1, rel_tol=sim.rel_tol, abs_tol=sim.abs_tol,
                                initial_step=sim.initial_step, max_steps=sim.max_steps,
                                snapshot_interval=interval)
        try:
            return integrate(system, state, cfg)
        except IntegrationError as exc:
            raise IntegrationError(f"{equation} {stage}: {exc}", exc.partial, exc.time) from exc

    T = sim.transient_cutoff
    if T > 0:
        spin = run(state0, 0.0, T, T, "transient before T")
        state_T = spin.state(-1)
    else:
        state_T = state0
    if sim.window_length > 0:
        traj = run(state_T, T, T + sim.window_length, sim.snapshot_interval, "sampling window")
        times = traj.times
        states = traj.states.reshape(len(times), system.state_dim, -1)
    else:
        times = np.array([T])
        states = state_T[None].copy()
    values = states[:, 0, :]
    diagnostics = {"mean_drift": float(np.max(np.abs(values.mean(axis=1) - mean0)))}
    if equation == "sg":
        energy0 = sg_energy(state0[0], state0[1], grid)
        energy = np.array([sg_energy(s[0], s[1], grid) for s in states])
        diagnostics["energy_drift"] = float(np.max(np.abs(energy - energy0)) / energy0)

    metadata = {
        "schema_version": SCHEMA_VERSION,
        "equation": equation,
        "params": params,
        "initial_condition": ic.as_dict(),
        "simulation": asdict(sim) | {"params": params},
        "integrator": name,
        "transient_cutoff": T,
        "mean_t0": mean0,
        "diagnostics": diagnostics,
    }
    ds = SnapshotDataset(times, grid, values, metadata)
    log.info("%s dataset: %d snapshots, diagnostics %s", equation, len(times), diagnostics)
    return ds


def max_mean_drift(ds: SnapshotDataset) -> float:
    """Largest ``|mean(u(t)) - mean(u(0))|`` over the stored snapshots."""
    ref = ds.metadata.get("mean_t0", conserved_mean(ds.values[0]))
    return float(np.max(np.abs(ds.values.mean(axis=1) - ref)))


# ---------------------------------------------------------------------------
# normalization


@dataclass(frozen=True)
class CoordNormalizer:
    """Affine maps ``t, x -> [-1, 1]`` and standardization of ``u``."""

    t_shift: float = 0.0
    t_scale: float = 1.0
    x_shift: float = 0.0
    x_scale: float = 1.0
    u_shift: float = 0.0
    u_scale: float = 1.0

    def __post_init__(self):
        for name in ("t_scale", "x_scale", "u_scale"):
            if getattr(self, name) == 0:
                raise ValueError(f"{name} must be nonzero")

    def apply(self, x=None, t=None, u=None):
        out = []
        if x is not None:
            out.append((np.asarray(x, dtype=float) - self.x_shift) / self.x_scale)
        if t is not None:
            out.append((np.asarray(t, dtype=float) - self.t_shift) / self.t_scale)
        if u is not None:
            out.append((np.asarray(u, dtype=float) - self.u_shift) / self.u_scale)
        return out[0] if len(out) == 1 else tuple(out)

    def invert(self, x=None, t=None, u=None):
        out = []
        if x is not None:
            out.append(np.asarray(x, dtype=float) * self.x_scale + self.x_shift)
        if t is not None:
            out.append(np.asarray(t, dtype=float) * self.t_scale + self.t_shift)
        if u is not None:
            out.append(np.asarray(u, dtype=float) * self.u_scale + self.u_shift)
        return out[0] if len(out) == 1 else tuple(out)

    def as_dict(self) -> dict:
        return asdict(self)


def fit_normalizer(ds: SnapshotDataset) -> CoordNormalizer:
    t0, t1 = float(ds.times[0]), float(ds.times[-1])
    t_scale = (t1 - t0) / 2 if t1 > t0 else 1.0
    g = ds.grid
    u_mean = float(np.mean(ds.values))
    u_std = float(np.std(ds.values))
    # a constant field still shows a rounding-level std; treat that as zero
    if u_std <= 1e-12 * max(1.0, abs(u_mean)):
        warnings.warn("dataset has zero variance in u; using u_scale = 1", stacklevel=2)
        u_std = 1.0
    return CoordNormalizer(
        t_shift=(t0 + t1) / 2,
        t_scale=t_scale,
        x_shift=(g.x_min + g.x_max) / 2,
        x_scale=(g.x_max - g.x_min) / 2,
        u_shift=u_mean,
        u_scale=u_std,
    )


# ---------------------------------------------------------------------------
# persistence


def _times_description(times: np.ndarray) -> dict:
    if len(times) > 1:
        interval = (times[-1] - times[0]) / (len(times) - 1)
        uniform = np.allclose(np.diff(times), interval, rtol=1e-9, atol=1e-12)
    else:
        interval, uniform = 0.0, True
    desc = {"start": float(times[0]), "interval": float(interval), "count": int(len(times))}
    if not uniform:
        desc["values"] = [float(t) for t in times]
    return desc


def _times_from_description(desc: dict) -> np.ndarray:
    if "values" in desc:
        return np.asarray(desc["values"], dtype=float)
    return desc["start"] + desc["interval"] * np.arange(desc["count"])


def save_dataset(ds: SnapshotDataset, path) -> Path:
    path = Path(path)
    times = np.asarray(ds.times)
    desc = _times_description(times)
    # keep exact times whenever the compact description would not reproduce them
    if "values" not in desc and not np.array_equal(_times_from_description(desc), times):
        desc["values"] = [float(t) for t in times]
    header = {
        "schema_version": SCHEMA_VERSION,
        "grid": ds.grid.as_dict(),
        "times": desc,
        "shape": list(ds.values.shape),
        "metadata": ds.metadata,
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(f"{_MAGIC} {SCHEMA_VERSION} {len(blob)}\n".encode("ascii"))
        fh.write(blob + b"\n")
        fh.write(np.ascontiguousarray(ds.values, dtype="<f8").tobytes())
    return path


def load_dataset(path) -> SnapshotDataset:
    path = Path(path)
    with open(path, "rb") as fh:
        first = fh.readline()
        try:
            magic, version, nbytes = first.decode("ascii").split()
            version, nbytes = int(version), int(nbytes)
        except (UnicodeDecodeError, ValueError):
            raise DatasetFormatError(f"{path}: not a dataset file (bad preamble)") from None
        if magic != _MAGIC:
            raise DatasetFormatError(f"{path}: bad magic {magic!r}")
        if version != SCHEMA_VERSION:
            raise DatasetVersionError(
                f"{path}: schema version {version} unsupported (expected {SCHEMA_VERSION})"
            )
        try:
            header = json.loads(fh.read(nbytes).decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise DatasetFormatError(f"{path}: corrupt header: {exc}") from None
        if fh.read(1) != b"\n":
            raise DatasetFormatError(f"{path}: header not terminated")
        payload = fh.read()
    try:
        grid = PeriodicGrid(**header["grid"])
        times = _times_from_description(header["times"])
        nt, n = header["shape"]
    except (KeyError, TypeError, ValueError) as exc:
        raise DatasetFormatError(f"{path}: incomplete header: {exc}") from None
    expected = nt * n * 8
    if len(payload) != expected:
        raise DatasetShapeError(
            f"{path}: payload has {len(payload)} bytes, header shape ({nt}, {n}) needs {expected}"
        )
    if len(times) != nt or n != grid.n_points:
        raise DatasetShapeError(
            f"{path}: header shape ({nt}, {n}) inconsistent with {len(times)} times "
            f"and {grid.n_points} grid points"
        )
    values = np.frombuffer(payload, dtype="<f8").reshape(nt, n).astype(float)
    return SnapshotDataset(times, grid, values, header.get("metadata", {}))


def export_csv(ds: SnapshotDataset, path) -> Path:
    """Long-format CSV with header ``t,x,u``."""
    path = Path(path)
    x = ds.grid.nodes
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "x", "u"])
        for t, row in zip(ds.times, ds.values):
            for xj, uj in zip(x, row):
                w.writerow([repr(float(t)), repr(float(xj)), repr(float(uj))])
    return path
