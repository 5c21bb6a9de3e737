"""Report bundles: the figures and CSV tables for one trained model."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from . import plotting
from .analysis import fourier_latent, model_predictions, reconstruction_error
from .dataset import fit_normalizer
from .deeponet import deeponet_latent_series
from .nif import nif_latent_series

ERROR_METRIC = "relative Frobenius norm 100*||pred - true||_F / ||true||_F (percent)"


class ReportMismatch(ValueError):
    """Checkpoint and dataset do not describe the same grid or scaling."""


def latent_series(model, times):
    if model.kind == "nif":
        return nif_latent_series(model, times)
    return deeponet_latent_series(model, times)


def evaluate(model, ds):
    """Predictions and the error report; the single source of every reported error."""
    pred = model_predictions(model, ds)
    return pred, reconstruction_error(pred, ds.values)


def check_compatible(model, header: dict, ds) -> None:
    extra = header.get("extra", {})
    trained_shape = extra.get("dataset_shape")
    shape = list(ds.values.shape)
    if trained_shape is not None and list(trained_shape) != shape:
        raise ReportMismatch(
            f"checkpoint was trained on a {tuple(trained_shape)} dataset "
            f"but the dataset has shape {tuple(shape)}"
        )
    trained_grid = extra.get("grid")
    if trained_grid is not None and trained_grid != ds.grid.as_dict():
        raise ReportMismatch(f"checkpoint grid {trained_grid} != dataset grid {ds.grid.as_dict()}")
    expected = fit_normalizer(ds).as_dict()
    stored = model.normalizer.as_dict()
    if not all(np.isclose(stored[k], expected[k], rtol=1e-9, atol=1e-12) for k in expected):
        raise ReportMismatch(
            f"checkpoint normalizer {stored} does not match the dataset's {expected} "
            f"(dataset shape {tuple(shape)})"
        )


def _prediction_csv(path, ds, pred) -> Path:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "x", "true", "predicted"])
        for t, row_true, row_pred in zip(ds.times, ds.values, pred):
            for x, a, b in zip(ds.grid.nodes, row_true, row_pred):
                w.writerow([repr(float(t)), repr(float(x)), repr(float(a)), repr(float(b))])
    return Path(path)


def write_bundle(model, ds, out_dir, fourier: bool = False, title: str = "") -> dict:
    """Write the four figures and their CSV siblings; returns a summary dict.

    Files: ``latent.csv``/``latent_profile.svg``, ``pointwise_error.csv``/
    ``error_heatmap.svg``, ``prediction.csv``/``prediction.svg`` and
    ``per_time_error.csv``/``latent_views.svg``. With ``fourier`` the
    Fourier baseline adds ``fourier_latent.csv``/``fourier_views.svg``.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    title = title or f"{ds.equation} {model.kind}".strip()
    pred, report = evaluate(model, ds)
    latent = latent_series(model, ds.times)

    latent.to_csv(out / "latent.csv")
    plotting.latent_profile(latent, out / "latent_profile.svg", f"{title} latent profile")
    report.to_csv(out / "pointwise_error.csv", out / "per_time_error.csv", ds.times, ds.grid.nodes)
    plotting.error_heatmap(ds.times, ds.grid.nodes, report.pointwise_error,
                           out / "error_heatmap.svg", f"{title} pointwise error")
    _prediction_csv(out / "prediction.csv", ds, pred)
    plotting.prediction_panels(ds.times, ds.grid.nodes, ds.values, pred,
                               out / "prediction.svg", title)
    plotting.latent_views(latent, out / "latent_views.svg", f"{title} latent trajectory")

    summary = {
        "equation": ds.equation,
        "model": model.kind,
        "latent_dim": int(model.latent_dim),
        "relative_error_percent": report.relative_error_percent,
        "error_metric": ERROR_METRIC,
        "files": sorted(p.name for p in out.iterdir() if p.suffix in (".csv", ".svg")),
    }
    if fourier:
        four = fourier_latent(ds)
        four.to_csv(out / "fourier_latent.csv")
        plotting.latent_views(four, out / "fourier_views.svg", f"{ds.equation} Fourier projection")
        summary["files"] = sorted(p.name for p in out.iterdir() if p.suffix in (".csv", ".svg"))
    (out / "report.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary
