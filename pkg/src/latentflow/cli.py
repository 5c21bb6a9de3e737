"""``latentflow`` command line: simulate, train, analyze and the full pipeline.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import plotting
from .checkpoint import load_checkpoint, save_checkpoint
from .config import MODEL_KINDS, ConfigError, ExperimentConfig, load_config
from .dataset import (
    SimulationConfig,
    export_csv,
    generate_dataset,
    load_dataset,
    save_dataset,
)
from .deeponet import train_deeponet
from .nif import train_nif
from .pde import SYSTEMS, InitialCondition
from .report import ERROR_METRIC, check_compatible, evaluate, write_bundle
from .training import TrainConfig, TrainingDivergence

log = logging.getLogger("latentflow")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2
SUMMARY_COLUMNS = ["equation", "model", "latent_dim", "error_percent", "status"]


# ---------------------------------------------------------------------------
# library-level commands


def simulation_config(cfg: ExperimentConfig) -> SimulationConfig:
    return SimulationConfig(
        n_points=cfg.n_points, x_min=cfg.x_min, x_max=cfg.x_max, params=cfg.physics_params(),
        transient_cutoff=cfg.transient_cutoff, window_length=cfg.window_length,
        snapshot_interval=cfg.snapshot_interval, rel_tol=cfg.rel_tol, abs_tol=cfg.abs_tol,
        initial_step=cfg.initial_step, max_steps=cfg.max_steps,
        integrator=cfg.integrator,
    )


def cmd_simulate(cfg: ExperimentConfig, output, csv_path=None):
    """Generate, save and return the dataset for ``cfg.equation``."""
    ic = InitialCondition(cfg.amplitude, cfg.wavenumber, cfg.phase)
    ds = generate_dataset(cfg.equation, simulation_config(cfg), ic)
    output = Path(output)
    output.parent.mkdir(parents=True, exist_ok=True)
    save_dataset(ds, output)
    if csv_path is not None:
        export_csv(ds, csv_path)
    return ds


def train_config(cfg: ExperimentConfig, equation: str | None = None,
                 model: str | None = None) -> TrainConfig:
    model = model or cfg.model
    return TrainConfig(
        epochs=cfg.epochs, learning_rate=cfg.model_learning_rate(model),
        batch_size=cfg.batch_size, seed=cfg.seed,
        latent_dim=cfg.model_latent_dim(equation, model),
        activation=cfg.activation, pnet_activation=cfg.pnet_activation, hidden=cfg.hidden,
        lr_schedule=cfg.lr_schedule,
    )


def _write_loss(path, history) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "loss"])
        for i, loss in enumerate(history, start=1):
            w.writerow([i, repr(float(loss))])


def _progress(total: int):
    step = max(1, total // 10)

    def report(epoch, loss):
        if (epoch + 1) % step == 0 or epoch + 1 == total:
            log.info("epoch %d/%d  loss %.4e", epoch + 1, total, loss)
    return report


def cmd_train(cfg: ExperimentConfig, ds, out_dir, model_kind: str | None = None) -> dict:
    """Train on ``ds``; writes ``checkpoint.lfck``, ``loss.csv``, ``loss.svg`` and ``summary.json``.

    Raises :class:`TrainingDivergence` after saving the partial loss history.
    """
    kind = model_kind or cfg.model
    tcfg = train_config(cfg, ds.equation, kind)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    trainer = train_nif if kind == "nif" else train_deeponet
    try:
        model, history = trainer(ds, tcfg, _progress(tcfg.epochs))
    except TrainingDivergence as exc:
        _write_loss(out / "loss.csv", exc.history)
        raise
    _write_loss(out / "loss.csv", history)
    if history:
        plotting.loss_curve(history, out / "loss.svg", f"{ds.equation} {kind} training loss")
    extra = {"dataset_shape": list(ds.values.shape), "grid": ds.grid.as_dict(),
             "equation": ds.equation, "train": tcfg.as_dict()}
    save_checkpoint(model, out / "checkpoint.lfck", seed=tcfg.seed, extra=extra)
    _, report = evaluate(model, ds)
    summary = {
        "equation": ds.equation,
        "model": kind,
        "latent_dim": tcfg.latent_dim,
        "seed": tcfg.seed,
        "epochs": tcfg.epochs,
        "learning_rate": tcfg.learning_rate,
        "lr_schedule": tcfg.lr_schedule,
        "n_params": int(model.theta.size),
        "final_loss": history[-1] if history else None,
        "relative_error_percent": report.relative_error_percent,
        "error_metric": ERROR_METRIC,
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary


def cmd_analyze(checkpoint, dataset, out_dir, fourier: bool = False) -> dict:
    model, header = load_checkpoint(checkpoint)
    ds = load_dataset(dataset)
    check_compatible(model, header, ds)
    return write_bundle(model, ds, out_dir, fourier=fourier)


def _write_summary(out: Path, rows: list[dict]) -> None:
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SUMMARY_COLUMNS)
        for r in rows:
            err = r["error_percent"]
            w.writerow([r["equation"], r["model"], r["latent_dim"],
                        "" if err is None else f"{err:.4f}", r["status"]])
    (out / "summary.json").write_text(json.dumps(rows, indent=2, sort_keys=True) + "\n")


def format_table(rows: list[dict]) -> str:
    lines = [f"{'equation':<9}{'model':<10}{'latent_dim':>10}{'error%':>10}  status"]
    for r in rows:
        err = "-" if r["error_percent"] is None else f"{r['error_percent']:.2f}"
        lines.append(f"{r['equation']:<9}{r['model']:<10}{r['latent_dim']:>10}{err:>10}  {r['status']}")
    return "\n".join(lines)


def cmd_pipeline(cfg: ExperimentConfig, out_dir) -> list[dict]:
    """simulate -> train -> analyze for every (equation, model) cell.

    A failing cell is recorded in the summary and the remaining cells still
    run. Each cell writes only under ``<out>/<equation>/<model>/``.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for eq in cfg.equations:
        ecfg = replace(cfg, equation=eq)
        ds, failure = None, None
        try:
            log.info("simulating %s", eq)
            ds = cmd_simulate(ecfg, out / eq / "dataset.lfds")
        except Exception as exc:  # recorded per cell
            failure = f"simulate failed: {exc}"
            log.error("%s: %s", eq, failure)
        for kind in cfg.models:
            row = {"equation": eq, "model": kind, "latent_dim": ecfg.model_latent_dim(eq, kind),
                   "error_percent": None, "status": "ok"}
            if failure is not None:
                row["status"] = failure
                rows.append(row)
                continue
            cell = out / eq / kind
            try:
                log.info("training %s %s", eq, kind)
                cmd_train(ecfg, ds, cell, kind)
                bundle = cmd_analyze(cell / "checkpoint.lfck", out / eq / "dataset.lfds",
                                     cell / "report", fourier=True)
                row["error_percent"] = bundle["relative_error_percent"]
            except Exception as exc:  # recorded per cell
                row["status"] = f"failed: {type(exc).__name__}: {exc}"
                log.error("%s %s: %s", eq, kind, row["status"])
            rows.append(row)
    _write_summary(out, rows)
    return rows


# ---------------------------------------------------------------------------
# argument parsing


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="INI experiment configuration")
    p.add_argument("--seed", type=int, help="random seed (default: $LATENTFLOW_SEED or 0)")
    p.add_argument("--output", "-o", type=Path, help="output path or directory")


def _add_simulation(p: argparse.ArgumentParser, with_equation: bool = True) -> None:
    if with_equation:
        p.add_argument("--equation", choices=SYSTEMS, help="PDE to integrate")
    p.add_argument("--window", type=float, dest="window_length", help="sampling window length")
    p.add_argument("--interval", type=float, dest="snapshot_interval", help="snapshot spacing")
    p.add_argument("--cutoff", type=float, dest="transient_cutoff", help="transient cutoff T")
    p.add_argument("--n-points", type=int, dest="n_points", help="grid size (power of two)")


def _add_training(p: argparse.ArgumentParser, with_model: bool = True) -> None:
    if with_model:
        p.add_argument("--model", choices=MODEL_KINDS, help="architecture to train")
    p.add_argument("--latent-dim", type=int, help="latent size (r for NIF, p for DeepONet)")
    p.add_argument("--epochs", type=int, help="training epochs")
    p.add_argument("--lr", type=float, dest="learning_rate", help="Adam learning rate")
    p.add_argument("--batch-size", type=int, help="points per mini-batch")
    p.add_argument("--schedule", choices=("cosine", "constant"), dest="lr_schedule",
                   help="learning-rate schedule")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="latentflow", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="integrate a PDE and write a dataset file")
    _add_common(p)
    _add_simulation(p)
    p.add_argument("--csv", type=Path, help="also export the dataset as t,x,u CSV")

    p = sub.add_parser("train", help="train a model on a dataset file")
    _add_common(p)
    p.add_argument("--dataset", type=Path, required=True)
    _add_training(p)

    p = sub.add_parser("analyze", help="write figures and CSV tables for a checkpoint")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--dataset", type=Path, required=True)
    p.add_argument("--output", "-o", type=Path, help="report directory")
    p.add_argument("--fourier", action="store_true", help="add the Fourier-projection baseline")

    p = sub.add_parser("pipeline", help="simulate, train and analyze every equation/model pair")
    _add_common(p)
    _add_simulation(p, with_equation=False)
    _add_training(p, with_model=False)
    p.add_argument("--equations", help="comma-separated subset of " + ",".join(SYSTEMS))
    p.add_argument("--models", help="comma-separated subset of " + ",".join(MODEL_KINDS))
    return parser


_OVERRIDES = ("seed", "equation", "window_length", "snapshot_interval", "transient_cutoff",
              "n_points", "model", "latent_dim", "epochs", "learning_rate", "batch_size",
              "lr_schedule", "equations", "models")


def _resolve_config(args) -> ExperimentConfig:
    cfg = load_config(getattr(args, "config", None))
    overrides = {k: getattr(args, k, None) for k in _OVERRIDES}
    return cfg.with_overrides(**overrides)


def _run(args) -> int:
    if args.command == "analyze":
        out = args.output or Path("latentflow-out") / "report"
        summary = cmd_analyze(args.checkpoint, args.dataset, out, fourier=args.fourier)
        print(f"relative error: {summary['relative_error_percent']:.4f}%")
        print(f"report written to {out} ({len(summary['files'])} files)")
        return EXIT_OK

    cfg = _resolve_config(args)
    if args.command == "simulate":
        out = args.output or Path(cfg.output) / f"{cfg.equation}.lfds"
        ds = cmd_simulate(cfg, out, args.csv)
        diag = ds.metadata["diagnostics"]
        print(f"wrote {out}: {ds.n_times} snapshots x {ds.grid.n_points} points")
        print(f"mean conservation drift: {diag['mean_drift']:.3e}")
        if "energy_drift" in diag:
            print(f"relative energy drift: {diag['energy_drift']:.3e}")
        return EXIT_OK

    if args.command == "train":
        ds = load_dataset(args.dataset)
        out = args.output or Path(cfg.output) / f"{ds.equation or 'run'}-{cfg.model}"
        try:
            summary = cmd_train(cfg, ds, out)
        except TrainingDivergence as exc:
            print(f"error: {exc}; partial loss history in {out / 'loss.csv'}", file=sys.stderr)
            return EXIT_RUNTIME
        print(f"relative error: {summary['relative_error_percent']:.4f}%")
        print(f"checkpoint written to {out / 'checkpoint.lfck'}")
        return EXIT_OK

    out = args.output or Path(cfg.output)
    rows = cmd_pipeline(cfg, out)
    print(format_table(rows))
    failed = [r for r in rows if r["status"] != "ok"]
    return EXIT_RUNTIME if failed else EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return _run(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"error: {exc.filename}: no such file", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
