"""Command-line surface.

Verbs: train, analyze, sweep, robustness, ablate-units, tracks export.
Exit codes: 0 success, 2 input/validation error, 3 numeric failure.
GTL_THREADS caps how many sweep rows run concurrently (default 1).
"""

from __future__ import annotations

import argparse
import concurrent.futures
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, load_run_config
from .errors import DimensionError, DivergenceError, FormatError
from .experiments import (
    gamma_sweep,
    robustness_curve,
    stage_transport_metrics,
    sweep_row,
    unit_elimination_eval,
)
from .network import TrainConfig, accuracy, build_network, forward_with_track, train
from .serialize import (
    SCHEMA_VERSION,
    atomic_write,
    checkpoint_checksum,
    dumps_json,
    load_checkpoint,
    save_checkpoint,
    save_tracks,
    write_csv,
)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERIC = 3


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("GTL_THREADS", "1")))
    except ValueError:
        return 1


def _resolve_train(cfg: RunConfig, args) -> TrainConfig:
    train_cfg = cfg.train
    if getattr(args, "seed", None) is not None:
        train_cfg = replace(train_cfg, seed=args.seed)
    if getattr(args, "ot_subsample", None) is not None:
        train_cfg = replace(train_cfg, ot_subsample=args.ot_subsample)
    return train_cfg


def _out_dir(cfg: RunConfig, args) -> Path:
    out = Path(args.out) if getattr(args, "out", None) else Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _trainlog_rows(log, n_stages: int):
    rows = []
    for e in log.epochs:
        row = [e.epoch, e.loss, e.train_acc, e.test_acc]
        row.extend(e.mean_lss_per_stage)
        row.append(e.weight_energy)
        rows.append(row)
    return rows


def _trainlog_header(n_stages: int):
    header = ["epoch", "loss", "train_acc", "test_acc"]
    header.extend(f"mean_lss_stage_{k}" for k in range(n_stages))
    header.append("weight_energy")
    return header


def _json_safe(value):
    """JSON has no NaN/inf; degenerate metric slots become null."""
    if value is None or not np.isfinite(value):
        return None
    return float(value)


def cmd_train(args) -> int:
    cfg = load_run_config(args.config)
    data = cfg.build_dataset()
    train_cfg = _resolve_train(cfg, args)
    arch = cfg.architecture(data)
    net = build_network(arch, train_cfg.seed)
    net, log = train(net, data, train_cfg)
    out = _out_dir(cfg, args)
    save_checkpoint(out / "checkpoint.json", net, arch, train_cfg.seed)
    n_stages = len(arch.stage_widths)
    write_csv(out / "trainlog.csv", _trainlog_header(n_stages), _trainlog_rows(log, n_stages))
    print(f"checkpoint: {out / 'checkpoint.json'}")
    print(f"trainlog:   {out / 'trainlog.csv'}")
    return EXIT_OK


def cmd_analyze(args) -> int:
    cfg = load_run_config(args.config)
    net, arch, _seed = load_checkpoint(args.checkpoint)
    data = cfg.build_dataset()
    if net.in_dim != data.dim:
        raise DimensionError(
            f"checkpoint expects input dim {net.in_dim}, dataset has {data.dim}"
        )
    train_cfg = _resolve_train(cfg, args)
    wants = [f for f in ("lss", "ots", "w2", "theorem1") if getattr(args, f)]
    if not wants:
        wants = ["lss", "ots", "w2"]
    subset = data.test_inputs[: min(train_cfg.ot_subsample, data.test_inputs.shape[0])]
    metrics = stage_transport_metrics(net, subset, with_separation="theorem1" in wants)
    out = _out_dir(cfg, args)
    doc = {
        "schema_version": SCHEMA_VERSION,
        "kind": "gtl-metrics",
        "checkpoint_checksum": checkpoint_checksum(net),
        "subset_size": int(subset.shape[0]),
        "test_accuracy": accuracy(net, data.test_inputs, data.test_labels),
        "stages": [],
    }
    header = ["stage"]
    header.extend(
        col
        for name, col in (
            ("lss", "mean_lss"),
            ("lss", "mean_lsr"),
            ("lss", "degenerate_tracks"),
            ("ots", "ots"),
            ("w2", "w2"),
            ("theorem1", "separation_fraction"),
        )
        if name in wants
    )
    rows = []
    for k, m in enumerate(metrics):
        stage_doc = {"stage": k}
        row = [k]
        if "lss" in wants:
            stage_doc.update(
                mean_lss=_json_safe(m.mean_lss),
                mean_lsr=_json_safe(m.mean_lsr),
                degenerate_tracks=m.degenerate_tracks,
            )
            row.extend([m.mean_lss, m.mean_lsr, m.degenerate_tracks])
        if "ots" in wants:
            stage_doc["ots"] = m.ots
            row.append(m.ots)
        if "w2" in wants:
            stage_doc["w2"] = m.w2
            row.append(m.w2)
        if "theorem1" in wants:
            stage_doc["separation_fraction"] = _json_safe(m.separation_fraction)
            row.append(m.separation_fraction)
        doc["stages"].append(stage_doc)
        rows.append(row)
    if "json" in cfg.report_formats:
        atomic_write(out / "metrics.json", dumps_json(doc) + "\n")
        print(f"metrics: {out / 'metrics.json'}")
    if "csv" in cfg.report_formats:
        write_csv(out / "metrics.csv", header, rows)
        print(f"metrics: {out / 'metrics.csv'}")
    return EXIT_OK


def _sweep_task(payload):
    arch, data, gamma, train_cfg = payload
    return sweep_row(arch, data, gamma, train_cfg)


def cmd_sweep(args) -> int:
    cfg = load_run_config(args.config)
    data = cfg.build_dataset()
    train_cfg = _resolve_train(cfg, args)
    gammas = sorted(set(cfg.gammas))
    tasks = []
    for kind in cfg.archs:
        arch = cfg.architecture(data, kind=kind)
        for gamma in gammas:
            tasks.append((arch, data, gamma, train_cfg))
    workers = _threads()
    if workers > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_task, tasks))
    else:
        results = [_sweep_task(t) for t in tasks]

    n_stages = len(cfg.stage_widths)
    header = ["arch", "gamma", "ok", "train_acc", "test_acc"]
    for k in range(n_stages):
        header.extend([f"lss_stage_{k}", f"ots_stage_{k}", f"w2_stage_{k}"])
    header.extend(["weight_energy", "error"])
    rows = []
    by_arch_gamma = {}
    for (arch, _data, gamma, _cfg), row in zip(tasks, results):
        by_arch_gamma[(arch.kind, gamma)] = row
        csv_row = [arch.kind, row.gamma, row.ok, row.train_acc, row.test_acc]
        for k in range(n_stages):
            csv_row.append(row.lss_per_stage[k] if row.ok else float("nan"))
            csv_row.append(row.ots_per_stage[k] if row.ok else float("nan"))
            csv_row.append(row.w2_per_stage[k] if row.ok else float("nan"))
        csv_row.extend([row.weight_energy, row.error])
        rows.append(csv_row)
    out = _out_dir(cfg, args)
    write_csv(out / "sweep.csv", header, rows)
    print(f"sweep: {out / 'sweep.csv'}")

    # Two-column (gamma, value) plot series per arch/metric/stage.
    for kind in cfg.archs:
        ok_rows = [by_arch_gamma[(kind, g)] for g in gammas if by_arch_gamma[(kind, g)].ok]
        series = {"train_acc": [], "test_acc": [], "weight_energy": []}
        for row in ok_rows:
            series["train_acc"].append((row.gamma, row.train_acc))
            series["test_acc"].append((row.gamma, row.test_acc))
            series["weight_energy"].append((row.gamma, row.weight_energy))
        for k in range(n_stages):
            series[f"lss_stage_{k}"] = [(r.gamma, r.lss_per_stage[k]) for r in ok_rows]
            series[f"ots_stage_{k}"] = [(r.gamma, r.ots_per_stage[k]) for r in ok_rows]
            series[f"w2_stage_{k}"] = [(r.gamma, r.w2_per_stage[k]) for r in ok_rows]
        for metric, points in series.items():
            write_csv(out / f"plot_{kind}_{metric}.csv", ["gamma", metric], points)
    if not any(r.ok for r in results):
        print("all sweep rows failed", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_robustness(args) -> int:
    cfg = load_run_config(args.config)
    net, _arch, _seed = load_checkpoint(args.checkpoint)
    data = cfg.build_dataset()
    if net.in_dim != data.dim:
        raise DimensionError(
            f"checkpoint expects input dim {net.in_dim}, dataset has {data.dim}"
        )
    levels = [float(v) for v in args.levels.split(",") if v.strip() != ""]
    seed = args.seed if args.seed is not None else cfg.train.seed
    report = robustness_curve(net, data, args.noise, levels, seed=seed, loss=cfg.train.loss)
    n_layers = len(report.variation_rates[0]) if report.levels else 0
    header = ["level", "accuracy"] + [f"vr_layer_{l}" for l in range(n_layers)]
    rows = [
        [level, acc, *rates]
        for level, acc, rates in zip(report.levels, report.accuracy, report.variation_rates)
    ]
    out = _out_dir(cfg, args)
    path = out / f"robustness_{args.noise}.csv"
    write_csv(path, header, rows)
    print(f"robustness: {path}")
    return EXIT_OK


def cmd_ablate_units(args) -> int:
    cfg = load_run_config(args.config)
    net, _arch, _seed = load_checkpoint(args.checkpoint)
    data = cfg.build_dataset()
    if net.in_dim != data.dim:
        raise DimensionError(
            f"checkpoint expects input dim {net.in_dim}, dataset has {data.dim}"
        )
    ks = [int(v) for v in args.units.split(",") if v.strip() != ""]
    rows = [
        [k, unit_elimination_eval(net, data, args.layer, k, stage=args.stage)] for k in ks
    ]
    out = _out_dir(cfg, args)
    path = out / "ablation.csv"
    write_csv(path, ["units_eliminated", "test_accuracy"], rows)
    print(f"ablation: {path}")
    return EXIT_OK


def cmd_tracks_export(args) -> int:
    cfg = load_run_config(args.config)
    net, _arch, _seed = load_checkpoint(args.checkpoint)
    data = cfg.build_dataset()
    if net.in_dim != data.dim:
        raise DimensionError(
            f"checkpoint expects input dim {net.in_dim}, dataset has {data.dim}"
        )
    limit = min(args.limit, data.test_inputs.shape[0])
    tracks = []
    for i in range(limit):
        _out, sample_tracks = forward_with_track(net, data.test_inputs[i])
        tracks.append(sample_tracks[args.stage])
    path = Path(args.out_file)
    path.parent.mkdir(parents=True, exist_ok=True)
    save_tracks(path, tracks, stage=args.stage, model_checksum=checkpoint_checksum(net))
    print(f"tracks: {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gtl",
        description="Train small ReLU networks and measure how closely their "
        "layerwise tracks follow straight transport paths.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, checkpoint=False):
        p.add_argument("--config", required=True, help="run configuration JSON")
        p.add_argument("--seed", type=int, default=None, help="override config seed")
        p.add_argument("--out", default=None, help="output directory")
        if checkpoint:
            p.add_argument("--checkpoint", required=True, help="checkpoint JSON path")

    p_train = sub.add_parser("train", help="train one model, write checkpoint and log")
    common(p_train)
    p_train.set_defaults(func=cmd_train)

    p_an = sub.add_parser("analyze", help="score a checkpoint on a dataset")
    common(p_an, checkpoint=True)
    p_an.add_argument("--lss", action="store_true", help="line-shape metrics")
    p_an.add_argument("--ots", action="store_true", help="optimal transport score")
    p_an.add_argument("--w2", action="store_true", help="transport distance per stage")
    p_an.add_argument(
        "--theorem1",
        action="store_true",
        help="fraction of track pairs respecting the separation lower bound",
    )
    p_an.add_argument("--ot-subsample", dest="ot_subsample", type=int, default=None)
    p_an.set_defaults(func=cmd_analyze)

    p_sw = sub.add_parser("sweep", help="train across the configured decay grid")
    common(p_sw)
    p_sw.add_argument("--ot-subsample", dest="ot_subsample", type=int, default=None)
    p_sw.set_defaults(func=cmd_sweep)

    p_rb = sub.add_parser("robustness", help="accuracy and variation rates under noise")
    common(p_rb, checkpoint=True)
    p_rb.add_argument("--noise", choices=["gaussian", "fgsm"], required=True)
    p_rb.add_argument("--levels", required=True, help="comma-separated noise levels")
    p_rb.set_defaults(func=cmd_robustness)

    p_ab = sub.add_parser("ablate-units", help="suppress per-class important units")
    common(p_ab, checkpoint=True)
    p_ab.add_argument("--layer", type=int, required=True, help="in-stage state index >= 1")
    p_ab.add_argument("--stage", type=int, default=0)
    p_ab.add_argument("--units", required=True, help="comma-separated unit counts")
    p_ab.set_defaults(func=cmd_ablate_units)

    p_tracks = sub.add_parser("tracks", help="track file operations")
    tracks_sub = p_tracks.add_subparsers(dest="tracks_command", required=True)
    p_te = tracks_sub.add_parser("export", help="write recorded tracks to a file")
    common(p_te, checkpoint=True)
    p_te.add_argument("--out-file", required=True, help="track file destination")
    p_te.add_argument("--stage", type=int, default=0)
    p_te.add_argument("--limit", type=int, default=100, help="number of samples")
    p_te.set_defaults(func=cmd_tracks_export)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FormatError, DimensionError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ValueError, IndexError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except DivergenceError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
