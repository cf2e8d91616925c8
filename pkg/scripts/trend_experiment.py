#!/usr/bin/env python3
"""Reproduce the decay-trend and robustness comparison on the bundled
two-class MNIST subset.

Trains parameter-matched residual and plain networks (width 64, five
blocks) across a weight-decay grid, then scores straightness (LSS/LSR),
the optimal transport score, the transport distance per stage, and the
noise/attack robustness of each family's best model. Each family runs at
its stable operating point: cross-entropy at lr 0.05 for the residual
nets, squared error at lr 0.02 for the plain stacks.

Everything is seeded; rerunning overwrites the same bytes.

Usage: python scripts/trend_experiment.py [--out results] [--epochs 100]
"""

import argparse
import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from gtl.cli import main as gtl_main
from gtl.serialize import write_csv

REPO = Path(__file__).resolve().parents[1]
MNIST01 = REPO / "data" / "mnist01"

GAMMAS = [0.0, 1e-4, 1e-3, 1e-2]
FAMILIES = {
    "resnet": {"loss": "softmax-cross-entropy", "lr": 0.05},
    "plain": {"loss": "mean-squared-error", "lr": 0.02},
}


def config_doc(kind: str, gamma: float, out_dir: Path, epochs: int) -> dict:
    family = FAMILIES[kind]
    return {
        "schema_version": 1,
        "dataset": {
            "kind": "mnist-subset",
            "params": {
                "train_images": str(MNIST01 / "train-images-idx3-ubyte.gz"),
                "train_labels": str(MNIST01 / "train-labels-idx1-ubyte.gz"),
                "test_images": str(MNIST01 / "t10k-images-idx3-ubyte.gz"),
                "test_labels": str(MNIST01 / "t10k-labels-idx1-ubyte.gz"),
                "classes": [0, 1],
                "cap_per_class": 500,
            },
        },
        "architecture": {"kind": kind, "stage_widths": [64], "blocks_per_stage": [5]},
        "train": {
            "gamma": gamma,
            "lr": family["lr"],
            "loss": family["loss"],
            "epochs": epochs,
            "batch_size": 64,
            "seed": 3,
            "ot_subsample": 512,
        },
        "out_dir": str(out_dir),
    }


def run(argv) -> None:
    code = gtl_main(argv)
    if code != 0:
        raise SystemExit(code)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="results")
    parser.add_argument("--epochs", type=int, default=100)
    args = parser.parse_args()
    if not MNIST01.exists():
        print("bundled MNIST subset missing; run scripts/fetch_mnist.py then "
              "scripts/make_mnist_pair_subset.py", file=sys.stderr)
        return 1
    out_root = Path(args.out)
    out_root.mkdir(parents=True, exist_ok=True)

    summary = []
    best = {}
    for kind in FAMILIES:
        best_acc = -1.0
        for gamma in GAMMAS:
            run_dir = out_root / f"{kind}_gamma{gamma:g}"
            cfg_path = run_dir / "config.json"
            run_dir.mkdir(parents=True, exist_ok=True)
            cfg_path.write_text(json.dumps(config_doc(kind, gamma, run_dir, args.epochs)))
            print(f"== train {kind} gamma={gamma:g}")
            run(["train", "--config", str(cfg_path)])
            run([
                "analyze", "--config", str(cfg_path),
                "--checkpoint", str(run_dir / "checkpoint.json"),
                "--lss", "--ots", "--w2", "--theorem1",
            ])
            doc = json.loads((run_dir / "metrics.json").read_text())
            stage = doc["stages"][0]
            acc = doc["test_accuracy"]
            summary.append([
                kind, gamma, acc, stage["mean_lss"], stage["mean_lsr"],
                stage["ots"], stage["w2"], stage["separation_fraction"],
            ])
            if acc > best_acc:
                best_acc = acc
                best[kind] = (run_dir, cfg_path)
        print(f"== best {kind} test accuracy {best_acc:.4f}")

    write_csv(
        out_root / "trend_summary.csv",
        ["arch", "gamma", "test_acc", "mean_lss", "mean_lsr", "ots", "w2",
         "separation_fraction"],
        summary,
    )
    print(f"summary: {out_root / 'trend_summary.csv'}")

    gaussian = ",".join(str(round(0.1 * i, 1)) for i in range(1, 11))
    fgsm = ",".join(str(round(0.02 * i, 2)) for i in range(1, 11))
    for kind, (run_dir, cfg_path) in best.items():
        for noise, levels in (("gaussian", gaussian), ("fgsm", fgsm)):
            print(f"== robustness {kind} {noise}")
            run([
                "robustness", "--config", str(cfg_path),
                "--checkpoint", str(run_dir / "checkpoint.json"),
                "--noise", noise, "--levels", levels,
                "--out", str(out_root / f"robustness_{kind}"),
            ])
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
