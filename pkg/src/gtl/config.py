"""Run configuration: a JSON document validated against a published schema
before any work starts.

A config names the dataset, the architecture family, the training
hyperparameters, and (for sweeps) the decay grid and architecture list.
Dataset-dependent fields (input_dim, n_classes) may be omitted and are
resolved from the dataset.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import jsonschema

from .datasets import Dataset, make_dataset
from .network import ArchitectureSpec, TrainConfig

__all__ = ["ConfigError", "RunConfig", "RUN_CONFIG_SCHEMA", "load_run_config"]


class ConfigError(ValueError):
    """Configuration failed schema validation; message carries the field path."""


RUN_CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "gtl run configuration",
    "type": "object",
    "required": ["schema_version", "dataset", "architecture", "train"],
    "additionalProperties": False,
    "properties": {
        "schema_version": {"const": 1},
        "dataset": {
            "type": "object",
            "required": ["kind"],
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["blobs", "spirals", "mnist-subset"]},
                "params": {"type": "object"},
                "seed": {"type": "integer", "minimum": 0},
            },
        },
        "architecture": {
            "type": "object",
            "required": ["kind", "stage_widths", "blocks_per_stage"],
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["plain", "resnet"]},
                "input_dim": {"type": ["integer", "null"], "minimum": 1},
                "stage_widths": {
                    "type": "array",
                    "items": {"type": "integer", "minimum": 1},
                    "minItems": 1,
                },
                "blocks_per_stage": {
                    "type": "array",
                    "items": {"type": "integer", "minimum": 1},
                    "minItems": 1,
                },
                "n_classes": {"type": ["integer", "null"], "minimum": 2},
                "lift_input": {"type": "boolean"},
            },
        },
        "train": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "gamma": {"type": "number", "minimum": 0},
                "lr": {"type": "number", "exclusiveMinimum": 0},
                "epochs": {"type": "integer", "minimum": 0},
                "batch_size": {"type": "integer", "minimum": 1},
                "loss": {"enum": ["softmax-cross-entropy", "mean-squared-error"]},
                "seed": {"type": "integer", "minimum": 0},
                "ot_subsample": {"type": "integer", "minimum": 1},
            },
        },
        "gammas": {
            "type": "array",
            "items": {"type": "number", "minimum": 0},
            "minItems": 1,
        },
        "archs": {
            "type": "array",
            "items": {"enum": ["plain", "resnet"]},
            "minItems": 1,
        },
        "out_dir": {"type": "string"},
        "report_formats": {
            "type": "array",
            "items": {"enum": ["csv", "json"]},
        },
    },
}


@dataclass(frozen=True)
class RunConfig:
    dataset_kind: str
    dataset_params: dict
    dataset_seed: int
    arch_kind: str
    stage_widths: tuple[int, ...]
    blocks_per_stage: tuple[int, ...]
    input_dim: int | None
    n_classes: int | None
    lift_input: bool
    train: TrainConfig
    gammas: tuple[float, ...]
    archs: tuple[str, ...]
    out_dir: str
    report_formats: tuple[str, ...] = ("csv", "json")

    def build_dataset(self) -> Dataset:
        return make_dataset(self.dataset_kind, self.dataset_params, self.dataset_seed)

    def architecture(self, data: Dataset, kind: str | None = None) -> ArchitectureSpec:
        """Resolve the architecture against the dataset's dimensions."""
        return ArchitectureSpec(
            kind=kind or self.arch_kind,
            input_dim=self.input_dim if self.input_dim is not None else data.dim,
            stage_widths=self.stage_widths,
            blocks_per_stage=self.blocks_per_stage,
            n_classes=self.n_classes if self.n_classes is not None else data.n_classes,
            lift_input=self.lift_input,
        )


def _validate(doc: dict, source: str) -> None:
    validator = jsonschema.Draft202012Validator(RUN_CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        first = errors[0]
        where = "$" + "".join(
            f"[{p}]" if isinstance(p, int) else f".{p}" for p in first.absolute_path
        )
        raise ConfigError(f"{source}: {where}: {first.message}")


def parse_run_config(doc: dict, source: str = "<config>") -> RunConfig:
    _validate(doc, source)
    dataset = doc["dataset"]
    arch = doc["architecture"]
    train_doc = doc.get("train", {})
    train = TrainConfig(**train_doc)
    return RunConfig(
        dataset_kind=dataset["kind"],
        dataset_params=dict(dataset.get("params", {})),
        dataset_seed=int(dataset.get("seed", 0)),
        arch_kind=arch["kind"],
        stage_widths=tuple(arch["stage_widths"]),
        blocks_per_stage=tuple(arch["blocks_per_stage"]),
        input_dim=arch.get("input_dim"),
        n_classes=arch.get("n_classes"),
        lift_input=bool(arch.get("lift_input", True)),
        train=train,
        gammas=tuple(float(g) for g in doc.get("gammas", [train.gamma])),
        archs=tuple(doc.get("archs", [arch["kind"]])),
        out_dir=doc.get("out_dir", "out"),
        report_formats=tuple(doc.get("report_formats", ["csv", "json"])),
    )


def load_run_config(path) -> RunConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"{path}: no such config file") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at offset {exc.pos}: {exc.msg}") from exc
    return parse_run_config(doc, source=str(path))
