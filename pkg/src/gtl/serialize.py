"""Persistence: checkpoints, track files, CSV reports.

All floating-point values are written as decimal literals with 17
significant digits, which round-trip binary64 exactly, so reloading a
checkpoint reproduces the model bit for bit. Every writer goes through a
temp-file-then-rename so partially written output is never observed.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .errors import FormatError
from .geometry import Track
from .network import ArchitectureSpec, Network, PlainNet, ResNet, ResidualBlock

__all__ = [
    "SCHEMA_VERSION",
    "format_float",
    "dumps_json",
    "atomic_write",
    "write_csv",
    "checkpoint_document",
    "checkpoint_checksum",
    "save_checkpoint",
    "load_checkpoint",
    "save_tracks",
    "load_tracks",
]

SCHEMA_VERSION = 1


def format_float(x: float) -> str:
    """Decimal literal with 17 significant digits (lossless for binary64)."""
    return format(float(x), ".17g")


def _emit(value, parts: list[str]) -> None:
    if isinstance(value, bool):
        parts.append("true" if value else "false")
    elif value is None:
        parts.append("null")
    elif isinstance(value, (int, np.integer)):
        parts.append(str(int(value)))
    elif isinstance(value, (float, np.floating)):
        if not np.isfinite(value):
            raise FormatError(f"cannot serialize non-finite value {value!r}")
        parts.append(format_float(value))
    elif isinstance(value, str):
        parts.append(json.dumps(value))
    elif isinstance(value, np.ndarray):
        _emit(value.tolist(), parts)
    elif isinstance(value, (list, tuple)):
        parts.append("[")
        for i, item in enumerate(value):
            if i:
                parts.append(",")
            _emit(item, parts)
        parts.append("]")
    elif isinstance(value, dict):
        parts.append("{")
        for i, (key, item) in enumerate(value.items()):
            if i:
                parts.append(",")
            parts.append(json.dumps(str(key)))
            parts.append(":")
            _emit(item, parts)
        parts.append("}")
    else:
        raise FormatError(f"cannot serialize value of type {type(value).__name__}")


def dumps_json(doc) -> str:
    """Deterministic JSON text: insertion-ordered keys, 17-digit floats."""
    parts: list[str] = []
    _emit(doc, parts)
    return "".join(parts)


def atomic_write(path, data: str | bytes) -> None:
    """Write via a temp file and rename, so readers never see partial output."""
    path = Path(path)
    payload = data.encode("utf-8") if isinstance(data, str) else data
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _format_cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format_float(value) if np.isfinite(value) else str(float(value))
    return str(value)


def write_csv(path, header: list[str], rows) -> None:
    """Versioned CSV: every row carries a trailing schema_version column."""
    lines = [",".join(header + ["schema_version"])]
    for row in rows:
        lines.append(",".join([_format_cell(v) for v in row] + [str(SCHEMA_VERSION)]))
    atomic_write(path, "\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------

def _arch_document(arch: ArchitectureSpec) -> dict:
    return {
        "kind": arch.kind,
        "input_dim": arch.input_dim,
        "stage_widths": list(arch.stage_widths),
        "blocks_per_stage": list(arch.blocks_per_stage),
        "n_classes": arch.n_classes,
        "lift_input": arch.lift_input,
    }


def _weights_document(net: Network) -> dict:
    stages = []
    for stage in net.stages:
        if isinstance(stage, ResNet):
            mats = [m for blk in stage.blocks for m in (blk.w1, blk.w2)]
        else:
            mats = list(stage.layers)
        stages.append([m.tolist() for m in mats])
    return {
        "input_map": None if net.input_map is None else net.input_map.tolist(),
        "stages": stages,
        "changers": [c.tolist() for c in net.changers],
        "head": net.head.tolist(),
    }


def checkpoint_document(net: Network, arch: ArchitectureSpec, seed: int) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "gtl-checkpoint",
        "architecture": _arch_document(arch),
        "seed": int(seed),
        "weights": _weights_document(net),
    }


def checkpoint_checksum(net: Network) -> str:
    """sha256 over the canonical weight serialization."""
    digest = hashlib.sha256(dumps_json(_weights_document(net)).encode("utf-8"))
    return digest.hexdigest()


def save_checkpoint(path, net: Network, arch: ArchitectureSpec, seed: int) -> None:
    atomic_write(path, dumps_json(checkpoint_document(net, arch, seed)) + "\n")


def load_checkpoint(path) -> tuple[Network, ArchitectureSpec, int]:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not valid JSON at offset {exc.pos}") from exc
    if not isinstance(doc, dict) or doc.get("kind") != "gtl-checkpoint":
        raise FormatError(f"{path}: not a checkpoint document")
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise FormatError(
            f"{path}: unsupported schema_version {doc.get('schema_version')!r}"
        )
    a = doc["architecture"]
    arch = ArchitectureSpec(
        kind=a["kind"],
        input_dim=int(a["input_dim"]),
        stage_widths=tuple(a["stage_widths"]),
        blocks_per_stage=tuple(a["blocks_per_stage"]),
        n_classes=int(a["n_classes"]),
        lift_input=bool(a["lift_input"]),
    )
    w = doc["weights"]
    stages = []
    for mats in w["stages"]:
        arrays = [np.asarray(m, dtype=np.float64) for m in mats]
        if arch.kind == "resnet":
            blocks = [
                ResidualBlock(arrays[i], arrays[i + 1]) for i in range(0, len(arrays), 2)
            ]
            stages.append(ResNet(tuple(blocks)))
        else:
            stages.append(PlainNet(tuple(arrays), final_linear=False))
    net = Network(
        stages=tuple(stages),
        head=np.asarray(w["head"], dtype=np.float64),
        changers=tuple(np.asarray(c, dtype=np.float64) for c in w["changers"]),
        input_map=None
        if w["input_map"] is None
        else np.asarray(w["input_map"], dtype=np.float64),
    )
    return net, arch, int(doc["seed"])


# ---------------------------------------------------------------------------
# track files
# ---------------------------------------------------------------------------

def save_tracks(path, tracks: list[Track], stage: int, model_checksum: str) -> None:
    """Portable track file: one JSON header line, then one line per state.

    The header pins the expected body byte count and a body sha256 so
    truncation and corruption are both detected with exact expectations.
    """
    if tracks:
        shape = tracks[0].states.shape
        for t in tracks:
            if t.states.shape != shape:
                raise FormatError("all tracks in one file must share (n_states, dim)")
        n_states, dim = shape
    else:
        n_states, dim = 0, 0
    body_lines = []
    for t in tracks:
        for state in t.states:
            body_lines.append(" ".join(format_float(v) for v in state))
    body = ("\n".join(body_lines) + "\n") if body_lines else ""
    body_bytes = body.encode("utf-8")
    header = {
        "schema_version": SCHEMA_VERSION,
        "kind": "gtl-tracks",
        "n_tracks": len(tracks),
        "n_states": n_states,
        "dim": dim,
        "stage": int(stage),
        "model_checksum": model_checksum,
        "body_bytes": len(body_bytes),
        "body_sha256": hashlib.sha256(body_bytes).hexdigest(),
    }
    atomic_write(path, dumps_json(header) + "\n" + body)


def load_tracks(path, expected_checksum: str | None = None) -> tuple[list[Track], dict]:
    raw = Path(path).read_bytes()
    newline = raw.find(b"\n")
    if newline < 0:
        raise FormatError(f"{path}: missing header line")
    try:
        header = json.loads(raw[:newline].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: unreadable header: {exc}") from exc
    if not isinstance(header, dict) or header.get("kind") != "gtl-tracks":
        raise FormatError(f"{path}: not a track file")
    body = raw[newline + 1 :]
    if len(body) != header["body_bytes"]:
        raise FormatError(
            f"{path}: body has {len(body)} bytes, header expects {header['body_bytes']}"
        )
    digest = hashlib.sha256(body).hexdigest()
    if digest != header["body_sha256"]:
        raise FormatError(f"{path}: body sha256 {digest} != header {header['body_sha256']}")
    if expected_checksum is not None and header["model_checksum"] != expected_checksum:
        raise FormatError(
            f"{path}: model checksum {header['model_checksum']} does not match "
            f"expected {expected_checksum}"
        )
    n_tracks, n_states, dim = header["n_tracks"], header["n_states"], header["dim"]
    if n_tracks == 0:
        return [], header
    lines = body.decode("utf-8").splitlines()
    if len(lines) != n_tracks * n_states:
        raise FormatError(
            f"{path}: body has {len(lines)} state lines, header expects {n_tracks * n_states}"
        )
    values = np.array([[float(tok) for tok in line.split()] for line in lines])
    if values.shape[1] != dim:
        raise FormatError(f"{path}: states have dim {values.shape[1]}, header says {dim}")
    states = values.reshape(n_tracks, n_states, dim)
    return [Track(states[i]) for i in range(n_tracks)], header
