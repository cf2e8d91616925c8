import json

import pytest

from gtl.config import ConfigError, load_run_config, parse_run_config

VALID = {
    "schema_version": 1,
    "dataset": {"kind": "blobs", "params": {"per_class": 10}, "seed": 4},
    "architecture": {"kind": "plain", "stage_widths": [4], "blocks_per_stage": [1]},
    "train": {"epochs": 1, "batch_size": 4, "seed": 2},
}


def test_parse_valid_config():
    cfg = parse_run_config(VALID)
    assert cfg.dataset_kind == "blobs"
    assert cfg.arch_kind == "plain"
    assert cfg.train.epochs == 1
    assert cfg.gammas == (cfg.train.gamma,)
    assert cfg.archs == ("plain",)


def test_architecture_resolution_derives_dims():
    cfg = parse_run_config(VALID)
    data = cfg.build_dataset()
    arch = cfg.architecture(data)
    assert arch.input_dim == 2
    assert arch.n_classes == 2
    resnet = cfg.architecture(data, kind="resnet")
    assert resnet.kind == "resnet"


def test_rejects_unknown_top_level_key():
    doc = dict(VALID, extra=1)
    with pytest.raises(ConfigError):
        parse_run_config(doc)


def test_rejects_bad_gamma_grid():
    doc = dict(VALID, gammas=[-0.1])
    with pytest.raises(ConfigError, match=r"\$\.gammas"):
        parse_run_config(doc)


def test_rejects_wrong_schema_version():
    doc = dict(VALID, schema_version=2)
    with pytest.raises(ConfigError, match="schema_version"):
        parse_run_config(doc)


def test_error_message_carries_field_path():
    doc = dict(VALID, train={"lr": -1.0})
    with pytest.raises(ConfigError, match=r"\$\.train\.lr"):
        parse_run_config(doc)


def test_load_from_file(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps(VALID))
    assert load_run_config(path).dataset_seed == 4


def test_load_invalid_json(tmp_path):
    path = tmp_path / "c.json"
    path.write_text("{")
    with pytest.raises(ConfigError, match="invalid JSON"):
        load_run_config(path)
