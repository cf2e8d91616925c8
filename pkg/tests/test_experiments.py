from pathlib import Path

import numpy as np
import pytest

from gtl.assignment import ots
from gtl.datasets import make_dataset
from gtl.experiments import (
    NoiseConfig,
    fgsm_perturb,
    fgsm_perturb_batch,
    gamma_sweep,
    gaussian_perturb,
    gaussian_perturb_batch,
    layer_sequence_length,
    robustness_curve,
    stage_transport_metrics,
    unit_elimination_eval,
    variation_rate,
)
from gtl.network import (
    ArchitectureSpec,
    Network,
    PlainNet,
    ResidualBlock,
    ResNet,
    TrainConfig,
    accuracy,
    build_network,
    forward_states,
    train,
)


def blob_data(seed=0, per_class=60):
    return make_dataset("blobs", {"n_classes": 2, "per_class": per_class, "noise": 0.4}, seed=seed)


def identity_resnet(d, blocks=3):
    zero = lambda: ResidualBlock(np.zeros((d, d)), np.zeros((d, d)))
    return Network(stages=(ResNet(tuple(zero() for _ in range(blocks))),), head=np.eye(d))


# ---------------------------------------------------------------------------
# perturbations
# ---------------------------------------------------------------------------

def test_gaussian_zero_sigma_unchanged():
    cfg = NoiseConfig(kind="gaussian", sigma=0.0, seed=1)
    x = np.array([1.0, -2.0])
    assert np.array_equal(gaussian_perturb(x, cfg), x)


def test_gaussian_deterministic_per_seed():
    cfg = NoiseConfig(kind="gaussian", sigma=0.5, seed=9)
    x = np.zeros(8)
    assert np.array_equal(gaussian_perturb(x, cfg), gaussian_perturb(x, cfg))


def test_gaussian_noise_scale():
    cfg = NoiseConfig(kind="gaussian", sigma=1.0, seed=2)
    noise = gaussian_perturb(np.zeros(10_000), cfg)
    assert abs(noise.std() - 1.0) <= 0.05


def test_gaussian_batch_rows_differ():
    cfg = NoiseConfig(kind="gaussian", sigma=1.0, seed=3)
    out = gaussian_perturb_batch(np.zeros((4, 6)), cfg)
    assert not np.array_equal(out[0], out[1])


def test_fgsm_zero_epsilon_unchanged():
    net = identity_resnet(2)
    x = np.array([0.3, 0.7])
    assert np.array_equal(fgsm_perturb(net, x, 0, 0.0), x)


def test_fgsm_hand_case():
    # scores w.x with w=(1,-2); squared-error target -1 makes dL/dx = 2(1,-2)
    net = Network(
        stages=(PlainNet((np.array([[1.0, -2.0]]),), final_linear=True),), head=np.eye(1)
    )
    x = np.zeros(2)
    out = fgsm_perturb(net, x, np.array([-1.0]), 0.1, loss="mean-squared-error")
    assert np.allclose(out, [0.1, -0.1], atol=1e-15)


def test_fgsm_linf_bound():
    data = blob_data()
    arch = ArchitectureSpec(kind="resnet", input_dim=2, stage_widths=(6,), blocks_per_stage=(2,), n_classes=2)
    net = build_network(arch, 3)
    for eps in (0.01, 0.1, 0.5):
        moved = fgsm_perturb_batch(net, data.test_inputs, data.test_labels, eps)
        assert np.max(np.abs(moved - data.test_inputs)) <= eps + 1e-15


def test_fgsm_batch_matches_single():
    data = blob_data()
    arch = ArchitectureSpec(kind="plain", input_dim=2, stage_widths=(6,), blocks_per_stage=(2,), n_classes=2)
    net = build_network(arch, 4)
    batch = fgsm_perturb_batch(net, data.test_inputs[:5], data.test_labels[:5], 0.2)
    for i in range(5):
        single = fgsm_perturb(net, data.test_inputs[i], int(data.test_labels[i]), 0.2)
        assert np.allclose(batch[i], single, atol=1e-12)


# ---------------------------------------------------------------------------
# variation rate
# ---------------------------------------------------------------------------

def test_variation_rate_zero_noise_is_zero():
    data = blob_data()
    net = identity_resnet(2)
    cfg = NoiseConfig(kind="gaussian", sigma=0.0, seed=0)
    for layer in range(layer_sequence_length(net, 2)):
        assert variation_rate(net, data, cfg, layer) == 0.0


def test_variation_rate_identity_network_uniform():
    # noise passes through unchanged, so every layer shows the same rate
    data = blob_data()
    net = identity_resnet(2)
    cfg = NoiseConfig(kind="gaussian", sigma=0.3, seed=5)
    rates = [
        variation_rate(net, data, cfg, layer)
        for layer in range(layer_sequence_length(net, 2))
    ]
    assert max(rates) - min(rates) <= 1e-12
    noise = gaussian_perturb_batch(data.test_inputs, cfg) - data.test_inputs
    expected = np.mean(
        np.linalg.norm(noise, axis=1) / np.linalg.norm(data.test_inputs, axis=1)
    )
    assert rates[0] == pytest.approx(expected, abs=1e-12)


def test_variation_rate_layer_zero_is_input_space_noise():
    data = blob_data(seed=2)
    arch = ArchitectureSpec(kind="plain", input_dim=2, stage_widths=(5,), blocks_per_stage=(2,), n_classes=2)
    net = build_network(arch, 8)
    cfg = NoiseConfig(kind="gaussian", sigma=0.25, seed=11)
    noise = gaussian_perturb_batch(data.test_inputs, cfg) - data.test_inputs
    expected = np.mean(
        np.linalg.norm(noise, axis=1) / np.linalg.norm(data.test_inputs, axis=1)
    )
    assert variation_rate(net, data, cfg, 0) == pytest.approx(expected, abs=1e-12)


def test_variation_rate_rejects_bad_layer():
    net = identity_resnet(2)
    with pytest.raises(IndexError):
        variation_rate(net, blob_data(), NoiseConfig(kind="gaussian", sigma=0.1), 99)


# ---------------------------------------------------------------------------
# unit elimination
# ---------------------------------------------------------------------------

def test_unit_elimination_k0_is_plain_eval():
    data = blob_data(seed=3)
    arch = ArchitectureSpec(kind="resnet", input_dim=2, stage_widths=(8,), blocks_per_stage=(3,), n_classes=2)
    net, _ = train(build_network(arch, 2), data, TrainConfig(epochs=20, batch_size=16, seed=2, ot_subsample=16))
    assert unit_elimination_eval(net, data, layer=2, k=0) == accuracy(
        net, data.test_inputs, data.test_labels
    )


def test_unit_elimination_identity_network_unaffected():
    data = blob_data(seed=4)
    net = identity_resnet(2, blocks=4)
    clean = accuracy(net, data.test_inputs, data.test_labels)
    for k in (1, 2):
        assert unit_elimination_eval(net, data, layer=2, k=k) == clean


def test_unit_elimination_rejects_oversized_k():
    net = identity_resnet(2)
    with pytest.raises(ValueError):
        unit_elimination_eval(net, blob_data(), layer=1, k=3)


def test_unit_elimination_resnet_degrades_less_than_plain():
    # parameter-matched pair trained on the same blobs; suppressing a
    # quarter of the width hurts the residual net less
    data = blob_data(seed=5, per_class=100)
    cfg = TrainConfig(epochs=60, batch_size=20, lr=0.05, seed=6, ot_subsample=40)
    drops = {}
    for kind in ("resnet", "plain"):
        arch = ArchitectureSpec(kind=kind, input_dim=2, stage_widths=(16,), blocks_per_stage=(3,), n_classes=2)
        net, _ = train(build_network(arch, cfg.seed), data, cfg)
        clean = accuracy(net, data.test_inputs, data.test_labels)
        ablated = unit_elimination_eval(net, data, layer=2, k=4)
        drops[kind] = clean - ablated
    assert drops["resnet"] <= drops["plain"] + 1e-9


MNIST01 = Path(__file__).resolve().parents[1] / "data" / "mnist01"


@pytest.mark.skipif(not MNIST01.exists(), reason="bundled MNIST subset missing")
def test_unit_elimination_mnist_third_layer():
    # suppressing a quarter of the width at the third in-stage state barely
    # moves the residual net but costs the plain net double-digit accuracy
    data = make_dataset(
        "mnist-subset",
        {
            "train_images": MNIST01 / "train-images-idx3-ubyte.gz",
            "train_labels": MNIST01 / "train-labels-idx1-ubyte.gz",
            "test_images": MNIST01 / "t10k-images-idx3-ubyte.gz",
            "test_labels": MNIST01 / "t10k-labels-idx1-ubyte.gz",
            "classes": [0, 1],
            "cap_per_class": 500,
        },
    )
    drops = {}
    for kind, loss, lr in (
        ("resnet", "softmax-cross-entropy", 0.05),
        ("plain", "mean-squared-error", 0.02),
    ):
        arch = ArchitectureSpec(
            kind=kind, input_dim=784, stage_widths=(64,), blocks_per_stage=(5,), n_classes=2
        )
        cfg = TrainConfig(
            gamma=1e-3, lr=lr, epochs=30, batch_size=64, seed=3, ot_subsample=256, loss=loss
        )
        net, _ = train(build_network(arch, cfg.seed), data, cfg)
        clean = accuracy(net, data.test_inputs, data.test_labels)
        drops[kind] = clean - unit_elimination_eval(net, data, layer=3, k=16)
    assert drops["resnet"] <= drops["plain"] + 1e-9
    assert drops["plain"] > 0.05  # the plain net visibly depends on those units


# ---------------------------------------------------------------------------
# transport metrics and sweeps
# ---------------------------------------------------------------------------

def test_identity_network_metrics():
    data = blob_data(seed=6)
    net = identity_resnet(2, blocks=2)
    metrics = stage_transport_metrics(net, data.test_inputs[:24])[0]
    assert metrics.ots == 1.0
    assert metrics.w2 == 0.0
    assert metrics.degenerate_tracks == 24


def test_stage_metrics_match_direct_ots_call():
    data = blob_data(seed=7)
    arch = ArchitectureSpec(kind="resnet", input_dim=2, stage_widths=(6,), blocks_per_stage=(2,), n_classes=2)
    net = build_network(arch, 1)
    subset = data.test_inputs[:16]
    metrics = stage_transport_metrics(net, subset)[0]
    states = forward_states(net, subset.T).stage_states[0]
    assert metrics.ots == ots(states[0].T, states[-1].T)


def test_gamma_sweep_zero_epochs_reports_untrained_model():
    data = blob_data(seed=8)
    arch = ArchitectureSpec(kind="resnet", input_dim=2, stage_widths=(6,), blocks_per_stage=(2,), n_classes=2)
    cfg = TrainConfig(epochs=0, batch_size=16, seed=3, ot_subsample=16)
    report = gamma_sweep(arch, data, [0.5], cfg)
    row = report.rows[0]
    assert row.ok
    assert np.isfinite(row.lss_per_stage[0])
    assert np.isfinite(row.ots_per_stage[0])
    untrained = build_network(arch, 3)
    assert row.test_acc == accuracy(untrained, data.test_inputs, data.test_labels)


def test_gamma_sweep_trend_on_blobs():
    # decay should straighten the residual tracks, one inversion tolerated
    data = blob_data(seed=9, per_class=100)
    arch = ArchitectureSpec(kind="resnet", input_dim=2, stage_widths=(8,), blocks_per_stage=(5,), n_classes=2)
    cfg = TrainConfig(epochs=60, batch_size=20, lr=0.01, seed=4, ot_subsample=40)
    report = gamma_sweep(arch, data, [0.0, 1e-3, 1e-2], cfg)
    lss = [row.lss_per_stage[0] for row in report.rows]
    inversions = sum(1 for a, b in zip(lss, lss[1:]) if b > a)
    assert inversions <= 1
    energies = {row.gamma: row.weight_energy for row in report.rows}
    assert energies[0.0] > energies[1e-2]


def test_gamma_sweep_rows_sorted_and_distinct():
    data = blob_data(seed=10)
    arch = ArchitectureSpec(kind="plain", input_dim=2, stage_widths=(4,), blocks_per_stage=(1,), n_classes=2)
    cfg = TrainConfig(epochs=1, batch_size=16, seed=0, ot_subsample=8)
    report = gamma_sweep(arch, data, [1e-2, 0.0], cfg)
    assert [row.gamma for row in report.rows] == [0.0, 1e-2]
    with pytest.raises(ValueError):
        gamma_sweep(arch, data, [0.1, 0.1], cfg)


def test_gamma_sweep_flags_divergent_rows():
    data = blob_data(seed=11)
    arch = ArchitectureSpec(kind="plain", input_dim=2, stage_widths=(8,), blocks_per_stage=(3,), n_classes=2)
    cfg = TrainConfig(epochs=30, batch_size=16, lr=1e6, seed=1, loss="mean-squared-error", ot_subsample=8)
    with np.errstate(all="ignore"):
        report = gamma_sweep(arch, data, [0.0], cfg)
    assert not report.rows[0].ok
    assert "non-finite" in report.rows[0].error


# ---------------------------------------------------------------------------
# robustness curves
# ---------------------------------------------------------------------------

def test_robustness_zero_level_matches_clean():
    data = blob_data(seed=12)
    arch = ArchitectureSpec(kind="resnet", input_dim=2, stage_widths=(6,), blocks_per_stage=(2,), n_classes=2)
    net, _ = train(build_network(arch, 7), data, TrainConfig(epochs=20, batch_size=16, seed=7, ot_subsample=16))
    report = robustness_curve(net, data, "gaussian", [0.0, 0.5], seed=1)
    assert report.accuracy[0] == accuracy(net, data.test_inputs, data.test_labels)
    assert report.variation_rates[0] == tuple([0.0] * layer_sequence_length(net, 2))


def test_robustness_input_rate_increases_with_sigma():
    data = blob_data(seed=13)
    net = identity_resnet(2)
    report = robustness_curve(net, data, "gaussian", [0.1, 0.3, 0.6], seed=2)
    input_rates = [rates[0] for rates in report.variation_rates]
    assert input_rates[0] < input_rates[1] < input_rates[2]
