"""Noise perturbations, robustness diagnostics, unit-elimination ablation,
and weight-decay sweeps.

Everything here is a deterministic function of (config, seed). Sweeps train
one model per decay value from the same initialization seed and score each
final model on a fixed evaluation subset: the first `ot_subsample` test
samples in index order. Transport metrics per stage compare the stage's
input cloud with its output cloud under the index pairing the forward pass
induces.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .assignment import ots, wasserstein2
from .datasets import Dataset
from .errors import DegenerateTrackError, DimensionError, DivergenceError
from .geometry import Track, lsr, lss
from .network import (
    ArchitectureSpec,
    Network,
    ResNet,
    TrainConfig,
    accuracy,
    backward,
    build_network,
    forward_states,
    targets_for_loss,
    train,
    weight_decay_energy,
)
from .numerics import TINY, spawn_rng

__all__ = [
    "NoiseConfig",
    "gaussian_perturb",
    "gaussian_perturb_batch",
    "fgsm_perturb",
    "fgsm_perturb_batch",
    "layer_sequence_length",
    "variation_rate",
    "unit_elimination_eval",
    "StageMetrics",
    "stage_transport_metrics",
    "SweepRow",
    "SweepReport",
    "gamma_sweep",
    "RobustnessReport",
    "robustness_curve",
]


@dataclass(frozen=True)
class NoiseConfig:
    kind: str  # "gaussian" | "fgsm"
    sigma: float = 0.0
    epsilon: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("gaussian", "fgsm"):
            raise ValueError(f"noise kind must be gaussian or fgsm, got {self.kind!r}")
        if self.sigma < 0 or self.epsilon < 0:
            raise ValueError("noise levels must be nonnegative")


# ---------------------------------------------------------------------------
# perturbations
# ---------------------------------------------------------------------------

def gaussian_perturb(x: np.ndarray, cfg: NoiseConfig) -> np.ndarray:
    """x plus isotropic Gaussian noise; identical output for identical seed."""
    if cfg.kind != "gaussian":
        raise ValueError("gaussian_perturb needs a gaussian NoiseConfig")
    x = np.asarray(x, dtype=np.float64)
    if cfg.sigma == 0.0:
        return x.copy()
    rng = spawn_rng(cfg.seed, 20)
    return x + cfg.sigma * rng.normal(size=x.shape)


def gaussian_perturb_batch(inputs: np.ndarray, cfg: NoiseConfig) -> np.ndarray:
    """Perturb (m, dim) rows with one seeded stream (distinct noise per row)."""
    if cfg.kind != "gaussian":
        raise ValueError("gaussian_perturb_batch needs a gaussian NoiseConfig")
    inputs = np.asarray(inputs, dtype=np.float64)
    if cfg.sigma == 0.0:
        return inputs.copy()
    rng = spawn_rng(cfg.seed, 21)
    return inputs + cfg.sigma * rng.normal(size=inputs.shape)


def fgsm_perturb(
    net: Network,
    x: np.ndarray,
    y,
    epsilon: float,
    loss: str = "softmax-cross-entropy",
) -> np.ndarray:
    """One-step sign attack x + epsilon * sign(dL/dx); sign(0) is 0.

    y is a class label; under the squared-error loss it may instead be an
    explicit target vector of the network's output dimension.
    """
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise DimensionError("fgsm_perturb takes a single input vector")
    if epsilon == 0.0:
        return x.copy()
    if loss == "mean-squared-error" and np.ndim(y) > 0:
        targets = np.asarray(y, dtype=np.float64).reshape(net.out_dim, 1)
    else:
        targets = targets_for_loss(np.asarray([y]), net.out_dim, loss)
    grads = backward(net, x[:, None], targets, loss).input_grads[:, 0]
    return x + epsilon * np.sign(grads)


def fgsm_perturb_batch(
    net: Network,
    inputs: np.ndarray,
    labels: np.ndarray,
    epsilon: float,
    loss: str = "softmax-cross-entropy",
) -> np.ndarray:
    """Batch sign attack on (m, dim) rows; the mean-loss scaling cancels in
    the sign so this matches the single-sample op exactly."""
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    inputs = np.asarray(inputs, dtype=np.float64)
    if epsilon == 0.0:
        return inputs.copy()
    targets = targets_for_loss(np.asarray(labels), net.out_dim, loss)
    grads = backward(net, inputs.T, targets, loss).input_grads
    return inputs + epsilon * np.sign(grads.T)


def _perturbed_inputs(net, data: Dataset, cfg: NoiseConfig, loss: str) -> np.ndarray:
    if cfg.kind == "gaussian":
        return gaussian_perturb_batch(data.test_inputs, cfg)
    return fgsm_perturb_batch(net, data.test_inputs, data.test_labels, cfg.epsilon, loss)


# ---------------------------------------------------------------------------
# variation rate
# ---------------------------------------------------------------------------

def layer_sequence_length(net: Network, dim: int) -> int:
    """Number of entries in the forward layer sequence for this network.

    Index 0 is the raw input; the last index is the head output.
    """
    probe = forward_states(net, np.zeros((dim, 1)))
    return len(probe.layer_sequence)


def variation_rate(
    net: Network,
    data: Dataset,
    cfg: NoiseConfig,
    layer: int,
    loss: str = "softmax-cross-entropy",
) -> float:
    """Mean relative deviation between clean and perturbed representations
    at one layer of the forward sequence, over the test split.

    Layer 0 is the raw input, so the rate there is exactly the input-space
    relative noise. Samples whose clean representation has norm <= 1e-12
    are skipped; if every sample is skipped this raises.
    """
    clean = forward_states(net, data.test_inputs.T)
    if not 0 <= layer < len(clean.layer_sequence):
        raise IndexError(
            f"layer {layer} out of range [0, {len(clean.layer_sequence)})"
        )
    noisy_inputs = _perturbed_inputs(net, data, cfg, loss)
    noisy = forward_states(net, noisy_inputs.T)
    ref = clean.layer_sequence[layer]
    dev = np.linalg.norm(ref - noisy.layer_sequence[layer], axis=0)
    norms = np.linalg.norm(ref, axis=0)
    keep = norms > TINY
    if not np.any(keep):
        raise DegenerateTrackError(f"all samples have zero norm at layer {layer}")
    return float(np.mean(dev[keep] / norms[keep]))


# ---------------------------------------------------------------------------
# unit elimination
# ---------------------------------------------------------------------------

def _stage_forward_from(stage, state: np.ndarray, start: int) -> np.ndarray:
    """Run a stage's remaining blocks/layers from state index `start`."""
    x = state
    if isinstance(stage, ResNet):
        for blk in stage.blocks[start:]:
            x = x + blk.residual_field(x)
    else:
        last = len(stage.layers) - 1
        for li in range(start, len(stage.layers)):
            z = stage.layers[li] @ x
            x = z if (li == last and stage.final_linear) else np.maximum(z, 0.0)
    return x


def _finish_forward(net: Network, stage_idx: int, state: np.ndarray, layer: int) -> np.ndarray:
    """Class scores after resuming stage `stage_idx` at in-stage state `layer`."""
    cur = _stage_forward_from(net.stages[stage_idx], state, layer)
    for k in range(stage_idx, len(net.stages)):
        if k > stage_idx:
            cur = _stage_forward_from(net.stages[k], cur, 0)
        if k < len(net.changers):
            cur = net.changers[k] @ cur
    return net.head @ cur


def unit_elimination_eval(
    net: Network,
    data: Dataset,
    layer: int,
    k: int,
    stage: int = 0,
) -> float:
    """Test accuracy after suppressing each class's k most important units.

    Importance of a unit for a class is the mean absolute activation at
    in-stage state `layer` over that class's training samples. At
    evaluation each test sample has the important units of its predicted
    class overwritten with the same coordinates of the previous state,
    which cancels that layer's contribution on those units. k=0 reproduces
    plain evaluation exactly.
    """
    stage_obj = net.stages[stage]
    width = stage_obj.in_dim
    if not 0 <= k <= width:
        raise ValueError(f"k must lie in [0, {width}], got {k}")
    n_states = (
        len(stage_obj.blocks) if isinstance(stage_obj, ResNet) else len(stage_obj.layers)
    ) + 1
    if not 1 <= layer < n_states:
        raise IndexError(f"layer must lie in [1, {n_states}), got {layer}")
    if k == 0:
        return accuracy(net, data.test_inputs, data.test_labels)

    # Per-class importance from the training split.
    train_states = forward_states(net, data.train_inputs.T).stage_states[stage]
    acts = np.abs(train_states[layer])  # (width, m)
    class_units = []
    for c in range(data.n_classes):
        cols = np.asarray(data.train_labels) == c
        importance = acts[:, cols].mean(axis=1) if np.any(cols) else np.zeros(width)
        order = np.argsort(-importance, kind="stable")  # deterministic under ties
        class_units.append(order[:k])

    # Evaluate with each sample's predicted-class units overwritten.
    test_fs = forward_states(net, data.test_inputs.T)
    predicted = np.argmax(test_fs.output, axis=0)
    states = test_fs.stage_states[stage]
    modified = states[layer].copy()
    previous = states[layer - 1]
    for c in range(data.n_classes):
        cols = predicted == c
        if not np.any(cols):
            continue
        units = class_units[c]
        sub = modified[:, cols]
        sub[units, :] = previous[np.ix_(units, np.flatnonzero(cols))]
        modified[:, cols] = sub
    scores = _finish_forward(net, stage, modified, layer)
    return float(np.mean(np.argmax(scores, axis=0) == np.asarray(data.test_labels)))


# ---------------------------------------------------------------------------
# transport metrics and sweeps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StageMetrics:
    mean_lss: float
    mean_lsr: float
    degenerate_tracks: int
    ots: float
    w2: float
    separation_fraction: float | None = None


def stage_transport_metrics(
    net: Network,
    inputs: np.ndarray,
    with_separation: bool = False,
    slack: float = 1e-9,
) -> list[StageMetrics]:
    """Straightness and transport scores per stage on (m, dim) samples.

    OTS and W2 compare each stage's input cloud to its output cloud under
    the forward pass's index pairing. With with_separation, also reports
    the fraction of sample pairs whose recorded tracks stay at least as far
    apart as the straight-line separation bound (minus `slack`).
    """
    fs = forward_states(net, np.asarray(inputs, dtype=np.float64).T)
    metrics = []
    for states in fs.stage_states:
        stacked = np.stack(states)  # (n_states, width, m)
        m = stacked.shape[2]
        lss_vals, lsr_vals, degenerate = [], [], 0
        for s in range(m):
            track = Track(stacked[:, :, s])
            try:
                lss_vals.append(lss(track))
            except DegenerateTrackError:
                degenerate += 1
            try:
                lsr_vals.append(lsr(track))
            except DegenerateTrackError:
                pass
        cloud_in = stacked[0].T
        cloud_out = stacked[-1].T
        sep_fraction = None
        if with_separation:
            # min over states of pairwise distances, vs the endpoint bound
            dists = np.stack(
                [_pairwise_distances(stacked[l].T) for l in range(stacked.shape[0])]
            ).min(axis=0)
            a = _pairwise_distances(cloud_in)
            b = _pairwise_distances(cloud_out)
            denom = np.sqrt(a * a + b * b)
            with np.errstate(invalid="ignore", divide="ignore"):
                bound = np.where(denom > 0, a * b / np.where(denom > 0, denom, 1.0), 0.0)
            iu = np.triu_indices(m, k=1)
            sep_fraction = float(np.mean(dists[iu] + slack >= bound[iu]))
        metrics.append(
            StageMetrics(
                mean_lss=float(np.mean(lss_vals)) if lss_vals else float("nan"),
                mean_lsr=float(np.mean(lsr_vals)) if lsr_vals else float("nan"),
                degenerate_tracks=degenerate,
                ots=ots(cloud_in, cloud_out),
                w2=wasserstein2(cloud_in, cloud_out),
                separation_fraction=sep_fraction,
            )
        )
    return metrics


def _pairwise_distances(cloud: np.ndarray) -> np.ndarray:
    diff = cloud[:, None, :] - cloud[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


@dataclass(frozen=True)
class SweepRow:
    gamma: float
    ok: bool
    train_acc: float = float("nan")
    test_acc: float = float("nan")
    lss_per_stage: tuple[float, ...] = ()
    ots_per_stage: tuple[float, ...] = ()
    w2_per_stage: tuple[float, ...] = ()
    weight_energy: float = float("nan")
    error: str = ""


@dataclass(frozen=True)
class SweepReport:
    arch_kind: str
    rows: tuple[SweepRow, ...]


def _eval_subset(data: Dataset, n: int) -> np.ndarray:
    return data.test_inputs[: min(n, data.test_inputs.shape[0])]


def sweep_row(
    arch: ArchitectureSpec, data: Dataset, gamma: float, cfg: TrainConfig
) -> SweepRow:
    """Train one model at one decay value and score it."""
    run_cfg = replace(cfg, gamma=float(gamma))
    net = build_network(arch, run_cfg.seed)
    try:
        net, _ = train(net, data, run_cfg)
    except DivergenceError as exc:
        return SweepRow(gamma=float(gamma), ok=False, error=str(exc))
    subset = _eval_subset(data, run_cfg.ot_subsample)
    metrics = stage_transport_metrics(net, subset)
    return SweepRow(
        gamma=float(gamma),
        ok=True,
        train_acc=accuracy(net, data.train_inputs, data.train_labels),
        test_acc=accuracy(net, data.test_inputs, data.test_labels),
        lss_per_stage=tuple(m.mean_lss for m in metrics),
        ots_per_stage=tuple(m.ots for m in metrics),
        w2_per_stage=tuple(m.w2 for m in metrics),
        weight_energy=weight_decay_energy(net),
    )


def gamma_sweep(
    arch: ArchitectureSpec,
    data: Dataset,
    gammas,
    cfg: TrainConfig,
) -> SweepReport:
    """One trained model per decay value, all from the same seed.

    Rows are ordered by gamma; a diverging run is flagged and the sweep
    continues.
    """
    gammas = [float(g) for g in gammas]
    if len(set(gammas)) != len(gammas):
        raise ValueError("gamma values must be distinct")
    if any(g < 0 for g in gammas):
        raise ValueError("gamma values must be nonnegative")
    rows = tuple(sweep_row(arch, data, g, cfg) for g in sorted(gammas))
    return SweepReport(arch_kind=arch.kind, rows=rows)


# ---------------------------------------------------------------------------
# robustness curves
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RobustnessReport:
    kind: str
    levels: tuple[float, ...]
    accuracy: tuple[float, ...]
    variation_rates: tuple[tuple[float, ...], ...]  # [level][layer]


def robustness_curve(
    net: Network,
    data: Dataset,
    kind: str,
    levels,
    seed: int = 0,
    loss: str = "softmax-cross-entropy",
) -> RobustnessReport:
    """Accuracy and per-layer variation rates across noise levels."""
    levels = tuple(float(v) for v in levels)
    n_layers = layer_sequence_length(net, data.dim)
    accs = []
    rates = []
    for level in levels:
        cfg = (
            NoiseConfig(kind="gaussian", sigma=level, seed=seed)
            if kind == "gaussian"
            else NoiseConfig(kind="fgsm", epsilon=level, seed=seed)
        )
        noisy = _perturbed_inputs(net, data, cfg, loss)
        accs.append(accuracy(net, noisy, data.test_labels))
        clean_fs = forward_states(net, data.test_inputs.T)
        noisy_fs = forward_states(net, noisy.T)
        level_rates = []
        for layer in range(n_layers):
            ref = clean_fs.layer_sequence[layer]
            dev = np.linalg.norm(ref - noisy_fs.layer_sequence[layer], axis=0)
            norms = np.linalg.norm(ref, axis=0)
            keep = norms > TINY
            level_rates.append(float(np.mean(dev[keep] / norms[keep])) if np.any(keep) else float("nan"))
        rates.append(tuple(level_rates))
    return RobustnessReport(
        kind=kind, levels=levels, accuracy=tuple(accs), variation_rates=tuple(rates)
    )
