"""Plain and residual ReLU perceptrons with track-recording forward passes,
exact reverse-mode gradients, and weight-decayed SGD.

Batch convention follows the linear-algebra layout throughout: a batch is a
(dim, m) matrix whose columns are samples, so a layer is simply W @ X.
Networks are immutable values; sgd_step and train return new networks.

Architecture shape: an optional input-lifting matrix, then K fixed-width
stages (each a stack of residual blocks or of plain ReLU layers) joined by
rectangular dimension changers, then a linear head to class scores. The
plain variant of a residual architecture replaces each block
x -> x + W2 relu(W1 relu(x)) with the two layers relu(W1 x), relu(W2 x),
so the two variants are parameter-matched matrix for matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateTrackError,
    DimensionError,
    DivergenceError,
    PatternInstabilityError,
)
from .geometry import Track, lss
from .numerics import (
    as_matrix,
    frobenius_norm_sq,
    he_init,
    relu,
    spawn_rng,
)

__all__ = [
    "PlainNet",
    "ResidualBlock",
    "ResNet",
    "Network",
    "ArchitectureSpec",
    "TrainConfig",
    "TrainLog",
    "EpochStats",
    "build_network",
    "forward",
    "forward_with_track",
    "forward_states",
    "backward",
    "loss_and_grad_at_output",
    "targets_for_loss",
    "sgd_step",
    "train",
    "accuracy",
    "activated_linear_map",
    "gd_variation_check",
    "ridge_solve",
    "block_energy_bound",
    "layer_energy_bound",
    "weight_decay_energy",
    "weight_list",
    "with_weights",
]

LOSSES = ("softmax-cross-entropy", "mean-squared-error")


# ---------------------------------------------------------------------------
# model containers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PlainNet:
    """Stack of ReLU layers; the last layer skips the ReLU when
    final_linear is set (the standalone same-dimension network form)."""

    layers: tuple[np.ndarray, ...]
    final_linear: bool = True

    def __post_init__(self):
        if not self.layers:
            raise DimensionError("plain net needs at least one layer")
        layers = tuple(as_matrix(w) for w in self.layers)
        for a, b in zip(layers, layers[1:]):
            if b.shape[1] != a.shape[0]:
                raise DimensionError(
                    f"consecutive layers do not compose: {a.shape} then {b.shape}"
                )
        object.__setattr__(self, "layers", layers)

    @property
    def in_dim(self) -> int:
        return self.layers[0].shape[1]

    @property
    def out_dim(self) -> int:
        return self.layers[-1].shape[0]


@dataclass(frozen=True)
class ResidualBlock:
    """Residual field v(x) = W2 relu(W1 relu(x)); the block map is x + v(x)."""

    w1: np.ndarray
    w2: np.ndarray

    def __post_init__(self):
        w1 = as_matrix(self.w1)
        w2 = as_matrix(self.w2)
        d = w1.shape[0]
        if w1.shape != (d, d) or w2.shape != (d, d):
            raise DimensionError(
                f"block matrices must be square and equal, got {w1.shape}, {w2.shape}"
            )
        object.__setattr__(self, "w1", w1)
        object.__setattr__(self, "w2", w2)

    @property
    def width(self) -> int:
        return self.w1.shape[0]

    def residual_field(self, x: np.ndarray) -> np.ndarray:
        return self.w2 @ relu(self.w1 @ relu(x))


@dataclass(frozen=True)
class ResNet:
    """Stack of residual blocks at one width."""

    blocks: tuple[ResidualBlock, ...]

    def __post_init__(self):
        if not self.blocks:
            raise DimensionError("residual net needs at least one block")
        widths = {b.width for b in self.blocks}
        if len(widths) != 1:
            raise DimensionError(f"blocks must share one width, got {sorted(widths)}")
        object.__setattr__(self, "blocks", tuple(self.blocks))

    @property
    def in_dim(self) -> int:
        return self.blocks[0].width

    @property
    def out_dim(self) -> int:
        return self.blocks[0].width


Stage = PlainNet | ResNet


@dataclass(frozen=True)
class Network:
    """Full model: optional input lift, fixed-width stages joined by
    dimension changers, and a linear head."""

    stages: tuple[Stage, ...]
    head: np.ndarray
    changers: tuple[np.ndarray, ...] = ()
    input_map: np.ndarray | None = None

    def __post_init__(self):
        stages = tuple(self.stages)
        if not stages:
            raise DimensionError("network needs at least one stage")
        changers = tuple(as_matrix(c) for c in self.changers)
        if len(changers) != len(stages) - 1:
            raise DimensionError(
                f"{len(stages)} stages need {len(stages) - 1} changers, got {len(changers)}"
            )
        for k, changer in enumerate(changers):
            if changer.shape[1] != stages[k].out_dim:
                raise DimensionError(f"changer {k} does not accept stage {k} output")
            if changer.shape[0] != stages[k + 1].in_dim:
                raise DimensionError(f"changer {k} does not feed stage {k + 1}")
        head = as_matrix(self.head)
        if head.shape[1] != stages[-1].out_dim:
            raise DimensionError("head does not accept final stage output")
        input_map = None if self.input_map is None else as_matrix(self.input_map)
        if input_map is not None and input_map.shape[0] != stages[0].in_dim:
            raise DimensionError("input map does not feed the first stage")
        object.__setattr__(self, "stages", stages)
        object.__setattr__(self, "changers", changers)
        object.__setattr__(self, "head", head)
        object.__setattr__(self, "input_map", input_map)

    @property
    def in_dim(self) -> int:
        if self.input_map is not None:
            return self.input_map.shape[1]
        return self.stages[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.head.shape[0]


@dataclass(frozen=True)
class ArchitectureSpec:
    """Shape descriptor from which a network is built deterministically."""

    kind: str  # "plain" | "resnet"
    input_dim: int
    stage_widths: tuple[int, ...]
    blocks_per_stage: tuple[int, ...]
    n_classes: int
    lift_input: bool = True

    def __post_init__(self):
        if self.kind not in ("plain", "resnet"):
            raise ValueError(f"unknown architecture kind {self.kind!r}")
        object.__setattr__(self, "stage_widths", tuple(int(w) for w in self.stage_widths))
        object.__setattr__(
            self, "blocks_per_stage", tuple(int(b) for b in self.blocks_per_stage)
        )
        if len(self.stage_widths) != len(self.blocks_per_stage):
            raise ValueError("stage_widths and blocks_per_stage must align")
        if not self.lift_input and self.stage_widths[0] != self.input_dim:
            raise ValueError("without an input lift the first stage width must equal input_dim")


def build_network(arch: ArchitectureSpec, seed: int) -> Network:
    """Materialize an architecture with He-initialized weights.

    Matrices are drawn in one fixed order that does not depend on `kind`,
    so the plain and residual variants of one (arch, seed) share identical
    parameter values matrix for matrix.
    """
    rng = spawn_rng(seed, 0)
    input_map = None
    if arch.lift_input:
        input_map = he_init(arch.stage_widths[0], arch.input_dim, rng)
    stages: list[Stage] = []
    changers: list[np.ndarray] = []
    for k, (width, n_blocks) in enumerate(zip(arch.stage_widths, arch.blocks_per_stage)):
        draws = [(he_init(width, width, rng), he_init(width, width, rng)) for _ in range(n_blocks)]
        if arch.kind == "resnet":
            stages.append(ResNet(tuple(ResidualBlock(w1, w2) for w1, w2 in draws)))
        else:
            layers = [w for pair in draws for w in pair]
            stages.append(PlainNet(tuple(layers), final_linear=False))
        if k + 1 < len(arch.stage_widths):
            changers.append(he_init(arch.stage_widths[k + 1], width, rng))
    head = he_init(arch.n_classes, arch.stage_widths[-1], rng)
    return Network(
        stages=tuple(stages), head=head, changers=tuple(changers), input_map=input_map
    )


# ---------------------------------------------------------------------------
# forward passes
# ---------------------------------------------------------------------------

def _stage_forward(stage: Stage, x: np.ndarray) -> list[np.ndarray]:
    """All states of one stage: input followed by one state per block/layer."""
    states = [x]
    if isinstance(stage, ResNet):
        for blk in stage.blocks:
            x = x + blk.residual_field(x)
            states.append(x)
    else:
        last = len(stage.layers) - 1
        for li, w in enumerate(stage.layers):
            z = w @ x
            x = z if (li == last and stage.final_linear) else relu(z)
            states.append(x)
    return states


@dataclass(frozen=True)
class ForwardStates:
    """Everything a forward pass computes, batch-wide.

    layer_sequence starts at the raw input and then lists every computed
    representation once, in forward order (lifted input, each in-stage
    state, each changer output, the head output).
    """

    raw_input: np.ndarray
    stage_states: tuple[tuple[np.ndarray, ...], ...]
    output: np.ndarray
    layer_sequence: tuple[np.ndarray, ...]


def forward_states(net: Network, x: np.ndarray) -> ForwardStates:
    """Run a (dim, m) batch, keeping every intermediate representation."""
    x = np.asarray(x, dtype=np.float64)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[:, None]
    if x.shape[0] != net.in_dim:
        raise DimensionError(f"input dim {x.shape[0]} does not match network {net.in_dim}")
    sequence = [x]
    cur = x
    if net.input_map is not None:
        cur = net.input_map @ cur
        sequence.append(cur)
    all_states = []
    for k, stage in enumerate(net.stages):
        states = _stage_forward(stage, cur)
        all_states.append(tuple(states))
        sequence.extend(states[1:])
        cur = states[-1]
        if k < len(net.changers):
            cur = net.changers[k] @ cur
            sequence.append(cur)
    output = net.head @ cur
    sequence.append(output)
    return ForwardStates(
        raw_input=x,
        stage_states=tuple(all_states),
        output=output,
        layer_sequence=tuple(sequence),
    )


def forward(net: Network, x: np.ndarray) -> np.ndarray:
    """Class scores for one vector or a (dim, m) batch."""
    states = forward_states(net, x)
    out = states.output
    return out[:, 0] if np.asarray(x).ndim == 1 else out


def forward_with_track(net: Network, x: np.ndarray) -> tuple[np.ndarray, list[Track]]:
    """Scores plus one track per fixed-width stage for a single sample."""
    v = np.asarray(x, dtype=np.float64)
    if v.ndim != 1:
        raise DimensionError("forward_with_track takes a single vector")
    fs = forward_states(net, v)
    tracks = [Track(np.stack([s[:, 0] for s in states])) for states in fs.stage_states]
    return fs.output[:, 0], tracks


# ---------------------------------------------------------------------------
# losses and exact gradients
# ---------------------------------------------------------------------------

def targets_for_loss(labels: np.ndarray, n_classes: int, loss: str) -> np.ndarray:
    """Labels as the loss expects: raw indices, or one-hot columns for MSE."""
    labels = np.asarray(labels)
    if loss == "softmax-cross-entropy":
        return labels
    if loss == "mean-squared-error":
        onehot = np.zeros((n_classes, labels.shape[0]))
        onehot[labels, np.arange(labels.shape[0])] = 1.0
        return onehot
    raise ValueError(f"unknown loss {loss!r}")


def loss_and_grad_at_output(output: np.ndarray, targets: np.ndarray, loss: str):
    """Mean batch loss and its gradient with respect to the scores."""
    m = output.shape[1]
    if loss == "softmax-cross-entropy":
        labels = np.asarray(targets, dtype=np.intp)
        shifted = output - output.max(axis=0, keepdims=True)
        expo = np.exp(shifted)
        probs = expo / expo.sum(axis=0, keepdims=True)
        picked = probs[labels, np.arange(m)]
        value = float(-np.log(np.maximum(picked, 1e-300)).mean())
        grad = probs.copy()
        grad[labels, np.arange(m)] -= 1.0
        return value, grad / m
    if loss == "mean-squared-error":
        diff = output - np.asarray(targets, dtype=np.float64)
        return float(np.sum(diff * diff) / m), 2.0 * diff / m
    raise ValueError(f"unknown loss {loss!r}")


@dataclass(frozen=True)
class BackwardResult:
    loss: float
    weight_grads: list[np.ndarray]  # aligned with weight_list(net)
    input_grads: np.ndarray         # (in_dim, m), per-sample loss gradients


def weight_list(net: Network) -> list[np.ndarray]:
    """All weight matrices in the fixed traversal order used everywhere:
    input map, stage 0 matrices, changer 0, stage 1, ..., head."""
    out = []
    if net.input_map is not None:
        out.append(net.input_map)
    for k, stage in enumerate(net.stages):
        if isinstance(stage, ResNet):
            for blk in stage.blocks:
                out.extend((blk.w1, blk.w2))
        else:
            out.extend(stage.layers)
        if k < len(net.changers):
            out.append(net.changers[k])
    out.append(net.head)
    return out


def with_weights(net: Network, arrays: list[np.ndarray]) -> Network:
    """Rebuild the network with new matrices in weight_list order."""
    arrays = list(arrays)
    expected = len(weight_list(net))
    if len(arrays) != expected:
        raise DimensionError(f"expected {expected} matrices, got {len(arrays)}")
    it = iter(arrays)
    input_map = next(it) if net.input_map is not None else None
    stages: list[Stage] = []
    changers: list[np.ndarray] = []
    for k, stage in enumerate(net.stages):
        if isinstance(stage, ResNet):
            blocks = [ResidualBlock(next(it), next(it)) for _ in stage.blocks]
            stages.append(ResNet(tuple(blocks)))
        else:
            layers = [next(it) for _ in stage.layers]
            stages.append(PlainNet(tuple(layers), final_linear=stage.final_linear))
        if k < len(net.changers):
            changers.append(next(it))
    head = next(it)
    return Network(
        stages=tuple(stages), head=head, changers=tuple(changers), input_map=input_map
    )


def backward(net: Network, inputs: np.ndarray, targets: np.ndarray, loss: str) -> BackwardResult:
    """Exact reverse-mode gradients of the mean batch loss.

    Returns gradients for every weight matrix (weight_list order) and for
    every input column. The ReLU subgradient at exactly zero is zero.
    """
    x = np.asarray(inputs, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] != net.in_dim:
        raise DimensionError(f"input dim {x.shape[0]} does not match network {net.in_dim}")

    # Forward pass, caching what each local derivative needs.
    cur = x
    lift_in = None
    if net.input_map is not None:
        lift_in = cur
        cur = net.input_map @ cur
    stage_caches = []
    changer_ins = []
    for k, stage in enumerate(net.stages):
        if isinstance(stage, ResNet):
            caches = []
            for blk in stage.blocks:
                a = relu(cur)
                b = blk.w1 @ a
                c = relu(b)
                caches.append((cur, a, b, c))
                cur = cur + blk.w2 @ c
            stage_caches.append(caches)
        else:
            caches = []
            last = len(stage.layers) - 1
            for li, w in enumerate(stage.layers):
                z = w @ cur
                caches.append((cur, z))
                cur = z if (li == last and stage.final_linear) else relu(z)
            stage_caches.append(caches)
        if k < len(net.changers):
            changer_ins.append(cur)
            cur = net.changers[k] @ cur
    head_in = cur
    output = net.head @ cur

    value, d_out = loss_and_grad_at_output(output, targets, loss)

    # Backward pass.
    grad_head = d_out @ head_in.T
    d_cur = net.head.T @ d_out
    stage_grads: list[list[np.ndarray]] = []
    changer_grads: list[np.ndarray] = [None] * len(net.changers)
    for k in range(len(net.stages) - 1, -1, -1):
        if k < len(net.changers):
            changer_grads[k] = d_cur @ changer_ins[k].T
            d_cur = net.changers[k].T @ d_cur
        stage = net.stages[k]
        grads: list[np.ndarray] = []
        if isinstance(stage, ResNet):
            for blk, (xin, a, b, c) in zip(
                reversed(stage.blocks), reversed(stage_caches[k])
            ):
                d_c = blk.w2.T @ d_cur
                d_b = d_c * (b > 0)
                d_a = blk.w1.T @ d_b
                grads.append(d_cur @ c.T)   # dW2
                grads.append(d_b @ a.T)     # dW1
                d_cur = d_cur + d_a * (xin > 0)
        else:
            last = len(stage.layers) - 1
            for li in range(last, -1, -1):
                xin, z = stage_caches[k][li]
                w = stage.layers[li]
                d_z = d_cur if (li == last and stage.final_linear) else d_cur * (z > 0)
                grads.append(d_z @ xin.T)
                d_cur = w.T @ d_z
        stage_grads.append(grads[::-1])
    stage_grads.reverse()

    weight_grads: list[np.ndarray] = []
    if net.input_map is not None:
        weight_grads.append(d_cur @ lift_in.T)
        d_cur = net.input_map.T @ d_cur
    for k, grads in enumerate(stage_grads):
        weight_grads.extend(grads)
        if k < len(net.changers):
            weight_grads.append(changer_grads[k])
    weight_grads.append(grad_head)
    return BackwardResult(loss=value, weight_grads=weight_grads, input_grads=d_cur)


# ---------------------------------------------------------------------------
# optimization
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrainConfig:
    gamma: float = 0.0          # weight-decay coefficient
    lr: float = 0.05            # step size
    epochs: int = 100
    batch_size: int = 64
    loss: str = "softmax-cross-entropy"
    seed: int = 0
    ot_subsample: int = 512     # evaluation subset size for transport metrics

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError("learning rate must be positive")
        if self.gamma < 0:
            raise ValueError("weight decay must be nonnegative")
        if self.batch_size < 1:
            raise ValueError("batch size must be at least 1")
        if self.loss not in LOSSES:
            raise ValueError(f"loss must be one of {LOSSES}, got {self.loss!r}")


def sgd_step(net: Network, weight_grads: list[np.ndarray], cfg: TrainConfig) -> Network:
    """One step W' = W - lr * (grad + 2*gamma*W) on every weight matrix."""
    weights = weight_list(net)
    if len(weight_grads) != len(weights):
        raise DimensionError(
            f"expected {len(weights)} gradient matrices, got {len(weight_grads)}"
        )
    updated = []
    for w, g in zip(weights, weight_grads):
        if g.shape != w.shape:
            raise DimensionError(f"gradient shape {g.shape} does not match weight {w.shape}")
        updated.append(w - cfg.lr * (g + 2.0 * cfg.gamma * w))
    return with_weights(net, updated)


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    loss: float
    train_acc: float
    test_acc: float
    mean_lss_per_stage: tuple[float, ...]
    degenerate_per_stage: tuple[int, ...]
    weight_energy: float


@dataclass(frozen=True)
class TrainLog:
    epochs: tuple[EpochStats, ...] = ()


def accuracy(net: Network, inputs: np.ndarray, labels: np.ndarray) -> float:
    """Fraction of samples whose top score matches the label.

    inputs are (m, dim) row-per-sample, as datasets store them.
    """
    out = forward_states(net, np.asarray(inputs, dtype=np.float64).T).output
    return float(np.mean(np.argmax(out, axis=0) == np.asarray(labels)))


def stage_mean_lss(net: Network, inputs: np.ndarray) -> tuple[tuple[float, ...], tuple[int, ...]]:
    """Per-stage mean line-shape score over (m, dim) samples.

    Tracks whose segments are all degenerate are excluded from the mean and
    counted separately; a stage with only degenerate tracks reports nan.
    """
    fs = forward_states(net, np.asarray(inputs, dtype=np.float64).T)
    means = []
    degenerate = []
    for states in fs.stage_states:
        stacked = np.stack(states)  # (n_states, width, m)
        scores = []
        skipped = 0
        for s in range(stacked.shape[2]):
            try:
                scores.append(lss(Track(stacked[:, :, s])))
            except DegenerateTrackError:
                skipped += 1
        means.append(float(np.mean(scores)) if scores else float("nan"))
        degenerate.append(skipped)
    return tuple(means), tuple(degenerate)


def train(net: Network, data, cfg: TrainConfig) -> tuple[Network, TrainLog]:
    """Weight-decayed SGD with deterministic seeded shuffling.

    Per epoch the log records the mean batch loss, train/test accuracy,
    per-stage mean line-shape score on the fixed evaluation subset (the
    first ot_subsample test samples), and the total squared Frobenius
    weight energy. A non-finite loss aborts with a diagnostic.
    """
    shuffle_rng = spawn_rng(cfg.seed, 1)
    x_train = np.asarray(data.train_inputs, dtype=np.float64)
    y_train = np.asarray(data.train_labels)
    if cfg.batch_size > x_train.shape[0]:
        raise ValueError(
            f"batch size {cfg.batch_size} exceeds dataset size {x_train.shape[0]}"
        )
    n_eval = min(cfg.ot_subsample, data.test_inputs.shape[0])
    eval_inputs = np.asarray(data.test_inputs[:n_eval], dtype=np.float64)
    xt = x_train.T  # (dim, m)
    epochs: list[EpochStats] = []
    for epoch in range(cfg.epochs):
        order = shuffle_rng.permutation(x_train.shape[0])
        batch_losses = []
        for start in range(0, order.shape[0], cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            targets = targets_for_loss(y_train[idx], net.out_dim, cfg.loss)
            result = backward(net, xt[:, idx], targets, cfg.loss)
            if not np.isfinite(result.loss):
                raise DivergenceError(
                    f"loss became non-finite at epoch {epoch}, batch {start // cfg.batch_size}"
                    f" (gamma={cfg.gamma}, lr={cfg.lr})"
                )
            net = sgd_step(net, result.weight_grads, cfg)
            batch_losses.append(result.loss)
        lss_means, lss_degenerate = stage_mean_lss(net, eval_inputs)
        epochs.append(
            EpochStats(
                epoch=epoch,
                loss=float(np.mean(batch_losses)),
                train_acc=accuracy(net, x_train, y_train),
                test_acc=accuracy(net, data.test_inputs, data.test_labels),
                mean_lss_per_stage=lss_means,
                degenerate_per_stage=lss_degenerate,
                weight_energy=weight_decay_energy(net),
            )
        )
    return net, TrainLog(tuple(epochs))


# ---------------------------------------------------------------------------
# linear-algebraic diagnostics
# ---------------------------------------------------------------------------

def activated_linear_map(net: PlainNet, x: np.ndarray) -> np.ndarray:
    """Input-dependent matrix reproducing the plain net's output on x.

    Each ReLU is replaced by the diagonal 0/1 mask it applies on this
    input, turning the whole composition into one matrix product W~ with
    net(x) = W~ @ x exactly (to rounding).
    """
    v = np.asarray(x, dtype=np.float64)
    if v.ndim != 1 or v.shape[0] != net.in_dim:
        raise DimensionError(f"input dim must be {net.in_dim}")
    cur = v
    product = None
    last = len(net.layers) - 1
    for li, w in enumerate(net.layers):
        z = w @ cur
        if li == last and net.final_linear:
            cur = z
            masked = w
        else:
            mask = z > 0
            cur = np.where(mask, z, 0.0)
            masked = w * mask[:, None]
        product = masked if product is None else masked @ product
    return product


def gd_variation_check(
    w: np.ndarray, x: np.ndarray, g: np.ndarray, delta: float
) -> tuple[np.ndarray, np.ndarray]:
    """Observed vs predicted change of relu(W X) after a row-wise step.

    Each row j steps along the gradient it would receive from g (the loss
    gradient on the post-activation output), using only the columns of X
    that activate that row. Under a frozen activation pattern the observed
    change equals -delta * g[j] X_j^T X_j exactly; a flipped pattern raises
    PatternInstabilityError instead of returning garbage.
    """
    w = as_matrix(w)
    x = as_matrix(x)
    g = as_matrix(g)
    if x.shape[0] != w.shape[1] or g.shape != (w.shape[0], x.shape[1]):
        raise DimensionError(
            f"shapes do not compose: W {w.shape}, X {x.shape}, G {g.shape}"
        )
    z = w @ x
    pattern = z > 0
    stepped = w.copy()
    predicted = np.zeros_like(z)
    for j in range(w.shape[0]):
        xj = x * pattern[j]  # zero the columns that do not activate row j
        row_grad = g[j] @ xj.T
        stepped[j] -= delta * row_grad
        predicted[j] = -delta * (row_grad @ xj)
    z_after = stepped @ x
    if not np.array_equal(z_after > 0, pattern):
        raise PatternInstabilityError(
            "activation pattern changed under the step; reduce delta"
        )
    observed = relu(z_after) - relu(z)
    return observed, predicted


def ridge_solve(x: np.ndarray, y: np.ndarray, gamma: float) -> np.ndarray:
    """Closed-form ridge weights w = (X X^T + gamma I)^-1 X y.

    x is (d, m) with samples as columns, y the (m,) row of targets.
    gamma > 0 keeps the system well conditioned by contract.
    """
    if gamma <= 0:
        raise ValueError(f"ridge regularizer must be positive, got {gamma}")
    x = as_matrix(x)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if y.shape[0] != x.shape[1]:
        raise DimensionError(f"targets length {y.shape[0]} != sample count {x.shape[1]}")
    d = x.shape[0]
    return np.linalg.solve(x @ x.T + gamma * np.eye(d), x @ y)


@dataclass(frozen=True)
class EnergyBound:
    lhs: float
    rhs: float
    rhs_symmetric: float | None = None


def block_energy_bound(block: ResidualBlock, samples: np.ndarray) -> EnergyBound:
    """Mean squared residual field vs its Frobenius-product upper bound.

    lhs = mean ||v(x)||^2 over the cloud; rhs = |W2|_F^2 |W1|_F^2 mean|x|^2.
    The symmetrized form 1/4 (|W1|_F^2 + |W2|_F^2)^2 mean|x|^2 dominates rhs.
    """
    pts = np.asarray(samples, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != block.width:
        raise DimensionError(f"samples must be (m, {block.width})")
    field_vals = block.residual_field(pts.T)
    mean_sq_input = float(np.mean(np.sum(pts * pts, axis=1)))
    lhs = float(np.mean(np.sum(field_vals * field_vals, axis=0)))
    f1 = frobenius_norm_sq(block.w1)
    f2 = frobenius_norm_sq(block.w2)
    return EnergyBound(
        lhs=lhs,
        rhs=f2 * f1 * mean_sq_input,
        rhs_symmetric=0.25 * (f1 + f2) ** 2 * mean_sq_input,
    )


def layer_energy_bound(w: np.ndarray, samples: np.ndarray) -> EnergyBound:
    """Mean squared single-layer displacement ||relu(Wx) - x||^2 vs the
    (|W|_F^2 + 1) mean|x|^2 bound used for plain layers."""
    w = as_matrix(w)
    if w.shape[0] != w.shape[1]:
        raise DimensionError("layer displacement needs a square matrix")
    pts = np.asarray(samples, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != w.shape[1]:
        raise DimensionError(f"samples must be (m, {w.shape[1]})")
    moved = relu(w @ pts.T) - pts.T
    lhs = float(np.mean(np.sum(moved * moved, axis=0)))
    rhs = (frobenius_norm_sq(w) + 1.0) * float(np.mean(np.sum(pts * pts, axis=1)))
    return EnergyBound(lhs=lhs, rhs=rhs)


def weight_decay_energy(net: Network) -> float:
    """Total squared Frobenius norm over every weight matrix."""
    return float(sum(frobenius_norm_sq(w) for w in weight_list(net)))
