"""gtl: a numerical laboratory for weight-decayed ReLU networks and the
straight-line transport structure of their layerwise representations.

Train small plain or residual perceptrons, record per-sample layerwise
tracks, and score how closely the learned transformation follows the
cost-minimizing pairing between its input and output clouds: exact
assignment solving, discrete Wasserstein-2 distances, line-shape metrics,
and the pairwise separation bound.
"""

from .assignment import (
    AssignmentResult,
    brute_force_lap,
    ots,
    solve_lap,
    squared_distance_costs,
    wasserstein2,
)
from .datasets import Dataset, make_dataset, read_idx_images, read_idx_labels
from .errors import (
    DegenerateTrackError,
    DimensionError,
    DivergenceError,
    FormatError,
    PatternInstabilityError,
    SizeError,
)
from .experiments import (
    NoiseConfig,
    RobustnessReport,
    SweepReport,
    SweepRow,
    fgsm_perturb,
    gamma_sweep,
    gaussian_perturb,
    robustness_curve,
    stage_transport_metrics,
    unit_elimination_eval,
    variation_rate,
)
from .geometry import (
    Track,
    geodesic_interpolate,
    lsr,
    lss,
    optimal_velocity,
    separation_bound,
    straight_line_track,
    track_action,
    track_distance,
)
from .network import (
    ArchitectureSpec,
    Network,
    PlainNet,
    ResidualBlock,
    ResNet,
    TrainConfig,
    TrainLog,
    accuracy,
    activated_linear_map,
    backward,
    block_energy_bound,
    build_network,
    forward,
    forward_with_track,
    gd_variation_check,
    layer_energy_bound,
    ridge_solve,
    sgd_step,
    train,
    weight_decay_energy,
)
from .numerics import frobenius_norm_sq, he_init, make_rng, relu

__version__ = "0.1.0"
