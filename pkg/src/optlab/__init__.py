"""Per-dimension learning-rate optimizers with a verifiable training harness.

Five update rules (SGD, momentum, ADAGRAD, windowed RMS, ADADELTA) over a
deterministic dense-matrix core, a from-scratch MLP with a finite-difference
gradient oracle, IDX dataset loading, a training/sweep harness with CSV
metrics, and a reproducible parameter-server simulation.
"""

from .linalg import Matrix, ShapeError, SplitMix64, derive_seed, matmul, uniform
from .optim import (
    METHODS,
    Hyperparams,
    NonFiniteGradientError,
    Optimizer,
    PerDimState,
    effective_rates,
    step,
    step_adadelta,
    step_adagrad,
    step_momentum,
    step_rms,
    step_sgd,
)
from .mlp import (
    ACTIVATIONS,
    ForwardCache,
    Layer,
    LayerSpec,
    NetworkParams,
    backward,
    forward,
    gradient_check,
    init_network,
    mlp_specs,
    numerical_gradient,
    softmax_cross_entropy,
)
from .data import (
    BatchPlan,
    Dataset,
    IdxFormatError,
    load_idx,
    make_batches,
    synthetic_dataset,
)
from .harness import (
    MetricsRecord,
    OptimizerConfig,
    StepSample,
    SweepRow,
    TrainConfig,
    evaluate,
    sweep_grid,
    train_run,
    write_metrics_csv,
)
from .distsim import (
    GradMessage,
    ParameterServer,
    SimConfig,
    StalenessError,
    replica_step,
    run_sim,
    server_apply,
    shard_indices,
)

__all__ = [
    "Matrix",
    "ShapeError",
    "SplitMix64",
    "derive_seed",
    "matmul",
    "uniform",
    "METHODS",
    "Hyperparams",
    "NonFiniteGradientError",
    "Optimizer",
    "PerDimState",
    "effective_rates",
    "step",
    "step_adadelta",
    "step_adagrad",
    "step_momentum",
    "step_rms",
    "step_sgd",
    "ACTIVATIONS",
    "ForwardCache",
    "Layer",
    "LayerSpec",
    "NetworkParams",
    "backward",
    "forward",
    "gradient_check",
    "init_network",
    "mlp_specs",
    "numerical_gradient",
    "softmax_cross_entropy",
    "BatchPlan",
    "Dataset",
    "IdxFormatError",
    "load_idx",
    "make_batches",
    "synthetic_dataset",
    "MetricsRecord",
    "OptimizerConfig",
    "StepSample",
    "SweepRow",
    "TrainConfig",
    "evaluate",
    "sweep_grid",
    "train_run",
    "write_metrics_csv",
    "GradMessage",
    "ParameterServer",
    "SimConfig",
    "StalenessError",
    "replica_step",
    "run_sim",
    "server_apply",
    "shard_indices",
]
