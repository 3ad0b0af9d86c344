"""Training loop, evaluation, hyperparameter sweeps, and CSV emission.

A run is fully determined by (TrainConfig, datasets): the network is
initialized from the config seed, every epoch's shuffle comes from a seed
derived as (seed, stream 0, epoch) -- sequential training is the
one-replica case of the simulator, which makes the two bit-comparable --
and evaluation happens every ``eval_every`` batches (default: once per
epoch). A non-finite loss or gradient terminates the run with its final
record flagged diverged; a run stuck at chance level (error > 85% from the
second epoch on) is flagged but allowed to finish, since such runs are
reported rather than aborted.

Optional step-size logging samples a fixed set of dimensions per weight
matrix (10 by default) every ``log_every`` batches (60 by default) and
records each dimension's effective learning rate and applied update.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .data import Dataset, make_batches
from .linalg import ShapeError, SplitMix64, derive_seed
from .mlp import LayerSpec, NetworkParams, backward, forward, init_network, softmax_cross_entropy
from .optim import METHODS, Hyperparams, NonFiniteGradientError, Optimizer

DIVERGENCE_ERROR_PERCENT = 85.0


@dataclass(frozen=True)
class OptimizerConfig:
    method: str
    eta: float = 1.0
    rho: float = 0.95
    epsilon: float = 1e-6

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(
                f"unknown method {self.method!r}; expected one of {METHODS}"
            )
        self.hyperparams()  # validate ranges eagerly

    def hyperparams(self) -> Hyperparams:
        return Hyperparams(eta=self.eta, rho=self.rho, epsilon=self.epsilon)


@dataclass(frozen=True)
class TrainConfig:
    architecture: list[LayerSpec]
    optimizer: OptimizerConfig
    batch_size: int
    epochs: int
    seed: int
    eval_every: int | None = None  # batches; None = once per epoch
    log_step_sizes: bool = False
    log_every: int = 60
    log_dims_per_matrix: int = 10

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.eval_every is not None and self.eval_every < 1:
            raise ValueError(f"eval_every must be >= 1, got {self.eval_every}")
        if self.log_every < 1 or self.log_dims_per_matrix < 1:
            raise ValueError("log_every and log_dims_per_matrix must be >= 1")


@dataclass
class StepSample:
    """One sampled weight dimension at one logging point."""

    batches_seen: int
    layer: int  # 1-based, layer 1 is closest to the input
    dim_index: int  # flat index into the weight matrix
    effective_rate: float
    delta_x: float


@dataclass
class MetricsRecord:
    epoch: int
    batches_seen: int
    train_loss: float  # mean batch loss since the previous record
    test_error_percent: float
    diverged: bool = False
    step_samples: list[StepSample] = field(default_factory=list)


@dataclass
class SweepRow:
    method: str
    eta: float
    rho: float
    epsilon: float
    final_error_percent: float
    diverged: bool


def evaluate(net: NetworkParams, test: Dataset, chunk: int = 2000) -> float:
    """Percent misclassified under argmax; ties go to the lowest class."""
    n = len(test)
    if n == 0:
        raise ValueError("cannot evaluate on an empty dataset")
    wrong = 0
    for start in range(0, n, chunk):
        xb = test.inputs[start : start + chunk]
        yb = test.labels[start : start + chunk]
        logits = forward(net, xb).logits
        pred = np.argmax(logits, axis=1)  # first maximum = lowest class index
        wrong += int((pred != yb).sum())
    return 100.0 * wrong / n


class _StepLogger:
    """Samples fixed weight dimensions and records rate/update pairs."""

    def __init__(self, net: NetworkParams, per_matrix: int, rng: SplitMix64):
        self.dims: list[np.ndarray] = []
        for layer in net.layers:
            size = layer.weights.size
            take = min(per_matrix, size)
            self.dims.append(np.sort(rng.permutation(size)[:take]))

    def sample(
        self, batches_seen: int, optimizer: Optimizer, deltas: list
    ) -> list[StepSample]:
        rows = []
        rates = optimizer.rates()
        for layer_i, dims in enumerate(self.dims):
            rate_flat = rates[2 * layer_i].ravel()  # weights come before bias
            delta_flat = deltas[2 * layer_i].ravel()
            for d in dims:
                rows.append(
                    StepSample(
                        batches_seen=batches_seen,
                        layer=layer_i + 1,
                        dim_index=int(d),
                        effective_rate=float(rate_flat[d]),
                        delta_x=float(delta_flat[d]),
                    )
                )
        return rows


def train_run(config: TrainConfig, data: Dataset, test: Dataset) -> list[MetricsRecord]:
    """Train one network; one MetricsRecord per evaluation point."""
    first_in = config.architecture[0].in_dim
    if data.inputs.shape[1] != first_in or test.inputs.shape[1] != first_in:
        raise ShapeError(
            f"dataset feature dims ({data.inputs.shape[1]}, {test.inputs.shape[1]}) "
            f"do not match the first layer in_dim {first_in}"
        )

    rng = SplitMix64(config.seed)
    net = init_network(config.architecture, rng)
    optimizer = Optimizer.for_shapes(
        config.optimizer.method, config.optimizer.hyperparams(), net.tensor_shapes()
    )
    logger = (
        _StepLogger(net, config.log_dims_per_matrix, rng)
        if config.log_step_sizes
        else None
    )

    n = len(data)
    batches_per_epoch = (n + config.batch_size - 1) // config.batch_size
    eval_every = config.eval_every or batches_per_epoch

    records: list[MetricsRecord] = []
    pending_samples: list[StepSample] = []
    window_losses: list[float] = []
    batches_seen = 0
    loss_blew_up = False

    def emit(epoch: int) -> MetricsRecord:
        err = evaluate(net, test)
        mean_loss = float(np.mean(window_losses)) if window_losses else float("nan")
        rec = MetricsRecord(
            epoch=epoch,
            batches_seen=batches_seen,
            train_loss=mean_loss,
            test_error_percent=err,
            diverged=loss_blew_up
            or (epoch >= 2 and err > DIVERGENCE_ERROR_PERCENT),
            step_samples=list(pending_samples),
        )
        records.append(rec)
        window_losses.clear()
        pending_samples.clear()
        return rec

    for epoch in range(1, config.epochs + 1):
        plan = make_batches(
            n, config.batch_size, SplitMix64(derive_seed(config.seed, 0, epoch))
        )
        for idx in plan.batches():
            xb, yb = data.inputs[idx], data.labels[idx]
            cache = forward(net, xb)
            loss, dlogits = softmax_cross_entropy(cache.logits, yb)
            batches_seen += 1
            window_losses.append(loss)
            if not np.isfinite(loss):
                loss_blew_up = True
                emit(epoch)
                return records
            grads = backward(net, cache, dlogits)
            flat_grads = [g for pair in grads for g in pair]
            try:
                deltas = optimizer.step(flat_grads)
            except NonFiniteGradientError:
                loss_blew_up = True
                emit(epoch)
                return records
            for layer, (dw, db) in zip(net.layers, zip(deltas[0::2], deltas[1::2])):
                layer.weights += dw
                layer.bias += db
            if logger is not None and batches_seen % config.log_every == 0:
                pending_samples.extend(logger.sample(batches_seen, optimizer, deltas))
            if batches_seen % eval_every == 0:
                emit(epoch)
    return records


def sweep_grid(
    base: TrainConfig,
    grid: dict[str, list[Hyperparams]],
    data: Dataset,
    test: Dataset,
) -> list[SweepRow]:
    """One independent seeded run per (method, hyperparams) cell.

    Divergent runs keep their (large) final error; nothing is dropped.
    """
    if not grid or not any(grid.values()):
        raise ValueError("sweep grid is empty")
    rows = []
    for method, settings in grid.items():
        for h in settings:
            cfg = replace(
                base,
                optimizer=OptimizerConfig(
                    method=method, eta=h.eta, rho=h.rho, epsilon=h.epsilon
                ),
            )
            final = train_run(cfg, data, test)[-1]
            rows.append(
                SweepRow(
                    method=method,
                    eta=h.eta,
                    rho=h.rho,
                    epsilon=h.epsilon,
                    final_error_percent=final.test_error_percent,
                    diverged=final.diverged,
                )
            )
    return rows


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def step_log_path(path: str) -> str:
    """Sibling file that receives the step-size log for a metrics CSV."""
    stem, dot, ext = path.rpartition(".")
    return f"{stem}_steps.{ext}" if dot else f"{path}_steps"


def write_metrics_csv(records, path: str) -> None:
    """Write run records or sweep rows; 6 significant digits for reals.

    Run records additionally produce a ``*_steps.csv`` sibling when any
    record carries step samples.
    """
    records = list(records)
    if records and isinstance(records[0], SweepRow):
        lines = ["method,eta,rho,epsilon,final_error_percent,diverged"]
        for r in records:
            lines.append(
                f"{r.method},{_fmt(r.eta)},{_fmt(r.rho)},{_fmt(r.epsilon)},"
                f"{_fmt(r.final_error_percent)},{'true' if r.diverged else 'false'}"
            )
        _write_lines(path, lines)
        return

    lines = ["epoch,batches_seen,train_loss,test_error_percent"]
    samples: list[StepSample] = []
    for r in records:
        lines.append(
            f"{r.epoch},{r.batches_seen},{_fmt(r.train_loss)},"
            f"{_fmt(r.test_error_percent)}"
        )
        samples.extend(r.step_samples)
    _write_lines(path, lines)
    if samples:
        step_lines = ["batches_seen,layer,dim_index,effective_rate,delta_x"]
        for s in samples:
            step_lines.append(
                f"{s.batches_seen},{s.layer},{s.dim_index},"
                f"{_fmt(s.effective_rate)},{_fmt(s.delta_x)}"
            )
        _write_lines(step_log_path(path), step_lines)


def _write_lines(path: str, lines: list[str]) -> None:
    try:
        with open(path, "w", newline="") as f:
            f.write("\n".join(lines) + "\n")
    except OSError as e:
        raise OSError(f"cannot write metrics to {path}: {e}") from e
