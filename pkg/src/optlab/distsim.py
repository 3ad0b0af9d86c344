"""Deterministic simulation of replica training against a parameter server.

R replicas each own a shard of the dataset and compute gradients against a
snapshot of the server parameters; the server applies one optimizer step
per received gradient (a single shared optimizer state) and bumps its
version. Snapshots may lag the server by at most S applied steps: a
replica re-reads parameters whenever its staleness would exceed S, and
the bound is re-checked at apply time as a bug trap.

There is no networking: a single-threaded event loop picks replicas in
seeded round-robin order with bounded random jitter, so every run is
reproducible. With R=1 and S=0 the loop degenerates to sequential
training and is bit-identical to ``harness.train_run`` for the same seed,
which is the primary correctness oracle.

Metrics follow the harness conventions; one "epoch" is one dataset-sized
count of applied gradients, so runs compare at equal gradient counts.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, make_batches
from .harness import (
    DIVERGENCE_ERROR_PERCENT,
    MetricsRecord,
    OptimizerConfig,
    evaluate,
)
from .linalg import Matrix, ShapeError, SplitMix64, derive_seed
from .mlp import LayerSpec, NetworkParams, backward, forward, init_network, softmax_cross_entropy
from .optim import NonFiniteGradientError, Optimizer


class StalenessError(RuntimeError):
    """Internal invariant violation: a gradient older than the bound."""


@dataclass(frozen=True)
class SimConfig:
    architecture: list[LayerSpec]
    optimizer: OptimizerConfig
    replicas: int
    staleness: int
    batch_size: int
    total_steps: int
    seed: int
    eval_every: int | None = None  # applied steps; None = one dataset-equivalent
    shards: list[np.ndarray] | None = None  # None = contiguous split

    def __post_init__(self):
        if self.replicas < 1:
            raise ValueError(f"replicas must be >= 1, got {self.replicas}")
        if self.staleness < 0:
            raise ValueError(f"staleness must be >= 0, got {self.staleness}")
        if self.batch_size < 1 or self.total_steps < 1:
            raise ValueError("batch_size and total_steps must be >= 1")


@dataclass
class GradMessage:
    replica_id: int
    grads: list[tuple[Matrix, Matrix]]  # (dweights, dbias) per layer
    snapshot_version: int
    loss: float


@dataclass
class ParameterServer:
    net: NetworkParams
    optimizer: Optimizer
    staleness_bound: int
    version: int = 0


def shard_indices(n: int, replicas: int) -> list[np.ndarray]:
    """Contiguous partition of [0, n); earlier shards take the remainder."""
    if replicas > n:
        raise ValueError(f"cannot shard {n} examples over {replicas} replicas")
    return [np.asarray(part) for part in np.array_split(np.arange(n), replicas)]


def replica_step(
    snapshot: NetworkParams,
    xb: Matrix,
    yb: np.ndarray,
    replica_id: int = 0,
    snapshot_version: int = 0,
) -> GradMessage:
    """Pure gradient computation on a parameter snapshot."""
    cache = forward(snapshot, xb)
    loss, dlogits = softmax_cross_entropy(cache.logits, yb)
    grads = backward(snapshot, cache, dlogits) if np.isfinite(loss) else []
    return GradMessage(replica_id, grads, snapshot_version, loss)


def server_apply(server: ParameterServer, msg: GradMessage) -> int:
    """Apply one optimizer step from a gradient message; returns the new version."""
    staleness = server.version - msg.snapshot_version
    if staleness < 0 or staleness > server.staleness_bound:
        raise StalenessError(
            f"message staleness {staleness} violates bound "
            f"{server.staleness_bound} (server v{server.version}, "
            f"snapshot v{msg.snapshot_version})"
        )
    if len(msg.grads) != len(server.net.layers):
        raise ShapeError(
            f"message has {len(msg.grads)} layer gradients, server has "
            f"{len(server.net.layers)} layers"
        )
    for layer, (dw, db) in zip(server.net.layers, msg.grads):
        if dw.shape != layer.weights.shape or db.shape != layer.bias.shape:
            raise ShapeError(
                f"gradient shapes ({dw.shape}, {db.shape}) do not match layer "
                f"({layer.weights.shape}, {layer.bias.shape})"
            )
    flat = [g for pair in msg.grads for g in pair]
    deltas = server.optimizer.step(flat)
    for layer, (dw, db) in zip(server.net.layers, zip(deltas[0::2], deltas[1::2])):
        layer.weights += dw
        layer.bias += db
    server.version += 1
    return server.version


@dataclass
class _Replica:
    """Shard cursor plus the current parameter snapshot."""

    replica_id: int
    shard: np.ndarray
    batch_size: int
    master_seed: int
    snapshot: NetworkParams
    snapshot_version: int = 0
    local_epoch: int = 0
    _queue: list[np.ndarray] = field(default_factory=list)

    def next_batch(self) -> np.ndarray:
        if not self._queue:
            self.local_epoch += 1
            plan = make_batches(
                len(self.shard),
                self.batch_size,
                SplitMix64(derive_seed(self.master_seed, self.replica_id, self.local_epoch)),
            )
            self._queue = [self.shard[idx] for idx in plan.batches()]
        return self._queue.pop(0)


def run_sim(config: SimConfig, data: Dataset, test: Dataset) -> list[MetricsRecord]:
    """Event-driven replica training; one MetricsRecord per eval point."""
    n = len(data)
    if config.shards is not None:
        shards = [np.asarray(s) for s in config.shards]
        if len(shards) != config.replicas:
            raise ValueError(
                f"{len(shards)} shards for {config.replicas} replicas"
            )
        flat = np.sort(np.concatenate(shards))
        if len(flat) != n or not np.array_equal(flat, np.arange(n)):
            raise ValueError("shards must partition the dataset exactly")
    else:
        shards = shard_indices(n, config.replicas)

    net = init_network(config.architecture, SplitMix64(config.seed))
    server = ParameterServer(
        net=net,
        optimizer=Optimizer.for_shapes(
            config.optimizer.method, config.optimizer.hyperparams(), net.tensor_shapes()
        ),
        staleness_bound=config.staleness,
    )
    replicas = [
        _Replica(
            replica_id=r,
            shard=shards[r],
            batch_size=config.batch_size,
            master_seed=config.seed,
            snapshot=server.net.clone(),
        )
        for r in range(config.replicas)
    ]
    sched_rng = SplitMix64(derive_seed(config.seed, -1))
    jitter_bound = min(config.staleness, config.replicas - 1) + 1

    epoch_equiv = (n + config.batch_size - 1) // config.batch_size
    eval_every = config.eval_every or epoch_equiv
    records: list[MetricsRecord] = []
    window_losses: list[float] = []
    blew_up = False

    def emit(batches_seen: int) -> None:
        epoch = (batches_seen + epoch_equiv - 1) // epoch_equiv
        err = evaluate(server.net, test)
        records.append(
            MetricsRecord(
                epoch=epoch,
                batches_seen=batches_seen,
                train_loss=float(np.mean(window_losses)) if window_losses else float("nan"),
                test_error_percent=err,
                diverged=blew_up or (epoch >= 2 and err > DIVERGENCE_ERROR_PERCENT),
            )
        )
        window_losses.clear()

    for event in range(config.total_steps):
        jitter = sched_rng.integer(jitter_bound)
        rep = replicas[(event + jitter) % config.replicas]
        if server.version - rep.snapshot_version > config.staleness:
            rep.snapshot = server.net.clone()
            rep.snapshot_version = server.version
        idx = rep.next_batch()
        msg = replica_step(
            rep.snapshot,
            data.inputs[idx],
            data.labels[idx],
            replica_id=rep.replica_id,
            snapshot_version=rep.snapshot_version,
        )
        window_losses.append(msg.loss)
        if not np.isfinite(msg.loss):
            blew_up = True
            emit(server.version + 1)  # count the batch that blew up
            return records
        try:
            server_apply(server, msg)
        except NonFiniteGradientError:
            blew_up = True
            emit(server.version + 1)
            return records
        if server.version % eval_every == 0:
            emit(server.version)
    return records
