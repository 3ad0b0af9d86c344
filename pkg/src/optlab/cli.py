"""Command-line interface.

Subcommands:

* ``train --config cfg.json``    one training run -> metrics.csv
  (plus metrics_steps.csv when step-size logging is enabled)
* ``sweep --config cfg.json``    hyperparameter grid -> sweep.csv
* ``simulate --config cfg.json`` parameter-server simulation -> sim_metrics.csv
* ``gradcheck``                  backprop vs finite differences, nonzero
  exit status on failure

Config keys mirror the TrainConfig / SimConfig fields (lower_snake_case);
``--out`` picks the output directory and ``--seed`` overrides the config
seed. See the README for full config examples.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .data import Dataset, load_idx, synthetic_dataset
from .harness import (
    OptimizerConfig,
    TrainConfig,
    sweep_grid,
    train_run,
    write_metrics_csv,
)
from .distsim import SimConfig, run_sim
from .linalg import SplitMix64, derive_seed
from .mlp import LayerSpec, gradient_check, init_network, mlp_specs
from .optim import Hyperparams


def _architecture(spec) -> list[LayerSpec]:
    if isinstance(spec, dict):
        return mlp_specs(spec["dims"], spec.get("hidden_activation", "tanh"))
    return [
        LayerSpec(s["in_dim"], s["out_dim"], s["activation"]) for s in spec
    ]


def _optimizer(spec: dict) -> OptimizerConfig:
    return OptimizerConfig(
        method=spec["method"],
        eta=spec.get("eta", 1.0),
        rho=spec.get("rho", 0.95),
        epsilon=spec.get("epsilon", 1e-6),
    )


def _datasets(spec: dict) -> tuple[Dataset, Dataset]:
    kind = spec.get("kind", "idx")
    if kind == "idx":
        train = load_idx(spec["train_images"], spec["train_labels"])
        test = load_idx(spec["test_images"], spec["test_labels"])
        return train, test
    if kind == "synthetic":
        seed = spec.get("seed", 0)
        train = synthetic_dataset(spec.get("train_n", 2000), SplitMix64(seed))
        test = synthetic_dataset(
            spec.get("test_n", 500), SplitMix64(derive_seed(seed, 1))
        )
        return train, test
    raise ValueError(f"unknown data kind {kind!r}; expected 'idx' or 'synthetic'")


def _load_config(path: str) -> dict:
    with open(path) as f:
        return json.load(f)


def _train_config(cfg: dict, seed_override: int | None) -> TrainConfig:
    return TrainConfig(
        architecture=_architecture(cfg["architecture"]),
        optimizer=_optimizer(cfg["optimizer"]),
        batch_size=cfg["batch_size"],
        epochs=cfg["epochs"],
        seed=seed_override if seed_override is not None else cfg["seed"],
        eval_every=cfg.get("eval_every"),
        log_step_sizes=cfg.get("log_step_sizes", False),
        log_every=cfg.get("log_every", 60),
        log_dims_per_matrix=cfg.get("log_dims_per_matrix", 10),
    )


def _cmd_train(args) -> int:
    cfg = _load_config(args.config)
    config = _train_config(cfg, args.seed)
    data, test = _datasets(cfg["data"])
    records = train_run(config, data, test)
    out = os.path.join(args.out, "metrics.csv")
    write_metrics_csv(records, out)
    final = records[-1]
    print(
        f"wrote {out}: {len(records)} records, final test error "
        f"{final.test_error_percent:.2f}%"
        + (" (diverged)" if final.diverged else "")
    )
    return 0


def _cmd_sweep(args) -> int:
    cfg = _load_config(args.config)
    base = _train_config(cfg, args.seed)
    data, test = _datasets(cfg["data"])
    grid = {
        method: [
            Hyperparams(
                eta=cell.get("eta", 1.0),
                rho=cell.get("rho", 0.95),
                epsilon=cell.get("epsilon", 1e-6),
            )
            for cell in cells
        ]
        for method, cells in cfg["grid"].items()
    }
    rows = sweep_grid(base, grid, data, test)
    out = os.path.join(args.out, "sweep.csv")
    write_metrics_csv(rows, out)
    print(f"wrote {out}: {len(rows)} rows")
    return 0


def _cmd_simulate(args) -> int:
    cfg = _load_config(args.config)
    config = SimConfig(
        architecture=_architecture(cfg["architecture"]),
        optimizer=_optimizer(cfg["optimizer"]),
        replicas=cfg["replicas"],
        staleness=cfg["staleness"],
        batch_size=cfg["batch_size"],
        total_steps=cfg["total_steps"],
        seed=args.seed if args.seed is not None else cfg["seed"],
        eval_every=cfg.get("eval_every"),
    )
    data, test = _datasets(cfg["data"])
    records = run_sim(config, data, test)
    out = os.path.join(args.out, "sim_metrics.csv")
    write_metrics_csv(records, out)
    final = records[-1]
    print(
        f"wrote {out}: {len(records)} records, final test error "
        f"{final.test_error_percent:.2f}%"
        + (" (diverged)" if final.diverged else "")
    )
    return 0


def _cmd_gradcheck(args) -> int:
    seed = args.seed if args.seed is not None else 2024
    threshold = 1e-5
    failed = False
    for i, activation in enumerate(("tanh", "relu", "logistic")):
        rng = SplitMix64(derive_seed(seed, i))
        net = init_network(mlp_specs([4, 3, 2], activation), rng)
        batch = rng.normal(8, 4)
        labels = rng.next_uint64(8) % 2
        max_err, _ = gradient_check(
            net, batch, labels.astype(int), rng, num_coords=20, h=1e-5
        )
        status = "ok" if max_err < threshold else "FAIL"
        print(f"gradcheck {activation:8s} max relative error {max_err:.3e}  {status}")
        failed = failed or max_err >= threshold
    return 1 if failed else 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="optlab", description="optimizer library training harness"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for name, fn, needs_config in (
        ("train", _cmd_train, True),
        ("sweep", _cmd_sweep, True),
        ("simulate", _cmd_simulate, True),
        ("gradcheck", _cmd_gradcheck, False),
    ):
        p = sub.add_parser(name)
        if needs_config:
            p.add_argument("--config", required=True, help="JSON config file")
            p.add_argument("--out", default=".", help="output directory for CSVs")
        p.add_argument("--seed", type=int, default=None, help="override config seed")
        p.set_defaults(fn=fn)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
