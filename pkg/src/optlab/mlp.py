"""Feed-forward network: forward pass, softmax cross-entropy, backprop.

Conventions, asserted everywhere:

* batches are row-oriented -- examples are rows, features are columns;
* layer weights have shape (out_dim, in_dim), biases (out_dim, 1);
* a classification net ends in a linear layer producing logits, with
  softmax folded into the loss for numerical stability (``mlp_specs``
  builds nets that way).

Initialization is Glorot-style uniform over +-sqrt(6/(in+out)) with zero
biases -- a documented assumption, as is the absence of any input
centering. The relu derivative at exactly 0 is defined as 0.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass

import numpy as np

from .linalg import Matrix, ShapeError, SplitMix64, matmul, uniform

ACTIVATIONS = ("tanh", "relu", "logistic", "linear")


def _act(name: str, z: Matrix) -> Matrix:
    if name == "tanh":
        return np.tanh(z)
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "logistic":
        return 1.0 / (1.0 + np.exp(-z))
    if name == "linear":
        return z
    raise ValueError(f"unknown activation {name!r}; expected one of {ACTIVATIONS}")


def _act_deriv(name: str, z: Matrix, a: Matrix) -> Matrix:
    # a is the already-computed activation; tanh/logistic derivatives reuse it.
    if name == "tanh":
        return 1.0 - a * a
    if name == "relu":
        return (z > 0.0).astype(np.float64)
    if name == "logistic":
        return a * (1.0 - a)
    if name == "linear":
        return np.ones_like(z)
    raise ValueError(f"unknown activation {name!r}; expected one of {ACTIVATIONS}")


@dataclass(frozen=True)
class LayerSpec:
    in_dim: int
    out_dim: int
    activation: str

    def __post_init__(self):
        if self.in_dim < 1 or self.out_dim < 1:
            raise ValueError(f"layer dims must be >= 1, got {self.in_dim}->{self.out_dim}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(
                f"unknown activation {self.activation!r}; expected one of {ACTIVATIONS}"
            )


def mlp_specs(dims: list[int], hidden_activation: str) -> list[LayerSpec]:
    """Layer specs for a classifier: hidden activations, linear output."""
    if len(dims) < 2:
        raise ValueError("need at least an input and an output dim")
    specs = []
    for i in range(len(dims) - 1):
        act = hidden_activation if i < len(dims) - 2 else "linear"
        specs.append(LayerSpec(dims[i], dims[i + 1], act))
    return specs


@dataclass
class Layer:
    weights: Matrix  # (out_dim, in_dim)
    bias: Matrix  # (out_dim, 1)
    activation: str


@dataclass
class NetworkParams:
    layers: list[Layer]

    def clone(self) -> "NetworkParams":
        return copy.deepcopy(self)

    def tensor_shapes(self) -> list[tuple[int, int]]:
        """Shapes of all trainable tensors, weights then bias per layer."""
        out = []
        for layer in self.layers:
            out.append(layer.weights.shape)
            out.append(layer.bias.shape)
        return out


@dataclass
class ForwardCache:
    """Per-layer intermediates for one mini-batch (batch rows consistent)."""

    batch: Matrix
    pre_activations: list[Matrix]
    activations: list[Matrix]

    @property
    def logits(self) -> Matrix:
        return self.activations[-1]


def init_network(specs: list[LayerSpec], rng: SplitMix64) -> NetworkParams:
    """Glorot-uniform weights, zero biases; deterministic given the seed."""
    for prev, cur in zip(specs, specs[1:]):
        if prev.out_dim != cur.in_dim:
            raise ShapeError(
                f"layer dims do not chain: {prev.out_dim} -> {cur.in_dim}"
            )
    layers = []
    for spec in specs:
        limit = np.sqrt(6.0 / (spec.in_dim + spec.out_dim))
        w = uniform(rng, -limit, limit, spec.out_dim, spec.in_dim)
        b = np.zeros((spec.out_dim, 1))
        layers.append(Layer(w, b, spec.activation))
    return NetworkParams(layers)


def forward(net: NetworkParams, batch: Matrix) -> ForwardCache:
    """Run the batch through every layer, caching pre/post activations."""
    if batch.ndim != 2:
        raise ShapeError(f"batch must be 2-D, got ndim={batch.ndim}")
    if batch.shape[1] != net.layers[0].weights.shape[1]:
        raise ShapeError(
            f"batch has {batch.shape[1]} features but the first layer "
            f"expects {net.layers[0].weights.shape[1]}"
        )
    zs, acts = [], []
    a = batch
    for layer in net.layers:
        # bias.T broadcasts one (1, out) row over the batch; intended.
        z = matmul(a, layer.weights.T) + layer.bias.T
        a = _act(layer.activation, z)
        zs.append(z)
        acts.append(a)
    return ForwardCache(batch, zs, acts)


def softmax_cross_entropy(logits: Matrix, labels: np.ndarray) -> tuple[float, Matrix]:
    """Mean cross-entropy over the batch and its gradient wrt the logits.

    Stabilized by row-max subtraction; dlogits = (softmax - onehot) / batch.
    """
    labels = np.asarray(labels)
    n, k = logits.shape
    if labels.shape != (n,):
        raise ShapeError(f"expected {n} labels, got shape {labels.shape}")
    if labels.size and (labels.min() < 0 or labels.max() >= k):
        raise ValueError(
            f"labels must lie in [0, {k}), got range "
            f"[{labels.min()}, {labels.max()}]"
        )
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    probs = exp / exp.sum(axis=1, keepdims=True)
    rows = np.arange(n)
    # log-prob of the true class, computed from the shifted logits directly
    logp = shifted[rows, labels] - np.log(exp.sum(axis=1))
    loss = float(-logp.mean())
    dlogits = probs.copy()
    dlogits[rows, labels] -= 1.0
    dlogits /= n
    return loss, dlogits


def backward(
    net: NetworkParams, cache: ForwardCache, dlogits: Matrix
) -> list[tuple[Matrix, Matrix]]:
    """Reverse-mode gradients, one (dweights, dbias) pair per layer."""
    if len(cache.pre_activations) != len(net.layers):
        raise ShapeError(
            f"cache has {len(cache.pre_activations)} layers, net has {len(net.layers)}"
        )
    if dlogits.shape != cache.logits.shape:
        raise ShapeError(
            f"dlogits shape {dlogits.shape} does not match logits "
            f"{cache.logits.shape}"
        )
    for layer, z in zip(net.layers, cache.pre_activations):
        if z.shape[1] != layer.weights.shape[0]:
            raise ShapeError("cache was produced by a different network")

    grads: list[tuple[Matrix, Matrix]] = [None] * len(net.layers)  # type: ignore
    d_act = dlogits
    for i in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[i]
        z, a = cache.pre_activations[i], cache.activations[i]
        dz = d_act * _act_deriv(layer.activation, z, a)
        layer_input = cache.batch if i == 0 else cache.activations[i - 1]
        dw = matmul(dz.T, layer_input)
        db = dz.sum(axis=0)[:, None]
        grads[i] = (dw, db)
        if i > 0:
            d_act = matmul(dz, layer.weights)
    return grads


def _param(net: NetworkParams, layer: int, kind: str) -> Matrix:
    if not 0 <= layer < len(net.layers):
        raise IndexError(f"layer {layer} out of range for {len(net.layers)} layers")
    if kind == "weights":
        return net.layers[layer].weights
    if kind == "bias":
        return net.layers[layer].bias
    raise ValueError(f"kind must be 'weights' or 'bias', got {kind!r}")


def numerical_gradient(
    net: NetworkParams,
    batch: Matrix,
    labels: np.ndarray,
    param_coord: tuple[int, str, int, int],
    h: float,
) -> float:
    """Central finite difference of the loss along one parameter coordinate.

    param_coord is (layer_index, 'weights'|'bias', row, col). The parameter
    is perturbed in place and restored, so the net is unchanged on return.
    """
    if not h > 0.0:
        raise ValueError(f"h must be > 0, got {h}")
    layer, kind, i, j = param_coord
    tensor = _param(net, layer, kind)
    if not (0 <= i < tensor.shape[0] and 0 <= j < tensor.shape[1]):
        raise IndexError(
            f"coordinate ({i}, {j}) out of range for shape {tensor.shape}"
        )
    original = tensor[i, j]
    try:
        tensor[i, j] = original + h
        loss_plus, _ = softmax_cross_entropy(forward(net, batch).logits, labels)
        tensor[i, j] = original - h
        loss_minus, _ = softmax_cross_entropy(forward(net, batch).logits, labels)
    finally:
        tensor[i, j] = original
    return (loss_plus - loss_minus) / (2.0 * h)


def gradient_check(
    net: NetworkParams,
    batch: Matrix,
    labels: np.ndarray,
    rng: SplitMix64,
    num_coords: int = 20,
    h: float = 1e-5,
    relu_kink_tol: float = 1e-4,
) -> tuple[float, list[tuple[tuple[int, str, int, int], float, float, float]]]:
    """Backprop vs central finite differences at random coordinates.

    Returns the max relative error and per-coordinate rows of
    (coord, analytic, numeric, relative_error). Relu coordinates whose
    unit has a pre-activation within ``relu_kink_tol`` of 0 for some
    example are resampled: the loss is not differentiable across the kink.
    """
    cache = forward(net, batch)
    _, dlogits = softmax_cross_entropy(cache.logits, labels)
    analytic = backward(net, cache, dlogits)

    catalog = []  # (layer, kind, shape)
    for li, layer in enumerate(net.layers):
        catalog.append((li, "weights", layer.weights.shape))
        catalog.append((li, "bias", layer.bias.shape))
    sizes = [s[0] * s[1] for _, _, s in catalog]
    total = sum(sizes)

    rows = []
    attempts = 0
    while len(rows) < num_coords and attempts < 100 * num_coords:
        attempts += 1
        flat = rng.integer(total)
        t = 0
        while flat >= sizes[t]:
            flat -= sizes[t]
            t += 1
        layer, kind, shape = catalog[t]
        i, j = divmod(flat, shape[1])
        if net.layers[layer].activation == "relu":
            unit_z = cache.pre_activations[layer][:, i]
            if np.abs(unit_z).min() < relu_kink_tol:
                continue
        numeric = numerical_gradient(net, batch, labels, (layer, kind, i, j), h)
        a = analytic[layer][0 if kind == "weights" else 1][i, j]
        rel = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
        rows.append(((layer, kind, i, j), float(a), float(numeric), float(rel)))
    if not rows:
        raise RuntimeError("could not sample any admissible coordinates")
    return max(r[3] for r in rows), rows
