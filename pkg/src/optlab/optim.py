"""Per-dimension first-order update rules.

Five methods share one state record and one hyperparameter record. Each
``step_*`` function consumes a gradient matrix ``g`` and returns the update
``delta`` to be *added* to the parameters (``x <- x + delta``); applying it
is the caller's job so that deltas can be logged before use.

    sgd        delta = -eta * g
    momentum   delta = rho * velocity - eta * g
    adagrad    gsum2 += g^2;  delta = -eta * g / sqrt(gsum2)
    rms        eg2 = rho*eg2 + (1-rho)*g^2;  delta = -eta * g / sqrt(eg2 + eps)
    adadelta   eg2 = rho*eg2 + (1-rho)*g^2
               delta = -sqrt(edx2 + eps) / sqrt(eg2 + eps) * g
               edx2 = rho*edx2 + (1-rho)*delta^2

ADADELTA needs no learning rate: the running RMS of past updates over the
running RMS of recent gradients supplies the per-dimension step size, and
the numerator intentionally lags the denominator by one step. The same
``eps`` appears inside both square roots; it bootstraps the first step and
keeps steps alive once gradients and updates shrink. The accumulation
window is controlled only through the decay constant ``rho`` (there is no
separate window-length knob), with ``rho = 0`` degenerating to an
instantaneous RMS and ``rho = 1`` rejected outright.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import Matrix, ShapeError

METHODS = ("sgd", "momentum", "adagrad", "rms", "adadelta")


class NonFiniteGradientError(ValueError):
    """A gradient entry is NaN or infinite."""


@dataclass
class Hyperparams:
    """Shared optimizer hyperparameters.

    eta is the global learning rate (ignored by adadelta), rho the decay
    constant of the exponential averages (also the momentum coefficient),
    epsilon the conditioning constant inside the square roots.
    """

    eta: float = 1.0
    rho: float = 0.95
    epsilon: float = 1e-6

    def __post_init__(self):
        if not 0.0 <= self.rho < 1.0:
            raise ValueError(f"rho must be in [0, 1), got {self.rho}")
        if not self.epsilon > 0.0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")
        if not np.isfinite(self.eta):
            raise ValueError(f"eta must be finite, got {self.eta}")


@dataclass
class PerDimState:
    """Per-parameter optimizer accumulators, one instance per tensor.

    eg2/edx2 are the decaying averages of squared gradients and squared
    updates, velocity the momentum buffer, gsum2 the monotone squared-
    gradient sum. All start at exactly zero and stay >= 0.
    """

    eg2: Matrix
    edx2: Matrix
    velocity: Matrix
    gsum2: Matrix
    t: int = 0

    @classmethod
    def for_shape(cls, rows: int, cols: int) -> "PerDimState":
        shape = (rows, cols)
        return cls(
            eg2=np.zeros(shape),
            edx2=np.zeros(shape),
            velocity=np.zeros(shape),
            gsum2=np.zeros(shape),
        )


def _check_gradient(g: Matrix, state: PerDimState | None = None) -> None:
    bad = ~np.isfinite(g)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise NonFiniteGradientError(
            f"non-finite gradient at flat dimension {i}: {g.flat[i]!r}"
        )
    if state is not None and state.eg2.shape != g.shape:
        raise ShapeError(
            f"optimizer state shape {state.eg2.shape} does not match "
            f"gradient shape {g.shape}"
        )


def _require_eta(h: Hyperparams, method: str) -> None:
    if not h.eta > 0.0:
        raise ValueError(f"{method} requires eta > 0, got {h.eta}")


def step_sgd(g: Matrix, h: Hyperparams) -> Matrix:
    """Fixed-rate step: delta = -eta * g."""
    _check_gradient(g)
    _require_eta(h, "sgd")
    return -h.eta * g


def step_momentum(state: PerDimState, g: Matrix, h: Hyperparams) -> Matrix:
    """Decaying sum of past updates: delta = rho*velocity - eta*g."""
    _check_gradient(g, state)
    _require_eta(h, "momentum")
    delta = h.rho * state.velocity - h.eta * g
    state.velocity = delta.copy()
    state.t += 1
    return delta


def step_adagrad(state: PerDimState, g: Matrix, h: Hyperparams) -> Matrix:
    """Accumulated-norm scaling: delta = -eta * g / sqrt(sum of g^2).

    A dimension whose gradient has always been zero has gsum2 = 0; its
    update is defined as 0 (the 0/0 limit) rather than NaN.
    """
    _check_gradient(g, state)
    _require_eta(h, "adagrad")
    state.gsum2 += g * g
    delta = np.zeros_like(g)
    live = state.gsum2 > 0.0
    delta[live] = -h.eta * g[live] / np.sqrt(state.gsum2[live])
    state.t += 1
    return delta


def step_rms(state: PerDimState, g: Matrix, h: Hyperparams) -> Matrix:
    """Windowed-RMS scaling: delta = -eta * g / sqrt(eg2 + eps)."""
    _check_gradient(g, state)
    _require_eta(h, "rms")
    state.eg2 = h.rho * state.eg2 + (1.0 - h.rho) * (g * g)
    state.t += 1
    return -h.eta * g / np.sqrt(state.eg2 + h.epsilon)


def step_adadelta(state: PerDimState, g: Matrix, h: Hyperparams) -> Matrix:
    """RMS-ratio step with a one-step-lagged numerator.

    Order matters: eg2 absorbs the current gradient first, the update uses
    edx2 from the *previous* step, and only then does edx2 absorb the new
    update.
    """
    _check_gradient(g, state)
    state.eg2 = h.rho * state.eg2 + (1.0 - h.rho) * (g * g)
    delta = -np.sqrt(state.edx2 + h.epsilon) / np.sqrt(state.eg2 + h.epsilon) * g
    state.edx2 = h.rho * state.edx2 + (1.0 - h.rho) * (delta * delta)
    state.t += 1
    return delta


def step(method: str, state: PerDimState, g: Matrix, h: Hyperparams) -> Matrix:
    """Dispatch one update step by method name."""
    if method == "sgd":
        out = step_sgd(g, h)
        state.t += 1
        return out
    if method == "momentum":
        return step_momentum(state, g, h)
    if method == "adagrad":
        return step_adagrad(state, g, h)
    if method == "rms":
        return step_rms(state, g, h)
    if method == "adadelta":
        return step_adadelta(state, g, h)
    raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")


def effective_rates(state: PerDimState, h: Hyperparams, method: str) -> Matrix:
    """Per-dimension positive multiplier applied to -g at the next step.

    Computed from the current accumulator values:

        sgd/momentum  constant eta (the velocity term is not a multiple of g)
        adagrad       eta / sqrt(gsum2), +inf where nothing has accumulated
        rms           eta / sqrt(eg2 + eps)
        adadelta      sqrt(edx2 + eps) / sqrt(eg2 + eps)

    A fresh adadelta state reports exactly 1 everywhere, and long runs of
    zero gradients decay both accumulators so the ratio returns to 1.
    """
    if method in ("sgd", "momentum"):
        return np.full_like(state.eg2, h.eta)
    if method == "adagrad":
        rates = np.full_like(state.gsum2, np.inf)
        live = state.gsum2 > 0.0
        rates[live] = h.eta / np.sqrt(state.gsum2[live])
        return rates
    if method == "rms":
        return h.eta / np.sqrt(state.eg2 + h.epsilon)
    if method == "adadelta":
        return np.sqrt(state.edx2 + h.epsilon) / np.sqrt(state.eg2 + h.epsilon)
    raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")


@dataclass
class Optimizer:
    """Bundles a method, hyperparameters, and one state per parameter tensor."""

    method: str
    hyperparams: Hyperparams
    states: list[PerDimState] = field(default_factory=list)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(
                f"unknown method {self.method!r}; expected one of {METHODS}"
            )

    @classmethod
    def for_shapes(
        cls, method: str, h: Hyperparams, shapes: list[tuple[int, int]]
    ) -> "Optimizer":
        return cls(method, h, [PerDimState.for_shape(*s) for s in shapes])

    def step(self, grads: list[Matrix]) -> list[Matrix]:
        if len(grads) != len(self.states):
            raise ShapeError(
                f"expected {len(self.states)} gradient tensors, got {len(grads)}"
            )
        return [
            step(self.method, s, g, self.hyperparams)
            for s, g in zip(self.states, grads)
        ]

    def rates(self) -> list[Matrix]:
        return [
            effective_rates(s, self.hyperparams, self.method) for s in self.states
        ]
