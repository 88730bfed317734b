"""Function approximators and optimizers for the self-prediction agent.

Behaviour vectors are plain 1-d float64 arrays. The value function is linear,
``v(b; W) = W b``, and learns the discounted sum of future behaviour with
semi-gradient TD(0). The policy is a stack of affine layers (linear or ReLU
between layers) followed by RMSNorm.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

ACTIVATIONS = ("linear", "relu")
OPTIMIZERS = ("rmsprop", "adam", "sgd")
RMSNORM_EPS = 1e-8


class NonFiniteError(FloatingPointError):
    """A parameter, gradient or behaviour stopped being finite."""

    def __init__(self, what: str, step: Optional[int] = None):
        self.what = what
        self.step = step
        msg = f"non-finite {what}" if step is None else f"non-finite {what} at step {step}"
        super().__init__(msg)


@dataclass(frozen=True)
class OptimizerConfig:
    kind: str = "rmsprop"
    step_size: float = 1e-3
    decay: float = 0.99
    epsilon: float = 1e-8
    beta1: float = 0.9  # adam only

    def __post_init__(self):
        errors = self.validate()
        if errors:
            raise ValueError("; ".join(errors))

    def validate(self) -> list[str]:
        errors = []
        if self.kind not in OPTIMIZERS:
            errors.append(f"kind must be one of {OPTIMIZERS}, got {self.kind!r}")
        if not self.step_size > 0:
            errors.append(f"step_size must be > 0, got {self.step_size}")
        if not 0 < self.decay < 1:
            errors.append(f"decay must be in (0, 1), got {self.decay}")
        if not self.epsilon > 0:
            errors.append(f"epsilon must be > 0, got {self.epsilon}")
        if not 0 <= self.beta1 < 1:
            errors.append(f"beta1 must be in [0, 1), got {self.beta1}")
        return errors


def optimizer_update(cfg: OptimizerConfig, params, direction, state=None):
    """Move ``params`` along the ascent ``direction``; returns ``(params, state)``.

    Inputs are left untouched. ``state`` is ``None`` for a fresh optimizer.
    """
    params = [np.asarray(p, dtype=np.float64) for p in params]
    direction = [np.asarray(g, dtype=np.float64) for g in direction]
    if len(params) != len(direction):
        raise ValueError("params and direction differ in length")
    for g in direction:
        if not np.all(np.isfinite(g)):
            raise NonFiniteError("gradient")

    if cfg.kind == "sgd":
        return [p + cfg.step_size * g for p, g in zip(params, direction)], {"kind": "sgd", "t": _t(state) + 1}

    if state is None:
        state = {"kind": cfg.kind, "t": 0, "v": [np.zeros_like(p) for p in params]}
        if cfg.kind == "adam":
            state["m"] = [np.zeros_like(p) for p in params]
    elif state.get("kind") != cfg.kind:
        raise ValueError(f"optimizer state is for {state.get('kind')!r}, config is {cfg.kind!r}")

    t = state["t"] + 1
    v = [cfg.decay * vi + (1.0 - cfg.decay) * g * g for vi, g in zip(state["v"], direction)]
    if cfg.kind == "rmsprop":
        new = [p + cfg.step_size * g / (np.sqrt(vi) + cfg.epsilon) for p, g, vi in zip(params, direction, v)]
        return new, {"kind": "rmsprop", "t": t, "v": v}

    m = [cfg.beta1 * mi + (1.0 - cfg.beta1) * g for mi, g in zip(state["m"], direction)]
    mhat_c = 1.0 - cfg.beta1**t
    vhat_c = 1.0 - cfg.decay**t
    new = [
        p + cfg.step_size * (mi / mhat_c) / (np.sqrt(vi / vhat_c) + cfg.epsilon)
        for p, mi, vi in zip(params, m, v)
    ]
    return new, {"kind": "adam", "t": t, "m": m, "v": v}


def _t(state):
    return 0 if state is None else state.get("t", 0)


# value function


@dataclass
class ValueParams:
    W: np.ndarray
    opt_state: Optional[dict] = None

    def __post_init__(self):
        self.W = np.asarray(self.W, dtype=np.float64)
        if self.W.ndim != 2 or self.W.shape[0] != self.W.shape[1]:
            raise ValueError(f"value weights must be square, got {self.W.shape}")

    @property
    def d(self) -> int:
        return self.W.shape[0]


def _weights(W):
    return W.W if isinstance(W, ValueParams) else np.asarray(W, dtype=np.float64)


def _check_vec(b, d, name="b"):
    b = np.asarray(b, dtype=np.float64)
    if b.shape != (d,):
        raise ValueError(f"{name} must have shape ({d},), got {b.shape}")
    return b


def value_predict(W, b) -> np.ndarray:
    W = _weights(W)
    return W @ _check_vec(b, W.shape[1])


def td_error(W, b_prev, b_next, gamma: float) -> np.ndarray:
    """Vector TD error ``b_next + gamma W b_next - W b_prev``."""
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"gamma must be in [0, 1], got {gamma}")
    W = _weights(W)
    b_prev = _check_vec(b_prev, W.shape[1], "b_prev")
    b_next = _check_vec(b_next, W.shape[1], "b_next")
    return b_next + gamma * (W @ b_next) - W @ b_prev


def value_update_inner(W, b_prev, b_next, gamma: float, eta: float) -> np.ndarray:
    """One plain semi-gradient TD(0) step; returns fresh weights."""
    if eta < 0:
        raise ValueError(f"eta must be >= 0, got {eta}")
    Wm = _weights(W)
    delta = td_error(Wm, b_prev, b_next, gamma)
    return Wm + eta * np.outer(delta, b_prev)


def value_update_committed(value: ValueParams, b_prev, b_next, gamma: float, opt: OptimizerConfig):
    """TD(0) step on a real transition through the configured optimizer.

    Returns ``(new ValueParams, td error)``.
    """
    delta = td_error(value.W, b_prev, b_next, gamma)
    direction = np.outer(delta, np.asarray(b_prev, dtype=np.float64))
    (W,), state = optimizer_update(opt, [value.W], [direction], value.opt_state)
    if not np.all(np.isfinite(W)):
        raise NonFiniteError("value weights")
    return ValueParams(W, state), delta


def init_value(d: int, seed) -> ValueParams:
    """Gaussian weights with standard deviation ``1/d``."""
    rng = np.random.default_rng(seed)
    return ValueParams(rng.normal(0.0, 1.0 / d, size=(d, d)))


# policy


@dataclass(frozen=True)
class PolicySpec:
    d: int
    width: int = 64
    depth: int = 2
    activation: str = "linear"
    bias: bool = True

    def __post_init__(self):
        errors = self.validate()
        if errors:
            raise ValueError("; ".join(errors))

    def validate(self) -> list[str]:
        errors = []
        if self.d < 1:
            errors.append(f"d must be >= 1, got {self.d}")
        if self.width < 1:
            errors.append(f"width must be >= 1, got {self.width}")
        if self.depth < 1:
            errors.append(f"depth must be >= 1, got {self.depth}")
        if self.activation not in ACTIVATIONS:
            errors.append(f"activation must be one of {ACTIVATIONS}, got {self.activation!r}")
        return errors

    @property
    def layer_shapes(self) -> list[tuple[int, int]]:
        dims = [self.d] + [self.width] * (self.depth - 1) + [self.d]
        return [(dims[i + 1], dims[i]) for i in range(self.depth)]


@dataclass
class PolicyParams:
    spec: PolicySpec
    weights: list
    biases: Optional[list] = None
    opt_state: Optional[dict] = None

    def __post_init__(self):
        self.weights = [np.asarray(w, dtype=np.float64) for w in self.weights]
        shapes = self.spec.layer_shapes
        if [w.shape for w in self.weights] != shapes:
            raise ValueError(f"layer shapes {[w.shape for w in self.weights]} != {shapes}")
        if self.spec.bias:
            if self.biases is None:
                self.biases = [np.zeros(s[0]) for s in shapes]
            self.biases = [np.asarray(c, dtype=np.float64) for c in self.biases]
            if [c.shape for c in self.biases] != [(s[0],) for s in shapes]:
                raise ValueError("bias shapes do not match layers")
        elif self.biases is not None:
            raise ValueError("spec has bias=False but biases were given")

    def flat(self) -> list[np.ndarray]:
        """Parameters in a fixed order: all weights, then all biases."""
        return list(self.weights) + (list(self.biases) if self.spec.bias else [])

    def with_flat(self, arrays, opt_state=None) -> "PolicyParams":
        D = self.spec.depth
        arrays = list(arrays)
        biases = arrays[D:] if self.spec.bias else None
        return PolicyParams(self.spec, arrays[:D], biases, opt_state)

    @property
    def activation(self) -> str:
        return self.spec.activation


def rmsnorm(x, epsilon: float = RMSNORM_EPS) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return x / np.sqrt(np.mean(x * x) + epsilon)


def policy_forward(theta: PolicyParams, b, epsilon: float = RMSNORM_EPS) -> np.ndarray:
    h = _check_vec(b, theta.spec.d)
    relu = theta.spec.activation == "relu"
    last = theta.spec.depth - 1
    for i, A in enumerate(theta.weights):
        h = A @ h
        if theta.spec.bias:
            h = h + theta.biases[i]
        if relu and i < last:
            h = np.maximum(h, 0.0)
    return rmsnorm(h, epsilon)


def init_policy(spec: PolicySpec, seed) -> PolicyParams:
    """Gaussian weights with standard deviation ``1/sqrt(fan_in)``, zero biases."""
    rng = np.random.default_rng(seed)
    weights = [rng.normal(0.0, 1.0 / np.sqrt(n_in), size=(n_out, n_in)) for n_out, n_in in spec.layer_shapes]
    return PolicyParams(spec, weights)


def policy_step(theta: PolicyParams, grads, opt: OptimizerConfig) -> PolicyParams:
    """One optimizer step that ascends the objective whose gradient is ``grads``."""
    new, state = optimizer_update(opt, theta.flat(), grads, theta.opt_state)
    for p in new:
        if not np.all(np.isfinite(p)):
            raise NonFiniteError("policy parameters")
    return theta.with_flat(new, state)
