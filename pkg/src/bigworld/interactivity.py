"""Agent-relative complexity and interactivity on imagined rollouts.

A rollout iterates the policy ``T`` times from the current behaviour. Along
it, TD errors are measured twice: under a frozen copy of the value weights
(static branch) and under a copy that takes a semi-gradient TD(0) step after
every transition (dynamic branch). The summed squared static errors estimate
unconditional complexity, the dynamic ones conditional complexity, and their
difference is the interactivity the policy is trained to maximise.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Graph, GraphNode, backward
from .models import (
    RMSNORM_EPS,
    NonFiniteError,
    PolicyParams,
    ValueParams,
    policy_forward,
    policy_step,
    td_error,
)

__all__ = [
    "RolloutTrace",
    "InteractivityEstimate",
    "Objective",
    "rollout",
    "static_complexity",
    "dynamic_complexity",
    "interactivity_estimate",
    "policy_objective",
    "policy_step",
]


@dataclass
class RolloutTrace:
    behaviours: list  # T + 1 vectors, behaviours[0] is the start
    static_deltas: list  # T vectors under the frozen reference weights
    dynamic_deltas: list  # T vectors along the inner-updated chain
    value_snapshots: list  # W_0 (= reference) .. W_T
    horizon: int
    gamma: float
    eta: float


@dataclass(frozen=True)
class InteractivityEstimate:
    static_complexity: float
    dynamic_complexity: float
    interactivity: float


def _check_args(horizon, gamma, eta):
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"gamma must be in [0, 1], got {gamma}")
    if eta < 0:
        raise ValueError(f"eta must be >= 0, got {eta}")


def _ref_weights(W_ref):
    return W_ref.W if isinstance(W_ref, ValueParams) else np.asarray(W_ref, dtype=np.float64)


def rollout(theta: PolicyParams, b_start, horizon: int, W_ref, gamma: float, eta: float,
            epsilon: float = RMSNORM_EPS) -> RolloutTrace:
    _check_args(horizon, gamma, eta)
    W0 = _ref_weights(W_ref).copy()
    bs = [np.asarray(b_start, dtype=np.float64)]
    for k in range(horizon):
        b = policy_forward(theta, bs[-1], epsilon)
        if not np.all(np.isfinite(b)):
            raise NonFiniteError("behaviour", k + 1)
        bs.append(b)

    static = [td_error(W0, bs[k - 1], bs[k], gamma) for k in range(1, horizon + 1)]

    W = W0
    snaps = [W0]
    dynamic = []
    for k in range(1, horizon + 1):
        delta = td_error(W, bs[k - 1], bs[k], gamma)
        dynamic.append(delta)
        W = W + eta * np.outer(delta, bs[k - 1])
        snaps.append(W)
    return RolloutTrace(bs, static, dynamic, snaps, horizon, gamma, eta)


def static_complexity(trace: RolloutTrace) -> float:
    return float(sum(np.dot(d, d) for d in trace.static_deltas))


def dynamic_complexity(trace: RolloutTrace) -> float:
    return float(sum(np.dot(d, d) for d in trace.dynamic_deltas))


def interactivity_estimate(trace: RolloutTrace) -> InteractivityEstimate:
    s = static_complexity(trace)
    dyn = dynamic_complexity(trace)
    return InteractivityEstimate(s, dyn, s - dyn)


@dataclass
class Objective:
    """A recorded objective ``J(theta)`` and handles to its parameter leaves."""

    graph: Graph
    root: GraphNode
    params: list  # leaves in PolicyParams.flat() order
    trace: RolloutTrace
    static_sq: float
    dynamic_sq: float

    @property
    def value(self) -> float:
        return float(self.root.value)

    def gradient(self) -> list:
        backward(self.graph, self.root)
        return [n.grad_slot for n in self.params]

    @property
    def estimate(self) -> InteractivityEstimate:
        return InteractivityEstimate(self.static_sq, self.dynamic_sq, self.static_sq - self.dynamic_sq)


def policy_objective(theta: PolicyParams, b_start, horizon: int, W_ref, gamma: float, eta: float,
                     detach_bootstrap: bool = False, epsilon: float = RMSNORM_EPS) -> Objective:
    """Record the rollout, both TD branches and the inner updates on a graph.

    With ``detach_bootstrap`` the ``gamma * W b_next`` term of every TD error
    is cut from the gradient; by default everything is differentiated.
    """
    _check_args(horizon, gamma, eta)
    g = Graph()
    spec = theta.spec
    Ws = [g.leaf(w, "param") for w in theta.weights]
    cs = [g.leaf(c, "param") for c in theta.biases] if spec.bias else []
    relu = spec.activation == "relu"
    last = spec.depth - 1

    b = g.const(b_start)
    if b.value.shape != (spec.d,):
        raise ValueError(f"b_start must have shape ({spec.d},), got {b.value.shape}")
    bs = [b]
    for k in range(horizon):
        h = b
        for i in range(spec.depth):
            h = g.matvec(Ws[i], h)
            if spec.bias:
                h = g.add(h, cs[i])
            if relu and i < last:
                h = g.relu(h)
        b = g.rmsnorm(h, epsilon)
        if not np.all(np.isfinite(b.value)):
            raise NonFiniteError("behaviour", k + 1)
        bs.append(b)

    def boot(p):
        return g.stopgrad(p) if detach_bootstrap else p

    # static branch: the frozen reference copy carries no gradient
    W_frozen = g.stopgrad(g.const(_ref_weights(W_ref)))
    preds = [g.matvec(W_frozen, bk) for bk in bs]
    static_terms, static_d = [], []
    for k in range(1, horizon + 1):
        delta = g.sub(g.axpy(gamma, boot(preds[k]), bs[k]), preds[k - 1])
        static_d.append(delta.value)
        static_terms.append(g.sqnorm(delta))

    # dynamic branch
    W = g.const(_ref_weights(W_ref))
    snaps = [W.value]
    dyn_terms, dyn_d = [], []
    for k in range(1, horizon + 1):
        nxt = g.matvec(W, bs[k])
        cur = g.matvec(W, bs[k - 1])
        delta = g.sub(g.axpy(gamma, boot(nxt), bs[k]), cur)
        dyn_d.append(delta.value)
        dyn_terms.append(g.sqnorm(delta))
        if k < horizon:
            W = g.add(W, g.outer(delta, bs[k - 1], eta))
            snaps.append(W.value)
        else:
            snaps.append(W.value + eta * np.outer(delta.value, bs[k - 1].value))

    root = g.total(static_terms + dyn_terms, [1.0] * horizon + [-1.0] * horizon)
    g.set_root(root)
    trace = RolloutTrace([n.value for n in bs], static_d, dyn_d, snaps, horizon, gamma, eta)
    s = float(sum(float(t.value) for t in static_terms))
    dsum = float(sum(float(t.value) for t in dyn_terms))
    return Objective(g, root, Ws + cs, trace, s, dsum)
