"""Central finite-difference checks of the policy meta-gradient."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .interactivity import policy_objective
from .models import PolicySpec, init_policy, init_value

KINK_MARGIN = 1e-3


@dataclass
class GradCheckResult:
    index: int
    d: int
    width: int
    depth: int
    horizon: int
    activation: str
    rel_error: float
    passed: bool

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"[{status}] config {self.index}: d={self.d} width={self.width} depth={self.depth} "
                f"T={self.horizon} act={self.activation} rel_err={self.rel_error:.3e}")


def finite_difference(f, arrays, h: float = 1e-5) -> list:
    """Central differences of scalar ``f(list_of_arrays)`` w.r.t. every entry."""
    arrays = [np.array(a, dtype=np.float64) for a in arrays]
    out = []
    for a in arrays:
        g = np.zeros_like(a)
        for idx in np.ndindex(a.shape):
            orig = a[idx]
            a[idx] = orig + h
            fp = f(arrays)
            a[idx] = orig - h
            fm = f(arrays)
            a[idx] = orig
            g[idx] = (fp - fm) / (2 * h)
        out.append(g)
    return out


def relative_error(a, b) -> float:
    a = np.concatenate([np.ravel(x) for x in a])
    b = np.concatenate([np.ravel(x) for x in b])
    denom = max(np.linalg.norm(a), np.linalg.norm(b), 1e-30)
    return float(np.linalg.norm(a - b) / denom)


def _near_kink(obj) -> bool:
    g = obj.graph
    for n in g.nodes:
        if n.op_kind == "relu":
            if np.any(np.abs(g.nodes[n.parent_ids[0]].value) < KINK_MARGIN):
                return True
    return False


def random_instance(rng, max_d=8, max_width=16, max_depth=3, max_horizon=4):
    d = int(rng.integers(2, max_d + 1))
    spec = PolicySpec(d, int(rng.integers(2, max_width + 1)), int(rng.integers(1, max_depth + 1)),
                      str(rng.choice(["linear", "relu"])), bool(rng.integers(2)))
    theta = init_policy(spec, rng.integers(2**32))
    theta = theta.with_flat([p + 0.1 * rng.normal(size=p.shape) for p in theta.flat()])
    W = init_value(d, rng.integers(2**32)).W + 0.1 * rng.normal(size=(d, d))
    b = rng.normal(size=d)
    # T=1 is left out: its one TD error is taken before any inner update, so
    # both branches coincide, J is identically 0 and a relative error is undefined
    horizon = int(rng.integers(2, max_horizon + 1))
    gamma = float(rng.uniform(0.0, 0.99))
    eta = float(rng.uniform(0.001, 0.05))
    return theta, b, horizon, W, gamma, eta


def check_instance(theta, b, horizon, W, gamma, eta, h=1e-5, detach_bootstrap=False):
    """``(relative error, objective)`` of the analytic gradient against finite differences."""
    obj = policy_objective(theta, b, horizon, W, gamma, eta, detach_bootstrap)
    analytic = obj.gradient()

    def f(arrays):
        return policy_objective(theta.with_flat(arrays), b, horizon, W, gamma, eta, detach_bootstrap).value

    numeric = finite_difference(f, theta.flat(), h)
    return relative_error(analytic, numeric), obj


def run_grad_check(n_configs: int = 100, seed: int = 0, h: float = 1e-5, tol: float = 1e-4,
                   **limits) -> list[GradCheckResult]:
    rng = np.random.default_rng(seed)
    results = []
    while len(results) < n_configs:
        theta, b, horizon, W, gamma, eta = random_instance(rng, **limits)
        probe = policy_objective(theta, b, horizon, W, gamma, eta)
        if _near_kink(probe):
            continue  # finite differences are meaningless across a ReLU kink
        err, _ = check_instance(theta, b, horizon, W, gamma, eta, h)
        s = theta.spec
        results.append(GradCheckResult(len(results), s.d, s.width, s.depth, horizon, s.activation, err, err <= tol))
    return results
