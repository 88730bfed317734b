"""scikit-learn style wrapper around the online interactivity-seeking agent."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .interactivity import rollout, interactivity_estimate
from .loop import ExperimentConfig, final_window_mean, init_run, run_experiment
from .models import OptimizerConfig, policy_forward, value_predict


class InteractivitySeeker(BaseEstimator):
    """Self-predicting agent whose policy maximises its own interactivity.

    The task is environment-free, so ``fit`` takes no training data. An
    optional ``X`` of shape ``(1, d)`` sets the initial behaviour. ``fit``
    starts from a fresh seeded initialisation and runs ``steps`` timesteps;
    ``partial_fit`` continues from where the last call stopped.

    After fitting, ``predict`` maps behaviours to the next behaviour,
    ``transform`` gives the value function's discounted-future predictions
    and ``score`` is the mean smoothed interactivity over the final fifth
    of logged steps.
    """

    def __init__(self, d=64, horizon=10, steps=1000, gamma=0.9, eta_inner=0.01, width=64, depth=2,
                 activation="linear", bias=True, optimizer="rmsprop", policy_step_size=1e-3,
                 value_step_size=1e-3, decay=0.99, epsilon=1e-8, smoothing_half_life=200.0,
                 detach_bootstrap=False, random_state=0):
        self.d = d
        self.horizon = horizon
        self.steps = steps
        self.gamma = gamma
        self.eta_inner = eta_inner
        self.width = width
        self.depth = depth
        self.activation = activation
        self.bias = bias
        self.optimizer = optimizer
        self.policy_step_size = policy_step_size
        self.value_step_size = value_step_size
        self.decay = decay
        self.epsilon = epsilon
        self.smoothing_half_life = smoothing_half_life
        self.detach_bootstrap = detach_bootstrap
        self.random_state = random_state

    def _make_config(self, steps) -> ExperimentConfig:
        def opt(step):
            return OptimizerConfig(self.optimizer, step, self.decay, self.epsilon)

        seed = self.random_state if self.random_state is not None else 0
        return ExperimentConfig.from_dict(dict(
            d=self.d, horizon=self.horizon, steps=steps, gamma=self.gamma, eta_inner=self.eta_inner,
            seed=int(seed), smoothing_half_life=self.smoothing_half_life, detach_bootstrap=self.detach_bootstrap,
            policy=dict(width=self.width, depth=self.depth, activation=self.activation, bias=self.bias),
            policy_opt=opt(self.policy_step_size).__dict__, value_opt=opt(self.value_step_size).__dict__,
        ))

    def _initial_state(self, cfg, X):
        state = init_run(cfg)
        if X is not None:
            X = check_array(X, ensure_2d=True)
            if X.shape != (1, self.d):
                raise ValueError(f"X must have shape (1, {self.d}), got {X.shape}")
            state.behaviour = X[0].astype(np.float64)
        return state

    def fit(self, X=None, y=None):
        cfg = self._make_config(self.steps)
        self.config_ = cfg
        self.records_ = []
        self.state_ = self._initial_state(cfg, X)
        return self._advance(self.steps)

    def partial_fit(self, X=None, y=None, steps=None):
        steps = self.steps if steps is None else steps
        if not hasattr(self, "state_"):
            self.config_ = self._make_config(0)
            self.records_ = []
            self.state_ = self._initial_state(self.config_, X)
        return self._advance(steps)

    def _advance(self, steps):
        target = self.state_.step + steps
        cfg = self._make_config(target)
        res = run_experiment(cfg, state=self.state_)
        self.state_ = res.state
        self.records_.extend(res.records)
        self.diverged_ = res.diverged
        self.n_steps_ = res.state.step
        self.n_features_in_ = self.d
        if res.diverged:
            self.divergence_ = res.error
        return self

    def _check_X(self, X):
        check_is_fitted(self, "state_")
        X = check_array(X)
        if X.shape[1] != self.d:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.d}")
        return X

    def predict(self, X):
        X = self._check_X(X)
        return np.stack([policy_forward(self.state_.policy, x) for x in X])

    def transform(self, X):
        X = self._check_X(X)
        return np.stack([value_predict(self.state_.value.W, x) for x in X])

    def interactivity(self, X):
        """Columns: static complexity, dynamic complexity, interactivity, one row per start behaviour."""
        X = self._check_X(X)
        s = self.state_
        out = []
        for x in X:
            est = interactivity_estimate(rollout(s.policy, x, self.horizon, s.value.W, self.gamma, self.eta_inner))
            out.append((est.static_complexity, est.dynamic_complexity, est.interactivity))
        return np.array(out)

    def score(self, X=None, y=None):
        check_is_fitted(self, "state_")
        return final_window_mean(self.records_)
