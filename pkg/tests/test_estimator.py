import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from bigworld.estimator import InteractivitySeeker
from bigworld.loop import ExperimentConfig, records_to_csv, run_experiment
from bigworld.models import rmsnorm


def small(**kw):
    params = dict(d=6, horizon=3, steps=15, width=6, depth=2, random_state=2)
    params.update(kw)
    return InteractivitySeeker(**params)


def test_params_round_trip():
    est = small()
    assert est.get_params()["width"] == 6
    est.set_params(depth=3)
    c = clone(est)
    assert c.get_params() == est.get_params() and not hasattr(c, "state_")


def test_fit_matches_run_experiment():
    est = small().fit()
    cfg = ExperimentConfig.from_dict(dict(d=6, horizon=3, steps=15, seed=2, policy={"width": 6}))
    assert records_to_csv(est.records_) == records_to_csv(run_experiment(cfg).records)
    assert est.n_steps_ == 15 and not est.diverged_


def test_partial_fit_continues():
    a = small(steps=5)
    for _ in range(3):
        a.partial_fit()
    b = small().fit()
    assert records_to_csv(a.records_) == records_to_csv(b.records_)


def test_predict_transform_interactivity_shapes():
    est = small().fit()
    X = np.random.default_rng(0).normal(size=(4, 6))
    P = est.predict(X)
    assert P.shape == (4, 6)
    np.testing.assert_allclose(np.mean(P**2, axis=1), 1.0, atol=1e-6)
    np.testing.assert_allclose(est.transform(X), X @ est.state_.value.W.T)
    I = est.interactivity(X)
    np.testing.assert_allclose(I[:, 2], I[:, 0] - I[:, 1])
    assert np.isfinite(est.score())


def test_initial_behaviour_from_X():
    x = rmsnorm(np.arange(1.0, 7.0))[None, :]
    est = small(steps=1).fit(x)
    np.testing.assert_allclose(est.records_[0].components[:6], x[0])
    with pytest.raises(ValueError, match="shape"):
        small().fit(np.ones((2, 6)))


def test_unfitted_and_bad_width():
    with pytest.raises(NotFittedError):
        small().predict(np.ones((1, 6)))
    est = small().fit()
    with pytest.raises(ValueError, match="features"):
        est.predict(np.ones((1, 5)))
