import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

import oracles
from bigworld.models import (
    NonFiniteError,
    OptimizerConfig,
    PolicyParams,
    PolicySpec,
    ValueParams,
    init_policy,
    init_value,
    optimizer_update,
    policy_forward,
    rmsnorm,
    td_error,
    value_predict,
    value_update_committed,
    value_update_inner,
)

finite = st.floats(-10, 10, allow_nan=False)


def test_value_predict_zero_and_identity():
    b = np.array([1.0, -2.0, 0.5])
    np.testing.assert_array_equal(value_predict(np.zeros((3, 3)), b), 0)
    np.testing.assert_array_equal(value_predict(np.eye(3), b), b)


def test_value_predict_matches_geometric_series():
    gamma, c = 0.8, np.array([0.3, -1.0])
    W = np.eye(2) / (1 - gamma)
    series = sum(gamma**k * c for k in range(2000))
    np.testing.assert_allclose(value_predict(W, c), series, rtol=1e-12)


def test_value_predict_shape_error():
    with pytest.raises(ValueError):
        value_predict(np.eye(3), np.ones(2))


def test_td_error_cases():
    b, bn = np.array([1.0, 2.0]), np.array([-1.0, 0.5])
    np.testing.assert_array_equal(td_error(np.zeros((2, 2)), b, bn, 0.9), bn)
    np.testing.assert_array_equal(td_error(np.eye(2), b, bn, 0.0), bn - b)
    gamma = 0.9
    np.testing.assert_allclose(td_error(np.eye(2) / (1 - gamma), bn, bn, gamma), 0, atol=1e-12)
    with pytest.raises(ValueError):
        td_error(np.eye(2), b, bn, 1.5)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (4, 4), elements=finite), arrays(np.float64, (4, 4), elements=finite),
       st.floats(-3, 3), st.floats(0, 1))
def test_td_error_superposition(W, B, a, gamma):
    # linear in (b_prev, b_next) jointly
    p1, n1, p2, n2 = B
    lhs = td_error(W, a * p1 + p2, a * n1 + n2, gamma)
    rhs = a * td_error(W, p1, n1, gamma) + td_error(W, p2, n2, gamma)
    np.testing.assert_allclose(lhs, rhs, atol=1e-9 * (1 + np.abs(lhs).max()))


def test_inner_update_fixed_point_and_purity():
    gamma = 0.9
    c = np.array([0.5, -0.5])
    W = np.eye(2) / (1 - gamma)
    W_before = W.copy()
    W2 = value_update_inner(W, c, c, gamma, 0.1)
    np.testing.assert_allclose(W2, W, atol=1e-15)
    np.testing.assert_array_equal(W, W_before)
    assert W2 is not W


def test_inner_update_contraction_gamma_zero():
    rng = np.random.default_rng(0)
    b, bn = rng.normal(size=3), rng.normal(size=3)
    eta = 0.3 / np.dot(b, b)
    factor = abs(1 - eta * np.dot(b, b))
    W = rng.normal(size=(3, 3))
    prev = np.linalg.norm(td_error(W, b, bn, 0.0))
    for _ in range(10):
        W = value_update_inner(W, b, bn, 0.0, eta)
        cur = np.linalg.norm(td_error(W, b, bn, 0.0))
        assert cur == pytest.approx(factor * prev, rel=1e-10)
        assert cur < prev
        prev = cur


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (3, 3), elements=finite), arrays(np.float64, 3, elements=finite),
       arrays(np.float64, 3, elements=finite), st.floats(0.01, 0.99))
def test_inner_update_lowers_squared_error(W, b, bn, frac):
    nb = np.dot(b, b)
    if nb < 1e-6:
        return
    eta = frac / nb
    before = np.sum(td_error(W, b, bn, 0.0) ** 2)
    after = np.sum(td_error(value_update_inner(W, b, bn, 0.0, eta), b, bn, 0.0) ** 2)
    assert after <= before
    if before > 1e-12:
        assert after < before


def test_committed_sgd_equals_inner_update():
    rng = np.random.default_rng(1)
    W = rng.normal(size=(4, 4))
    b, bn = rng.normal(size=4), rng.normal(size=4)
    new, delta = value_update_committed(ValueParams(W), b, bn, 0.9, OptimizerConfig("sgd", 0.05))
    np.testing.assert_allclose(new.W, value_update_inner(W, b, bn, 0.9, 0.05), rtol=0, atol=1e-15)
    np.testing.assert_allclose(delta, td_error(W, b, bn, 0.9))


def test_rmsprop_zero_gradient_decays_accumulator():
    cfg = OptimizerConfig("rmsprop", 1e-3, 0.9, 1e-8)
    p = [np.ones((2, 2))]
    _, state = optimizer_update(cfg, p, [np.full((2, 2), 2.0)])
    new, state2 = optimizer_update(cfg, p, [np.zeros((2, 2))], state)
    np.testing.assert_array_equal(new[0], p[0])
    np.testing.assert_allclose(state2["v"][0], 0.9 * state["v"][0])


def test_committed_rmsprop_matches_reference_step():
    gamma = 0.9
    rng = np.random.default_rng(2)
    W, b, bn = rng.normal(size=(3, 3)), rng.normal(size=3), rng.normal(size=3)
    cfg = OptimizerConfig("rmsprop", 1e-3, 0.99, 1e-8)
    new, _ = value_update_committed(ValueParams(W), b, bn, gamma, cfg)
    g = np.outer(td_error(W, b, bn, gamma), b)
    ref, _ = oracles.rmsprop(W, g, np.zeros_like(W), 1e-3, 0.99, 1e-8)
    np.testing.assert_allclose(new.W, ref, rtol=1e-14)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (3, 3), elements=finite), arrays(np.float64, 3, elements=finite),
       arrays(np.float64, 3, elements=finite))
def test_rmsprop_step_bound(W, b, bn):
    cfg = OptimizerConfig("rmsprop", 1e-3, 0.99, 1e-8)
    value = ValueParams(W)
    for _ in range(3):
        new, _ = value_update_committed(value, b, bn, 0.9, cfg)
        step = np.abs(new.W - value.W)
        # first-moment-free RMSProp moves at most lr / sqrt(1 - decay) per entry,
        # which is itself below lr / sqrt(epsilon)
        assert np.all(step <= cfg.step_size / np.sqrt(1 - cfg.decay) * (1 + 1e-9))
        assert np.all(step <= cfg.step_size / np.sqrt(cfg.epsilon))
        value = new


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_committed_update_non_finite_aborts():
    W = np.full((2, 2), 1e308)
    with pytest.raises(NonFiniteError):
        value_update_committed(ValueParams(W), np.array([1e308, 1e308]), np.ones(2), 0.9,
                               OptimizerConfig("sgd", 1.0))


def test_adam_first_step_is_sign_scaled():
    cfg = OptimizerConfig("adam", 0.01, 0.999, 1e-12)
    g = np.array([3.0, -0.2])
    new, state = optimizer_update(cfg, [np.zeros(2)], [g])
    np.testing.assert_allclose(new[0], 0.01 * np.sign(g), rtol=1e-9)
    assert state["t"] == 1


def test_optimizer_config_validation():
    with pytest.raises(ValueError, match="kind"):
        OptimizerConfig("lbfgs")
    with pytest.raises(ValueError, match="decay"):
        OptimizerConfig(decay=1.0)


def test_policy_depth_one_identity_is_rmsnorm():
    spec = PolicySpec(4, depth=1, bias=False)
    b = np.array([1.0, -2.0, 3.0, 0.5])
    pol = PolicyParams(spec, [np.eye(4)])
    np.testing.assert_allclose(policy_forward(pol, b), rmsnorm(b), rtol=1e-15)


def test_policy_zero_weights_gives_zero():
    spec = PolicySpec(3, width=5, depth=2)
    pol = PolicyParams(spec, [np.zeros((5, 3)), np.zeros((3, 5))])
    np.testing.assert_array_equal(policy_forward(pol, np.ones(3)), 0)


@pytest.mark.parametrize("activation", ["linear", "relu"])
def test_policy_output_has_unit_rms(activation):
    rng = np.random.default_rng(3)
    for seed in range(20):
        pol = init_policy(PolicySpec(8, 16, 3, activation), seed)
        out = policy_forward(pol, rng.normal(size=8))
        assert abs(np.sqrt(np.mean(out**2)) - 1) < 1e-6


def test_policy_matches_plain_oracle():
    rng = np.random.default_rng(4)
    pol = init_policy(PolicySpec(5, 7, 3, "relu"), 0)
    pol = pol.with_flat([p + 0.1 * rng.normal(size=p.shape) for p in pol.flat()])
    b = rng.normal(size=5)
    ref = oracles.policy([w.tolist() for w in pol.weights], [c.tolist() for c in pol.biases], "relu", b.tolist())
    np.testing.assert_allclose(policy_forward(pol, b), ref, atol=1e-13)


def test_deep_linear_collapses_to_single_matrix():
    spec = PolicySpec(6, 9, 4, "linear", bias=False)
    pol = init_policy(spec, 7)
    M = np.eye(6)
    for A in pol.weights:
        M = A @ M
    b = np.random.default_rng(5).normal(size=6)
    np.testing.assert_allclose(policy_forward(pol, b), rmsnorm(M @ b), atol=1e-10)


def test_policy_shape_errors():
    spec = PolicySpec(3, 4, 2)
    with pytest.raises(ValueError):
        PolicyParams(spec, [np.zeros((4, 3)), np.zeros((4, 3))])
    with pytest.raises(ValueError):
        policy_forward(init_policy(spec, 0), np.ones(4))
    with pytest.raises(ValueError):
        PolicySpec(3, activation="tanh")


def test_init_is_deterministic():
    spec = PolicySpec(4, 8, 2)
    a, b = init_policy(spec, 11), init_policy(spec, 11)
    for x, y in zip(a.flat(), b.flat()):
        assert x.tobytes() == y.tobytes()
    assert init_value(4, 3).W.tobytes() == init_value(4, 3).W.tobytes()


def test_init_policy_row_norm_scale():
    spec = PolicySpec(32, 48, 2)
    norms = []
    for seed in range(1000):
        W = init_policy(spec, seed).weights[1]
        norms.append(np.mean(np.sum(W**2, axis=1)))
    assert np.mean(norms) == pytest.approx(1.0, rel=0.1)


def test_init_value_small():
    a, b = init_value(2, 0).W, init_value(2, 1).W
    assert np.all(np.isfinite(a)) and np.all(np.isfinite(b))
    assert not np.array_equal(a, b)
