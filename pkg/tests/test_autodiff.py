import numpy as np
import pytest

from bigworld.autodiff import Graph, ShapeError, backward
from bigworld.gradcheck import finite_difference, relative_error


def fd_check(build, arrays, h=1e-6):
    """Analytic vs central-difference gradient of ``build(graph, leaves) -> scalar node``."""
    g = Graph()
    leaves = [g.leaf(a) for a in arrays]
    root = build(g, leaves)
    backward(g, root)
    analytic = [n.grad_slot for n in leaves]

    def f(arrs):
        g2 = Graph()
        return float(build(g2, [g2.leaf(a) for a in arrs]).value)

    return relative_error(analytic, finite_difference(f, arrays, h))


def test_matvec_identity():
    g = Graph()
    out = g.matvec(g.leaf(np.eye(3)), g.leaf([1.0, 2.0, 3.0]))
    np.testing.assert_array_equal(out.value, [1, 2, 3])


def test_matvec_zero_matrix_gradient_is_outer_with_ones():
    g = Graph()
    A = g.leaf(np.zeros((3, 3)))
    x = g.leaf([1.0, -2.0, 0.5])
    y = g.matvec(A, x)
    np.testing.assert_array_equal(y.value, 0)
    backward(g, g.sum(y))
    np.testing.assert_array_equal(A.grad_slot, np.outer(np.ones(3), x.value))


def test_matvec_shape_mismatch():
    g = Graph()
    with pytest.raises(ShapeError, match=r"\(3, 4\)"):
        g.matvec(g.leaf(np.zeros((3, 4))), g.leaf(np.zeros(3)))


def test_matvec_gradient_matches_finite_differences():
    rng = np.random.default_rng(0)
    A, x = rng.normal(size=(4, 4)), rng.normal(size=4)
    assert fd_check(lambda g, l: g.sqnorm(g.matvec(*l)), [A, x]) < 1e-5


def test_relu_forward_and_kink_convention():
    g = Graph()
    x = g.leaf([-1.0, 0.0, 2.0])
    y = g.relu(x)
    np.testing.assert_array_equal(y.value, [0, 0, 2])
    backward(g, g.sum(y))
    np.testing.assert_array_equal(x.grad_slot, [0, 0, 1])


def test_relu_all_negative():
    g = Graph()
    x = g.leaf([-1.0, -3.0])
    y = g.relu(x)
    backward(g, g.sum(y))
    np.testing.assert_array_equal(y.value, 0)
    np.testing.assert_array_equal(x.grad_slot, 0)


def test_relu_gradient_away_from_kinks():
    rng = np.random.default_rng(1)
    x = rng.normal(size=20)
    x = x[np.abs(x) > 1e-3]
    w = rng.normal(size=x.size)
    assert fd_check(lambda g, l: g.sqnorm(g.add(g.relu(l[0]), l[1])), [x, w]) < 1e-5


def test_rmsnorm_constant_vector_and_zero():
    g = Graph()
    y = g.rmsnorm(g.leaf(np.full(5, 3.0)), epsilon=1e-300)
    np.testing.assert_allclose(y.value, np.ones(5), rtol=1e-15)
    z = g.rmsnorm(g.leaf(np.zeros(4)))
    np.testing.assert_array_equal(z.value, 0)


def test_rmsnorm_unit_rms_and_gradient():
    rng = np.random.default_rng(2)
    x = rng.normal(size=7)
    g = Graph()
    y = g.rmsnorm(g.leaf(x), 1e-8)
    assert abs(np.sqrt(np.mean(y.value**2)) - 1) < 1e-6
    w = rng.normal(size=7)
    err = fd_check(lambda g, l: g.sqnorm(g.sub(g.rmsnorm(l[0], 1e-8), l[1])), [x, w])
    assert err < 1e-5


def test_stopgrad_blocks_gradient():
    g = Graph()
    x = g.leaf([1.0, 2.0])
    s = g.stopgrad(x)
    np.testing.assert_array_equal(s.value, x.value)
    backward(g, g.sum(s))
    np.testing.assert_array_equal(x.grad_slot, 0)


def test_stopgrad_difference_objective_has_zero_gradient():
    g = Graph()
    x = g.leaf([0.3, -1.2, 2.0])
    root = g.sqnorm(g.sub(g.stopgrad(x), x))
    backward(g, root)
    np.testing.assert_array_equal(x.grad_slot, 0)


def test_semi_gradient_td_matches_hand_derivation():
    # loss 0.5 * |b' + gamma * sg(W b') - W b|^2 ; d/dW = -delta b^T, so a step of
    # size eta along -grad is the semi-gradient update eta * delta b^T
    rng = np.random.default_rng(3)
    W, b, bn = rng.normal(size=(2, 2)), rng.normal(size=2), rng.normal(size=2)
    gamma = 0.9
    g = Graph()
    Wn = g.leaf(W)
    delta = g.sub(g.axpy(gamma, g.stopgrad(g.matvec(Wn, g.const(bn))), g.const(bn)), g.matvec(Wn, g.const(b)))
    backward(g, g.scale(g.sqnorm(delta), 0.5))
    d = bn + gamma * W @ bn - W @ b
    expected = -np.array([[d[0] * b[0], d[0] * b[1]], [d[1] * b[0], d[1] * b[1]]])
    np.testing.assert_allclose(Wn.grad_slot, expected, rtol=1e-14)


def test_backward_sum_and_sqnorm():
    g = Graph()
    x = g.leaf([1.0, -2.0, 3.0])
    backward(g, g.sum(x))
    np.testing.assert_array_equal(x.grad_slot, 1)
    backward(g, g.sqnorm(x))
    np.testing.assert_array_equal(x.grad_slot, 2 * x.value)


def test_backward_rejects_nonscalar_root():
    g = Graph()
    x = g.leaf([1.0, 2.0])
    with pytest.raises(ShapeError):
        backward(g, x)


def test_outer_and_total_gradients():
    rng = np.random.default_rng(4)
    u, v, M = rng.normal(size=3), rng.normal(size=4), rng.normal(size=(3, 4))

    def build(g, l):
        a = g.sqnorm(g.add(g.outer(l[0], l[1], 0.7), l[2]))
        b = g.sum(g.scale(l[0], 3.0))
        return g.total([a, b], [1.0, -2.0])

    assert fd_check(build, [u, v, M]) < 1e-5


def test_nodes_are_topologically_ordered_and_grad_slots_match_shapes():
    rng = np.random.default_rng(5)
    g = Graph()
    A = g.leaf(rng.normal(size=(3, 3)))
    x = g.leaf(rng.normal(size=3))
    root = g.sqnorm(g.rmsnorm(g.relu(g.matvec(A, x))))
    backward(g, root)
    for n in g.nodes:
        assert all(p < n.id for p in n.parent_ids)
        assert n.grad_slot.shape == n.value.shape


def test_backward_is_deterministic_and_does_not_mutate_values():
    rng = np.random.default_rng(6)
    A0, x0 = rng.normal(size=(5, 5)), rng.normal(size=5)

    def run():
        g = Graph()
        A, x = g.leaf(A0), g.leaf(x0)
        root = g.sqnorm(g.rmsnorm(g.matvec(A, x)))
        before = [n.value.copy() for n in g.nodes]
        backward(g, root)
        for b, n in zip(before, g.nodes):
            np.testing.assert_array_equal(b, n.value)
        return A.grad_slot, x.grad_slot

    a1, x1 = run()
    a2, x2 = run()
    assert a1.tobytes() == a2.tobytes() and x1.tobytes() == x2.tobytes()


def test_functional_recorders_match_methods():
    from bigworld.autodiff import record_matvec, record_relu, record_rmsnorm, record_stopgrad

    g = Graph()
    A = g.leaf(np.eye(3))
    x = g.leaf(np.array([1.0, -2.0, 3.0]))
    np.testing.assert_array_equal(record_matvec(g, A, x).value, [1.0, -2.0, 3.0])
    np.testing.assert_array_equal(record_relu(g, x).value, [1.0, 0.0, 3.0])
    y = record_rmsnorm(g, x, 1e-8)
    assert abs(np.sqrt(np.mean(y.value**2)) - 1) < 1e-6
    np.testing.assert_array_equal(record_stopgrad(g, x).value, x.value)
