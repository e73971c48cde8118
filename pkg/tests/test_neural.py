import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from domainchar.neural import AdamState, DenseNet, adam_step


def test_zero_net_outputs_zero():
    net = DenseNet([3, 5, 2])
    assert np.all(net(np.array([[1.0, -2.0, 3.0]])) == 0.0)


def test_identity_single_layer_passthrough():
    net = DenseNet([4, 4])
    net.params[0][...] = np.eye(4)
    x = np.random.default_rng(0).normal(size=(3, 4))
    assert np.array_equal(net(x), x)


def test_shape_mismatch_raises():
    with pytest.raises(ValueError):
        DenseNet([3, 2])(np.zeros((1, 4)))


def test_large_input_finite():
    net = DenseNet([2, 8, 8, 3], np.random.default_rng(0))
    net.params[-2][...] = 1.0
    assert np.all(np.isfinite(net(np.array([[1e300, -1e300]]))))


def _numeric_grads(net, x, g_out, h=1e-5):
    out = []
    for p in net.params:
        g = np.zeros_like(p)
        for i in np.ndindex(p.shape):
            old = p[i]
            p[i] = old + h
            fp = np.sum(net(x) * g_out)
            p[i] = old - h
            fm = np.sum(net(x) * g_out)
            p[i] = old
            g[i] = (fp - fm) / (2 * h)
        out.append(g)
    return out


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), depth=st.integers(1, 3), width=st.integers(1, 8))
def test_backward_matches_finite_differences(seed, depth, width):
    rng = np.random.default_rng(seed)
    sizes = [3] + [width] * (depth - 1) + [2]
    net = DenseNet(sizes, rng)
    for p in net.params:
        p += 0.1 * rng.normal(size=p.shape)
    x = rng.normal(size=(4, 3))
    g_out = rng.normal(size=(4, 2))
    _, acts = net.forward_cached(x)
    grads, g_in = net.backward(acts, g_out)
    for a, n in zip(grads, _numeric_grads(net, x, g_out)):
        err = np.abs(a - n) / np.maximum(np.abs(n), 1e-4)
        assert err.max() <= 1e-4
    h = 1e-5
    for i in np.ndindex(x.shape):
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        n = (np.sum(net(xp) * g_out) - np.sum(net(xm) * g_out)) / (2 * h)
        assert abs(n - g_in[i]) <= 1e-4 * max(abs(n), 1e-4) + 1e-9


def test_zero_upstream_gives_zero_grads():
    net = DenseNet([3, 4, 2], np.random.default_rng(1))
    x = np.ones((2, 3))
    _, acts = net.forward_cached(x)
    grads, g_in = net.backward(acts, np.zeros((2, 2)))
    assert all(np.all(g == 0) for g in grads) and np.all(g_in == 0)


def test_output_bias_gradient_of_sum_is_batch_count():
    net = DenseNet([3, 4, 2], np.random.default_rng(2))
    x = np.random.default_rng(3).normal(size=(1, 3))
    _, acts = net.forward_cached(x)
    grads, _ = net.backward(acts, np.ones((1, 2)))
    assert np.array_equal(grads[-1], np.ones(2))


def test_adam_zero_gradient_leaves_params():
    p = [np.array([1.0, -2.0])]
    state = AdamState.for_params(p, lr=0.1)
    adam_step(p, [np.zeros(2)], state)
    assert np.array_equal(p[0], [1.0, -2.0])


def test_adam_first_step_moves_by_learning_rate():
    p = [np.array([0.5, 0.5, 0.5])]
    g = np.array([3.0, -0.2, 1e-3])
    state = AdamState.for_params(p, lr=0.01)
    adam_step(p, [g], state)
    np.testing.assert_allclose(0.5 - p[0], 0.01 * np.sign(g), rtol=1e-4)


def test_adam_minimises_quadratic():
    p = [np.array([1.0, 1.0])]
    state = AdamState.for_params(p, lr=0.05)
    for _ in range(200):
        adam_step(p, [2.0 * p[0]], state)
    assert np.linalg.norm(p[0]) < 0.05
    assert state.step == 200
