import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from anpnet import nn
from anpnet.errors import ShapeError, StaleRecordError, TrainingError

finite = st.floats(-50, 50, allow_nan=False, allow_infinity=False)


def test_glorot_unit_fan_bound():
    layer = nn.glorot_init(1, 1, np.random.default_rng(0))
    assert abs(layer.weights[0, 0]) <= np.sqrt(3)
    assert layer.biases[0] == 0


def test_glorot_statistics_full_scale():
    layer = nn.glorot_init(1024, 553, np.random.default_rng(1))
    w = layer.weights.astype(np.float64).ravel()
    limit = np.sqrt(6 / 1577)
    assert np.abs(w).max() <= limit
    se = limit / np.sqrt(3) / np.sqrt(w.size)
    assert abs(w.mean()) < 3 * se
    assert np.all(layer.biases == 0)


@given(st.integers(1, 40), st.integers(1, 40), st.integers(0, 2**32 - 1))
@settings(max_examples=50, deadline=None)
def test_glorot_bound_and_determinism(fan_in, fan_out, seed):
    a = nn.glorot_init(fan_in, fan_out, np.random.default_rng(seed))
    b = nn.glorot_init(fan_in, fan_out, np.random.default_rng(seed))
    assert a.weights.dtype == np.float32
    assert np.abs(a.weights.astype(np.float64)).max() <= np.sqrt(6 / (fan_in + fan_out))
    assert a.weights.tobytes() == b.weights.tobytes()


def test_dense_forward_examples():
    eye = nn.DenseLayer(np.eye(2), np.zeros(2))
    np.testing.assert_array_equal(nn.dense_forward(eye, [3, 4]), [3, 4])
    layer = nn.DenseLayer(np.array([[0.5, -0.25]]), np.array([0.1]))
    np.testing.assert_allclose(nn.dense_forward(layer, [1, 2]), [0.1], rtol=0, atol=1e-15)
    zero = nn.DenseLayer(np.zeros((3, 2)), np.array([1.0, -2.0, 3.0]))
    np.testing.assert_array_equal(nn.dense_forward(zero, [7.0, -9.0]), [1, -2, 3])


def test_dense_forward_shape_error():
    with pytest.raises(ShapeError):
        nn.dense_forward(nn.DenseLayer(np.eye(2), np.zeros(2)), [1, 2, 3])


def test_dense_layer_rejects_bad_shapes():
    with pytest.raises(ShapeError):
        nn.DenseLayer(np.zeros((2, 3)), np.zeros(3))
    with pytest.raises(ValueError):
        nn.DenseLayer(np.array([[np.nan]]), np.zeros(1))


def test_relu():
    np.testing.assert_array_equal(nn.relu(np.array([-1.0, 0.0, 2.0])), [0, 0, 2])
    np.testing.assert_array_equal(nn.relu(-np.arange(1, 5.0)), np.zeros(4))
    x = np.array([0.0, 1.5, 3.0])
    np.testing.assert_array_equal(nn.relu(x), x)


def test_softmax_examples():
    np.testing.assert_allclose(nn.softmax(np.zeros(4)), [0.25] * 4, rtol=0, atol=1e-15)
    np.testing.assert_allclose(nn.softmax(np.log([1.0, 2.0, 3.0])), [1 / 6, 2 / 6, 3 / 6], rtol=1e-14)


@given(arrays(np.float64, st.integers(1, 30), elements=finite), finite)
def test_softmax_sums_to_one_and_shift_invariant(z, c):
    p = nn.softmax(z)
    assert abs(p.sum() - 1) < 1e-9
    assert np.all(p >= 0) and np.all(p <= 1)
    np.testing.assert_allclose(nn.softmax(z + c), p, rtol=1e-9, atol=1e-15)


def test_cross_entropy_examples():
    for c in (2, 5, 553):
        assert nn.cross_entropy(np.full(c, 1 / c), c - 1) == pytest.approx(np.log(c), rel=1e-12)
    assert nn.cross_entropy(np.array([0.0, 1.0]), 1) == 0.0
    assert nn.cross_entropy(np.array([1 - np.exp(-1), np.exp(-1)]), 1) == pytest.approx(1.0, rel=1e-12)
    assert nn.cross_entropy(np.array([1.0, 0.0]), 1) == pytest.approx(-np.log(1e-12))


def test_cross_entropy_label_out_of_range():
    with pytest.raises(ValueError):
        nn.cross_entropy(np.array([0.5, 0.5]), 2)


def _loss64(params, x, y):
    hidden, output = nn.layers_from_params(params)
    return float(np.mean(nn.cross_entropy(nn.forward(hidden, output, x).probs, y)))


def test_backward_single_neuron_matches_finite_differences():
    # 1 input, 1 hidden unit, 2 classes
    params = {
        "hidden.weights": np.array([[0.8]]),
        "hidden.biases": np.array([0.1]),
        "output.weights": np.array([[1.3], [-0.4]]),
        "output.biases": np.array([0.0, 0.2]),
    }
    x, y = np.array([[0.7]]), np.array([0])
    hidden, output = nn.layers_from_params(params)
    analytic = nn.backward(hidden, output, nn.forward(hidden, output, x), y)
    numeric = nn.finite_diff_grad(lambda p: _loss64(p, x, y), params, 1e-6)
    for k in params:
        np.testing.assert_allclose(analytic[k], numeric[k], rtol=1e-6, atol=1e-10)


def test_backward_zero_input():
    rng = np.random.default_rng(3)
    hidden = nn.DenseLayer(rng.normal(size=(4, 3)), np.array([0.5, 0.2, 0.1, 0.3]))
    output = nn.DenseLayer(rng.normal(size=(2, 4)), np.zeros(2))
    x = np.zeros((1, 3))
    g = nn.backward(hidden, output, nn.forward(hidden, output, x), [1])
    assert np.all(g["hidden.weights"] == 0)
    assert np.any(g["hidden.biases"] != 0)


def test_backward_duplicate_batch_equals_single():
    rng = np.random.default_rng(4)
    hidden = nn.DenseLayer(rng.normal(size=(5, 3)), rng.normal(size=5))
    output = nn.DenseLayer(rng.normal(size=(4, 5)), rng.normal(size=4))
    x = rng.normal(size=(1, 3))
    one = nn.backward(hidden, output, nn.forward(hidden, output, x), [2])
    many = nn.backward(hidden, output, nn.forward(hidden, output, np.repeat(x, 6, axis=0)), [2] * 6)
    for k in one:
        np.testing.assert_allclose(many[k], one[k], rtol=1e-12, atol=1e-15)


def test_backward_rejects_stale_record():
    rng = np.random.default_rng(5)
    hidden = nn.DenseLayer(rng.normal(size=(3, 2)), np.zeros(3))
    output = nn.DenseLayer(rng.normal(size=(2, 3)), np.zeros(2))
    rec = nn.forward(hidden, output, np.ones((1, 2)))
    other = nn.DenseLayer(hidden.weights.copy(), hidden.biases.copy())
    with pytest.raises(StaleRecordError):
        nn.backward(other, output, rec, [0])
    with pytest.raises(StaleRecordError):
        nn.backward(hidden, output, None, [0])


def test_random_small_net_gradients():
    rng = np.random.default_rng(6)
    params = {
        "hidden.weights": rng.normal(size=(7, 5)),
        "hidden.biases": rng.normal(size=7),
        "output.weights": rng.normal(size=(4, 7)),
        "output.biases": rng.normal(size=4),
    }
    x, y = rng.normal(size=(3, 5)), np.array([0, 3, 1])
    hidden, output = nn.layers_from_params(params)
    analytic = nn.backward(hidden, output, nn.forward(hidden, output, x), y)
    numeric = nn.finite_diff_grad(lambda p: _loss64(p, x, y), params, 1e-6)
    for k in params:
        a, n = analytic[k], numeric[k]
        assert np.linalg.norm(a - n) / (np.linalg.norm(a) + np.linalg.norm(n)) < 1e-6


def test_sgd_step_examples():
    params = {"w": np.array([1.0])}
    state = nn.SgdState.start(params, learning_rate=0.01, momentum=0.9, weight_decay=0.0)
    params, state = nn.sgd_step(params, {"w": np.array([1.0])}, state)
    assert state.velocity["w"][0] == pytest.approx(1.0)
    assert params["w"][0] == pytest.approx(0.99)
    params, state = nn.sgd_step(params, {"w": np.array([1.0])}, state)
    assert state.velocity["w"][0] == pytest.approx(1.9)
    assert params["w"][0] == pytest.approx(0.971)


def test_sgd_zero_gradient_is_noop():
    params = {"a": np.arange(6.0).reshape(2, 3), "b": np.ones(3, dtype=np.float32)}
    state = nn.SgdState.start(params, 0.01, 0.9, 0.0)
    new, _ = nn.sgd_step(params, {k: np.zeros_like(v) for k, v in params.items()}, state)
    for k in params:
        assert new[k].tobytes() == params[k].tobytes()


def test_sgd_weight_decay_only_on_selected_keys():
    params = {"w": np.array([2.0]), "b": np.array([2.0])}
    state = nn.SgdState.start(params, 0.1, 0.0, 0.5, decay_keys=frozenset({"w"}))
    new, _ = nn.sgd_step(params, {"w": np.zeros(1), "b": np.zeros(1)}, state)
    assert new["w"][0] == pytest.approx(2.0 - 0.1 * 0.5 * 2.0)
    assert new["b"][0] == 2.0


def test_sgd_non_finite_gradient_aborts():
    params = {"w": np.array([1.0])}
    state = nn.SgdState.start(params)
    with pytest.raises(TrainingError, match="w"):
        nn.sgd_step(params, {"w": np.array([np.nan])}, state)


def test_finite_diff_examples():
    assert nn.finite_diff_grad(lambda t: t**2, np.array(3.0), 1e-5) == pytest.approx(6.0, abs=1e-8)
    g = nn.finite_diff_grad(lambda t: 4.2, np.ones(3), 1e-5)
    np.testing.assert_array_equal(g, np.zeros(3))
