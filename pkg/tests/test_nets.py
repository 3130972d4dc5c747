"""Network, gradient, optimizer and checkpoint checks.

The gradient tests compare reverse-mode results against central finite
differences coordinate by coordinate on small networks, which exercises every
branch of the backward passes.
"""

import numpy as np
import pytest

from swinghedge.nets import (AdamState, adam_init, adam_step, decay_per_100,
                             load_checkpoint, mlp_forward, mlp_gradient,
                             mlp_init, recurrent_forward, recurrent_gradient,
                             recurrent_init, save_checkpoint, xavier_uniform)


def test_xavier_bound_and_spread():
    rng = np.random.default_rng(0)
    w = xavier_uniform(10, 10, rng)
    bound = 0.5477225575051661  # sqrt(6 / 20)
    assert np.all(np.abs(w) <= bound)
    assert np.abs(w).max() > 0.9 * bound  # actually fills the range
    # uniform(-b, b) has variance b^2 / 3 = 6 / (fan_in + fan_out) / 3
    big = xavier_uniform(100, 100, rng)
    assert abs(big.var() - 0.01) < 0.0015


def test_mlp_init_shapes_and_bias_scale():
    rng = np.random.default_rng(1)
    params = mlp_init((50, 200, 3), rng)
    assert params.widths == (50, 200, 3)
    assert params.weights[0].shape == (50, 200)
    assert params.biases[0].shape == (200,)
    assert 0.005 < params.biases[0].std() < 0.02
    assert params.n_params == 50 * 200 + 200 + 200 * 3 + 3


def test_mlp_vec_round_trip():
    params = mlp_init((3, 4, 2), np.random.default_rng(2))
    vec = params.to_vec()
    back = params.from_vec(vec)
    for w1, w2 in zip(params.weights, back.weights):
        assert np.array_equal(w1, w2)
    with pytest.raises(ValueError):
        params.from_vec(vec[:-1])


def _finite_difference(objective, vec, h=1e-6):
    grad = np.empty_like(vec)
    for k in range(vec.size):
        bumped = vec.copy()
        bumped[k] += h
        up = objective(bumped)
        bumped[k] -= 2.0 * h
        down = objective(bumped)
        grad[k] = (up - down) / (2.0 * h)
    return grad


def test_mlp_gradient_matches_finite_differences():
    rng = np.random.default_rng(3)
    params = mlp_init((3, 5, 4, 2), rng)
    x = rng.standard_normal((7, 3))
    upstream = rng.standard_normal((7, 2))

    def objective(vec):
        p = params.from_vec(vec)
        out, _ = mlp_forward(p, x)
        return float(np.sum(upstream * out))

    out, cache = mlp_forward(params, x)
    grad = mlp_gradient(params, cache, upstream).to_vec()
    fd = _finite_difference(objective, params.to_vec())
    err = np.abs(grad - fd).max() / max(np.abs(fd).max(), 1e-12)
    assert err < 1e-4


def test_mlp_input_gradient_matches_finite_differences():
    rng = np.random.default_rng(4)
    params = mlp_init((2, 6, 1), rng)
    x = rng.standard_normal((5, 2))
    upstream = rng.standard_normal((5, 1))
    _, cache = mlp_forward(params, x)
    d_input = mlp_gradient(params, cache, upstream).d_input

    h = 1e-6
    fd = np.empty_like(x)
    for i in range(5):
        for j in range(2):
            up, down = x.copy(), x.copy()
            up[i, j] += h
            down[i, j] -= h
            val_up = float(np.sum(upstream * mlp_forward(params, up)[0]))
            val_down = float(np.sum(upstream * mlp_forward(params, down)[0]))
            fd[i, j] = (val_up - val_down) / (2.0 * h)
    err = np.abs(d_input - fd).max() / np.abs(fd).max()
    assert err < 1e-4


def test_mlp_gradient_rejects_stale_cache():
    params = mlp_init((2, 3, 1), np.random.default_rng(5))
    x = np.zeros((4, 2))
    _, cache = mlp_forward(params, x)
    rebuilt = params.from_vec(params.to_vec())
    with pytest.raises(ValueError, match="different parameters"):
        mlp_gradient(rebuilt, cache, np.ones((4, 1)))


def test_mlp_forward_rejects_bad_input_width():
    params = mlp_init((3, 2), np.random.default_rng(6))
    with pytest.raises(ValueError):
        mlp_forward(params, np.zeros((4, 5)))


def test_recurrent_gradient_matches_finite_differences():
    rng = np.random.default_rng(7)
    params = recurrent_init(2, 3, (4, 2), rng)
    inputs = rng.standard_normal((5, 4, 2))
    upstream = rng.standard_normal((5, 4, 2))

    def objective(vec):
        p = params.from_vec(vec)
        out, _ = recurrent_forward(p, inputs, need_cache=False)
        return float(np.sum(upstream * out))

    out, cache = recurrent_forward(params, inputs)
    grad = recurrent_gradient(params, cache, upstream).to_vec()
    fd = _finite_difference(objective, params.to_vec(), h=1e-5)
    err = np.abs(grad - fd).max() / np.abs(fd).max()
    assert err < 1e-3


def test_recurrent_forward_rejects_empty_sequence():
    params = recurrent_init(2, 3, (1,), np.random.default_rng(8))
    with pytest.raises(ValueError):
        recurrent_forward(params, np.zeros((4, 0, 2)))


def test_recurrent_state_propagates_along_time():
    # with a nonzero first input and zero later inputs, outputs keep moving,
    # which fails if the hidden state were reset between steps
    params = recurrent_init(1, 4, (1,), np.random.default_rng(9))
    inputs = np.zeros((1, 6, 1))
    inputs[0, 0, 0] = 3.0
    out, _ = recurrent_forward(params, inputs, need_cache=False)
    flat = out[0, :, 0]
    assert np.abs(np.diff(flat)).max() > 1e-8


def test_adam_first_step_value():
    state = adam_init(3, alpha0=0.001)
    params = np.zeros(3)
    grad = np.array([1.0, -1.0, 2.0])
    state, params = adam_step(state, params, grad)
    # m_hat = g, v_hat = g^2, step = alpha * sign(g) * |g| / (|g| + eps)
    expected = -0.001 * grad / (np.abs(grad) + 1e-8)
    assert np.allclose(params, expected, rtol=0.0, atol=1e-18)
    assert state.step_count == 1


def test_adam_decay_applies_after_each_step():
    state = adam_init(1, alpha0=0.001, r_alpha=decay_per_100(0.98))
    params = np.zeros(1)
    for _ in range(100):
        state, params = adam_step(state, params, np.ones(1))
    assert abs(state.alpha - 0.001 * 0.98) < 1e-15


def test_adam_minimizes_quadratic():
    state = adam_init(1, alpha0=0.01)
    theta = np.array([5.0])
    for _ in range(2000):
        state, theta = adam_step(state, theta, 2.0 * theta)
    assert abs(theta[0]) < 1e-2


def test_adam_init_validation():
    with pytest.raises(ValueError):
        adam_init(3, alpha0=0.0)
    with pytest.raises(ValueError):
        adam_init(3, alpha0=0.1, r_alpha=1.5)


def test_decay_per_100():
    assert abs(decay_per_100(0.98) - 0.98 ** 0.01) < 1e-18
    with pytest.raises(ValueError):
        decay_per_100(0.0)


def test_checkpoint_round_trip(tmp_path):
    path = tmp_path / "ckpt.npz"
    sections = {"network": np.arange(5.0), "premium": np.array([0.25])}
    meta = {"widths": [2, 3, 1], "best_iteration": 42}
    save_checkpoint(path, sections, meta)
    back_sections, back_meta = load_checkpoint(path)
    assert set(back_sections) == {"network", "premium"}
    assert np.array_equal(back_sections["network"], np.arange(5.0))
    assert back_meta == meta


def test_checkpoint_rejects_future_version(tmp_path):
    import json

    path = tmp_path / "bad.npz"
    header = json.dumps({"format_version": 99, "sections": [], "meta": {}})
    np.savez(path, header=np.array(header))
    with pytest.raises(ValueError, match="version"):
        load_checkpoint(path)
