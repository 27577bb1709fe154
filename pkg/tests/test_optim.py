import numpy as np
import pytest

from graphcontrast.optim import (
    AdamState,
    LrSchedule,
    adam_step,
    clip_gradients,
    global_norm,
    lr_at,
)


def test_schedule_warmup_and_decay():
    sched = LrSchedule(peak_lr=0.005, warmup_steps=200, total_steps=2000)
    assert lr_at(sched, 0) == pytest.approx(0.005 / 200)
    assert lr_at(sched, 199) == pytest.approx(0.005)
    assert lr_at(sched, 200) == pytest.approx(0.005)
    # halfway through the decay leg
    assert lr_at(sched, 1100) == pytest.approx(0.005 * 0.5)
    assert lr_at(sched, 2000) == 0.0


def test_schedule_validation():
    with pytest.raises(ValueError):
        LrSchedule(peak_lr=0.0, warmup_steps=1, total_steps=10)
    with pytest.raises(ValueError):
        LrSchedule(peak_lr=0.1, warmup_steps=0, total_steps=10)
    with pytest.raises(ValueError):
        LrSchedule(peak_lr=0.1, warmup_steps=11, total_steps=10)
    sched = LrSchedule(peak_lr=0.1, warmup_steps=1, total_steps=10)
    with pytest.raises(ValueError):
        lr_at(sched, -1)
    with pytest.raises(ValueError):
        lr_at(sched, 11)


def test_global_norm_and_clipping():
    grads = {"a": np.array([[3.0]]), "b": np.array([[4.0]])}
    assert global_norm(grads) == pytest.approx(5.0)
    pre = clip_gradients(grads, 1.0)
    assert pre == pytest.approx(5.0)
    assert global_norm(grads) == pytest.approx(1.0)
    assert grads["a"][0, 0] == pytest.approx(0.6)
    # already inside the ball: untouched
    small = {"a": np.array([[0.3]])}
    clip_gradients(small, 1.0)
    assert small["a"][0, 0] == 0.3
    with pytest.raises(ValueError):
        clip_gradients(small, 0.0)


def test_adam_first_step_size():
    # With zero state the first update is exactly lr * sign(grad + wd*p)
    # regardless of gradient magnitude (up to eps).
    params = {"w": np.array([[10.0, -3.0]])}
    grads = {"w": np.array([[0.5, -2.0]])}
    state = AdamState.init_like(params)
    adam_step(params, grads, state, lr=0.1)
    assert np.allclose(params["w"], [[10.0 - 0.1, -3.0 + 0.1]], atol=1e-6)
    assert state.step_count == 1


def test_adam_matches_reference_loop():
    # Independent dense re-implementation as the oracle.
    rng = np.random.default_rng(0)
    p0 = rng.normal(size=(3, 2))
    params = {"w": p0.copy()}
    state = AdamState.init_like(params)
    m = np.zeros_like(p0)
    v = np.zeros_like(p0)
    ref = p0.copy()
    lr, b1, b2, eps, wd = 0.01, 0.9, 0.999, 1e-8, 0.1
    for t in range(1, 8):
        g = rng.normal(size=p0.shape)
        adam_step(params, {"w": g.copy()}, state, lr, weight_decay=wd)
        gd = g + wd * ref
        m = b1 * m + (1 - b1) * gd
        v = b2 * v + (1 - b2) * gd * gd
        ref -= lr * (m / (1 - b1 ** t)) / (np.sqrt(v / (1 - b2 ** t)) + eps)
    assert np.allclose(params["w"], ref, atol=1e-12)


def test_adam_converges_on_quadratic():
    params = {"w": np.array([[5.0, -4.0]])}
    state = AdamState.init_like(params)
    target = np.array([[1.0, 2.0]])
    for _ in range(800):
        grads = {"w": params["w"] - target}
        adam_step(params, grads, state, lr=0.05)
    assert np.allclose(params["w"], target, atol=1e-3)


def test_adam_requires_matching_keys():
    params = {"w": np.zeros((1, 1))}
    state = AdamState.init_like(params)
    with pytest.raises(ValueError):
        adam_step(params, {"x": np.zeros((1, 1))}, state, lr=0.1)
