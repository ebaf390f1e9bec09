"""Backprop is checked against central finite differences on every
parameter entry, in float64, for both the classification and the
contrastive paths; optimizer and checkpoint behavior get exact checks."""

import numpy as np
import pytest

from tabcontrast import (
    AdamState,
    MlpSpec,
    NumericError,
    cross_entropy,
    init_model,
    load_checkpoint,
    ntxent_loss,
    optimizer_step,
    predict_logits,
    save_checkpoint,
    softmax,
)
from tabcontrast.neural import (
    backward_encoder_head,
    forward_encoder,
    forward_head,
)

SPEC = MlpSpec(
    input_width=5,
    class_count=3,
    hidden_width=7,
    encoder_hidden_layers=2,
    projection_width=4,
)


def _all_params(params):
    return params.theta_e + params.theta_p + params.theta_c


def _class_loss(params, x, y):
    h, _ = forward_encoder(x, params)
    logits, _ = forward_head(h, params.theta_c, "class_head")
    return cross_entropy(logits, y)[0]


def _contrastive_loss(params, x, tau=0.8):
    h, _ = forward_encoder(x, params)
    z, _ = forward_head(h, params.theta_p, "pretrain_head")
    return ntxent_loss(z, tau)[0]


def _fd_check(loss_of_params, params, blocks, analytic, h=1e-6, tol=1e-4):
    for stack, grads in zip(blocks, analytic):
        for arr, g in zip(stack, grads):
            flat = arr.reshape(-1)
            num = np.zeros_like(flat)
            for k in range(flat.size):
                orig = flat[k]
                flat[k] = orig + h
                up = loss_of_params(params)
                flat[k] = orig - h
                down = loss_of_params(params)
                flat[k] = orig
                num[k] = (up - down) / (2 * h)
            gf = g.reshape(-1)
            rel = np.linalg.norm(gf - num) / max(np.linalg.norm(num), 1e-10)
            assert rel < tol, f"finite-difference mismatch: rel={rel}"


def test_classification_gradients_match_finite_differences():
    rng = np.random.default_rng(4)
    params = init_model(SPEC, rng, dtype=np.float64)
    x = rng.normal(size=(6, 5))
    y = np.array([0, 1, 2, 0, 1, 2])

    h_out, enc_cache = forward_encoder(x, params)
    logits, head_cache = forward_head(h_out, params.theta_c, "class_head")
    _, d_logits = cross_entropy(logits, y)
    enc_grads, head_grads = backward_encoder_head(
        params, params.theta_c, enc_cache, h_out, head_cache, logits, d_logits
    )
    _fd_check(
        lambda p: _class_loss(p, x, y),
        params,
        [params.theta_e, params.theta_c],
        [enc_grads, head_grads],
    )


def test_contrastive_gradients_match_finite_differences():
    rng = np.random.default_rng(9)
    params = init_model(SPEC, rng, dtype=np.float64)
    x = rng.normal(size=(8, 5))  # 4 anchors + 4 views

    h_out, enc_cache = forward_encoder(x, params)
    z, proj_cache = forward_head(h_out, params.theta_p, "pretrain_head")
    _, d_z = ntxent_loss(z, 0.8)
    enc_grads, proj_grads = backward_encoder_head(
        params, params.theta_p, enc_cache, h_out, proj_cache, z, d_z
    )
    _fd_check(
        lambda p: _contrastive_loss(p, x),
        params,
        [params.theta_e, params.theta_p],
        [enc_grads, proj_grads],
    )


def test_frozen_encoder_produces_no_encoder_gradient():
    rng = np.random.default_rng(2)
    params = init_model(SPEC, rng, dtype=np.float64)
    x = rng.normal(size=(4, 5))
    y = np.array([0, 1, 2, 1])
    h_out, enc_cache = forward_encoder(x, params)
    logits, head_cache = forward_head(h_out, params.theta_c, "class_head")
    _, d_logits = cross_entropy(logits, y)
    enc_grads, head_grads = backward_encoder_head(
        params, params.theta_c, enc_cache, h_out, head_cache, logits, d_logits,
        freeze_encoder=True,
    )
    assert enc_grads is None
    before = [a.copy() for a in params.theta_e]
    adam = AdamState.for_params(params.theta_c)
    optimizer_step(params.theta_c, head_grads, adam)
    for a, b in zip(params.theta_e, before):
        assert (a == b).all()


def test_init_is_fan_in_bounded_and_order_stable():
    p1 = init_model(SPEC, np.random.default_rng(123))
    p2 = init_model(SPEC, np.random.default_rng(123))
    for a, b in zip(_all_params(p1), _all_params(p2)):
        assert (a == b).all()
        assert a.dtype == np.float32
    w0 = p1.theta_e[0]
    bound = 1.0 / np.sqrt(SPEC.input_width)
    assert (np.abs(w0) <= bound).all()
    assert np.abs(w0).max() > 0.5 * bound  # draws actually fill the range


def test_hand_computed_forward_with_fixed_weights():
    spec = MlpSpec(
        input_width=2, class_count=2, hidden_width=2,
        encoder_hidden_layers=1, projection_width=2,
    )
    params = init_model(spec, np.random.default_rng(0), dtype=np.float64)
    # encoder: h = relu(x @ W + b) with W = [[1,0],[0,1]], b = [0,-1]
    params.theta_e[0][:] = np.eye(2)
    params.theta_e[1][:] = np.array([0.0, -1.0])
    # class head hidden: identity, no shift; output: sum vs difference
    params.theta_c[0][:] = np.eye(2)
    params.theta_c[1][:] = 0.0
    params.theta_c[2][:] = np.array([[1.0, 1.0], [1.0, -1.0]])
    params.theta_c[3][:] = np.array([0.5, 0.0])
    x = np.array([[2.0, 3.0], [-1.0, 0.5]])
    # row 1: h = relu([2, 2]) = [2, 2] -> logits [2+2+.5, 2-2] = [4.5, 0]
    # row 2: h = relu([-1, -.5]) = [0, 0] -> logits [.5, 0]
    logits = predict_logits(x, params)
    assert np.allclose(logits, [[4.5, 0.0], [0.5, 0.0]], atol=1e-12)


def test_cross_entropy_uniform_logits():
    logits = np.zeros((4, 3))
    y = np.array([0, 1, 2, 0])
    loss, grad = cross_entropy(logits, y)
    assert abs(loss - np.log(3.0)) < 1e-12
    assert np.allclose(grad.sum(axis=1), 0.0, atol=1e-12)
    probs = softmax(logits)
    assert np.allclose(probs, 1.0 / 3.0)


def test_adam_ignores_zero_gradient_and_descends_a_bowl():
    x = [np.array([1.0, -2.0])]
    adam = AdamState.for_params(x, lr=0.1)
    optimizer_step(x, [np.zeros(2)], adam)
    assert (x[0] == np.array([1.0, -2.0])).all()

    adam = AdamState.for_params(x, lr=0.1)
    for _ in range(500):
        optimizer_step(x, [x[0].copy()], adam)  # grad of 0.5*|x|^2 is x
    assert np.abs(x[0]).max() < 1e-3


def test_adam_first_step_size_equals_learning_rate():
    # with bias correction the very first update has magnitude lr per entry
    x = [np.array([0.0])]
    adam = AdamState.for_params(x, lr=0.05)
    optimizer_step(x, [np.array([3.7])], adam)
    assert abs(x[0][0] + 0.05) < 1e-9


def test_float32_training_path_stays_float32():
    params = init_model(SPEC, np.random.default_rng(1))
    grads = [np.ones_like(a) for a in params.theta_c]
    adam = AdamState.for_params(params.theta_c)
    optimizer_step(params.theta_c, grads, adam)
    for a in params.theta_c:
        assert a.dtype == np.float32


def test_checkpoint_round_trip_is_bit_exact(tmp_path):
    rng = np.random.default_rng(77)
    params = init_model(SPEC, rng)
    adam = AdamState.for_params(_all_params(params), lr=2e-3)
    grads = [0.01 * np.ones_like(a) for a in _all_params(params)]
    optimizer_step(_all_params(params), grads, adam)

    path = tmp_path / "model.npz"
    save_checkpoint(path, params, epoch=12, optimizer=adam,
                    extra={"note": "fixture"})
    loaded, epoch, opt, _, extra = load_checkpoint(path)
    assert epoch == 12 and extra["note"] == "fixture"
    for a, b in zip(_all_params(params), _all_params(loaded)):
        assert a.dtype == b.dtype
        assert (a == b).all()
    assert opt is not None and opt.t == adam.t and opt.lr == adam.lr
    for a, b in zip(adam.m + adam.v, opt.m + opt.v):
        assert (a == b).all()

    x = np.random.default_rng(5).normal(size=(9, 5)).astype(np.float32)
    assert (predict_logits(x, params) == predict_logits(x, loaded)).all()


def test_checkpoint_path_suffix_is_normalized(tmp_path):
    params = init_model(SPEC, np.random.default_rng(3))
    save_checkpoint(tmp_path / "model", params)
    loaded, _, _, _, _ = load_checkpoint(tmp_path / "model")
    assert (loaded.theta_e[0] == params.theta_e[0]).all()


def test_non_finite_activations_raise():
    params = init_model(SPEC, np.random.default_rng(6), dtype=np.float64)
    x = np.full((2, 5), np.inf)
    with np.errstate(invalid="ignore"), pytest.raises(NumericError):
        forward_encoder(x, params)


def test_spec_validation():
    with pytest.raises(ValueError):
        MlpSpec(input_width=0, class_count=2)
    with pytest.raises(ValueError):
        MlpSpec(input_width=3, class_count=1)
    with pytest.raises(ValueError):
        MlpSpec(input_width=3, class_count=2, activation="tanh")
