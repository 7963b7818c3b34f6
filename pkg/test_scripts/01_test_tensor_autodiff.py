#!/usr/bin/env python3
"""
Test: Tensor Autodiff
Purpose: Verify reverse-mode gradients, layers, optimizer and training loop

Tests:
- Analytic gradients match central differences for every op family
- Shape and domain errors are raised with the offending shapes
- no_grad records no graph
- Adam, ParamStore and the validation-tuned trainer behave deterministically
"""

import os
import sys

import numpy as np

from fixtures import (
    run_tests, random_tensor, tiny_train_config, TempRunDir,
    assert_equal, assert_true, assert_false, assert_close, assert_raises
)

from app.errors import DomainError, ShapeError, SpecError
from app.nn.functional import activation, linalg, structured_layer
from app.nn.gradcheck import grad_check
from app.nn.layers import conv2d, counter_rng, depthwise_conv2d, dropout, layer_norm, lstm
from app.nn.optim import Adam
from app.nn.params import ParamStore
from app.nn.tensor import Tensor, gelu, log_softmax, matmul, no_grad, softmax, tanh
from app.nn.training import TargetScaler, batched_inference, fit_supervised

GRAD_TOL = 1e-6


# ============================================================================
# Test: Gradient checks
# ============================================================================

def test_matmul_gradients():
    """matmul followed by a square matches finite differences"""
    store = ParamStore(seed=1)
    store.add("a", (3, 4))
    store.add("b", (4, 2))
    error = grad_check(lambda s: (matmul(s["a"], s["b"]) ** 2).sum(), store)
    assert_true(error < GRAD_TOL, f"matmul gradient error {error}")


def test_activation_gradients():
    """gelu, tanh and softmax chains match finite differences"""
    store = ParamStore(seed=2)
    store.add("x", (2, 5))
    weights = np.random.default_rng(0).standard_normal((2, 5))

    def f(s):
        h = gelu(s["x"]) + tanh(s["x"])
        return (softmax(h) * Tensor(weights)).sum() + log_softmax(s["x"]).sum()

    error = grad_check(f, store)
    assert_true(error < GRAD_TOL, f"activation gradient error {error}")


def test_layer_norm_gradients():
    """Normalization with gain and bias matches finite differences"""
    store = ParamStore(seed=3)
    store.add("x", (3, 6))
    store.add("gamma", (6,), "ones")
    store.add("beta", (6,), "zeros")
    weights = np.random.default_rng(1).standard_normal((3, 6))
    error = grad_check(lambda s: (layer_norm(s["x"], s["gamma"], s["beta"]) * Tensor(weights)).sum(), store)
    assert_true(error < GRAD_TOL, f"layer norm gradient error {error}")


def test_convolution_gradients():
    """Full and depthwise convolutions, stride 1 and 2"""
    store = ParamStore(seed=4)
    store.add("x", (1, 5, 6, 2))
    store.add("w", (3, 3, 2, 3), "he")
    store.add("b", (3,), "glorot")
    store.add("d", (3, 3, 3), "he")

    def f(s):
        h = tanh(conv2d(s["x"], s["w"], s["b"], stride=2))
        return (depthwise_conv2d(h, s["d"], stride=1) ** 2).sum()

    error = grad_check(f, store)
    assert_true(error < GRAD_TOL, f"convolution gradient error {error}")


def test_lstm_gradients():
    """LSTM over a short sequence, both directions"""
    store = ParamStore(seed=5)
    store.add("wi", (2, 12))
    store.add("wh", (3, 12))
    store.add("b", (12,), "zeros")
    x = random_tensor((2, 3, 2), seed=9, requires_grad=False)

    def f(s):
        forward = lstm(x, s["wi"], s["wh"], s["b"])
        backward = lstm(x, s["wi"], s["wh"], s["b"], reverse=True)
        return (forward * backward).sum() + (forward ** 2).sum()

    error = grad_check(f, store)
    assert_true(error < GRAD_TOL, f"lstm gradient error {error}")


def test_grad_check_rejects_bad_eps():
    """eps outside (0, 1e-2] is a domain error"""
    store = ParamStore(seed=0)
    store.add("x", (2,))
    assert_raises(DomainError, grad_check, lambda s: (s["x"] ** 2).sum(), store, eps=0.0)
    assert_raises(DomainError, grad_check, lambda s: (s["x"] ** 2).sum(), store, eps=0.5)


# ============================================================================
# Test: Errors and graph recording
# ============================================================================

def test_shape_errors():
    """Non-conformable shapes raise ShapeError naming both shapes"""
    a = random_tensor((2, 3))
    b = random_tensor((4, 2))
    error = assert_raises(ShapeError, matmul, a, b)
    assert_true("(2, 3)" in str(error) and "(4, 2)" in str(error))
    assert_raises(ShapeError, linalg, random_tensor((2, 3)), random_tensor((2, 4)), "add_broadcast")
    assert_raises(ShapeError, conv2d, random_tensor((1, 4, 4, 2)), random_tensor((3, 3, 3, 1)))


def test_non_finite_inputs_rejected():
    """Activations reject NaN and inf; softmax accepts -inf as a mask"""
    bad = Tensor(np.array([[1.0, np.nan]]), requires_grad=True)
    assert_raises(DomainError, activation, bad, "relu")
    assert_raises(DomainError, tanh, Tensor(np.array([np.inf])))
    masked = softmax(Tensor(np.array([[0.0, -np.inf, 1.0]])))
    assert_equal(float(masked.data[0, 1]), 0.0)
    assert_close(masked.data.sum(), 1.0, tol=1e-12)


def test_no_grad_records_nothing():
    """Ops inside no_grad produce tensors without parents"""
    x = random_tensor((2, 2))
    with no_grad():
        y = (x * 2.0).sum()
    assert_false(y.requires_grad)
    assert_raises(DomainError, y.backward)


def test_unknown_kinds_rejected():
    """Dispatchers reject unknown kinds"""
    assert_raises(ValueError, activation, random_tensor((2,)), "swish")
    assert_raises(ValueError, structured_layer, random_tensor((2,)), "lstm")


def test_dispatchers_match_direct_ops():
    """Named kinds compute the same values as the ops they select"""
    x = random_tensor((2, 3, 3, 2))
    assert_close(activation(x, "gelu").data, gelu(x).data)
    assert_close(activation(x, "linear").data, x.data)
    assert_close(structured_layer(x, "global_avg_pool").data, x.data.mean(axis=(1, 2)))
    maxed = structured_layer([x, x * -1.0], "max_pool_set")
    assert_close(maxed.data, np.abs(x.data))
    a, b = random_tensor((2, 3)), random_tensor((2, 2))
    assert_close(linalg(a, b, "concat_lastdim").data, np.concatenate([a.data, b.data], axis=-1))
    assert_equal(linalg(a, random_tensor((1, 3)), "mul_broadcast").shape, (2, 3))


# ============================================================================
# Test: Dropout, parameters and optimizer
# ============================================================================

def test_dropout_is_counter_based():
    """Same (seed, path, step) gives the same mask; eval mode is identity"""
    x = Tensor(np.ones((4, 8)))
    first = dropout(x, 0.5, True, seed=3, path="enc0/attn", step=5).data
    second = dropout(x, 0.5, True, seed=3, path="enc0/attn", step=5).data
    other = dropout(x, 0.5, True, seed=3, path="enc0/attn", step=6).data
    assert_close(first, second)
    assert_true(not np.array_equal(first, other), "different steps should draw different masks")
    assert_true(dropout(x, 0.5, False) is x)
    draws = counter_rng(1, "p", 0).random(3)
    assert_close(draws, counter_rng(1, "p", 0).random(3))


def test_param_init_independent_of_order():
    """Initial values depend on (seed, name) only"""
    first = ParamStore(seed=11)
    first.add("a", (3, 3))
    first.add("b", (2, 5))
    second = ParamStore(seed=11)
    second.add("b", (2, 5))
    second.add("a", (3, 3))
    assert_close(first["a"].data, second["a"].data)
    assert_close(first["b"].data, second["b"].data)
    assert_raises(SpecError, first.add, "a", (1,))


def test_checkpoint_round_trip():
    """A saved store loads into a fresh store with the same layout"""
    store = ParamStore(seed=2)
    store.add("enc/w", (4, 3))
    store.add("enc/b", (3,), "zeros")
    store["enc/b"].data = np.array([0.5, -1.0, 2.0])
    with TempRunDir() as out:
        path = os.path.join(out, "model.params")
        store.save(path)
        fresh = ParamStore(seed=99)
        fresh.add("enc/w", (4, 3))
        fresh.add("enc/b", (3,), "zeros")
        fresh.load(path)
    assert_close(fresh["enc/w"].data, store["enc/w"].data)
    assert_close(fresh["enc/b"].data, [0.5, -1.0, 2.0])


def test_adam_first_step():
    """With bias correction the first update is lr * sign(grad)"""
    store = ParamStore(seed=0)
    x = store.add("x", (3,), "zeros")
    x.data = np.array([1.0, -2.0, 3.0])
    optimizer = Adam(store, learning_rate=0.1)
    optimizer.zero_grad()
    (x ** 2).sum().backward()
    optimizer.step()
    assert_close(store["x"].data, [0.9, -1.9, 2.9], tol=1e-6)


# ============================================================================
# Test: Training
# ============================================================================

def test_training_improves_validation_loss():
    """A linear model on a noiseless target ends no worse than initialization"""
    rng = np.random.default_rng(0)
    x_train, x_val = rng.standard_normal((40, 3)), rng.standard_normal((12, 3))
    w_true = np.array([1.0, -2.0, 0.5])
    y_train, y_val = x_train @ w_true, x_val @ w_true

    store = ParamStore(seed=1)
    store.add("w", (3, 1))
    data = {"train": x_train, "validation": x_val}

    def forward(split, idx, training, step):
        return matmul(Tensor(data[split][idx]), store["w"]).reshape(len(idx))

    config = tiny_train_config(max_steps=60, eval_interval=10).model_copy(update={"learning_rate": 0.05})
    report, scaler = fit_supervised("linear", store, forward, y_train, y_val, "mse", config)
    assert_equal(report.steps_run, 60)
    assert_true(report.best_val <= report.history[0][1])
    assert_true(report.best_step > 0, "sixty Adam steps should beat the initial weights")
    assert_close(scaler.inverse(scaler.transform(y_val)), y_val, tol=1e-12)


def test_binary_scaler_is_identity():
    scaler = TargetScaler.fit(np.array([0.0, 1.0, 1.0]), binary=True)
    assert_close(scaler.transform([0.0, 1.0]), [0.0, 1.0])


def test_batched_inference_preserves_order():
    """Threaded inference returns results in input order"""
    items = list(range(20))
    serial = batched_inference(lambda i: i * i, items, threads=1)
    parallel = batched_inference(lambda i: i * i, items, threads=4)
    assert_equal(parallel, serial)


# ============================================================================
# Main Test Runner
# ============================================================================

def main():
    """Run all autodiff tests"""
    tests = [
        ("Gradient: matmul", test_matmul_gradients),
        ("Gradient: activations and softmax", test_activation_gradients),
        ("Gradient: layer norm", test_layer_norm_gradients),
        ("Gradient: convolutions", test_convolution_gradients),
        ("Gradient: LSTM", test_lstm_gradients),
        ("grad_check rejects bad eps", test_grad_check_rejects_bad_eps),
        ("Shape errors", test_shape_errors),
        ("Non-finite inputs rejected", test_non_finite_inputs_rejected),
        ("no_grad records nothing", test_no_grad_records_nothing),
        ("Unknown kinds rejected", test_unknown_kinds_rejected),
        ("Dispatchers match direct ops", test_dispatchers_match_direct_ops),
        ("Dropout is counter-based", test_dropout_is_counter_based),
        ("Parameter init independent of order", test_param_init_independent_of_order),
        ("Checkpoint round trip", test_checkpoint_round_trip),
        ("Adam first step", test_adam_first_step),
        ("Training improves validation loss", test_training_improves_validation_loss),
        ("Binary scaler is identity", test_binary_scaler_is_identity),
        ("Batched inference preserves order", test_batched_inference_preserves_order),
    ]
    return run_tests("Tensor Autodiff Tests", tests)


if __name__ == "__main__":
    sys.exit(main())
