"""Pure-numpy LSTM kernels.

Reference implementation of the three hot routines (forward pass, BPTT
gradient, SGD training loop with early stopping). The compiled module
``rere._lstm_ext`` exposes the same functions with the same flat parameter
layout; this one is used when the extension is missing or when
``RERE_BACKEND=python``.

Flat layout for ``H`` hidden units, gate order (input, forget, output, cell)::

    [0, 4H)                 input weights  W[g, j]
    [4H, 4H + 4H^2)         recurrent      U[g, j, k]
    [4H + 4H^2, 8H + 4H^2)  gate biases    B[g, j]
    [8H + 4H^2, 9H + 4H^2)  readout weights
    9H + 4H^2               readout bias
"""

from __future__ import annotations

import math

import numpy as np

NAME = "python"


def n_params(hidden: int) -> int:
    return 4 * hidden * hidden + 9 * hidden + 1


def _check(theta, hidden, xs, targets=None):
    if hidden < 1:
        raise ValueError("hidden must be >= 1")
    if len(theta) != n_params(hidden):
        raise ValueError(f"theta has {len(theta)} entries, expected {n_params(hidden)}")
    if len(xs) < 1:
        raise ValueError("empty input sequence")
    if targets is not None and len(targets) != len(xs):
        raise ValueError("inputs and targets differ in length")


def _unpack(theta: np.ndarray, hidden: int):
    h = hidden
    o_u = 4 * h
    o_b = o_u + 4 * h * h
    o_w = o_b + 4 * h
    W = theta[:o_u].reshape(4 * h)
    U = theta[o_u:o_b].reshape(4 * h, h)
    B = theta[o_b:o_w].reshape(4 * h)
    w_out = theta[o_w:o_w + h]
    b_out = theta[o_w + h]
    return W, U, B, w_out, b_out


def _sigmoid(a: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-a))


def _forward(theta, hidden, xs):
    W, U, B, w_out, b_out = _unpack(theta, hidden)
    h = np.zeros(hidden)
    c = np.zeros(hidden)
    cache = []
    ys = np.empty(len(xs))
    for s, x in enumerate(xs):
        a = W * x + U @ h + B
        i = _sigmoid(a[:hidden])
        f = _sigmoid(a[hidden:2 * hidden])
        o = _sigmoid(a[2 * hidden:3 * hidden])
        g = np.tanh(a[3 * hidden:])
        c_prev, h_prev = c, h
        c = f * c_prev + i * g
        tc = np.tanh(c)
        h = o * tc
        ys[s] = w_out @ h + b_out
        cache.append((x, h_prev, c_prev, i, f, o, g, tc, h))
    return ys, cache


def predict(theta: np.ndarray, hidden: int, xs: np.ndarray) -> float:
    """Readout after feeding ``xs`` from a zero state."""
    _check(theta, hidden, xs)
    ys, _ = _forward(theta, hidden, xs)
    return float(ys[-1])


def loss_grad(theta: np.ndarray, hidden: int, xs: np.ndarray, targets: np.ndarray):
    """Mean squared one-step error over the sequence and its full gradient."""
    _check(theta, hidden, xs, targets)
    n = len(xs)
    ys, cache = _forward(theta, hidden, xs)
    err = ys - targets
    loss = float(err @ err) / n
    W, U, B, w_out, _ = _unpack(theta, hidden)

    grad = np.zeros_like(theta)
    gW, gU, gB, gw, _ = _unpack(grad, hidden)
    gb_out = 0.0
    dh_next = np.zeros(hidden)
    dc_next = np.zeros(hidden)
    da = np.empty(4 * hidden)
    for s in range(n - 1, -1, -1):
        x, h_prev, c_prev, i, f, o, g, tc, h = cache[s]
        dy = 2.0 * err[s] / n
        gw += dy * h
        gb_out += dy
        dh = w_out * dy + dh_next
        dc = dh * o * (1.0 - tc * tc) + dc_next
        da[:hidden] = dc * g * i * (1.0 - i)
        da[hidden:2 * hidden] = dc * c_prev * f * (1.0 - f)
        da[2 * hidden:3 * hidden] = dh * tc * o * (1.0 - o)
        da[3 * hidden:] = dc * i * (1.0 - g * g)
        gW += da * x
        gB += da
        gU += np.outer(da, h_prev)
        dh_next = U.T @ da
        dc_next = dc * f
    grad[-1] = gb_out
    return loss, grad


def train(
    theta: np.ndarray,
    hidden: int,
    xs: np.ndarray,
    targets: np.ndarray,
    lr: float,
    max_epochs: int,
    min_epochs: int,
    patience: int,
    tol: float,
    clip: float,
):
    """Full-batch SGD with loss-plateau early stopping.

    Returns ``(theta, epochs_used, losses)`` where ``losses[e]`` is the loss
    measured at the start of epoch ``e`` (before its update).
    """
    _check(theta, hidden, xs, targets)
    if max_epochs < 1:
        raise ValueError("max_epochs must be >= 1")
    theta = np.array(theta, dtype=np.float64, copy=True)
    losses = np.empty(max_epochs)
    best = math.inf
    wait = 0
    epoch = 0
    while epoch < max_epochs:
        loss, grad = loss_grad(theta, hidden, xs, targets)
        losses[epoch] = loss
        norm = math.sqrt(float(grad @ grad))
        scale = lr
        if norm > clip:
            scale = lr * (clip / norm)
        theta -= scale * grad
        epoch += 1
        if loss < best * (1.0 - tol):
            best = loss
            wait = 0
        else:
            wait += 1
        if wait >= patience and epoch >= min_epochs:
            break
    return theta, epoch, losses[:epoch].copy()
