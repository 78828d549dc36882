# cython: language_level=3
"""Compiled LSTM kernels; same contract and layout as rere._lstm_py."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, tanh, sqrt, INFINITY
from libc.stdlib cimport malloc, calloc, free

cnp.import_array()

NAME = "compiled"


def n_params(int hidden):
    return 4 * hidden * hidden + 9 * hidden + 1


cdef inline double _sig(double a) noexcept nogil:
    return 1.0 / (1.0 + exp(-a))


cdef struct Work:
    int H
    int n
    # per step s: gates i,f,o,g, tanh(c), h, c  (each H), row-major [s][H]
    double* gi
    double* gf
    double* go
    double* gg
    double* tc
    double* hs   # (n + 1) * H, hs[0] is the zero initial state
    double* cs   # (n + 1) * H
    double* ys
    double* dh
    double* dc
    double* dh_next
    double* dc_next
    double* da


cdef int _work_alloc(Work* w, int H, int n) noexcept nogil:
    w.H = H
    w.n = n
    w.gi = <double*>malloc(n * H * sizeof(double))
    w.gf = <double*>malloc(n * H * sizeof(double))
    w.go = <double*>malloc(n * H * sizeof(double))
    w.gg = <double*>malloc(n * H * sizeof(double))
    w.tc = <double*>malloc(n * H * sizeof(double))
    w.hs = <double*>calloc((n + 1) * H, sizeof(double))
    w.cs = <double*>calloc((n + 1) * H, sizeof(double))
    w.ys = <double*>malloc(n * sizeof(double))
    w.dh = <double*>malloc(H * sizeof(double))
    w.dc = <double*>malloc(H * sizeof(double))
    w.dh_next = <double*>malloc(H * sizeof(double))
    w.dc_next = <double*>malloc(H * sizeof(double))
    w.da = <double*>malloc(4 * H * sizeof(double))
    if (w.gi == NULL or w.gf == NULL or w.go == NULL or w.gg == NULL or w.tc == NULL
            or w.hs == NULL or w.cs == NULL or w.ys == NULL or w.dh == NULL
            or w.dc == NULL or w.dh_next == NULL or w.dc_next == NULL or w.da == NULL):
        return -1
    return 0


cdef void _work_free(Work* w) noexcept nogil:
    free(w.gi); free(w.gf); free(w.go); free(w.gg); free(w.tc)
    free(w.hs); free(w.cs); free(w.ys)
    free(w.dh); free(w.dc); free(w.dh_next); free(w.dc_next); free(w.da)


cdef void _forward(const double* th, const double* xs, Work* w) noexcept nogil:
    cdef int H = w.H
    cdef int n = w.n
    cdef const double* W = th
    cdef const double* U = th + 4 * H
    cdef const double* B = th + 4 * H + 4 * H * H
    cdef const double* wo = th + 8 * H + 4 * H * H
    cdef double bo = th[9 * H + 4 * H * H]
    cdef int s, g, j, k, row
    cdef double a, x, y, c
    cdef double* hp
    cdef double* cp
    cdef double* hn
    cdef double* cn
    cdef double gate[4]
    for s in range(n):
        x = xs[s]
        hp = w.hs + s * H
        cp = w.cs + s * H
        hn = w.hs + (s + 1) * H
        cn = w.cs + (s + 1) * H
        for j in range(H):
            for g in range(4):
                row = g * H + j
                a = W[row] * x + B[row]
                for k in range(H):
                    a += U[row * H + k] * hp[k]
                gate[g] = a
            w.gi[s * H + j] = _sig(gate[0])
            w.gf[s * H + j] = _sig(gate[1])
            w.go[s * H + j] = _sig(gate[2])
            w.gg[s * H + j] = tanh(gate[3])
        for j in range(H):
            c = w.gf[s * H + j] * cp[j] + w.gi[s * H + j] * w.gg[s * H + j]
            cn[j] = c
            w.tc[s * H + j] = tanh(c)
            hn[j] = w.go[s * H + j] * w.tc[s * H + j]
        y = bo
        for j in range(H):
            y += wo[j] * hn[j]
        w.ys[s] = y


cdef double _loss_grad(const double* th, const double* xs, const double* ts,
                       double* grad, Work* w) noexcept nogil:
    cdef int H = w.H
    cdef int n = w.n
    cdef int P = 4 * H * H + 9 * H + 1
    cdef const double* U = th + 4 * H
    cdef const double* wo = th + 8 * H + 4 * H * H
    cdef double* gW = grad
    cdef double* gU = grad + 4 * H
    cdef double* gB = grad + 4 * H + 4 * H * H
    cdef double* gw = grad + 8 * H + 4 * H * H
    cdef int s, j, k, g, row
    cdef double loss = 0.0
    cdef double e, dy, x, i_, f_, o_, gg_, t_, acc
    cdef double* hp
    cdef double* cp
    cdef double* hn

    _forward(th, xs, w)
    for s in range(n):
        e = w.ys[s] - ts[s]
        loss += e * e
    loss /= n

    for k in range(P):
        grad[k] = 0.0
    for j in range(H):
        w.dh_next[j] = 0.0
        w.dc_next[j] = 0.0

    for s in range(n - 1, -1, -1):
        x = xs[s]
        hp = w.hs + s * H
        cp = w.cs + s * H
        hn = w.hs + (s + 1) * H
        dy = 2.0 * (w.ys[s] - ts[s]) / n
        for j in range(H):
            gw[j] += dy * hn[j]
        grad[P - 1] += dy
        for j in range(H):
            i_ = w.gi[s * H + j]
            f_ = w.gf[s * H + j]
            o_ = w.go[s * H + j]
            gg_ = w.gg[s * H + j]
            t_ = w.tc[s * H + j]
            w.dh[j] = wo[j] * dy + w.dh_next[j]
            w.dc[j] = w.dh[j] * o_ * (1.0 - t_ * t_) + w.dc_next[j]
            w.da[j] = w.dc[j] * gg_ * i_ * (1.0 - i_)
            w.da[H + j] = w.dc[j] * cp[j] * f_ * (1.0 - f_)
            w.da[2 * H + j] = w.dh[j] * t_ * o_ * (1.0 - o_)
            w.da[3 * H + j] = w.dc[j] * i_ * (1.0 - gg_ * gg_)
        for row in range(4 * H):
            gW[row] += w.da[row] * x
            gB[row] += w.da[row]
            for k in range(H):
                gU[row * H + k] += w.da[row] * hp[k]
        for k in range(H):
            acc = 0.0
            for row in range(4 * H):
                acc += U[row * H + k] * w.da[row]
            w.dh_next[k] = acc
        for j in range(H):
            w.dc_next[j] = w.dc[j] * w.gf[s * H + j]
    return loss


def _as_vec(a):
    return np.ascontiguousarray(a, dtype=np.float64)


cdef int _check(Py_ssize_t n_theta, int hidden, Py_ssize_t n, Py_ssize_t n_targets) except -1:
    if hidden < 1:
        raise ValueError("hidden must be >= 1")
    if n_theta != 4 * hidden * hidden + 9 * hidden + 1:
        raise ValueError(f"theta has {n_theta} entries, expected {4 * hidden * hidden + 9 * hidden + 1}")
    if n < 1:
        raise ValueError("empty input sequence")
    if n_targets >= 0 and n_targets != n:
        raise ValueError("inputs and targets differ in length")
    return 0


def predict(theta, int hidden, xs):
    """Readout after feeding ``xs`` from a zero state."""
    cdef const double[::1] th = _as_vec(theta)
    cdef const double[::1] xv = _as_vec(xs)
    cdef Work w
    cdef double y
    cdef int n = xv.shape[0]
    _check(th.shape[0], hidden, n, -1)
    if _work_alloc(&w, hidden, n) != 0:
        _work_free(&w)
        raise MemoryError()
    with nogil:
        _forward(&th[0], &xv[0], &w)
        y = w.ys[n - 1]
    _work_free(&w)
    return y


def loss_grad(theta, int hidden, xs, targets):
    """Mean squared one-step error over the sequence and its full gradient."""
    cdef const double[::1] th = _as_vec(theta)
    cdef const double[::1] xv = _as_vec(xs)
    cdef const double[::1] tv = _as_vec(targets)
    cdef int n = xv.shape[0]
    _check(th.shape[0], hidden, n, tv.shape[0])
    grad_arr = np.zeros(th.shape[0])
    cdef double[::1] gv = grad_arr
    cdef Work w
    cdef double loss
    if _work_alloc(&w, hidden, n) != 0:
        _work_free(&w)
        raise MemoryError()
    with nogil:
        loss = _loss_grad(&th[0], &xv[0], &tv[0], &gv[0], &w)
    _work_free(&w)
    return loss, grad_arr


def train(theta, int hidden, xs, targets, double lr, int max_epochs,
          int min_epochs, int patience, double tol, double clip):
    """Full-batch SGD with loss-plateau early stopping.

    Returns ``(theta, epochs_used, losses)``; ``losses[e]`` is the loss at the
    start of epoch ``e``.
    """
    out = np.array(theta, dtype=np.float64, copy=True)
    cdef double[::1] th = out
    cdef const double[::1] xv = _as_vec(xs)
    cdef const double[::1] tv = _as_vec(targets)
    cdef int n = xv.shape[0]
    cdef int P = th.shape[0]
    losses_arr = np.empty(max(max_epochs, 1))
    cdef double[::1] lv = losses_arr
    grad_arr = np.zeros(P)
    cdef double[::1] gv = grad_arr
    cdef Work w
    cdef int epoch = 0
    cdef int wait = 0
    cdef int k
    cdef double best = INFINITY
    cdef double loss, norm, scale
    _check(P, hidden, n, tv.shape[0])
    if max_epochs < 1:
        raise ValueError("max_epochs must be >= 1")
    if _work_alloc(&w, hidden, n) != 0:
        _work_free(&w)
        raise MemoryError()
    with nogil:
        while epoch < max_epochs:
            loss = _loss_grad(&th[0], &xv[0], &tv[0], &gv[0], &w)
            lv[epoch] = loss
            norm = 0.0
            for k in range(P):
                norm += gv[k] * gv[k]
            norm = sqrt(norm)
            scale = lr
            if norm > clip:
                scale = lr * (clip / norm)
            for k in range(P):
                th[k] -= scale * gv[k]
            epoch += 1
            if loss < best * (1.0 - tol):
                best = loss
                wait = 0
            else:
                wait += 1
            if wait >= patience and epoch >= min_epochs:
                break
    _work_free(&w)
    return out, epoch, losses_arr[:epoch].copy()
