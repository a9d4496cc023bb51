"""Hot numeric kernels for full-batch gradient descent.

Each kernel is a self-contained function written in a numpy subset that
numba compiles in nopython mode. On import the module selects between
the jitted and the plain-numpy path; set PHASEGRID_DISABLE_NUMBA=1 to
force the fallback. benchmarks/benchmark_kernels.py compares both.

Conventions: inputs X are bias-augmented to Xb (n x (d+1)) by the
caller; W1 is m x (d+1), W2 is m x (m+1), A is d_out x m; predictions
are inv_alpha * relu((relu(Xb W1^T) | h_const) W2^T) A^T, where h_const
is the constant fed to the second layer's bias weights (the caller
passes the first-layer weight scale so that configurations sharing the
kappa ratios follow exactly equivalent dynamics). The ReLU subgradient
at 0 is 0 (strict > in all masks).

Stop codes returned by the training loop:
    0 converged, 1 max_steps, 2 diverged.
"""

import os

import numpy as np

STOP_CONVERGED = 0
STOP_MAX_STEPS = 1
STOP_DIVERGED = 2

NUMBA_DISABLED = os.environ.get("PHASEGRID_DISABLE_NUMBA", "0") not in ("", "0")


def _forward_impl(W1, W2, A, Xb, inv_alpha, h_const):
    """Forward pass. Returns (Z1, H1b, Z2, H2, F)."""
    n = Xb.shape[0]
    m = W1.shape[0]
    Z1 = np.dot(Xb, W1.T)
    H1b = np.empty((n, m + 1))
    H1b[:, :m] = np.maximum(Z1, 0.0)
    H1b[:, m] = h_const
    Z2 = np.dot(H1b, W2.T)
    H2 = np.maximum(Z2, 0.0)
    F = np.dot(H2, A.T) * inv_alpha
    return Z1, H1b, Z2, H2, F


def _gradients_impl(W1, W2, A, Xb, Y, inv_alpha, h_const):
    """Loss and analytic gradients of (1/2n) sum of squared residuals."""
    n = Xb.shape[0]
    m = W1.shape[0]
    Z1 = np.dot(Xb, W1.T)
    H1b = np.empty((n, m + 1))
    H1b[:, :m] = np.maximum(Z1, 0.0)
    H1b[:, m] = h_const
    Z2 = np.dot(H1b, W2.T)
    H2 = np.maximum(Z2, 0.0)
    F = np.dot(H2, A.T) * inv_alpha
    E = F - Y
    loss = 0.5 / n * np.sum(E * E)
    scale = inv_alpha / n
    dA = np.dot(E.T, H2) * scale
    G2 = np.where(Z2 > 0.0, np.dot(E, A), 0.0) * scale
    dW2 = np.dot(G2.T, H1b)
    G1 = np.where(Z1 > 0.0, np.dot(G2, W2)[:, :m], 0.0)
    dW1 = np.dot(G1.T, Xb)
    return loss, dW1, dW2, dA


def _loss_impl(W1, W2, A, Xb, Y, inv_alpha, h_const):
    n = Xb.shape[0]
    m = W1.shape[0]
    Z1 = np.dot(Xb, W1.T)
    H1b = np.empty((n, m + 1))
    H1b[:, :m] = np.maximum(Z1, 0.0)
    H1b[:, m] = h_const
    H2 = np.maximum(np.dot(H1b, W2.T), 0.0)
    E = np.dot(H2, A.T) * inv_alpha - Y
    return 0.5 / n * np.sum(E * E)


def _train_loop_impl(W1, W2, A, Xb, Y, inv_alpha, h_const, lr,
                     max_steps, rel_loss_target, divergence_cap):
    """Full-batch gradient descent, updating W1/W2/A in place.

    Returns (losses, steps_taken, stop_code) with losses[k] the loss at
    parameter state k, 0 <= k <= steps_taken.
    """
    n = Xb.shape[0]
    m = W1.shape[0]
    losses = np.empty(max_steps + 1)
    loss0 = 0.0
    steps = 0
    stop = STOP_MAX_STEPS
    scale = inv_alpha / n
    for k in range(max_steps + 1):
        Z1 = np.dot(Xb, W1.T)
        H1b = np.empty((n, m + 1))
        H1b[:, :m] = np.maximum(Z1, 0.0)
        H1b[:, m] = h_const
        Z2 = np.dot(H1b, W2.T)
        H2 = np.maximum(Z2, 0.0)
        F = np.dot(H2, A.T) * inv_alpha
        E = F - Y
        loss = 0.5 / n * np.sum(E * E)
        losses[k] = loss
        steps = k
        if k == 0:
            loss0 = loss
        if not np.isfinite(loss):
            stop = STOP_DIVERGED
            break
        if loss <= rel_loss_target * loss0:
            stop = STOP_CONVERGED
            break
        if loss > divergence_cap * loss0:
            stop = STOP_DIVERGED
            break
        if k == max_steps:
            stop = STOP_MAX_STEPS
            break
        dA = np.dot(E.T, H2) * scale
        G2 = np.where(Z2 > 0.0, np.dot(E, A), 0.0) * scale
        dW2 = np.dot(G2.T, H1b)
        G1 = np.where(Z1 > 0.0, np.dot(G2, W2)[:, :m], 0.0)
        dW1 = np.dot(G1.T, Xb)
        W1 -= lr * dW1
        W2 -= lr * dW2
        A -= lr * dA
    return losses[:steps + 1], steps, stop


def _train_loop_fused_impl(W1, W2, A, Xb, Y, inv_alpha, h_const, lr,
                           max_steps, rel_loss_target, divergence_cap):
    """Same contract as _train_loop_impl, with the W2 backprop fused.

    The m x m second-layer matrix dominates memory traffic, so the
    hidden-gradient accumulation (which needs the pre-update W2) and the
    rank-n W2 update are done in a single pass over its rows instead of
    materializing dW2. Only worth jitting; plain numpy cannot fuse this.
    """
    n = Xb.shape[0]
    m = W1.shape[0]
    losses = np.empty(max_steps + 1)
    G1 = np.empty((n, m))
    loss0 = 0.0
    steps = 0
    stop = STOP_MAX_STEPS
    scale = inv_alpha / n
    for k in range(max_steps + 1):
        Z1 = np.dot(Xb, W1.T)
        H1b = np.empty((n, m + 1))
        H1b[:, :m] = np.maximum(Z1, 0.0)
        H1b[:, m] = h_const
        Z2 = np.dot(H1b, W2.T)
        H2 = np.maximum(Z2, 0.0)
        F = np.dot(H2, A.T) * inv_alpha
        E = F - Y
        loss = 0.5 / n * np.sum(E * E)
        losses[k] = loss
        steps = k
        if k == 0:
            loss0 = loss
        if not np.isfinite(loss):
            stop = STOP_DIVERGED
            break
        if loss <= rel_loss_target * loss0:
            stop = STOP_CONVERGED
            break
        if loss > divergence_cap * loss0:
            stop = STOP_DIVERGED
            break
        if k == max_steps:
            stop = STOP_MAX_STEPS
            break
        dA = np.dot(E.T, H2) * scale
        G2 = np.where(Z2 > 0.0, np.dot(E, A), 0.0) * scale
        G1[:, :] = 0.0
        for i in range(m):
            row = W2[i]
            for s in range(n):
                g = G2[s, i]
                if g != 0.0:
                    for j in range(m):
                        G1[s, j] += g * row[j]
            for s in range(n):
                c = lr * G2[s, i]
                if c != 0.0:
                    for j in range(m + 1):
                        row[j] -= c * H1b[s, j]
        for s in range(n):
            for j in range(m):
                if Z1[s, j] <= 0.0:
                    G1[s, j] = 0.0
        dW1 = np.dot(G1.T, Xb)
        W1 -= lr * dW1
        A -= lr * dA
    return losses[:steps + 1], steps, stop


# Plain-numpy family, always available (used by the benchmark and tests).
numpy_forward = _forward_impl
numpy_gradients = _gradients_impl
numpy_loss = _loss_impl
numpy_train_loop = _train_loop_impl

if NUMBA_DISABLED:
    USING_NUMBA = False
    batch_forward = _forward_impl
    batch_gradients = _gradients_impl
    batch_loss = _loss_impl
    gd_train_loop = _train_loop_impl
else:
    from numba import njit

    USING_NUMBA = True
    _jit = njit(cache=True, nogil=True)
    batch_forward = _jit(_forward_impl)
    batch_gradients = _jit(_gradients_impl)
    batch_loss = _jit(_loss_impl)
    gd_train_loop = _jit(_train_loop_fused_impl)
