"""Three-layer ReLU network: parameters, forward/backward, GD training.

The network computes (1/alpha) * A relu(W2 [relu(W1 [x;1]); h_const])
with bias columns folded into W1 and W2. h_const is the constant input
feeding the second layer's bias weights; networks drawn from a power-law
configuration use h_const = beta1 (the scale of the sibling activations)
so that configurations sharing the kappa ratios follow exactly
equivalent dynamics. Hand-built networks default to h_const = 1.
All math is float64.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import kernels
from .data import Dataset, augment
from .errors import ConfigError, PhaseGridError

STOP_REASONS = {
    kernels.STOP_CONVERGED: "converged",
    kernels.STOP_MAX_STEPS: "max_steps",
    kernels.STOP_DIVERGED: "diverged",
}


@dataclass
class Network:
    """Parameter set. Treat instances as immutable; train() works on a copy."""

    W1: np.ndarray  # m x (d+1)
    W2: np.ndarray  # m x (m+1)
    A: np.ndarray   # d_out x m
    alpha: float
    h_const: float = 1.0  # constant input to the second layer's bias weights

    def __post_init__(self):
        self.W1 = np.ascontiguousarray(self.W1, dtype=np.float64)
        self.W2 = np.ascontiguousarray(self.W2, dtype=np.float64)
        self.A = np.ascontiguousarray(self.A, dtype=np.float64)
        m = self.W1.shape[0]
        if self.W2.shape != (m, m + 1):
            raise ConfigError(f"W2 shape {self.W2.shape} inconsistent with m={m}")
        if self.A.ndim != 2 or self.A.shape[1] != m:
            raise ConfigError(f"A shape {self.A.shape} inconsistent with m={m}")
        if not (self.alpha > 0 and np.isfinite(self.alpha)):
            raise ConfigError(f"alpha must be positive and finite, got {self.alpha}")
        if not (self.h_const > 0 and np.isfinite(self.h_const)):
            raise ConfigError(f"h_const must be positive and finite, got {self.h_const}")

    @property
    def m(self) -> int:
        return self.W1.shape[0]

    @property
    def d(self) -> int:
        return self.W1.shape[1] - 1

    @property
    def d_out(self) -> int:
        return self.A.shape[0]

    def copy(self) -> "Network":
        return Network(self.W1.copy(), self.W2.copy(), self.A.copy(),
                       self.alpha, self.h_const)


class Gradients(NamedTuple):
    dW1: np.ndarray
    dW2: np.ndarray
    dA: np.ndarray


@dataclass(frozen=True)
class Schedule:
    """GD schedule. lr is the raw step size actually applied."""

    lr: float
    max_steps: int = 100_000
    rel_loss_target: float = 1e-3
    divergence_cap: float = 1e4

    def __post_init__(self):
        if not self.lr > 0:
            raise ConfigError(f"lr must be positive, got {self.lr}")
        if self.max_steps < 0:
            raise ConfigError("max_steps must be >= 0")
        if not self.rel_loss_target > 0:
            raise ConfigError("rel_loss_target must be positive")
        if not self.divergence_cap > 1:
            raise ConfigError("divergence_cap must exceed 1")


@dataclass
class TrainRecord:
    losses: np.ndarray  # losses[k] = loss at parameter state k
    initial_snapshot: Network
    final_snapshot: Network
    steps_taken: int
    stop_reason: str

    @property
    def loss_curve(self) -> list[tuple[int, float]]:
        return list(enumerate(self.losses.tolist()))

    @property
    def final_loss(self) -> float:
        return float(self.losses[-1])


def init_network(config, rng: np.random.Generator) -> Network:
    """Draw a network from the config's Gaussian law.

    Draw order is fixed (W1, then W2, then A, each row-major) so that a
    seed determines the network bit-for-bit. Bias columns use the same
    variance as the weights.
    """
    b1, b2, b3 = config.beta1, config.beta2, config.beta3
    for name, b in (("beta1", b1), ("beta2", b2), ("beta3", b3)):
        if not (b > 0 and np.isfinite(b)):
            raise ConfigError(f"{name} must be positive and finite, got {b}")
    m, d, d_out = config.m, config.d, config.d_out
    if m < 1:
        raise ConfigError(f"width must be >= 1, got {m}")
    W1 = b1 * rng.standard_normal((m, d + 1))
    W2 = b2 * rng.standard_normal((m, m + 1))
    A = b3 * rng.standard_normal((d_out, m))
    return Network(W1, W2, A, alpha=config.alpha, h_const=b1)


def forward(net: Network, X: np.ndarray):
    """Predictions (n x d_out) plus the activation cache for backward."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != net.d:
        raise ConfigError(f"input has {X.shape[1]} columns, network expects d={net.d}")
    Xb = augment(X)
    Z1, H1b, Z2, H2, F = kernels.batch_forward(net.W1, net.W2, net.A, Xb,
                                                1.0 / net.alpha, net.h_const)
    cache = {"Xb": Xb, "Z1": Z1, "H1b": H1b, "Z2": Z2, "H2": H2}
    return F, cache


def predict(net: Network, X: np.ndarray) -> np.ndarray:
    return forward(net, X)[0]


def loss(net: Network, data: Dataset) -> float:
    if data.d != net.d or data.d_out != net.d_out:
        raise ConfigError(
            f"dataset ({data.d}->{data.d_out}) does not match network ({net.d}->{net.d_out})")
    return float(kernels.batch_loss(net.W1, net.W2, net.A, augment(data.X),
                                    data.Y, 1.0 / net.alpha, net.h_const))


def backward(net: Network, data: Dataset) -> Gradients:
    """Analytic gradients of loss() w.r.t. W1, W2 and A."""
    if data.d != net.d or data.d_out != net.d_out:
        raise ConfigError(
            f"dataset ({data.d}->{data.d_out}) does not match network ({net.d}->{net.d_out})")
    _, dW1, dW2, dA = kernels.batch_gradients(net.W1, net.W2, net.A, augment(data.X),
                                              data.Y, 1.0 / net.alpha, net.h_const)
    return Gradients(dW1, dW2, dA)


def train(net: Network, data: Dataset, schedule: Schedule) -> TrainRecord:
    """Full-batch gradient descent on a copy of the network.

    Stops when the loss falls to rel_loss_target * initial loss, after
    max_steps updates, or on divergence (loss above divergence_cap times
    the initial loss, or non-finite).
    """
    if data.d != net.d or data.d_out != net.d_out:
        raise ConfigError(
            f"dataset ({data.d}->{data.d_out}) does not match network ({net.d}->{net.d_out})")
    initial = net.copy()
    work = net.copy()
    losses, steps, stop = kernels.gd_train_loop(
        work.W1, work.W2, work.A, augment(data.X), data.Y, 1.0 / net.alpha,
        net.h_const, float(schedule.lr), int(schedule.max_steps),
        float(schedule.rel_loss_target), float(schedule.divergence_cap))
    return TrainRecord(
        losses=np.asarray(losses),
        initial_snapshot=initial,
        final_snapshot=work,
        steps_taken=int(steps),
        stop_reason=STOP_REASONS[int(stop)],
    )


# --- checkpoint I/O ---------------------------------------------------------
#
# A checkpoint is a single .npz document: row-major float64 arrays W1, W2, A
# plus a JSON header string with {m, d, d_out, alpha, h_const, seed,
# config_hash}.

def config_hash(doc: dict) -> str:
    return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()[:16]


def save_checkpoint(path, net: Network, seed=None, config_doc: dict | None = None):
    header = {
        "m": net.m, "d": net.d, "d_out": net.d_out, "alpha": net.alpha,
        "h_const": net.h_const, "seed": seed,
        "config_hash": config_hash(config_doc) if config_doc else None,
    }
    np.savez(path, W1=net.W1, W2=net.W2, A=net.A,
             header=np.frombuffer(json.dumps(header).encode(), dtype=np.uint8))


def load_checkpoint(path) -> tuple[Network, dict]:
    try:
        with np.load(path) as doc:
            header = json.loads(bytes(doc["header"]).decode())
            net = Network(doc["W1"], doc["W2"], doc["A"], alpha=float(header["alpha"]),
                          h_const=float(header.get("h_const", 1.0)))
    except (KeyError, ValueError, OSError) as exc:
        raise PhaseGridError(f"corrupt or unreadable checkpoint {path}: {exc}") from exc
    return net, header
