"""Regime diagnostics: relative weight change, cosine geometry, condensation."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import MetricError
from .model import Network, TrainRecord


def relative_change(theta_init: np.ndarray, theta_final: np.ndarray) -> float:
    """||final - init|| / ||final|| over flattened weights."""
    a = np.asarray(theta_init, dtype=np.float64).ravel()
    b = np.asarray(theta_final, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise MetricError(f"shape mismatch {a.shape} vs {b.shape}")
    denom = np.linalg.norm(b)
    if denom == 0.0:
        raise MetricError("relative change undefined: final weights have zero norm")
    return float(np.linalg.norm(b - a) / denom)


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    u = np.asarray(u, dtype=np.float64).ravel()
    v = np.asarray(v, dtype=np.float64).ravel()
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise MetricError("cosine undefined for zero vectors")
    return float(np.dot(u, v) / (nu * nv))


def top_rows_by_norm(W: np.ndarray, fraction: float = 0.5) -> np.ndarray:
    """Indices of the ceil(fraction*m) largest-norm rows, descending norm.

    Ties broken by lower row index so outputs are deterministic.
    """
    if not 0.0 < fraction <= 1.0:
        raise MetricError(f"fraction must be in (0, 1], got {fraction}")
    W = np.atleast_2d(W)
    m = W.shape[0]
    k = math.ceil(fraction * m)
    norms = np.linalg.norm(W, axis=1)
    order = np.argsort(-norms, kind="stable")
    return order[:k]


def cosine_matrix(W2: np.ndarray, fraction: float = 0.5) -> np.ndarray:
    """Pairwise cosine similarities among the largest-norm rows."""
    W2 = np.atleast_2d(np.asarray(W2, dtype=np.float64))
    idx = top_rows_by_norm(W2, fraction)
    sel = W2[idx]
    norms = np.linalg.norm(sel, axis=1)
    if np.any(norms == 0.0):
        raise MetricError("cosine matrix undefined: zero row among selected")
    unit = sel / norms[:, None]
    mat = unit @ unit.T
    np.clip(mat, -1.0, 1.0, out=mat)
    return mat


def condensation_index(W2: np.ndarray) -> float:
    """Mean absolute pairwise cosine among the top-half-norm rows.

    The double sum includes the i = j terms, so the value lives in
    (0, 1] and equals 1 when all selected rows are parallel.
    """
    W2 = np.atleast_2d(W2)
    if W2.shape[0] < 2:
        raise MetricError("condensation index needs at least 2 rows")
    mat = cosine_matrix(W2, fraction=0.5)
    return float(np.mean(np.abs(mat)))


def scatter_w1(net: Network) -> np.ndarray:
    """Rows of W1 as (d+1)-dimensional scatter points."""
    return net.W1.copy()


@dataclass(frozen=True)
class RegimeMetrics:
    rd_w1: float
    rd_w2: float
    zeta: float
    w1_scatter_init: np.ndarray
    w1_scatter_final: np.ndarray


def regime_metrics(record: TrainRecord) -> RegimeMetrics:
    """All diagnostics for one trained run (init vs final snapshot)."""
    init, final = record.initial_snapshot, record.final_snapshot
    return RegimeMetrics(
        rd_w1=relative_change(init.W1, final.W1),
        rd_w2=relative_change(init.W2, final.W2),
        zeta=condensation_index(final.W2),
        w1_scatter_init=scatter_w1(init),
        w1_scatter_final=scatter_w1(final),
    )


def circular_variance(points: np.ndarray, axial: bool = False) -> float:
    """1 - |mean unit direction| of the points (rows), ignoring zero rows.

    With ``axial=True`` (2-d points only) each direction is identified with
    its sign flip by doubling the angle before averaging, the standard
    treatment for orientation data. A ReLU unit and its mirrored partner
    then count as the same orientation, matching the sign-invariance of
    ``condensation_index``.
    """
    pts = np.atleast_2d(points)
    norms = np.linalg.norm(pts, axis=1)
    keep = norms > 0
    if not np.any(keep):
        raise MetricError("circular variance undefined: all points at origin")
    unit = pts[keep] / norms[keep, None]
    if axial:
        if pts.shape[1] != 2:
            raise MetricError("axial circular variance requires 2-d points")
        ang = 2.0 * np.arctan2(unit[:, 1], unit[:, 0])
        unit = np.column_stack([np.cos(ang), np.sin(ang)])
    return float(1.0 - np.linalg.norm(unit.mean(axis=0)))
