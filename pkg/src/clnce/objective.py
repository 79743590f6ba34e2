"""Cluster-conditional pair sampling, cosine/temperature critic, and the
contrastive loss with its exact score-space gradient.

The loss is the negated batch objective: minimizing it maximizes the mean of
log(exp(score_ii) / ((1/n) * sum_j exp(score_ij))). The denominator average
includes j == i.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .clusters import ClusterAssignment
from .errors import NumericError, ParameterError, ShapeError


@dataclass(frozen=True)
class CriticConfig:
    temperature: float = 0.1

    def __post_init__(self):
        if self.temperature <= 0:
            raise ParameterError("temperature must be > 0")


@dataclass(frozen=True)
class PairBatch:
    """Indices of n positively-paired samples and the cluster each pair shares."""

    x_indices: np.ndarray
    y_indices: np.ndarray
    cluster_ids: np.ndarray

    @property
    def size(self) -> int:
        return self.x_indices.size


def sample_pair_batch(
    clusters: ClusterAssignment, n: int, rng: np.random.Generator
) -> PairBatch:
    """Draw n pairs: cluster by empirical frequency, then x and y uniform
    within the cluster (x == y allowed; the two views realize the pair)."""
    if n < 2:
        raise ParameterError("batch size must be >= 2 (need at least one negative)")
    assign = clusters.assignment
    members = [np.flatnonzero(assign == z) for z in range(clusters.num_clusters)]
    if any(m.size == 0 for m in members):
        raise ParameterError("every cluster must be non-empty")
    z = assign[rng.integers(clusters.num_samples, size=n)]  # size-weighted
    x_idx = np.empty(n, dtype=np.int64)
    y_idx = np.empty(n, dtype=np.int64)
    for i in range(n):
        m = members[z[i]]
        x_idx[i] = m[rng.integers(m.size)]
        y_idx[i] = m[rng.integers(m.size)]
    return PairBatch(x_idx, y_idx, z.astype(np.int64))


def critic_matrix(
    projections_x: np.ndarray, projections_y: np.ndarray, cfg: CriticConfig
) -> np.ndarray:
    """Entry (i, j) = <g(x_i), g(y_j)> / temperature; rows are unit-norm."""
    px = np.asarray(projections_x, dtype=np.float64)
    py = np.asarray(projections_y, dtype=np.float64)
    if px.ndim != 2 or px.shape != py.shape:
        raise ShapeError(f"projection shapes {px.shape} vs {py.shape}")
    return px @ py.T / cfg.temperature


def cl_infonce_loss(scores: np.ndarray) -> float:
    """Negated batch objective with per-row max-subtraction stabilization."""
    s = np.asarray(scores, dtype=np.float64)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise ShapeError("scores must be a square matrix")
    n = s.shape[0]
    if n < 2:
        raise ParameterError("need n >= 2")
    if not np.isfinite(s).all():
        raise NumericError("non-finite scores")
    row_max = s.max(axis=1, keepdims=True)
    log_mean_exp = np.log(np.exp(s - row_max).mean(axis=1)) + row_max[:, 0]
    return float(-(np.diag(s) - log_mean_exp).mean())


def cl_infonce_grad(scores: np.ndarray) -> np.ndarray:
    """d(loss)/d(scores): (1/n) * (row softmax - identity)."""
    s = np.asarray(scores, dtype=np.float64)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise ShapeError("scores must be a square matrix")
    n = s.shape[0]
    if not np.isfinite(s).all():
        raise NumericError("non-finite scores")
    shifted = s - s.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    softmax = e / e.sum(axis=1, keepdims=True)
    return (softmax - np.eye(n)) / n


def critic_backward(
    grad_scores: np.ndarray,
    projections_x: np.ndarray,
    projections_y: np.ndarray,
    cfg: CriticConfig,
) -> tuple[np.ndarray, np.ndarray]:
    """Chain d(loss)/d(scores) through the dot/temperature critic."""
    g = np.asarray(grad_scores, dtype=np.float64)
    return g @ projections_y / cfg.temperature, g.T @ projections_x / cfg.temperature


def infonce_loss_reference(projections_x, projections_y, cfg: CriticConfig) -> float:
    """Independently coded standard InfoNCE on two-view batches.

    Positives are the aligned rows (two views of the same instance); the
    denominator averages over all views y_j, matching the estimator used by
    the cluster-conditional loss at the singleton-cluster endpoint.
    """
    px = np.asarray(projections_x, dtype=np.float64)
    py = np.asarray(projections_y, dtype=np.float64)
    n = px.shape[0]
    total = 0.0
    for i in range(n):
        pos = float(px[i] @ py[i]) / cfg.temperature
        ratios = [float(px[i] @ py[j]) / cfg.temperature for j in range(n)]
        m = max(ratios)
        denom = m + np.log(sum(np.exp(r - m) for r in ratios) / n)
        total += pos - denom
    return -total / n


def dump_batch_trace(scores: np.ndarray, path: str) -> None:
    """Debug CSV of (i, j, score)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["i", "j", "score"])
        for i in range(scores.shape[0]):
            for j in range(scores.shape[1]):
                writer.writerow([i, j, repr(float(scores[i, j]))])
