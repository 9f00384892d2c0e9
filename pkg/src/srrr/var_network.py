"""Influence-network inference from multivariate time series through a
sparse low-rank vector autoregression.

The series is mean-centered per node, lag-embedded into a regression
problem Y ~ X C with C stacking the transposed lag matrices
(most recent lag first), fitted with the sequential estimator, and
scored by summed absolute lag coefficients: score[i, j] aggregates the
influence of node j on node i across lags.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import estimator, linalg, simulate
from .exceptions import (
    InsufficientDataError,
    InvalidParameterError,
    ShapeError,
)


@dataclass(frozen=True)
class VarSpec:
    """Lag count and node count of the autoregression. The edge rule is
    fixed: sum of absolute lag coefficients."""

    lags: int
    nodes: int

    def __post_init__(self):
        if self.lags < 1:
            raise InvalidParameterError(f"lags must be >= 1, got {self.lags}")
        if self.nodes < 1:
            raise InvalidParameterError(f"nodes must be >= 1, got {self.nodes}")


@dataclass
class InfluenceGraph:
    """Nonnegative influence scores; scores[i, j] is the influence of
    node j on node i. The diagonal (self-influence) is reported but is
    excluded from evaluation by default."""

    scores: np.ndarray
    edges: Optional[np.ndarray] = None

    def threshold(self, level: float) -> "InfluenceGraph":
        return InfluenceGraph(self.scores, self.scores > level)


def lag_embed(series, lags: int) -> tuple[np.ndarray, np.ndarray]:
    """Unroll a T x d series into regression matrices.

    Row t of Y is x(L+t); row t of X concatenates the lagged vectors
    x(L+t-1), ..., x(t), most recent lag first, so the fitted
    coefficient stacks the transposed lag matrices in lag order.
    """
    series = linalg.check_matrix(series, "series")
    if lags < 1:
        raise InvalidParameterError(f"lags must be >= 1, got {lags}")
    t_len = series.shape[0]
    if t_len <= lags:
        raise InsufficientDataError(
            f"series has {t_len} rows, need more than lags={lags}"
        )
    y = series[lags:]
    x = np.hstack([series[lags - ell : t_len - ell] for ell in range(1, lags + 1)])
    return x, y


def unstack_lag_matrices(coefficient, spec: VarSpec) -> list[np.ndarray]:
    """Recover the lag matrices A_ell from the stacked coefficient."""
    c = linalg.check_matrix(coefficient, "coefficient")
    d = spec.nodes
    if c.shape != (spec.lags * d, d):
        raise ShapeError(
            f"coefficient shape {c.shape} does not match "
            f"(lags*nodes, nodes) = ({spec.lags * d}, {d})"
        )
    return [c[ell * d : (ell + 1) * d, :].T for ell in range(spec.lags)]


def influence_scores(model, spec: VarSpec) -> InfluenceGraph:
    """Sum of absolute lag coefficients: score[i, j] = sum_l |A_l[i, j]|."""
    return influence_scores_from_coefficient(model.coefficient, spec)


def evaluate_graph(scores, reference, exclude_diagonal: bool = True) -> float:
    """AUC of the score ranking against a reference adjacency,
    off-diagonal cells only unless ``exclude_diagonal`` is False."""
    scores = linalg.check_matrix(scores, "scores")
    reference = np.asarray(reference).astype(bool)
    if scores.shape != reference.shape:
        raise ShapeError("scores and reference must have equal shape")
    if exclude_diagonal:
        mask = ~np.eye(scores.shape[0], dtype=bool)
        return simulate.support_auc(scores[mask], reference[mask])
    return simulate.support_auc(scores, reference)


def center_series(series, standardize: bool = False) -> np.ndarray:
    """Remove each node's mean (the model has no intercept); optionally
    scale nodes to unit standard deviation."""
    series = linalg.check_matrix(series, "series")
    out = series - np.mean(series, axis=0, keepdims=True)
    if standardize:
        sd = np.std(out, axis=0, keepdims=True)
        sd[sd == 0] = 1.0
        out = out / sd
    return out


def fit_var_network(
    series,
    lags: int,
    config: Optional[estimator.FitConfig] = None,
    *,
    standardize: bool = False,
):
    """Center, lag-embed, fit, select the rank, and score influences.

    Returns (model, rank_selection, InfluenceGraph).
    """
    series = center_series(series, standardize=standardize)
    x, y = lag_embed(series, lags)
    model, sel, c_hat = estimator.fit_and_select(x, y, config)
    spec = VarSpec(lags=lags, nodes=series.shape[1])
    graph = influence_scores_from_coefficient(c_hat, spec)
    return model, sel, graph


def influence_scores_from_coefficient(coefficient, spec: VarSpec) -> InfluenceGraph:
    mats = unstack_lag_matrices(coefficient, spec)
    scores = np.zeros((spec.nodes, spec.nodes))
    for a in mats:
        scores += np.abs(a)
    return InfluenceGraph(scores=scores)


def simulate_var(
    nodes: int,
    lags: int,
    length: int,
    rng: np.random.Generator,
    *,
    rank: int = 2,
    support_size: int = 5,
    spectral_radius: float = 0.8,
    noise: float = 1.0,
    burn_in: int = 200,
) -> tuple[np.ndarray, np.ndarray, list[np.ndarray]]:
    """Synthetic stable VAR with planted sparse low-rank lag matrices.

    Each of ``rank`` factors lives in a single lag block with
    ``support_size``-sparse source and target supports, so the stacked
    coefficient stays jointly sparse and low-rank. The lag matrices are
    rescaled so the companion matrix has the requested spectral radius.
    Returns (series T x d, true adjacency d x d, lag matrices).
    """
    if rank < 1 or support_size < 1:
        raise InvalidParameterError("rank and support_size must be >= 1")
    d = nodes
    mats = [np.zeros((d, d)) for _ in range(lags)]
    for k in range(rank):
        ell = k % lags
        rows = rng.choice(d, size=min(support_size, d), replace=False)
        cols = rng.choice(d, size=min(support_size, d), replace=False)
        a_vec = np.zeros(d)
        b_vec = np.zeros(d)
        a_vec[rows] = rng.normal(loc=1.0, scale=0.25, size=rows.size) * rng.choice(
            [-1.0, 1.0], size=rows.size
        )
        b_vec[cols] = rng.normal(loc=1.0, scale=0.25, size=cols.size) * rng.choice(
            [-1.0, 1.0], size=cols.size
        )
        mats[ell] += np.outer(a_vec, b_vec)

    # Companion spectral radius scales exactly under A_l -> s^l A_l.
    companion = np.zeros((lags * d, lags * d))
    for ell, a in enumerate(mats):
        companion[:d, ell * d : (ell + 1) * d] = a
    if lags > 1:
        companion[d:, : (lags - 1) * d] = np.eye((lags - 1) * d)
    radius = float(np.max(np.abs(np.linalg.eigvals(companion))))
    if radius > 0:
        s = spectral_radius / radius
        mats = [a * s ** (ell + 1) for ell, a in enumerate(mats)]

    series = np.zeros((burn_in + length, d))
    series[:lags] = rng.standard_normal((lags, d)) * noise
    for t in range(lags, burn_in + length):
        nxt = noise * rng.standard_normal(d)
        for ell, a in enumerate(mats):
            nxt = nxt + a @ series[t - ell - 1]
        series[t] = nxt
    truth = np.zeros((d, d), dtype=bool)
    for a in mats:
        truth |= a != 0
    return series[burn_in:], truth, mats
