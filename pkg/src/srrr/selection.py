"""Rank selection by a generalized information criterion and support
recovery by elementwise hard thresholding.

The criterion is sqrt(n) * log L_n + rank * sqrt(log(pq)) * log log n
with L_n the scaled squared prediction loss; natural logs throughout.
Exact fits are floored at machine epsilon before the log so the
criterion stays finite (ties then resolve toward the smaller rank).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import linalg
from .exceptions import InvalidParameterError, ShapeError

LOSS_FLOOR = float(np.finfo(float).eps)


@dataclass
class RankSelection:
    selected_rank: int
    trace: list[tuple[int, float, float]]


@dataclass(frozen=True)
class ThresholdRule:
    """Absolute hard-threshold level for support recovery."""

    theta: float

    def __post_init__(self):
        if not self.theta > 0:
            raise InvalidParameterError(f"theta must be positive, got {self.theta}")


def loss(y, x, c) -> float:
    """Scaled squared prediction loss ||Y - XC||_F^2 / (qn)."""
    y = linalg.check_matrix(y, "y")
    x = linalg.check_matrix(x, "x")
    c = linalg.check_matrix(c, "c")
    if x.shape[0] != y.shape[0] or c.shape != (x.shape[1], y.shape[1]):
        raise ShapeError("inconsistent shapes for loss")
    resid = y - x @ c
    n, q = y.shape
    return float(np.sum(resid * resid)) / (q * n)


def gic(loss_value: float, rank: int, n: int, p: int, q: int) -> float:
    """Information criterion sqrt(n) log L + rank sqrt(log pq) log log n."""
    if not loss_value > 0:
        raise InvalidParameterError(
            "loss must be positive; floor exact fits at machine epsilon"
        )
    if n < 3:
        raise InvalidParameterError(f"n must be >= 3, got {n}")
    if p * q < 2:
        raise InvalidParameterError("pq must be >= 2")
    return math.sqrt(n) * math.log(loss_value) + rank * math.sqrt(
        math.log(p * q)
    ) * math.log(math.log(n))


def rank_trace(x, y, factors) -> list[tuple[int, float, float]]:
    """(rank, loss, criterion) at every truncation rank 0..len(factors)."""
    x = linalg.check_matrix(x, "x")
    y = linalg.check_matrix(y, "y")
    n, q = y.shape
    p = x.shape[1]
    trace = []
    fitted = np.zeros_like(y)
    resid = y - fitted
    for j in range(len(factors) + 1):
        if j > 0:
            f = factors[j - 1]
            fitted = fitted + np.outer(x @ f.u, f.v)
            resid = y - fitted
        loss_j = float(np.sum(resid * resid)) / (q * n)
        crit = gic(max(loss_j, LOSS_FLOOR), j, n, p, q)
        trace.append((j, loss_j, crit))
    return trace


def select_rank(x, y, model) -> RankSelection:
    """Argmin of the criterion over truncation ranks of the factor
    sequence, ties broken toward the smaller rank. The trace is also
    recorded on the model."""
    trace = rank_trace(x, y, model.factors)
    best_rank = 0
    best_crit = trace[0][2]
    for j, _, crit in trace[1:]:
        if crit < best_crit:
            best_rank, best_crit = j, crit
    model.gic_trace = trace
    return RankSelection(selected_rank=best_rank, trace=trace)


def hard_threshold(z, rule: ThresholdRule) -> np.ndarray:
    """Zero entries with |z_i| strictly below theta; keep the rest."""
    z = np.asarray(z, dtype=float)
    return np.where(np.abs(z) < rule.theta, 0.0, z)


def recover_supports(
    model,
    theta_u: Optional[ThresholdRule] = None,
    theta_v: Optional[ThresholdRule] = None,
    *,
    data=None,
) -> list[tuple[np.ndarray, np.ndarray]]:
    """Per-factor supports of the hard-thresholded singular vectors.

    When a rule is omitted it is tuned by 5-fold cross-validation on
    prediction error, which requires ``data=(x, y)``.
    """
    if not model.factors:
        raise InvalidParameterError("model has no factors")
    if theta_u is None or theta_v is None:
        if data is None:
            raise InvalidParameterError(
                "thresholds not supplied; pass data=(x, y) to tune them"
            )
        x, y = data
        if theta_u is None:
            theta_u = tune_threshold_cv(x, y, model.config, vectors="u")
        if theta_v is None:
            theta_v = tune_threshold_cv(x, y, model.config, vectors="v")
    out = []
    for f in model.factors:
        u_sup = np.flatnonzero(hard_threshold(f.u, theta_u))
        v_sup = np.flatnonzero(hard_threshold(f.v, theta_v))
        out.append((u_sup, v_sup))
    return out


def _threshold_grid(factors, vectors: str, size: int) -> np.ndarray:
    mags = np.concatenate(
        [np.abs(f.u if vectors == "u" else f.v) for f in factors]
    )
    mags = mags[mags > 0]
    if mags.size == 0:
        return np.array([LOSS_FLOOR])
    hi = float(np.max(mags))
    lo = max(float(np.min(mags)), hi * 1e-4)
    return np.geomspace(lo, hi * 1.0000001, size)


def tune_threshold_cv(
    x,
    y,
    config=None,
    vectors: str = "u",
    folds: int = 5,
    grid_size: int = 10,
    seed: int = 0,
) -> ThresholdRule:
    """Pick a hard-threshold level by K-fold cross-validated prediction
    error: refit on each training split, threshold the requested side,
    and score the rebuilt coefficient on the held-out rows. Ties go to
    the larger (sparser) threshold."""
    from . import estimator  # local import to avoid a module cycle

    if vectors not in ("u", "v"):
        raise InvalidParameterError(f"vectors must be 'u' or 'v', got {vectors!r}")
    x = linalg.check_matrix(x, "x")
    y = linalg.check_matrix(y, "y")
    n = x.shape[0]
    folds = max(2, min(folds, n))
    rng = np.random.Generator(np.random.Philox(key=seed))
    perm = rng.permutation(n)
    fold_ids = np.array_split(perm, folds)

    grids = []
    errors = []
    for hold in fold_ids:
        train = np.setdiff1d(np.arange(n), hold)
        model = estimator.fit(x[train], y[train], config)
        if not model.factors:
            continue
        grid = _threshold_grid(model.factors, vectors, grid_size)
        errs = np.empty(grid.size)
        for gi, theta in enumerate(grid):
            rule = ThresholdRule(float(theta))
            c = np.zeros((x.shape[1], y.shape[1]))
            for f in model.factors:
                if vectors == "u":
                    c += np.outer(hard_threshold(f.u, rule), f.v)
                else:
                    c += np.outer(f.u, hard_threshold(f.v, rule))
            resid = y[hold] - x[hold] @ c
            errs[gi] = np.linalg.norm(resid)
        grids.append(grid)
        errors.append(errs)
    if not grids:
        return ThresholdRule(LOSS_FLOOR)
    # fold grids differ slightly; evaluate on the geometric-median grid
    ref = grids[len(grids) // 2]
    total = np.zeros(ref.size)
    for grid, errs in zip(grids, errors):
        total += np.interp(ref, grid, errs)
    best = ref.size - 1 - int(np.argmin(total[::-1]))
    return ThresholdRule(float(ref[best]))
