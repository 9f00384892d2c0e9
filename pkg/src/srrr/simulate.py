"""Synthetic benchmark data generation and the four evaluation metrics,
plus the seeded replication harness.

The coefficient generator plants a contiguous dense Gaussian block (the
block-sparse pattern), takes its top-r SVD, zeroes singular-vector
entries below a small threshold, and rescales the singular values to
100, 99, ..., 101-r. Replications draw reproducible Philox substreams
from (master seed, replication index).
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import estimator, linalg
from .exceptions import (
    InvalidParameterError,
    ShapeError,
    UndefinedMetricError,
)


@dataclass
class SimSpec:
    """Parameters of one synthetic regime."""

    n: int
    p: int
    q: int
    r: int
    rho_x: float = 0.5
    rho_e: float = 0.5
    gamma: float = 0.1
    density: float = 0.05
    uv_zero_threshold: float = 0.01
    seed: int = 0
    n_test: Optional[int] = None

    def validate(self) -> "SimSpec":
        if min(self.n, self.p, self.q, self.r) < 1:
            raise InvalidParameterError("n, p, q, r must all be >= 1")
        if self.r > min(self.p, self.q):
            raise InvalidParameterError(
                f"r={self.r} exceeds min(p, q)={min(self.p, self.q)}"
            )
        for name in ("rho_x", "rho_e"):
            rho = getattr(self, name)
            if not 0.0 <= rho < 1.0:
                raise InvalidParameterError(f"{name} must be in [0, 1), got {rho}")
        if self.gamma < 0:
            raise InvalidParameterError("gamma must be nonnegative")
        if not 0.0 < self.density <= 1.0:
            raise InvalidParameterError("density must be in (0, 1]")
        return self


@dataclass
class GroundTruth:
    c: np.ndarray
    rank: int
    u_supports: list[np.ndarray]
    v_supports: list[np.ndarray]
    singular_values: list[float]


@dataclass
class MetricsReport:
    pred_error: float
    est_error: float
    rank_error: int
    support_auc: float

    def as_dict(self) -> dict:
        return {
            "pred_error": self.pred_error,
            "est_error": self.est_error,
            "rank_error": self.rank_error,
            "support_auc": self.support_auc,
        }


METRIC_NAMES = ("pred_error", "est_error", "rank_error", "support_auc")


def replication_rng(master_seed: int, index: int) -> np.random.Generator:
    """Philox substream for one replication, derived from the master
    seed and the replication index."""
    seq = np.random.SeedSequence(entropy=master_seed, spawn_key=(index,))
    return np.random.Generator(np.random.Philox(seq))


def ar1_cov(d: int, rho: float) -> np.ndarray:
    """Autoregressive covariance Sigma_ij = rho^|i-j| (positive definite)."""
    if not 0.0 <= rho < 1.0:
        raise InvalidParameterError(f"rho must be in [0, 1), got {rho}")
    if d < 1:
        raise InvalidParameterError(f"d must be >= 1, got {d}")
    idx = np.arange(d)
    return rho ** np.abs(idx[:, None] - idx[None, :])


def mvn_sample(sigma, count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` i.i.d. rows from N(0, Sigma) via the Cholesky factor."""
    sigma = linalg.check_matrix(sigma, "sigma")
    low = linalg.cholesky_lower(sigma)
    z = rng.standard_normal((count, sigma.shape[0]))
    return z @ low.T


def gen_coefficient(spec: SimSpec, rng: np.random.Generator) -> GroundTruth:
    """Plant the jointly sparse and low-rank coefficient matrix.

    A contiguous ceil(sqrt(density) p) x ceil(sqrt(density) q) block of
    N(0,1) entries is placed at the top-left, its top-r singular vectors
    are hard-zeroed below ``uv_zero_threshold``, and the singular values
    are replaced by 100, 99, ..., 101-r.
    """
    spec.validate()
    p, q, r = spec.p, spec.q, spec.r
    bp = min(p, math.ceil(math.sqrt(spec.density) * p))
    bq = min(q, math.ceil(math.sqrt(spec.density) * q))
    c_raw = np.zeros((p, q))
    c_raw[:bp, :bq] = rng.standard_normal((bp, bq))
    u, _, v = linalg.top_r_svd(c_raw, r)
    u_bar = np.where(np.abs(u) < spec.uv_zero_threshold, 0.0, u)
    v_bar = np.where(np.abs(v) < spec.uv_zero_threshold, 0.0, v)
    svals = [float(100 - k) for k in range(r)]
    c = (u_bar * np.asarray(svals)) @ v_bar.T
    return GroundTruth(
        c=c,
        rank=r,
        u_supports=[np.flatnonzero(u_bar[:, k]) for k in range(r)],
        v_supports=[np.flatnonzero(v_bar[:, k]) for k in range(r)],
        singular_values=svals,
    )


def gen_dataset(
    spec: SimSpec, truth: GroundTruth, rng: np.random.Generator, count: Optional[int] = None
) -> tuple[np.ndarray, np.ndarray]:
    """Draw (X, Y) with X ~ N(0, AR1(rho_x)) and Y = XC + E,
    E ~ N(0, gamma * AR1(rho_e))."""
    n = spec.n if count is None else count
    x = mvn_sample(ar1_cov(spec.p, spec.rho_x), n, rng)
    y = x @ truth.c
    if spec.gamma > 0:
        e = mvn_sample(ar1_cov(spec.q, spec.rho_e), n, rng)
        y = y + math.sqrt(spec.gamma) * e
    return x, y


def normalized_prediction_error(y_test, x_test, c_hat) -> float:
    """||Y_test - X_test C||_F / ||Y_test||_F."""
    y_test = linalg.check_matrix(y_test, "y_test")
    x_test = linalg.check_matrix(x_test, "x_test")
    c_hat = linalg.check_matrix(c_hat, "c_hat")
    denom = float(np.linalg.norm(y_test))
    if denom == 0.0:
        raise UndefinedMetricError("y_test is zero; prediction error undefined")
    return float(np.linalg.norm(y_test - x_test @ c_hat)) / denom


def normalized_estimation_error(c_hat, c_true) -> float:
    """||C_hat - C||_F / ||C||_F."""
    c_hat = linalg.check_matrix(c_hat, "c_hat")
    c_true = linalg.check_matrix(c_true, "c_true")
    if c_hat.shape != c_true.shape:
        raise ShapeError("c_hat and c_true must have equal shape")
    denom = float(np.linalg.norm(c_true))
    if denom == 0.0:
        raise UndefinedMetricError("c_true is zero; estimation error undefined")
    return float(np.linalg.norm(c_hat - c_true)) / denom


def effective_rank(c_hat) -> int:
    """Rank after dropping singular values 100x smaller than the largest."""
    c_hat = np.asarray(c_hat, dtype=float)
    if not np.any(c_hat):
        return 0
    svals = np.linalg.svd(c_hat, compute_uv=False)
    return int(np.sum(svals > svals[0] / 100.0))


def rank_recovery_error(c_hat, true_rank: int) -> int:
    """|effective rank of C_hat - true rank|."""
    return abs(effective_rank(c_hat) - int(true_rank))


def support_auc(scores, truth) -> float:
    """Mann-Whitney AUC of ``scores`` against the boolean ``truth``
    support; tied scores count one half."""
    s = np.asarray(scores, dtype=float).ravel()
    t = np.asarray(truth).astype(bool).ravel()
    if s.size != t.size:
        raise ShapeError("scores and truth must have equal size")
    n_pos = int(np.sum(t))
    n_neg = t.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError(
            "support AUC needs at least one positive and one negative cell"
        )
    order = np.argsort(s, kind="stable")
    ranks = np.empty(s.size)
    sorted_s = s[order]
    i = 0
    while i < s.size:
        j = i
        while j + 1 < s.size and sorted_s[j + 1] == sorted_s[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    u_stat = float(np.sum(ranks[t])) - n_pos * (n_pos + 1) / 2.0
    return u_stat / (n_pos * n_neg)


def evaluate_model(c_hat, truth: GroundTruth, x_test, y_test) -> MetricsReport:
    """The four benchmark metrics for one fitted coefficient."""
    return MetricsReport(
        pred_error=normalized_prediction_error(y_test, x_test, c_hat),
        est_error=normalized_estimation_error(c_hat, truth.c),
        rank_error=rank_recovery_error(c_hat, truth.rank),
        support_auc=support_auc(np.abs(c_hat), truth.c != 0),
    )


def run_replication(
    spec: SimSpec, config: Optional[estimator.FitConfig], index: int
) -> MetricsReport:
    """One seeded replication: generate, fit, select, evaluate."""
    rng = replication_rng(spec.seed, index)
    truth = gen_coefficient(spec, rng)
    x, y = gen_dataset(spec, truth, rng)
    n_test = spec.n_test if spec.n_test is not None else spec.n
    x_test, y_test = gen_dataset(spec, truth, rng, count=n_test)
    _, _, c_hat = estimator.fit_and_select(x, y, config)
    return evaluate_model(c_hat, truth, x_test, y_test)


@dataclass
class ReplicationSummary:
    means: dict
    stderrs: dict
    reports: list[MetricsReport]
    failures: list[tuple[int, str]] = field(default_factory=list)


def _replication_task(args):
    spec, config, index = args
    try:
        return index, run_replication(spec, config, index), None
    except Exception as exc:  # reported per replication, never dropped
        return index, None, f"{type(exc).__name__}: {exc}"


def run_replications(
    spec: SimSpec,
    config: Optional[estimator.FitConfig] = None,
    reps: int = 100,
    jobs: int = 1,
) -> ReplicationSummary:
    """Independent seeded replications with per-metric mean and
    standard error (sd / sqrt(reps)). Failed replications are collected
    and reported alongside the successes."""
    if reps < 1:
        raise InvalidParameterError(f"reps must be >= 1, got {reps}")
    spec.validate()
    tasks = [(spec, config, i) for i in range(reps)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_replication_task, tasks))
    else:
        results = [_replication_task(t) for t in tasks]

    reports = []
    failures = []
    for index, report, err in results:
        if err is None:
            reports.append(report)
        else:
            failures.append((index, err))
    means = {}
    stderrs = {}
    for name in METRIC_NAMES:
        vals = np.array([getattr(rep, name) for rep in reports], dtype=float)
        if vals.size == 0:
            means[name] = math.nan
            stderrs[name] = math.nan
        else:
            means[name] = float(np.mean(vals))
            stderrs[name] = (
                float(np.std(vals, ddof=1) / math.sqrt(vals.size))
                if vals.size > 1
                else 0.0
            )
    return ReplicationSummary(means, stderrs, reports, failures)
