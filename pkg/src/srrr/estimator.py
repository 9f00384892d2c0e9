"""Sequential unit-rank estimation for jointly sparse and low-rank
multi-response regression.

Each step extracts one (u, v, lambda) factor: u solves a sparse
generalized eigenproblem built from the current residual, v follows in
closed form as v = R u / (u'Pu), and the fitted contribution is removed
from Y before the next step. Extraction stops when the factor's
eigenvalue falls below mu * ||Y||_F^2 / (nq) or the rank cap is hit.
With refitting on (the default), after every accepted factor the middle
matrix of the running top-k SVD is re-estimated by least squares and
the factors re-derived from the refitted coefficient.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import linalg, selection, sparse_eig
from .exceptions import (
    DegenerateFactorError,
    InvalidParameterError,
    ShapeError,
)


@dataclass
class FitConfig:
    """Solver knobs for one fit.

    ``rho`` is the ridge on the design scale (added to X'X); when left
    unset it defaults to 1e-6 * trace(P) * n. ``mu`` terminates
    extraction relative to ||Y||_F^2 / (nq) on the squared-singular-value
    scale. ``r_max`` defaults to min(n, p, q, 20).
    """

    variant: str = "ridge"
    rho: Optional[float] = None
    u_rule: Optional[sparse_eig.SparsityRule] = None
    v_threshold: Optional[float] = None
    mu: float = 1e-3
    r_max: Optional[int] = None
    refit: bool = True
    max_iters: int = linalg.DEFAULT_MAX_ITERS
    tol: float = linalg.DEFAULT_TOL
    null_tol: float = sparse_eig.DEFAULT_NULL_TOL

    def resolved(self, n: int, p: int, q: int) -> "FitConfig":
        if self.variant not in ("ridge", "fast"):
            raise InvalidParameterError(f"unknown variant {self.variant!r}")
        if not self.mu > 0:
            raise InvalidParameterError(f"mu must be positive, got {self.mu}")
        if self.rho is not None and not self.rho > 0:
            raise InvalidParameterError(f"rho must be positive, got {self.rho}")
        if self.v_threshold is not None and not self.v_threshold > 0:
            raise InvalidParameterError("v_threshold must be positive")
        cap = min(n, p, q)
        r_max = min(cap, 20) if self.r_max is None else self.r_max
        if not 1 <= r_max <= cap:
            raise InvalidParameterError(
                f"r_max must be in [1, {cap}], got {r_max}"
            )
        return replace(self, r_max=r_max)


@dataclass
class UnitRankFactor:
    """One extracted factor: unit-norm u, scale-carrying v, the solver
    eigenvalue lambda_hat, and sigma_hat = ||X u v'||_F / sqrt(qn)
    recomputed from its definition."""

    u: np.ndarray
    v: np.ndarray
    lambda_hat: float
    sigma_hat: float


@dataclass
class FitResult:
    factors: list[UnitRankFactor]
    coefficient: np.ndarray
    rank: int
    gic_trace: list[tuple[int, float, float]]
    config: FitConfig
    # solver eigenvalue of each accepted extraction, in step order;
    # preserved across refits for auditing the termination rule
    extraction_values: list[float] = field(default_factory=list)


def _sigma_hat(x: np.ndarray, u: np.ndarray, v: np.ndarray) -> float:
    n = x.shape[0]
    q = v.size
    return float(np.linalg.norm(x @ u) * np.linalg.norm(v)) / np.sqrt(q * n)


def _factor_sum(factors, p: int, q: int) -> np.ndarray:
    c = np.zeros((p, q))
    for f in factors:
        c += np.outer(f.u, f.v)
    return c


def _extract(x, yk, config, p_mat, rho) -> UnitRankFactor:
    n, p = x.shape
    q = yk.shape[1]
    rule = config.u_rule or sparse_eig.SparsityRule.cardinality(p)
    r_mat = linalg.cross_moment(yk, x)
    if config.variant == "fast":
        res = sparse_eig.sparse_gen_eig_fast(
            x,
            yk,
            rule,
            max_iters=config.max_iters,
            tol=config.tol,
            null_tol=config.null_tol,
        )
    else:
        q_mat = (r_mat.T @ r_mat) / q
        res = sparse_eig.sparse_gen_eig_ridge(
            p_mat,
            q_mat,
            rho,
            rule,
            n_samples=n,
            design=x if n < p else None,
            max_iters=config.max_iters,
            tol=config.tol,
        )
    u = res.u
    upu = float(u @ p_mat @ u)
    if upu <= 1e-14:
        raise DegenerateFactorError(
            f"u'Pu = {upu:.3e} is numerically zero; factor collapsed"
        )
    v = (r_mat @ u) / upu
    if config.v_threshold is not None:
        vmax = float(np.max(np.abs(v)))
        v = np.where(np.abs(v) < config.v_threshold * vmax, 0.0, v)
    return UnitRankFactor(u, v, res.value, _sigma_hat(x, u, v))


def extract_unit_rank(x, yk, config: Optional[FitConfig] = None) -> UnitRankFactor:
    """Extract a single unit-rank factor from (X, Yk).

    u comes from the configured sparse generalized eigensolver on the
    moment matrices of (X, Yk); v = R u / (u'Pu) with R = Yk'X / n,
    optionally thresholded relative to its max-magnitude entry.
    """
    x = linalg.check_matrix(x, "x")
    yk = linalg.check_matrix(yk, "yk")
    if x.shape[0] != yk.shape[0]:
        raise ShapeError("x and yk must have equal row counts")
    if float(np.linalg.norm(x)) == 0.0 or float(np.linalg.norm(yk)) == 0.0:
        raise InvalidParameterError("x and yk must be nonzero")
    config = (config or FitConfig()).resolved(x.shape[0], x.shape[1], yk.shape[1])
    p_mat = linalg.gram(x)
    rho = config.rho
    if rho is None:
        rho = 1e-6 * float(np.trace(p_mat)) * x.shape[0]
    return _extract(x, yk, config, p_mat, rho)


def deflate(y, x, factors) -> np.ndarray:
    """Residual Y - X * sum_k u_k v_k' for the given factors."""
    y = linalg.check_matrix(y, "y")
    x = linalg.check_matrix(x, "x")
    if x.shape[0] != y.shape[0]:
        raise ShapeError("x and y must have equal row counts")
    if not factors:
        return y.copy()
    c = _factor_sum(factors, x.shape[1], y.shape[1])
    return y - x @ c


def refit_core(x, y, c_partial, k: int) -> np.ndarray:
    """Re-estimate the middle matrix of the top-k SVD of ``c_partial``
    by least squares against (X, Y); the fit loss never increases."""
    x = linalg.check_matrix(x, "x")
    y = linalg.check_matrix(y, "y")
    c_partial = linalg.check_matrix(c_partial, "c_partial")
    u_mat, _, v_mat = linalg.top_r_svd(c_partial, k)
    s_tilde = linalg.solve_least_squares(x @ u_mat, y @ v_mat)
    return u_mat @ s_tilde @ v_mat.T


def _refit_factors(x, y, factors, config):
    """Refit the running coefficient and re-derive factors from its
    top-k SVD, with v absorbing the singular values."""
    k = len(factors)
    p = x.shape[1]
    q = y.shape[1]
    c_partial = _factor_sum(factors, p, q)
    u_mat, _, v_mat = linalg.top_r_svd(
        c_partial, k, max_iters=config.max_iters, tol=config.tol
    )
    s_tilde = linalg.solve_least_squares(x @ u_mat, y @ v_mat)
    a_mat, svals, b_mat = linalg.top_r_svd(s_tilde, k)
    u2 = u_mat @ a_mat
    v2 = v_mat @ b_mat
    new_factors = []
    for j in range(k):
        u_j, sign = linalg.canonical_sign(u2[:, j])
        v_j = sign * svals[j] * v2[:, j]
        sigma = _sigma_hat(x, u_j, v_j)
        new_factors.append(UnitRankFactor(u_j, v_j, sigma * sigma, sigma))
    coeff = (u2 * svals) @ v2.T
    return coeff, new_factors


def fit(x, y, config: Optional[FitConfig] = None) -> FitResult:
    """Fit the sequential sparse low-rank model to (X, Y).

    Returns all factors accepted before termination, the assembled
    coefficient matrix, and the information-criterion trace over
    truncation ranks 0..rank. A first factor below the termination
    level yields an empty rank-0 model rather than an error.
    """
    x = linalg.check_matrix(x, "x")
    y = linalg.check_matrix(y, "y")
    if x.shape[0] != y.shape[0]:
        raise ShapeError(
            f"row counts differ: x has {x.shape[0]}, y has {y.shape[0]}"
        )
    n, p = x.shape
    q = y.shape[1]
    config = (config or FitConfig()).resolved(n, p, q)
    y_norm = float(np.linalg.norm(y))
    level = config.mu * (y_norm * y_norm) / (n * q)
    p_mat = linalg.gram(x)
    rho = config.rho
    if rho is None:
        rho = 1e-6 * float(np.trace(p_mat)) * n

    factors: list[UnitRankFactor] = []
    extraction_values: list[float] = []
    coeff = np.zeros((p, q))
    for _ in range(config.r_max):
        yk = y - x @ coeff
        if float(np.linalg.norm(yk)) <= 1e-14 * max(1.0, y_norm):
            break
        factor = _extract(x, yk, config, p_mat, rho)
        if factor.lambda_hat < level:
            break
        factors.append(factor)
        extraction_values.append(factor.lambda_hat)
        if config.refit:
            coeff, factors = _refit_factors(x, y, factors, config)
        else:
            coeff = coeff + np.outer(factor.u, factor.v)

    trace = selection.rank_trace(x, y, factors)
    return FitResult(
        factors=factors,
        coefficient=coeff,
        rank=len(factors),
        gic_trace=trace,
        config=config,
        extraction_values=extraction_values,
    )


def predict(model: FitResult, x_new) -> np.ndarray:
    """Predict responses for new rows: X_new @ coefficient."""
    x_new = linalg.check_matrix(x_new, "x_new")
    p = model.coefficient.shape[0]
    if x_new.shape[1] != p:
        raise ShapeError(
            f"x_new has {x_new.shape[1]} columns, model expects {p}"
        )
    return x_new @ model.coefficient


def coefficient_at_rank(model: FitResult, rank: int) -> np.ndarray:
    """Sum of the first ``rank`` unit-rank factors."""
    p, q = model.coefficient.shape
    if not 0 <= rank <= model.rank:
        raise InvalidParameterError(
            f"rank must be in [0, {model.rank}], got {rank}"
        )
    return _factor_sum(model.factors[:rank], p, q)


def fit_and_select(x, y, config: Optional[FitConfig] = None):
    """Fit, select the rank by the information criterion, and build the
    final coefficient at the selected rank (refit there when enabled).

    Returns (model, rank_selection, coefficient).
    """
    x = linalg.check_matrix(x, "x")
    y = linalg.check_matrix(y, "y")
    model = fit(x, y, config)
    sel = selection.select_rank(x, y, model)
    r = sel.selected_rank
    if r == model.rank:
        c_hat = model.coefficient
    elif r == 0:
        c_hat = np.zeros_like(model.coefficient)
    else:
        c_hat = coefficient_at_rank(model, r)
        if model.config.refit:
            c_hat = refit_core(x, y, c_hat, r)
    return model, sel, c_hat
