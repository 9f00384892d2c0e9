"""Sparse eigenvector solvers for the degenerate generalized eigenproblem
Q u = lambda P u that drives each unit-rank extraction.

Two strategies are provided. The ridge route regularizes P with a small
ridge and runs the truncated power method on the operator
(P + ridge)^(-1) Q, applying the inverse through either a one-time
Cholesky factorization or the Sherman-Morrison-Woodbury identity when a
design matrix is available and n < p. The fast route first finds the
top eigenvalue of Y Y' and then searches for a sparse near-null vector
of X'(Y Y' - lambda I)X, which converts the degenerate generalized
problem into two regular eigenproblems.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.linalg import cho_solve

from . import linalg
from .exceptions import (
    DegenerateTruncationError,
    InputDataError,
    InvalidParameterError,
    NearNullVectorError,
    ShapeError,
    SolverError,
)

DEFAULT_NULL_TOL = 1e-4


@dataclass(frozen=True)
class SparsityRule:
    """How an iterate is sparsified: keep the ``s`` largest entries, or
    zero entries below a threshold.

    Threshold mode is relative by default: entries with magnitude below
    theta * max|v_i| are dropped, which keeps the rule scale-free.
    Absolute thresholding compares against theta directly.
    """

    kind: str
    value: float
    relative: bool = True

    @staticmethod
    def cardinality(s: int) -> "SparsityRule":
        if not (isinstance(s, (int, np.integer)) and s >= 1):
            raise InvalidParameterError(f"cardinality must be >= 1, got {s!r}")
        return SparsityRule("cardinality", int(s))

    @staticmethod
    def threshold(theta: float, relative: bool = True) -> "SparsityRule":
        if not theta > 0:
            raise InvalidParameterError(f"threshold must be > 0, got {theta!r}")
        return SparsityRule("threshold", float(theta), relative)

    def __post_init__(self):
        if self.kind not in ("cardinality", "threshold"):
            raise InvalidParameterError(f"unknown sparsity rule kind {self.kind!r}")
        if self.value <= 0:
            raise InvalidParameterError("sparsity rule value must be positive")


@dataclass
class SparseEigResult:
    """One sparse eigenpair.

    ``value`` is reported on the squared-singular-value scale of the
    Q/P system. ``residual`` is the operator residual restricted to the
    support (for the fast variant, the norm of M u in step two).
    ``degenerate`` flags a zero-eigenvalue outcome such as Q = 0.
    """

    u: np.ndarray
    value: float
    support: np.ndarray
    iterations: int
    residual: float
    degenerate: bool = field(default=False)


def truncate(v, rule: SparsityRule) -> np.ndarray:
    """Sparsify ``v`` per ``rule`` and rescale to unit 2-norm.

    Cardinality keeps the s largest-magnitude entries (ties broken by
    lowest index); threshold zeroes entries below theta (relative to the
    max-magnitude entry unless the rule is absolute).
    """
    v = linalg.check_vector(v, "v")
    mx = float(np.max(np.abs(v)))
    if mx == 0.0:
        raise DegenerateTruncationError("cannot truncate a zero vector")
    out = v.copy()
    if rule.kind == "cardinality":
        s = int(rule.value)
        if s < v.size:
            # stable argsort keeps the lowest index among tied magnitudes
            keep = np.argsort(-np.abs(v), kind="stable")[:s]
            mask = np.zeros(v.size, dtype=bool)
            mask[keep] = True
            out[~mask] = 0.0
    else:
        thr = rule.value * mx if rule.relative else rule.value
        out[np.abs(out) < thr] = 0.0
        if not np.any(out):
            raise DegenerateTruncationError(
                f"threshold {rule.value:g} zeroed every entry"
            )
    return out / np.linalg.norm(out)


def truncated_power(
    apply_m: Callable[[np.ndarray], np.ndarray],
    p: int,
    rule: SparsityRule,
    init=None,
    max_iters: int = linalg.DEFAULT_MAX_ITERS,
    tol: float = linalg.DEFAULT_TOL,
    callback=None,
) -> SparseEigResult:
    """Truncated power method: iterate u <- truncate(M u) to a sparse
    dominant eigenvector of a PSD-spectrum operator.

    Stops when the iterate moves less than ``tol`` in 2-norm or after
    ``max_iters``. The reported eigenvalue is the Rayleigh quotient
    u'Mu; a zero image (M u = 0) returns a degenerate flagged result.
    """
    if init is None:
        u = np.ones(p) / np.sqrt(p)
    else:
        u = linalg.check_vector(init, "init")
        if u.size != p:
            raise ShapeError(f"init has size {u.size}, expected {p}")
        nrm = np.linalg.norm(u)
        if nrm == 0.0:
            raise InvalidParameterError("init must be nonzero")
        u = u / nrm
    iterations = 0
    for _ in range(max_iters):
        w = apply_m(u)
        if not np.all(np.isfinite(w)):
            raise SolverError("non-finite iterate in truncated power method")
        if np.linalg.norm(w) < 1e-300:
            support = np.flatnonzero(u)
            return SparseEigResult(u, 0.0, support, iterations, 0.0, degenerate=True)
        u_next = truncate(w, rule)
        iterations += 1
        delta = float(np.linalg.norm(u_next - u))
        u = u_next
        if callback is not None:
            callback(u)
        if delta <= tol:
            break
    w = apply_m(u)
    value = float(u @ w)
    support = np.flatnonzero(u)
    resid = float(np.linalg.norm((w - value * u)[support]))
    return SparseEigResult(u, value, support, iterations, resid)


def _rqi_polish(
    q_sub: np.ndarray, p_sub: np.ndarray, u0: np.ndarray, steps: int = 4
) -> tuple[np.ndarray, float]:
    """Rayleigh-quotient iteration on the support-restricted pencil
    (Q_SS, P_SS); refuses steps that lower the generalized quotient."""

    def quotient(vec):
        return float(vec @ q_sub @ vec) / float(vec @ p_sub @ vec)

    u = u0 / np.linalg.norm(u0)
    theta = quotient(u)
    for _ in range(steps):
        try:
            z = np.linalg.solve(q_sub - theta * p_sub, p_sub @ u)
        except np.linalg.LinAlgError:
            break
        if not np.all(np.isfinite(z)) or np.linalg.norm(z) == 0.0:
            break
        z = z / np.linalg.norm(z)
        if z @ u < 0:
            z = -z
        theta_new = quotient(z)
        if theta_new < theta - 1e-12 * max(1.0, abs(theta)):
            break
        moved = np.linalg.norm(z - u)
        u, theta = z, theta_new
        if moved <= 1e-15:
            break
    return u, theta


def sparse_gen_eig_ridge(
    p_mat,
    q_mat,
    rho: Optional[float] = None,
    rule: Optional[SparsityRule] = None,
    *,
    n_samples: int = 1,
    design=None,
    init=None,
    max_iters: int = linalg.DEFAULT_MAX_ITERS,
    tol: float = linalg.DEFAULT_TOL,
    polish: bool = True,
) -> SparseEigResult:
    """Dominant sparse eigenpair of Q u = lambda (P + (rho/n) I) u.

    ``rho`` is on the design scale (the ridge added to X'X); the
    effective ridge on P is rho / n_samples. When ``design`` is the
    n x p matrix behind P and n < p, the inverse is applied through
    smw_inverse_apply; otherwise P + (rho/n) I is Cholesky-factored
    once. The eigenvalue reported is the generalized Rayleigh quotient
    u'Qu / u'(P + (rho/n) I)u. A Rayleigh-quotient polish on the
    converged support tightens the pair to the support-restricted
    optimum (skipped for supports larger than 512).
    """
    p_mat = linalg.check_matrix(p_mat, "p_mat")
    q_mat = linalg.check_matrix(q_mat, "q_mat")
    p = p_mat.shape[0]
    if p_mat.shape != (p, p) or q_mat.shape != (p, p):
        raise ShapeError("p_mat and q_mat must be square with equal size")
    if rho is None:
        rho = 1e-6 * float(np.trace(p_mat)) * n_samples
    if not rho > 0:
        raise InvalidParameterError(f"rho must be positive, got {rho}")
    if rule is None:
        rule = SparsityRule.cardinality(p)
    ridge = rho / n_samples
    p_tilde = p_mat + ridge * np.eye(p)

    if float(np.linalg.norm(q_mat)) == 0.0:
        u = np.ones(p) / np.sqrt(p)
        u = truncate(u, rule)
        return SparseEigResult(
            u, 0.0, np.flatnonzero(u), 0, 0.0, degenerate=True
        )

    if design is not None and design.shape[0] < p:
        x = linalg.check_matrix(design, "design")

        def apply_inv(b):
            return n_samples * linalg.smw_inverse_apply(x, rho, b.reshape(-1, 1)).ravel()

    else:
        low = linalg.cholesky_lower(p_tilde)

        def apply_inv(b):
            return cho_solve((low, True), b)

    def apply_m(u_vec):
        return apply_inv(q_mat @ u_vec)

    if init is None:
        diag = np.diag(q_mat).copy()
        nrm = np.linalg.norm(diag)
        init = diag / nrm if nrm > 0 else None

    res = truncated_power(apply_m, p, rule, init, max_iters, tol)
    if res.degenerate:
        return res

    support = res.support
    u = res.u
    if polish and 0 < support.size <= 512:
        sub = np.ix_(support, support)
        u_s, _ = _rqi_polish(q_mat[sub], p_tilde[sub], u[support])
        u = np.zeros(p)
        u[support] = u_s
    u, _ = linalg.canonical_sign(u)
    value = float(u @ q_mat @ u) / float(u @ p_tilde @ u)
    w = apply_m(u)
    lam_op = float(u @ w)
    resid = float(np.linalg.norm((w - lam_op * u)[support]))
    return SparseEigResult(u, value, support, res.iterations, resid)


def sparse_gen_eig_fast(
    x,
    yk,
    rule: Optional[SparsityRule] = None,
    *,
    init=None,
    max_iters: int = linalg.DEFAULT_MAX_ITERS,
    tol: float = linalg.DEFAULT_TOL,
    null_tol: float = DEFAULT_NULL_TOL,
) -> SparseEigResult:
    """Two-step sparse eigensolver: lambda <- lambda_max(Y Y'), then a
    sparse unit vector in the near-null space of M = X'YY'X - lambda X'X.

    The near-null vector is found by running the truncated power method
    on c I - M^2 / c with c the Gershgorin row-sum bound of M, which
    maps the eigenvalue of M nearest zero onto the dominant one. The
    result is accepted only if ||M u|| <= null_tol * ||M||_F. The
    eigenvalue is rescaled by 1/(n q) onto the Q/P system scale.
    """
    x = linalg.check_matrix(x, "x")
    yk = linalg.check_matrix(yk, "yk")
    if x.shape[0] != yk.shape[0]:
        raise ShapeError(
            f"row counts differ: x has {x.shape[0]}, yk has {yk.shape[0]}"
        )
    if float(np.linalg.norm(yk)) == 0.0:
        raise InvalidParameterError("yk must be nonzero for the fast variant")
    n, p = x.shape
    q = yk.shape[1]
    if rule is None:
        rule = SparsityRule.cardinality(p)

    small = yk @ yk.T if n <= q else yk.T @ yk
    lam_big = linalg.dominant_eigpair(small, max_iters=max_iters, tol=tol).value

    w = yk.T @ x
    m = w.T @ w - lam_big * (x.T @ x)
    m = 0.5 * (m + m.T)
    c = float(np.max(np.sum(np.abs(m), axis=1)))
    value = lam_big / (n * q)
    if c == 0.0:
        u = truncate(np.ones(p), rule)
        return SparseEigResult(u, value, np.flatnonzero(u), 0, 0.0)

    def apply_m(u_vec):
        return c * u_vec - m @ (m @ u_vec) / c

    if init is None:
        diag_sq = np.sum(m * m, axis=1)
        nrm = np.linalg.norm(diag_sq)
        init = diag_sq / nrm if nrm > 0 else None

    res = truncated_power(apply_m, p, rule, init, max_iters, tol)
    u, _ = linalg.canonical_sign(res.u)
    null_resid = float(np.linalg.norm(m @ u))
    m_scale = float(np.linalg.norm(m))
    if null_resid > null_tol * m_scale:
        raise NearNullVectorError(
            f"step-2 residual {null_resid:.3e} exceeds "
            f"{null_tol:g} * ||M||_F = {null_tol * m_scale:.3e}"
        )
    return SparseEigResult(u, value, res.support, res.iterations, null_resid)
