"""Stage one: estimating the coefficient matrix in the presence of mismatches.

Mismatches are treated as row-sparse contamination ``Y = X B + sqrt(n) Xi + noise``.
:func:`fit_group_lasso` solves

    min_{B, Xi}  ||Y - X B - sqrt(n) Xi||_F^2 / (2 n m) + lam * sum_i ||Xi_i||_2

by block coordinate descent on ``(Xi, XB)``; :func:`fit_crr` is the
hard-thresholding competitor that needs the number of mismatches ``k``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .model import FitResult, GeneralizedMatch, RegressionData


class RankDeficientError(np.linalg.LinAlgError):
    """Raised when the design matrix is (numerically) rank deficient."""


@dataclass(frozen=True)
class GroupLassoOptions:
    lam: float
    max_iters: int = 500
    rel_tol: float = 1e-8
    line_search_shrink: float = 0.5
    line_search_c: float = 1e-4

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lam must be positive")
        if self.max_iters < 1 or not self.rel_tol > 0:
            raise ValueError("max_iters must be >= 1 and rel_tol > 0")
        if not 0 < self.line_search_shrink < 1 or not 0 < self.line_search_c < 1:
            raise ValueError("line search constants must lie in (0, 1)")


@dataclass(frozen=True)
class CrrOptions:
    k: int
    max_iters: int = 200
    tol: float = 1e-9

    def __post_init__(self):
        if self.k < 0 or self.max_iters < 1 or not self.tol > 0:
            raise ValueError("invalid CRR options")


def qr_factor(X) -> tuple[np.ndarray, np.ndarray]:
    """Thin QR of ``X``; raises :class:`RankDeficientError` on a tiny diagonal of ``R``."""
    X = np.asarray(X, dtype=float)
    n, d = X.shape
    if n < d:
        raise RankDeficientError(f"need at least d={d} rows, got {n}")
    Q, R = np.linalg.qr(X)
    scale = np.linalg.norm(X)
    if scale == 0 or np.min(np.abs(np.diag(R))) <= 1e-10 * scale:
        raise RankDeficientError("design matrix is rank deficient")
    return Q, R


def least_squares(X, Y) -> np.ndarray:
    """``argmin_B ||Y - X B||_F`` via QR, refusing rank-deficient designs."""
    Q, R = qr_factor(X)
    return solve_triangular(R, Q.T @ np.asarray(Y, dtype=float))


def group_threshold(A, eta: float) -> np.ndarray:
    """Row-wise shrinkage ``a_i * (1 - eta / ||a_i||)_+``.

    This is the proximal map of ``Z -> eta * sum_i ||Z_i||_2``.
    """
    if eta < 0:
        raise ValueError("eta must be non-negative")
    A = np.asarray(A, dtype=float)
    norms = np.linalg.norm(A, axis=1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        factor = np.where(norms > eta, 1.0 - eta / norms, 0.0)
    return A * factor


def lambda0(n: int, d: int, m: int, sigma: float) -> float:
    """Smallest regularization level covered by the estimation-error guarantee (use ``lam >= 2 * lambda0``)."""
    if n <= d:
        raise ValueError("lambda0 requires n > d")
    mu = min((n - d) / n + math.sqrt(24.0 * math.log(n) / n), 1.0)
    return mu * sigma / math.sqrt(n * m) * (1.0 + math.sqrt(4.0 * math.log(n) / m))


def lambda_star(n: int, m: int, sigma: float) -> float:
    """The practical default ``4 sigma / sqrt(n m)``."""
    return 4.0 * sigma / math.sqrt(n * m)


def group_lasso_objective(data: RegressionData, B, Xi, lam: float) -> float:
    n, m = data.n, data.m
    R = data.Y - data.X @ B - math.sqrt(n) * Xi
    return float(np.sum(R * R) / (2 * n * m) + lam * np.sum(np.linalg.norm(Xi, axis=1)))


def _line_search(obj, current, direction, f_cur, f_full, shrink, c):
    """Backtrack from a full step toward a block minimizer.

    By convexity ``f(cur + a * dir) <= f_cur - a * (f_cur - f_full)``, so the
    Armijo test with the predicted decrease ``f_cur - f_full`` accepts ``a = 1``
    whenever the block update is exact.
    """
    decrease = f_cur - f_full
    if decrease <= 0:
        return current, f_cur, 0.0
    step = 1.0
    while step > 1e-12:
        trial = current + step * direction
        f_trial = obj(trial)
        if f_trial <= f_cur - c * step * decrease:
            return trial, f_trial, step
        step *= shrink
    return current, f_cur, 0.0


def fit_group_lasso(data: RegressionData, opts: GroupLassoOptions) -> FitResult:
    """Block coordinate descent for the row-sparse contamination program.

    The design is factored once as ``X = Q R``; the iteration runs on the
    fitted values ``F = X B`` and recovers ``B`` by back-substitution at the
    end. Each sweep updates ``Xi`` toward ``GroupThreshold(Y - F, m sqrt(n) lam) / sqrt(n)``
    and then ``F`` toward ``Q Q^T (Y - sqrt(n) Xi)``, both with backtracking
    steps in (0, 1].
    """
    n, m = data.n, data.m
    if n <= data.d:
        raise ValueError("fit_group_lasso requires n > d")
    Q, R = qr_factor(data.X)
    Y = data.Y
    lam = opts.lam
    rn = math.sqrt(n)
    tau = m * rn * lam

    def objective(F, Xi):
        Res = Y - F - rn * Xi
        return float(np.sum(Res * Res) / (2 * n * m) + lam * np.sum(np.linalg.norm(Xi, axis=1)))

    F = Q @ (Q.T @ Y)
    Xi = np.zeros_like(Y)
    f_cur = objective(F, Xi)
    trace = [f_cur]
    converged = False
    it = 0
    for it in range(1, opts.max_iters + 1):
        f_prev = f_cur
        Xi_full = group_threshold(Y - F, tau) / rn
        Xi, f_cur, _ = _line_search(
            lambda Z: objective(F, Z), Xi, Xi_full - Xi, f_cur, objective(F, Xi_full),
            opts.line_search_shrink, opts.line_search_c,
        )
        F_full = Q @ (Q.T @ (Y - rn * Xi))
        F, f_cur, _ = _line_search(
            lambda G: objective(G, Xi), F, F_full - F, f_cur, objective(F_full, Xi),
            opts.line_search_shrink, opts.line_search_c,
        )
        trace.append(f_cur)
        if f_prev - f_cur <= opts.rel_tol * max(abs(f_prev), np.finfo(float).tiny):
            converged = True
            break
    B_hat = solve_triangular(R, Q.T @ F)
    S_hat = np.flatnonzero(np.linalg.norm(Xi, axis=1) > 0)
    return FitResult(
        B_hat=B_hat,
        Xi_hat=Xi,
        S_hat=S_hat,
        objective_trace=tuple(trace),
        iterations=it,
        converged=converged,
        extras={"lam": lam},
    )


def _top_k_rows(norms, k: int) -> np.ndarray:
    # largest first, ties -> smaller index
    order = np.lexsort((np.arange(norms.size), -norms))
    return np.sort(order[:k])


def estimate_mismatch_set(fit: FitResult, threshold: float | None = None, top_k: int | None = None) -> np.ndarray:
    """Rows flagged as mismatched, either ``||Xi_i|| >= threshold`` or the ``top_k`` largest norms.

    Returns 0-based indices in increasing order.
    """
    if (threshold is None) == (top_k is None):
        raise ValueError("give exactly one of threshold or top_k")
    if fit.Xi_hat is None:
        raise ValueError("fit carries no contamination estimate")
    norms = np.linalg.norm(fit.Xi_hat, axis=1)
    if threshold is not None:
        return np.flatnonzero(norms >= threshold)
    if not 0 <= top_k < norms.size:
        raise ValueError(f"top_k must lie in [0, n), got {top_k}")
    return _top_k_rows(norms, top_k)


def default_mismatch_threshold(m: int, sigma0: float) -> float:
    """``sqrt(2 m) * sigma0``, a flagging level at the edge of the noise band."""
    return math.sqrt(2 * m) * sigma0


def refit(data: RegressionData, exclude=()) -> np.ndarray:
    """Least squares on the rows not listed in ``exclude`` (0-based)."""
    keep = np.ones(data.n, dtype=bool)
    keep[np.asarray(exclude, dtype=np.int64)] = False
    if keep.sum() <= data.d:
        raise ValueError(f"only {keep.sum()} rows left for d={data.d} predictors")
    return least_squares(data.X[keep], data.Y[keep])


def fit_naive(data: RegressionData) -> np.ndarray:
    return least_squares(data.X, data.Y)


def fit_oracle(data: RegressionData, theta_star: GeneralizedMatch) -> np.ndarray:
    """Least squares on correctly re-paired data; missing matches are dropped."""
    theta = theta_star.theta
    keep = theta != 0
    return least_squares(data.X[theta[keep] - 1], data.Y[keep])


def hard_threshold_rows(A, k: int) -> np.ndarray:
    """Keep the ``k`` rows of largest Euclidean norm (ties -> smaller index), zero the rest."""
    A = np.asarray(A, dtype=float)
    out = np.zeros_like(A)
    if k > 0:
        keep = _top_k_rows(np.linalg.norm(A, axis=1), k)
        out[keep] = A[keep]
    return out


def fit_crr(data: RegressionData, opts: CrrOptions) -> FitResult:
    """Iterative hard thresholding on the part of ``Y`` orthogonal to ``range(X)``.

    Minimizes ``||P_perp (Y - Phi)||_F^2`` over ``Phi`` with at most ``k``
    non-zero rows using unit steps (``P_perp`` is a projector), then regresses
    ``Y - Phi`` on ``X``. ``Xi_hat`` is reported as ``Phi / sqrt(n)``.
    """
    n, d = data.n, data.d
    if n <= d:
        raise ValueError("fit_crr requires n > d")
    if opts.k >= n - d:
        raise ValueError(f"k={opts.k} must be smaller than n - d = {n - d}")
    Q, R = qr_factor(data.X)
    Y = data.Y

    def perp(A):
        return A - Q @ (Q.T @ A)

    def objective(Phi):
        r = perp(Y - Phi)
        return float(np.sum(r * r))

    Phi = np.zeros_like(Y)
    f_cur = objective(Phi)
    floor = (1e-15 * np.linalg.norm(Y)) ** 2
    trace = [f_cur]
    converged = opts.k == 0 or f_cur <= floor
    it = 0
    if not converged:
        for it in range(1, opts.max_iters + 1):
            f_prev = f_cur
            Phi = hard_threshold_rows(Phi - perp(Phi - Y), opts.k)
            f_cur = objective(Phi)
            trace.append(f_cur)
            if f_cur <= floor or abs(f_prev - f_cur) <= opts.tol * f_prev:
                converged = True
                break
    B_tilde = solve_triangular(R, Q.T @ (Y - Phi))
    return FitResult(
        B_hat=B_tilde,
        Xi_hat=Phi / math.sqrt(n),
        S_hat=np.flatnonzero(np.linalg.norm(Phi, axis=1) > 0),
        objective_trace=tuple(trace),
        iterations=it,
        converged=converged,
        extras={"k": opts.k},
    )


def estimate_sigma0(X, Y) -> float:
    """Root mean squared residual of naive least squares, ``sqrt(||Y - X B_LS||_F^2 / (n m))``."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    n, d = X.shape
    if n <= d:
        raise ValueError("estimate_sigma0 requires n > d")
    Res = Y - X @ least_squares(X, Y)
    return float(np.sqrt(np.sum(Res * Res) / Res.size))
