"""Convex relaxations over the matching polytope, solved by Frank-Wolfe.

The polytope is ``C = {Theta in [0, 1]^{n x n} : every row sums to at most 1}``
and ``C_k = {Theta in C : trace(Theta) >= n - k}``. Both programs share the
smooth part ``f(Theta) = ||P_perp Theta Y||_F^2 / (2 n m)``:

* DS-cons minimizes ``f`` over ``C_k`` (a quadratic program);
* DS-reg minimizes ``f + lam * sum_i ||((I - Theta) Y)_i||_2`` over ``C``.

Why the greedy linear oracle is exact
-------------------------------------
For a fixed set D of rows that put their mass on the diagonal, the linear
objective ``<Theta, G>`` separates over rows: a row in D pays ``G_ii`` and a
free row pays ``g_i = min(0, min_j G_ij)``. Writing ``t_i`` for the diagonal
weight of row i, the best row cost is ``g_i + t_i * c_i`` with forcing cost
``c_i = G_ii - g_i >= 0``, linear in ``t_i``. The remaining problem,
``min sum_i t_i c_i`` subject to ``sum_i t_i >= n - k`` and ``0 <= t_i <= 1``,
is a fractional knapsack with an integral right-hand side, solved by putting
``t_i = 1`` on the ``n - k`` cheapest rows. The result is a binary vertex.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .estimators import least_squares, qr_factor
from .model import RegressionData

MAX_DENSE_N = 2000


@dataclass(frozen=True)
class FwOptions:
    max_iters: int = 100
    k: int = 0
    lam: float = 1.0
    smoothing_mu0: float = 1e-2
    tol: float = 1e-7

    def __post_init__(self):
        if self.max_iters < 0 or self.k < 0:
            raise ValueError("max_iters and k must be non-negative")
        if self.lam < 0 or not self.smoothing_mu0 > 0 or not self.tol > 0:
            raise ValueError("lam must be >= 0, smoothing_mu0 and tol > 0")


def _lp_oracle(G: np.ndarray, k: int) -> np.ndarray:
    n = G.shape[0]
    cols = np.argmin(G, axis=1)  # first minimizer on ties
    gains = np.minimum(G[np.arange(n), cols], 0.0)
    D = np.zeros_like(G, dtype=float)
    free = gains < 0
    D[np.flatnonzero(free), cols[free]] = 1.0
    n_forced = n - k
    if n_forced > 0:
        cost = np.diag(G) - gains
        forced = np.lexsort((np.arange(n), cost))[:n_forced]
        D[forced] = 0.0
        D[forced, forced] = 1.0
    return D


def lp_oracle_cons(G, k: int) -> np.ndarray:
    """Exact minimizer of ``trace(Theta^T G)`` over ``C_k``; a binary vertex."""
    G = np.asarray(G, dtype=float)
    n = G.shape[0]
    if G.shape != (n, n):
        raise ValueError("G must be square")
    if not 0 <= k < n:
        raise ValueError(f"k must lie in [0, n={n}), got {k}")
    return _lp_oracle(G, k)


def lp_oracle(G) -> np.ndarray:
    """Minimizer of ``trace(Theta^T G)`` over the whole polytope ``C``."""
    G = np.asarray(G, dtype=float)
    return _lp_oracle(G, G.shape[0])


def _check_size(n: int):
    if n > MAX_DENSE_N:
        raise ValueError(f"dense n x n relaxations are limited to n <= {MAX_DENSE_N}")
    if n > 500:
        warnings.warn(
            f"relaxations store dense {n} x {n} matrices; expect slow iterations",
            RuntimeWarning,
            stacklevel=3,
        )


def smooth_objective(data: RegressionData, Theta) -> float:
    """``||P_perp Theta Y||_F^2 / (2 n m)``."""
    Q, _ = qr_factor(data.X)
    A = Theta @ data.Y
    A = A - Q @ (Q.T @ A)
    return float(np.sum(A * A) / (2 * data.n * data.m))


def huber_norm(R, mu: float) -> np.ndarray:
    """Row-wise Huber smoothing of the Euclidean norm."""
    r = np.linalg.norm(R, axis=1)
    return np.where(r <= mu, r * r / (2 * mu), r - mu / 2)


def ds_reg_objective(data: RegressionData, Theta, lam: float, mu: float | None = None) -> float:
    """DS-reg objective; ``mu`` switches to the Huber-smoothed penalty."""
    R = data.Y - Theta @ data.Y
    pen = np.linalg.norm(R, axis=1) if mu is None else huber_norm(R, mu)
    return smooth_objective(data, Theta) + lam * float(np.sum(pen))


def fit_ds_cons(data: RegressionData, opts: FwOptions):
    """Frank-Wolfe over ``C_k`` from ``Theta = I`` with exact (clipped) line search.

    Returns ``(Theta_tilde, B_tilde, info)``; ``B_tilde`` regresses
    ``Theta_tilde Y`` on ``X``. ``info`` holds the objective trace and the
    final Frank-Wolfe gap.
    """
    n, m = data.n, data.m
    if n <= data.d:
        raise ValueError("fit_ds_cons requires n > d")
    if not opts.k < n:
        raise ValueError("k must be smaller than n")
    _check_size(n)
    Q, _ = qr_factor(data.X)
    Y = data.Y
    nm = n * m

    def perp(A):
        return A - Q @ (Q.T @ A)

    Theta = np.eye(n)
    PTY = perp(Theta @ Y)
    trace = [float(np.sum(PTY * PTY) / (2 * nm))]
    gap = np.inf
    converged = False
    it = 0
    for it in range(1, opts.max_iters + 1):
        grad = PTY @ Y.T / nm
        D = _lp_oracle(grad, opts.k)
        direction = D - Theta
        gap = float(-np.sum(direction * grad))
        if gap < opts.tol:
            converged = True
            break
        PdY = perp(direction @ Y)
        curvature = float(np.sum(PdY * PdY)) / nm
        if curvature <= 0:
            converged = True
            break
        alpha = min(max(gap / curvature, 0.0), 1.0)
        if alpha == 0.0:
            converged = True
            break
        Theta = Theta + alpha * direction
        PTY = PTY + alpha * PdY
        trace.append(float(np.sum(PTY * PTY) / (2 * nm)))
    B = least_squares(data.X, Theta @ Y)
    return Theta, B, {"objective_trace": tuple(trace), "gap": gap, "iterations": it, "converged": converged}


def fit_ds_reg(data: RegressionData, opts: FwOptions):
    """Frank-Wolfe over ``C`` on a successively Huber-smoothed group penalty.

    The smoothing level is ``mu_t = smoothing_mu0 / sqrt(t + 1)`` and the step
    ``2 / (t + 2)``. Returns ``(Theta_tilde, B_tilde, info)``.
    """
    n, m = data.n, data.m
    if n <= data.d:
        raise ValueError("fit_ds_reg requires n > d")
    _check_size(n)
    Q, _ = qr_factor(data.X)
    Y = data.Y
    nm = n * m
    lam = opts.lam

    def perp(A):
        return A - Q @ (Q.T @ A)

    Theta = np.eye(n)
    PTY = perp(Y)
    R = np.zeros_like(Y)  # (I - Theta) Y
    trace = []
    for t in range(opts.max_iters):
        mu = opts.smoothing_mu0 / math.sqrt(t + 1)
        r = np.linalg.norm(R, axis=1, keepdims=True)
        W = R / np.maximum(r, mu)
        grad = PTY @ Y.T / nm - lam * (W @ Y.T)
        D = _lp_oracle(grad, n)
        alpha = 2.0 / (t + 2)
        step = D - Theta
        Theta = Theta + alpha * step
        SY = step @ Y
        PTY = PTY + alpha * perp(SY)
        R = R - alpha * SY
        trace.append(float(np.sum(PTY * PTY) / (2 * nm) + lam * np.sum(huber_norm(R, mu))))
    B = least_squares(data.X, Theta @ Y)
    mu_final = opts.smoothing_mu0 / math.sqrt(max(opts.max_iters, 1))
    return Theta, B, {
        "objective_trace": tuple(trace),
        "iterations": opts.max_iters,
        "mu_final": mu_final,
        "objective": ds_reg_objective(data, Theta, lam),
    }


def diagonal_mismatch_set(Theta, k: int) -> np.ndarray:
    """The ``k`` rows with the smallest diagonal mass (ties -> smaller index), 0-based."""
    diag = np.diag(np.asarray(Theta))
    if not 0 <= k < diag.size:
        raise ValueError("k must lie in [0, n)")
    return np.sort(np.lexsort((np.arange(diag.size), diag))[:k])
