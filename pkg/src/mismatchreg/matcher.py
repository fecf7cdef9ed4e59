"""Stage two: recovering the correspondence from fitted predictors.

Three modes are offered:

``threshold``
    each response goes to its nearest fitted predictor, or to nothing when
    that distance exceeds ``tau`` (missing and one-to-many matches allowed);
``permutation``
    minimum-cost linear assignment of responses to fitted predictors;
``constrained``
    assignment restricted to pairings that improve on a pre-existing linkage,
    with rows already fitting within the noise band kept in place.

Ties in any argmin go to the smallest index. Under a continuous model they
have probability zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

from . import estimators as est
from .model import FitResult, GeneralizedMatch, MatchResult, RegressionData


class InfeasibleMatchError(RuntimeError):
    """The constrained assignment could only be completed through a forbidden edge."""


@dataclass(frozen=True)
class MatchOptions:
    mode: Literal["threshold", "permutation", "constrained"] = "permutation"
    tau: float = math.inf
    sigma_hat: float = 0.0
    top_k: int | None = None

    def __post_init__(self):
        if self.mode not in ("threshold", "permutation", "constrained"):
            raise ValueError(f"unknown match mode {self.mode!r}")
        if self.tau < 0 or self.sigma_hat < 0:
            raise ValueError("tau and sigma_hat must be non-negative")


def _distances(data: RegressionData, B_hat) -> np.ndarray:
    fitted = data.X @ np.asarray(B_hat, dtype=float)
    if fitted.shape != data.Y.shape:
        raise ValueError("B_hat has incompatible shape")
    return cdist(data.Y, fitted)


def match_threshold(data: RegressionData, B_hat, tau: float = math.inf, top_k: int | None = None) -> MatchResult:
    """Nearest fitted predictor per response, discarded beyond distance ``tau``.

    With ``top_k`` only the ``k`` rows with the largest in-place residual
    ``||y_i - B_hat^T x_i||`` are re-matched; all other rows keep ``theta(i) = i``.
    """
    if tau < 0:
        raise ValueError("tau must be non-negative")
    Dist = _distances(data, B_hat)
    n = data.n
    j_hat = np.argmin(Dist, axis=1)
    dist = Dist[np.arange(n), j_hat]
    theta = np.where(dist <= tau, j_hat + 1, 0)
    if top_k is not None:
        if not 0 <= top_k <= n:
            raise ValueError("top_k must lie in [0, n]")
        own = np.diag(Dist)
        active = np.zeros(n, dtype=bool)
        active[np.lexsort((np.arange(n), -own))[:top_k]] = True
        theta = np.where(active, theta, np.arange(1, n + 1))
        dist = np.where(active, dist, own)
    return MatchResult(GeneralizedMatch(theta), float(tau), dist)


def default_tau(sigma_hat: float, m: int, n: int, slack: float = 0.0) -> float:
    """Recovery threshold ``sigma_hat (sqrt(m) + 2 sqrt(log n)) + slack``.

    ``slack`` is the caller's bound on ``max_j ||x_j|| * ||B* - B_hat||_2``.
    """
    if sigma_hat < 0 or slack < 0:
        raise ValueError("sigma_hat and slack must be non-negative")
    return sigma_hat * (math.sqrt(m) + 2.0 * math.sqrt(math.log(n))) + slack


def solve_assignment(cost) -> np.ndarray:
    """Column assigned to each row in a minimum-cost perfect matching.

    Thin wrapper over SciPy's shortest augmenting path solver (deterministic,
    cubic time).
    """
    cost = np.asarray(cost, dtype=float)
    rows, cols = linear_sum_assignment(cost)
    out = np.empty(cost.shape[0], dtype=np.int64)
    out[rows] = cols
    return out


def match_permutation(data: RegressionData, B_hat) -> MatchResult:
    """Permutation minimizing ``sum_i ||y_i - B_hat^T x_pi(i)||^2``."""
    Dist = _distances(data, B_hat)
    perm = solve_assignment(Dist**2)
    dist = Dist[np.arange(data.n), perm]
    return MatchResult(GeneralizedMatch(perm + 1), math.inf, dist)


def match_constrained(data: RegressionData, B_hat, sigma_hat: float, theta_pre: GeneralizedMatch | None = None) -> MatchResult:
    """Correct an existing linkage by a restricted assignment.

    ``theta_pre`` describes the current pairing: response ``i`` sits next to
    predictor ``theta_pre(i)`` (identity when omitted). With ``Z`` the fitted
    values of the pre-linked predictors, the assignment ``pi`` minimizes
    ``sum_i ||y_i - Z_pi(i)||^2`` where row ``i`` is pinned to ``pi(i) = i``
    if ``||y_i - Z_i|| <= sqrt(2 m) sigma_hat``, and ``pi(i) = j != i`` is
    allowed only if it strictly improves on ``||y_i - Z_i||``.

    The returned map is expressed in the original predictor indices, i.e.
    ``theta_hat(i) = theta_pre(pi(i))``.
    """
    n, m = data.n, data.m
    if sigma_hat < 0:
        raise ValueError("sigma_hat must be non-negative")
    theta_pre = GeneralizedMatch.identity(n) if theta_pre is None else theta_pre
    if theta_pre.n != n:
        raise ValueError("theta_pre has the wrong length")
    fitted = data.X @ np.asarray(B_hat, dtype=float)
    pre = theta_pre.theta
    Z = np.where((pre > 0)[:, None], fitted[np.maximum(pre - 1, 0)], 0.0)
    Dist = cdist(data.Y, Z)
    own = np.diag(Dist).copy()
    fixed = own <= math.sqrt(2 * m) * sigma_hat
    perm = np.arange(n)
    free = np.flatnonzero(~fixed)
    if free.size:
        sub = Dist[np.ix_(free, free)]
        allowed = sub < own[free][:, None]
        allowed[np.arange(free.size), np.arange(free.size)] = True
        cost = sub**2
        sentinel = 1e12 * max(float(cost.max()), 1.0)
        cost = np.where(allowed, cost, sentinel)
        sub_perm = solve_assignment(cost)
        if not np.all(allowed[np.arange(free.size), sub_perm]):
            raise InfeasibleMatchError("assignment needed a forbidden pairing")
        perm[free] = free[sub_perm]
    theta = pre[perm]
    return MatchResult(GeneralizedMatch(theta), math.sqrt(2 * m) * sigma_hat, Dist[np.arange(n), perm])


def _stage_one(data, estimator, lam, k):
    if estimator in ("group_lasso", "proposed", "proposed_plus"):
        if lam is None:
            raise ValueError(f"{estimator} needs lam")
        fit = est.fit_group_lasso(data, est.GroupLassoOptions(lam))
        if estimator == "proposed_plus":
            if k is None:
                raise ValueError("proposed_plus needs k")
            S_hat = est.estimate_mismatch_set(fit, top_k=k)
            B = est.refit(data, S_hat)
            fit = FitResult(
                B_hat=B, Xi_hat=fit.Xi_hat, S_hat=S_hat, objective_trace=fit.objective_trace,
                iterations=fit.iterations, converged=fit.converged, extras={**fit.extras, "B_group_lasso": fit.B_hat},
            )
        return fit
    if estimator == "crr":
        if k is None:
            raise ValueError("crr needs k")
        return est.fit_crr(data, est.CrrOptions(k))
    raise ValueError(f"unknown estimator {estimator!r}")


def two_stage(
    data: RegressionData,
    estimator: str = "group_lasso",
    match: MatchOptions | str = "permutation",
    lam: float | None = None,
    k: int | None = None,
    theta_pre: GeneralizedMatch | None = None,
) -> tuple[FitResult, MatchResult]:
    """Estimate the coefficients, then recover the correspondence with them.

    ``estimator`` is ``group_lasso`` (alias ``proposed``), ``proposed_plus``
    (top-``k`` refit) or ``crr``.
    """
    opts = MatchOptions(mode=match) if isinstance(match, str) else match
    fit = _stage_one(data, estimator, lam, k)
    if opts.mode == "threshold":
        res = match_threshold(data, fit.B_hat, opts.tau, top_k=opts.top_k)
    elif opts.mode == "permutation":
        res = match_permutation(data, fit.B_hat)
    else:
        res = match_constrained(data, fit.B_hat, opts.sigma_hat, theta_pre)
    return fit, res
