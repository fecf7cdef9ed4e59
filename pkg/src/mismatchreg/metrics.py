"""Evaluation quantities: separation constants, SNR, errors and recovery scores."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.spatial.distance import pdist, cdist

from .model import GeneralizedMatch


@dataclass
class MetricsReport:
    hamming_frac: float = math.nan
    std_err: float = math.nan
    r_squared: float = math.nan
    rel_reduction: float = math.nan
    gamma_sq: float = math.nan
    gamma0_sq: float = math.nan
    snr: float = math.nan
    stable_rank: float = math.nan
    normalized_log_snr: float = math.nan

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        # inf/nan are not valid JSON numbers
        def enc(v):
            return v if math.isfinite(v) else (None if math.isnan(v) else ("inf" if v > 0 else "-inf"))

        return json.dumps({k: enc(float(v)) for k, v in self.to_dict().items()}, sort_keys=False)


def gamma_sq(X, B) -> float:
    """Minimum over pairs ``i < j`` of ``||B^T (x_i - x_j)||^2 / ||B||_F^2``."""
    X = np.asarray(X, dtype=float)
    B = np.asarray(B, dtype=float)
    if X.shape[0] < 2:
        raise ValueError("gamma_sq needs at least two rows")
    fro2 = float(np.sum(B * B))
    if fro2 == 0:
        raise ValueError("B must be non-zero")
    return float(np.min(pdist(X @ B, "sqeuclidean")) / fro2)


def gamma0_sq(X, Y, B, missing) -> float:
    """Minimum over missing rows ``i`` and all ``j`` of ``||y_i - B^T x_j||^2 / ||B||_F^2``.

    An empty missing set gives ``inf`` so that ``min(gamma0_sq, gamma_sq)``
    falls back to ``gamma_sq``.
    """
    missing = np.asarray(missing, dtype=np.int64)
    if missing.size == 0:
        return math.inf
    B = np.asarray(B, dtype=float)
    fro2 = float(np.sum(B * B))
    if fro2 == 0:
        raise ValueError("B must be non-zero")
    Y = np.asarray(Y, dtype=float)
    return float(np.min(cdist(Y[missing], np.asarray(X, dtype=float) @ B, "sqeuclidean")) / fro2)


def snr(B, sigma: float, m: int) -> float:
    """``||B||_F^2 / (sigma^2 m)``."""
    fro2 = float(np.sum(np.asarray(B, dtype=float) ** 2))
    if fro2 == 0:
        return 0.0
    if sigma == 0:
        return math.inf
    return fro2 / (sigma**2 * m)


def stable_rank(B) -> float:
    """``||B||_F^2 / ||B||_2^2``."""
    s = np.linalg.svd(np.asarray(B, dtype=float), compute_uv=False)
    if s[0] == 0:
        raise ValueError("stable rank of the zero matrix is undefined")
    return float(np.sum(s**2) / s[0] ** 2)


def _theta(t):
    return t.theta if isinstance(t, GeneralizedMatch) else np.asarray(t)


def hamming_frac(theta_hat, theta_star) -> float:
    a, b = _theta(theta_hat), _theta(theta_star)
    if a.shape != b.shape:
        raise ValueError("maps have different lengths")
    return float(np.mean(a != b))


def standardized_error(B_est, B_star, sigma: float, m: int, d: int, n: int) -> float:
    """Excess error ``||B_est - B*||_F / (sigma sqrt(m)) - sqrt(d / n)`` relative to the oracle.

    For ``sigma = 0`` the first term is taken as 0 when the difference is at
    rounding level (``<= 1e-9 * max(1, ||B*||_F)``) and ``inf`` otherwise.
    """
    B_star = np.asarray(B_star, dtype=float)
    diff = np.linalg.norm(np.asarray(B_est, dtype=float) - B_star)
    if sigma == 0:
        first = 0.0 if diff <= 1e-9 * max(1.0, float(np.linalg.norm(B_star))) else math.inf
        return first - math.sqrt(d / n)
    return float(diff / (sigma * math.sqrt(m)) - math.sqrt(d / n))


def _apply(t, Y):
    """``Theta @ Y`` for a map (by row gathering) or a dense matrix."""
    if isinstance(t, GeneralizedMatch):
        out = np.zeros_like(Y)
        nz = t.theta != 0
        out[nz] = Y[t.theta[nz] - 1]
        return out
    return np.asarray(t, dtype=float) @ Y


def rel_reduction(Theta_hat, Theta_star, Y) -> float:
    """``||(Theta_hat - Theta*) Y||_F / ||(I - Theta*) Y||_F``; accepts maps or matrices."""
    Y = np.asarray(Y, dtype=float)
    star = _apply(Theta_star, Y)
    den = np.linalg.norm(Y - star)
    num = np.linalg.norm(_apply(Theta_hat, Y) - star)
    if den == 0:
        return 0.0 if num == 0 else math.inf
    return float(num / den)


def normalized_log_snr(n: int, srank: float, sigma: float, c: float = 0.7) -> float:
    """``-c / srank * log(n) - 2 log(sigma)``; ``c = 0.7`` aligns recovery curves across settings."""
    return -c / srank * math.log(n) - 2.0 * math.log(sigma)


def r_squared(X, Y, B) -> float:
    """Coefficient of determination against column-centered totals."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    res = Y - X @ np.asarray(B, dtype=float)
    tot = Y - Y.mean(axis=0)
    ss_tot = float(np.sum(tot * tot))
    if ss_tot == 0:
        return math.nan
    return 1.0 - float(np.sum(res * res)) / ss_tot
