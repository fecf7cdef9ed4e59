"""Synthetic instances with a k-sparse generalized mismatch.

All randomness flows through :func:`make_rng`, which builds a numpy
``Generator`` on the counter-based Philox-4x64 bit generator. The Philox key
is ``(seed XOR replication, stream)``, so every (grid cell, replication) pair
owns an independent, reproducible substream.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .model import GeneralizedMatch, GroundTruth, RegressionData

RNG_ALGORITHM = "Philox4x64-10"

_UINT64 = (1 << 64) - 1


def make_rng(seed: int, replication: int = 0, stream: int = 0) -> np.random.Generator:
    """Philox generator keyed by ``(seed ^ replication, stream)``."""
    key = np.array([(int(seed) ^ int(replication)) & _UINT64, int(stream) & _UINT64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _floor_frac(frac: float, n: int) -> int:
    # guards 0.2 * 500 style products landing a hair below the integer
    return int(math.floor(frac * n + 1e-9))


@dataclass(frozen=True)
class SynthConfig:
    n: int
    d: int
    m: int | None = None
    k_frac: float = 0.0
    q: float = 0.0
    sigma: float = 1.0
    missing_frac: float = 0.0
    many_to_one_frac: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.m is None:
            object.__setattr__(self, "m", self.d)
        if self.n < 1 or self.d < 1 or self.m < 1:
            raise ValueError("n, d, m must be positive")
        if not 0.0 <= self.k_frac < 1.0:
            raise ValueError("k_frac must lie in [0, 1)")
        if self.q < 0 or self.sigma < 0:
            raise ValueError("q and sigma must be non-negative")
        if not (0 <= self.missing_frac <= 1 and 0 <= self.many_to_one_frac <= 1):
            raise ValueError("missing_frac and many_to_one_frac must lie in [0, 1]")
        if self.missing_frac + self.many_to_one_frac > 1 + 1e-12:
            raise ValueError("missing_frac + many_to_one_frac must not exceed 1")
        if not 0 <= int(self.seed) <= _UINT64:
            raise ValueError("seed must be an unsigned 64-bit integer")

    @property
    def k(self) -> int:
        return _floor_frac(self.k_frac, self.n)

    def to_dict(self) -> dict:
        return asdict(self)


def make_coefficients(d: int, m: int, q: float, rng: np.random.Generator) -> np.ndarray:
    """Gaussian d x m matrix with singular values reset to ``j**-q``, scaled to ``||B||_F^2 = m``.

    When ``d != m`` the decay applies to the ``min(d, m)`` singular values.
    """
    G = rng.standard_normal((d, m))
    U, _, Vt = np.linalg.svd(G, full_matrices=False)
    s = np.arange(1, min(d, m) + 1, dtype=float) ** (-float(q))
    s *= math.sqrt(m) / np.linalg.norm(s)
    return (U * s) @ Vt


def make_mismatch(
    n: int,
    k: int,
    missing_frac: float = 0.0,
    many_to_one_frac: float = 0.0,
    rng: np.random.Generator | None = None,
) -> GeneralizedMatch:
    """Mismatch confined to the first ``k`` indices.

    Of those, ``floor(missing_frac * k)`` become missing matches and
    ``floor(many_to_one_frac * k)`` point to a predictor already used by
    another row; the rest are shuffled uniformly at random (fixed points
    allowed, so the realized support may be smaller than ``k``).
    """
    if k > n or k < 0:
        raise ValueError(f"k={k} must lie in [0, n={n}]")
    rng = make_rng(0) if rng is None else rng
    theta = np.arange(1, n + 1)
    if k == 0:
        return GeneralizedMatch(theta)
    n_missing = _floor_frac(missing_frac, k)
    n_dup = _floor_frac(many_to_one_frac, k)
    if n_missing + n_dup > k:
        raise ValueError("missing_frac + many_to_one_frac must not exceed 1")
    order = rng.permutation(k)
    missing_idx = order[:n_missing]
    dup_idx = order[n_missing:n_missing + n_dup]
    perm_idx = np.sort(order[n_missing + n_dup:])
    theta[perm_idx] = theta[perm_idx][rng.permutation(perm_idx.size)]
    theta[missing_idx] = 0
    if n_dup:
        used = np.concatenate([theta[perm_idx], np.arange(k + 1, n + 1)])
        if used.size == 0:
            raise ValueError("no matched predictors available for one-to-many matches")
        theta[dup_idx] = rng.choice(used, size=n_dup, replace=True)
    return GeneralizedMatch(theta)


def generate(cfg: SynthConfig, replication: int = 0, stream: int = 0) -> tuple[RegressionData, GroundTruth]:
    """Draw ``(X, Y)`` with ``y_i = B*^T x_theta(i) + sigma * eps_i``.

    Responses of missing matches use a fresh Gaussian predictor independent
    of ``X``. The draw order is fixed (B*, X, theta*, noise, fresh predictors)
    so a given seed is reproducible bit for bit.
    """
    rng = make_rng(cfg.seed, replication, stream)
    B = make_coefficients(cfg.d, cfg.m, cfg.q, rng)
    X = rng.standard_normal((cfg.n, cfg.d))
    gm = make_mismatch(cfg.n, cfg.k, cfg.missing_frac, cfg.many_to_one_frac, rng)
    E = rng.standard_normal((cfg.n, cfg.m))
    X_missing = rng.standard_normal((cfg.n, cfg.d))
    miss = gm.theta == 0
    X_missing[~miss] = 0.0
    Y = model_response(X, B, gm, cfg.sigma, E, X_missing)
    truth = GroundTruth(B, gm, float(cfg.sigma), noise=E, X_missing=X_missing)
    return RegressionData(X, Y), truth


def model_response(X, B, gm: GeneralizedMatch, sigma: float, E, X_missing=None) -> np.ndarray:
    """Evaluate the generative model for given predictors, coefficients and noise."""
    theta = gm.theta
    miss = theta == 0
    src = np.where(miss, 0, theta - 1)
    fitted = (X @ B)[src]
    if miss.any():
        if X_missing is None:
            raise ValueError("missing matches need the fresh predictors X_missing")
        fitted[miss] = X_missing[miss] @ B
    return fitted + sigma * E
