"""Data model for regression with mismatched (response, predictor) pairs.

Indices follow two conventions. Public maps (``GeneralizedMatch.theta``) and
every file format are 1-based with ``0`` reserved for a missing match. Index
*sets* returned by library functions (``S_star``, ``S_hat``, ...) are 0-based
numpy integer arrays so they can be used directly for fancy indexing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class RegressionData:
    """The two samples to be reconciled: predictors ``X`` (n x d) and responses ``Y`` (n x m)."""

    X: np.ndarray
    Y: np.ndarray

    def __post_init__(self):
        X = _frozen(self.X)
        Y = _frozen(self.Y)
        if Y.ndim == 1:
            Y = _frozen(Y[:, None])
        if X.ndim != 2 or Y.ndim != 2:
            raise ValueError("X and Y must be 2-d arrays")
        if X.shape[0] != Y.shape[0]:
            raise ValueError(f"row mismatch: X has {X.shape[0]} rows, Y has {Y.shape[0]}")
        if X.shape[0] < 1 or X.shape[1] < 1 or Y.shape[1] < 1:
            raise ValueError("X and Y must be non-empty")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @property
    def m(self) -> int:
        return self.Y.shape[1]


@dataclass(frozen=True)
class GeneralizedMatch:
    """A map ``theta: {1..n} -> {0..n}``; ``theta[i-1] = 0`` marks a missing match.

    Several rows may point to the same predictor (one-to-many matches).
    """

    theta: np.ndarray

    def __post_init__(self):
        theta = np.asarray(self.theta)
        if theta.ndim != 1:
            raise ValueError("theta must be 1-d")
        if theta.size and not np.all(np.equal(np.mod(theta, 1), 0)):
            raise ValueError("theta must be integer valued")
        theta = _frozen(theta, dtype=np.int64)
        n = theta.size
        if np.any(theta < 0) or np.any(theta > n):
            raise ValueError(f"theta entries must lie in {{0, ..., {n}}}")
        object.__setattr__(self, "theta", theta)

    @classmethod
    def identity(cls, n: int) -> "GeneralizedMatch":
        return cls(np.arange(1, n + 1))

    @classmethod
    def from_matrix(cls, Theta) -> "GeneralizedMatch":
        """Inverse of :meth:`to_matrix`; rows must be binary with at most one 1."""
        Theta = np.asarray(Theta)
        if Theta.ndim != 2 or Theta.shape[0] != Theta.shape[1]:
            raise ValueError("Theta must be square")
        if not np.all((Theta == 0) | (Theta == 1)):
            raise ValueError("Theta must be binary")
        if np.any(Theta.sum(axis=1) > 1):
            raise ValueError("Theta rows must sum to at most 1")
        has_one = Theta.sum(axis=1) == 1
        theta = np.where(has_one, np.argmax(Theta, axis=1) + 1, 0)
        return cls(theta)

    @property
    def n(self) -> int:
        return self.theta.size

    def to_matrix(self) -> np.ndarray:
        return match_to_matrix(self)

    @property
    def support(self) -> np.ndarray:
        """0-based indices ``i`` with ``theta(i) != i``."""
        return np.flatnonzero(self.theta != np.arange(1, self.n + 1))

    @property
    def missing(self) -> np.ndarray:
        """0-based indices of missing matches."""
        return np.flatnonzero(self.theta == 0)

    def is_permutation(self) -> bool:
        return np.array_equal(np.sort(self.theta), np.arange(1, self.n + 1))

    def __eq__(self, other):
        if not isinstance(other, GeneralizedMatch):
            return NotImplemented
        return np.array_equal(self.theta, other.theta)

    def __hash__(self):
        return hash(self.theta.tobytes())


def match_to_matrix(gm: GeneralizedMatch) -> np.ndarray:
    """Materialize the n x n 0-1 matrix with ``Theta[i, j] = 1`` iff ``theta(i) = j``."""
    n = gm.n
    Theta = np.zeros((n, n))
    rows = np.flatnonzero(gm.theta)
    Theta[rows, gm.theta[rows] - 1] = 1.0
    return Theta


@dataclass(frozen=True)
class GroundTruth:
    """Synthetic-only truth: coefficients, correspondence and noise level.

    ``noise`` holds the exact noise matrix ``E`` (n x m) and ``X_missing`` the
    fresh predictors that generated the responses of missing matches (zero rows
    elsewhere); both are kept so the generator is reproducible bit for bit.
    """

    B_star: np.ndarray
    theta_star: GeneralizedMatch
    sigma: float
    noise: np.ndarray | None = None
    X_missing: np.ndarray | None = None

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")
        object.__setattr__(self, "B_star", _frozen(self.B_star))
        if self.noise is not None:
            object.__setattr__(self, "noise", _frozen(self.noise))
        if self.X_missing is not None:
            object.__setattr__(self, "X_missing", _frozen(self.X_missing))

    @property
    def S_star(self) -> np.ndarray:
        return self.theta_star.support

    @property
    def missing(self) -> np.ndarray:
        return self.theta_star.missing

    @property
    def k(self) -> int:
        return int(self.S_star.size)


@dataclass(frozen=True)
class FitResult:
    """Stage-one output.

    ``objective_trace`` holds the objective after each iteration (entry 0 is
    the starting point). ``S_hat`` is 0-based and may be empty.
    """

    B_hat: np.ndarray
    Xi_hat: np.ndarray | None = None
    S_hat: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    objective_trace: tuple = ()
    iterations: int = 0
    converged: bool = True
    extras: dict = field(default_factory=dict)


@dataclass(frozen=True)
class MatchResult:
    """Stage-two output; ``row_distance[i] = ||y_i - B_hat^T x_{j(i)}||``."""

    theta_hat: GeneralizedMatch
    tau: float
    row_distance: np.ndarray


def contamination_view(data: RegressionData, truth: GroundTruth, scaled: bool = False) -> np.ndarray:
    """Row-sparse contamination ``Phi*`` absorbing the mismatches.

    Row i is ``y_i - B*^T x_i`` for a missing match, ``B*^T (x_theta(i) - x_i)``
    for a mismatch and zero otherwise. With ``scaled=True`` the result is
    divided by sqrt(n), which is the target of the group-lasso contamination.
    """
    B = truth.B_star
    theta = truth.theta_star.theta
    n = data.n
    if theta.size != n or B.shape != (data.d, data.m):
        raise ValueError("dimension mismatch between data and ground truth")
    fitted = data.X @ B
    Phi = np.zeros((n, data.m))
    idx = np.arange(1, n + 1)
    shuffled = (theta != 0) & (theta != idx)
    Phi[shuffled] = fitted[theta[shuffled] - 1] - fitted[shuffled]
    miss = theta == 0
    Phi[miss] = data.Y[miss] - fitted[miss]
    return Phi / np.sqrt(n) if scaled else Phi
