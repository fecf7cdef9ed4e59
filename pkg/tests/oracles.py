"""Independent reference computations used as test oracles.

Nothing here imports the solvers under test.
"""

import functools
import itertools
import math

import numpy as np
from scipy.optimize import minimize_scalar


def prox_row_numeric(a, eta):
    """Minimize 0.5||z - a||^2 + eta ||z|| numerically.

    The minimizer is parallel to ``a``, so write ``z = t a / ||a||`` and
    minimize the scalar objective over ``t`` in ``[0, ||a||]``.
    """
    a = np.asarray(a, dtype=float)
    r = np.linalg.norm(a)
    if r == 0:
        return np.zeros_like(a)
    res = minimize_scalar(
        lambda t: 0.5 * (t - r) ** 2 + eta * t,
        bounds=(0.0, r),
        method="bounded",
        options={"xatol": 1e-12},
    )
    t = res.x
    # the bounded search never lands exactly on the endpoint 0
    if 0.5 * r**2 <= 0.5 * (t - r) ** 2 + eta * t:
        t = 0.0
    return t * a / r


def group_lasso_reference(X, Y, lam, iters=20000):
    """FISTA on the reduced program in Xi alone.

    Returns ``(objective, Xi)`` for
    ``||P_perp (Y - sqrt(n) Xi)||^2 / (2 n m) + lam * sum_i ||Xi_i||``,
    whose optimal value equals that of the joint program in ``(B, Xi)``.
    """
    n, m = Y.shape
    U, _, _ = np.linalg.svd(X, full_matrices=False)

    def perp(A):
        return A - U @ (U.T @ A)

    rn = math.sqrt(n)
    step = m  # 1 / Lipschitz constant of the smooth part

    def obj(Xi):
        r = perp(Y - rn * Xi)
        return np.sum(r * r) / (2 * n * m) + lam * np.sum(np.sqrt(np.sum(Xi * Xi, axis=1)))

    Z = np.zeros_like(Y)
    W = Z.copy()
    t = 1.0
    for _ in range(iters):
        grad = -perp(Y - rn * W) / (rn * m)
        A = W - step * grad
        norms = np.sqrt(np.sum(A * A, axis=1, keepdims=True))
        shrink = np.clip(1.0 - step * lam / np.where(norms > 0, norms, 1.0), 0.0, None)
        Zn = A * shrink
        tn = (1 + math.sqrt(1 + 4 * t * t)) / 2
        W = Zn + (t - 1) / tn * (Zn - Z)
        Z, t = Zn, tn
    return obj(Z), Z


@functools.lru_cache(maxsize=None)
def _perms(n):
    return np.array(list(itertools.permutations(range(n))), dtype=np.int64).reshape(-1, n)


def brute_force_assignment(C):
    """Minimum over all n! permutations of sum_i C[i, pi(i)]."""
    n = C.shape[0]
    return C[np.arange(n), _perms(n)].sum(axis=1).min()


def brute_force_masked_assignment(C, allowed):
    """Cheapest permutation using only allowed edges; ``(cost, perm)`` with smallest-lexicographic perm on ties."""
    n = C.shape[0]
    best = (math.inf, None)
    for p in itertools.permutations(range(n)):
        if all(allowed[i, p[i]] for i in range(n)):
            c = sum(C[i, p[i]] for i in range(n))
            if c < best[0]:
                best = (c, p)
    return best


@functools.lru_cache(maxsize=None)
def _row_choices(n):
    # column index per row, n meaning "empty row"
    return np.array(list(itertools.product(range(n + 1), repeat=n)), dtype=np.int64)


def brute_force_lp_cons(G, k):
    """Minimum of <Theta, G> over every binary vertex of C_k (each row: one column or nothing)."""
    n = G.shape[0]
    choices = _row_choices(n)
    Gpad = np.hstack([G, np.zeros((n, 1))])
    cost = Gpad[np.arange(n), choices].sum(axis=1)
    diag = (choices == np.arange(n)).sum(axis=1)
    return cost[diag >= n - k].min()


def gamma_sq_loops(X, B):
    n = X.shape[0]
    fro2 = sum(B[i, j] ** 2 for i in range(B.shape[0]) for j in range(B.shape[1]))
    best = math.inf
    for i in range(n):
        for j in range(i + 1, n):
            diff = (X[i] - X[j]) @ B
            best = min(best, float(diff @ diff))
    return best / fro2
