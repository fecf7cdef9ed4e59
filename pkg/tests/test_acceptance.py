"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines inline; they
are also collected into the terminal summary.
"""

import math
import time

import numpy as np

from conftest import ACCEPTANCE_LINES
from mismatchreg import (
    CrrOptions,
    GroupLassoOptions,
    SynthConfig,
    contamination_view,
    fit_crr,
    fit_group_lasso,
    fit_naive,
    generate,
    group_threshold,
    lambda0,
    lambda_star,
    lp_oracle_cons,
    make_coefficients,
    make_rng,
    two_stage,
)
from mismatchreg.harness import ExperimentConfig, run
from mismatchreg.matcher import solve_assignment
from mismatchreg.metrics import gamma_sq, hamming_frac, standardized_error

from oracles import brute_force_assignment, brute_force_lp_cons, group_lasso_reference, prox_row_numeric


def report(label, passed, detail, elapsed=None):
    extra = "" if elapsed is None else f" [{elapsed:.2f}s]"
    line = f"{'PASS' if passed else 'FAIL'} {label}: {detail}{extra}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert passed, line


def test_criterion_01_prox_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    A = rng.standard_normal((1000, 4)) * rng.uniform(0.1, 5, size=(1000, 1))
    eta = rng.uniform(0, 4, size=1000)
    dev = 0.0
    for a, e in zip(A, eta):
        dev = max(dev, float(np.max(np.abs(group_threshold(a[None, :], e)[0] - prox_row_numeric(a, e)))))
    elapsed = time.perf_counter() - t0
    report("1 prox oracle", dev < 1e-6 and elapsed < 5, f"max deviation {dev:.2e} (< 1e-6), runtime < 5 s", elapsed)


def test_criterion_02_decomposition_fixed_point():
    rng = np.random.default_rng(7)
    fp_dev = obj_dev = 0.0
    for i in range(50):
        n, d, m = int(rng.integers(30, 101)), int(rng.integers(1, 6)), int(rng.integers(1, 5))
        sigma = float(rng.uniform(0.01, 1.0))
        data, _ = generate(SynthConfig(n=n, d=d, m=m, k_frac=float(rng.uniform(0, 0.3)), sigma=sigma, seed=i))
        lam = lambda_star(n, m, sigma)
        fit = fit_group_lasso(data, GroupLassoOptions(lam))
        X, Y = np.asarray(data.X), np.asarray(data.Y)
        B_fp = np.linalg.solve(X.T @ X, X.T @ (Y - math.sqrt(n) * fit.Xi_hat))
        fp_dev = max(fp_dev, float(np.max(np.abs(fit.B_hat - B_fp))))
        ref_obj, _ = group_lasso_reference(X, Y, lam, iters=3000)
        obj_dev = max(obj_dev, abs(fit.objective_trace[-1] - ref_obj))
    report(
        "2 decomposition fixed point",
        fp_dev < 1e-6 and obj_dev < 1e-6,
        f"fixed-point deviation {fp_dev:.2e}, objective gap to reference {obj_dev:.2e} (both < 1e-6) over 50 instances",
    )


def test_criterion_03_assignment_optimality():
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    mismatches = 0
    for trial in range(200):
        n = trial % 7 + 1
        # integer costs make the comparison exact
        C = rng.integers(0, 100, size=(n, n)).astype(float)
        perm = solve_assignment(C)
        if C[np.arange(n), perm].sum() != brute_force_assignment(C):
            mismatches += 1
    elapsed = time.perf_counter() - t0
    report("3 assignment optimality", mismatches == 0 and elapsed < 10, f"{mismatches}/200 cost mismatches vs n! scan, runtime < 10 s", elapsed)


def test_criterion_04_lp_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(4)
    mismatches = 0
    for trial in range(200):
        n = trial % 5 + 2
        k = int(rng.integers(0, min(2, n - 1) + 1))
        G = rng.integers(-20, 21, size=(n, n)).astype(float)
        if np.sum(lp_oracle_cons(G, k) * G) != brute_force_lp_cons(G, k):
            mismatches += 1
    elapsed = time.perf_counter() - t0
    report("4 LP oracle", mismatches == 0 and elapsed < 10, f"{mismatches}/200 mismatches vs vertex enumeration, runtime < 10 s", elapsed)


def test_criterion_05_estimation_improvement():
    t0 = time.perf_counter()
    cfg = SynthConfig(n=500, d=15, m=15, q=0, k_frac=0.2, sigma=0.05, seed=505)
    lam = lambda_star(500, 15, 0.05)
    prop, naive = [], []
    for r in range(20):
        data, truth = generate(cfg, replication=r)
        prop.append(standardized_error(fit_group_lasso(data, GroupLassoOptions(lam)).B_hat, truth.B_star, 0.05, 15, 15, 500))
        naive.append(standardized_error(fit_naive(data), truth.B_star, 0.05, 15, 15, 500))
    elapsed = time.perf_counter() - t0
    ratio = np.mean(prop) / np.mean(naive)
    report(
        "5 estimation improvement",
        ratio <= 0.2 and elapsed < 120,
        f"mean std error proposed {np.mean(prop):.3f} vs naive {np.mean(naive):.3f}, ratio {ratio:.3f} (<= 0.2), runtime < 2 min",
        elapsed,
    )


def test_criterion_06_phase_transition():
    t0 = time.perf_counter()
    sigmas = (0.01, 0.1, 0.5, 2.0)
    means = []
    for si, sigma in enumerate(sigmas):
        cfg = SynthConfig(n=200, d=6, m=6, q=0, k_frac=0.2, sigma=sigma, seed=606)
        vals = []
        for r in range(20):
            data, truth = generate(cfg, replication=r, stream=si)
            _, res = two_stage(data, "proposed", "permutation", lam=lambda_star(200, 6, sigma))
            vals.append(hamming_frac(res.theta_hat, truth.theta_star))
        means.append(float(np.mean(vals)))
    elapsed = time.perf_counter() - t0
    inversions = sum(b < a for a, b in zip(means, means[1:]))
    ok = means[0] < 0.01 and means[-1] > 0.5 and inversions <= 1 and elapsed < 120
    report("6 phase transition", ok, f"Hamming/n at sigma {sigmas}: {[round(v, 4) for v in means]}, {inversions} inversions", elapsed)


def _xi_error(k_frac, reps=20):
    cfg = SynthConfig(n=1000, d=30, m=30, q=0, k_frac=k_frac, sigma=0.1, seed=707)
    lam = 2 * lambda0(1000, 30, 30, 0.1)
    errs = []
    for r in range(reps):
        data, truth = generate(cfg, replication=r, stream=int(k_frac * 100))
        fit = fit_group_lasso(data, GroupLassoOptions(lam))
        errs.append(np.linalg.norm(fit.Xi_hat - contamination_view(data, truth, scaled=True)))
    return float(np.mean(errs))


def test_criterion_07_error_scaling():
    hi, lo = _xi_error(0.2), _xi_error(0.05)
    ratio = hi / lo
    report("7 error scaling", ratio <= 3, f"mean contamination error {hi:.4f} (k/n=0.2) / {lo:.4f} (k/n=0.05) = {ratio:.3f} (<= 3)")


def test_criterion_08_separation_bounds():
    t0 = time.perf_counter()
    n, r, delta, trials = 100, 2, 0.5, 500
    lower = (2 / math.e) * (delta / n**2) ** (2 / r)
    upper = 2 * 8 ** (2 / r) * n ** (-2 / r)
    hits_lo = hits_hi = 0
    for t in range(trials):
        rng = make_rng(808, replication=t)
        B = make_coefficients(2, 2, 0, rng)
        g = gamma_sq(rng.standard_normal((n, 2)), B)
        hits_lo += g >= lower
        hits_hi += g <= upper
    elapsed = time.perf_counter() - t0
    f_lo, f_hi = hits_lo / trials, hits_hi / trials
    need_lo = 1 - delta / 2 - 0.05
    report(
        "8 separation bounds",
        f_lo >= need_lo and f_hi >= 0.70 and elapsed < 30,
        f"lower-bound frequency {f_lo:.3f} (>= {need_lo:.2f}), upper-bound frequency {f_hi:.3f} (>= 0.70), runtime < 30 s",
        elapsed,
    )


def test_criterion_09_mismatch_separation():
    cfg = SynthConfig(n=500, d=15, m=15, q=0, k_frac=0.1, sigma=0.01, seed=909)
    lam = lambda_star(500, 15, 0.01)
    hits = 0
    for r in range(20):
        data, truth = generate(cfg, replication=r)
        norms = np.linalg.norm(fit_group_lasso(data, GroupLassoOptions(lam)).Xi_hat, axis=1)
        inside = np.zeros(500, dtype=bool)
        inside[truth.S_star] = True
        hits += norms[inside].min() > norms[~inside].max()
    report("9 mismatch separation", hits >= 18, f"{hits}/20 replications separate mismatched rows (>= 90%)")


def test_criterion_10_crr_recovery():
    cfg = SynthConfig(n=500, d=15, m=15, q=0, k_frac=0.1, sigma=0.0, seed=1010)
    hits = 0
    for r in range(20):
        data, truth = generate(cfg, replication=r)
        fit = fit_crr(data, CrrOptions(k=truth.k))
        exact = np.array_equal(fit.S_hat, truth.S_star) and np.max(np.abs(fit.B_hat - truth.B_star)) <= 1e-6
        hits += exact
    report("10 CRR support recovery", hits >= 19, f"{hits}/20 exact support with coefficients within 1e-6 (>= 95%)")


def test_criterion_11_determinism(tmp_path):
    cfg = ExperimentConfig.from_dict({
        "base_seed": 1111,
        "replications": 3,
        "estimators": ["naive", "oracle", "proposed", "proposed_plus", "crr", "ds_cons", "ds_reg"],
        "match_modes": ["threshold", "permutation", "constrained"],
        "fw_max_iters": 20,
        "n": [60, 100],
        "d": 3,
        "k_frac": [0.1, 0.2],
        "sigma": [0.05, 0.5],
        "missing_frac": [0.0, 0.25],
    })
    blobs = {}
    for threads in (1, 2, 4, 1):
        out = tmp_path / f"t{threads}_{len(blobs)}"
        run(cfg, out, threads=threads)
        blobs[out.name] = ((out / "results.csv").read_bytes(), (out / "summary.json").read_bytes())
    identical = len(set(blobs.values())) == 1
    report("11 determinism", identical, f"results.csv and summary.json identical across {len(blobs)} runs at 1, 2, 4 threads")
