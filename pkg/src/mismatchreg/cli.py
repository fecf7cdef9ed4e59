"""Command line entry point: ``mismatchreg {generate,fit,match,metrics,experiment}``.

Exit codes: 0 success, 1 configuration error, 2 numeric failure (every cell
failed), 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import estimators as est
from . import harness, io, matcher, metrics, relaxations
from .synth import SynthConfig, generate

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, default=float) + "\n")


def cmd_generate(args) -> int:
    cfg = SynthConfig(
        n=args.n, d=args.d, m=args.m, k_frac=args.k_frac, q=args.q, sigma=args.sigma,
        missing_frac=args.missing_frac, many_to_one_frac=args.many_to_one_frac, seed=args.seed,
    )
    data, truth = generate(cfg, replication=args.replication)
    meta = {"config": cfg.to_dict(), "replication": args.replication, "rng": "Philox4x64-10", "k": cfg.k}
    io.dump_instance(args.out, data, truth, meta)
    return EXIT_OK


def _lambda(args, data) -> float:
    if args.lam is not None:
        return args.lam
    sigma = args.sigma if args.sigma is not None else est.estimate_sigma0(data.X, data.Y)
    if args.lambda_rule == "lambda_star":
        return est.lambda_star(data.n, data.m, sigma)
    if args.lambda_rule == "two_lambda0":
        return 2 * est.lambda0(data.n, data.d, data.m, sigma)
    return args.lambda_multiplier * est.estimate_sigma0(data.X, data.Y) / math.sqrt(data.n * data.m)


def cmd_fit(args) -> int:
    data, _, _ = io.load_instance(args.data)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    info = {"estimator": args.estimator}
    if args.estimator == "naive":
        B = est.fit_naive(data)
    elif args.estimator in ("proposed", "proposed_plus"):
        lam = _lambda(args, data)
        fit = est.fit_group_lasso(data, est.GroupLassoOptions(lam, max_iters=args.max_iters))
        B = fit.B_hat
        io.save_matrix(out / "Xi_hat.csv", fit.Xi_hat)
        info.update(lam=lam, iterations=fit.iterations, converged=fit.converged, objective=fit.objective_trace[-1])
        if args.estimator == "proposed_plus":
            if args.k is None:
                raise ValueError("proposed_plus needs --k")
            S_hat = est.estimate_mismatch_set(fit, top_k=args.k)
            B = est.refit(data, S_hat)
            io.save_index_set(out / "S_hat.csv", S_hat)
        elif args.threshold is not None:
            io.save_index_set(out / "S_hat.csv", est.estimate_mismatch_set(fit, threshold=args.threshold))
    elif args.estimator == "crr":
        if args.k is None:
            raise ValueError("crr needs --k")
        fit = est.fit_crr(data, est.CrrOptions(args.k, max_iters=args.max_iters))
        B = fit.B_hat
        io.save_index_set(out / "S_hat.csv", fit.S_hat)
        info.update(iterations=fit.iterations, converged=fit.converged)
    else:
        opts = relaxations.FwOptions(max_iters=args.max_iters, k=args.k or 0,
                                     lam=_lambda(args, data) if args.estimator == "ds_reg" else 1.0)
        fitter = relaxations.fit_ds_cons if args.estimator == "ds_cons" else relaxations.fit_ds_reg
        Theta, B, fw = fitter(data, opts)
        io.save_matrix(out / "Theta_tilde.csv", Theta)
        info.update(iterations=fw["iterations"])
    io.save_matrix(out / "B_hat.csv", B)
    _write_json(out / "fit.json", info)
    return EXIT_OK


def cmd_match(args) -> int:
    data, _, _ = io.load_instance(args.data)
    B = io.load_matrix(args.B)
    if args.mode == "threshold":
        tau = args.tau
        if tau is None:
            sigma_hat = args.sigma_hat if args.sigma_hat is not None else est.estimate_sigma0(data.X, data.Y)
            tau = args.tau_multiplier * matcher.default_tau(sigma_hat, data.m, data.n)
        res = matcher.match_threshold(data, B, tau, top_k=args.top_k)
    elif args.mode == "permutation":
        res = matcher.match_permutation(data, B)
    else:
        sigma_hat = args.sigma_hat if args.sigma_hat is not None else est.estimate_sigma0(data.X, data.Y)
        pre = io.load_match(args.theta_pre) if args.theta_pre else None
        res = matcher.match_constrained(data, B, sigma_hat, pre)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    io.save_match(out / "theta_hat.csv", res.theta_hat)
    io.save_matrix(out / "row_distance.csv", res.row_distance.reshape(-1, 1))
    _write_json(out / "match.json", {"mode": args.mode, "tau": res.tau})
    return EXIT_OK


def cmd_metrics(args) -> int:
    data, truth, _ = io.load_instance(args.data)
    if truth is None:
        raise ValueError(f"{args.data} holds no ground truth")
    rep = metrics.MetricsReport(
        gamma_sq=metrics.gamma_sq(data.X, truth.B_star),
        gamma0_sq=metrics.gamma0_sq(data.X, data.Y, truth.B_star, truth.missing),
        snr=metrics.snr(truth.B_star, truth.sigma, data.m),
        stable_rank=metrics.stable_rank(truth.B_star),
    )
    if truth.sigma > 0:
        rep.normalized_log_snr = metrics.normalized_log_snr(data.n, rep.stable_rank, truth.sigma, args.c)
    if args.B:
        B = io.load_matrix(args.B)
        rep.std_err = metrics.standardized_error(B, truth.B_star, truth.sigma, data.m, data.d, data.n)
        rep.r_squared = metrics.r_squared(data.X, data.Y, B)
    if args.theta:
        th = io.load_match(args.theta)
        rep.hamming_frac = metrics.hamming_frac(th, truth.theta_star)
        rep.rel_reduction = metrics.rel_reduction(th, truth.theta_star, data.Y)
    text = rep.to_json()
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    return EXIT_OK


def cmd_experiment(args) -> int:
    cfg = harness.ExperimentConfig.from_toml(args.config)
    if args.seed is not None:
        cfg = harness.ExperimentConfig.from_dict({**cfg.to_dict(), "base_seed": args.seed})
    outcome = harness.run(cfg, args.out, threads=args.threads)
    return EXIT_NUMERIC if outcome.all_failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mismatchreg", description="Regression with sparsely mismatched data.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="draw a synthetic instance into a directory")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--d", type=int, required=True)
    g.add_argument("--m", type=int, default=None, help="defaults to d")
    g.add_argument("--k-frac", type=float, default=0.0)
    g.add_argument("--q", type=float, default=0.0)
    g.add_argument("--sigma", type=float, default=1.0)
    g.add_argument("--missing-frac", type=float, default=0.0)
    g.add_argument("--many-to-one-frac", type=float, default=0.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--replication", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    f = sub.add_parser("fit", help="stage one: estimate coefficients")
    f.add_argument("--data", required=True, help="directory with X.csv and Y.csv")
    f.add_argument("--estimator", choices=("naive", "proposed", "proposed_plus", "crr", "ds_cons", "ds_reg"), default="proposed")
    f.add_argument("--lam", type=float, default=None, help="explicit lambda (overrides --lambda-rule)")
    f.add_argument("--lambda-rule", choices=("lambda_star", "two_lambda0", "multiplier"), default="multiplier")
    f.add_argument("--lambda-multiplier", type=float, default=1.0)
    f.add_argument("--sigma", type=float, default=None, help="noise level for lambda rules; default: least squares RMSE")
    f.add_argument("--k", type=int, default=None)
    f.add_argument("--threshold", type=float, default=None, help="flag rows with ||Xi_i|| >= threshold")
    f.add_argument("--max-iters", type=int, default=500)
    f.add_argument("--out", required=True)
    f.set_defaults(func=cmd_fit)

    mt = sub.add_parser("match", help="stage two: recover the correspondence")
    mt.add_argument("--data", required=True)
    mt.add_argument("--B", required=True, help="coefficient CSV (d x m)")
    mt.add_argument("--mode", choices=harness.MATCH_MODES, default="permutation")
    mt.add_argument("--tau", type=float, default=None)
    mt.add_argument("--tau-multiplier", type=float, default=1.0)
    mt.add_argument("--sigma-hat", type=float, default=None)
    mt.add_argument("--top-k", type=int, default=None)
    mt.add_argument("--theta-pre", default=None, help="existing linkage for constrained mode")
    mt.add_argument("--out", required=True)
    mt.set_defaults(func=cmd_match)

    me = sub.add_parser("metrics", help="evaluate estimates against a synthetic ground truth")
    me.add_argument("--data", required=True)
    me.add_argument("--B", default=None)
    me.add_argument("--theta", default=None)
    me.add_argument("--c", type=float, default=0.7)
    me.add_argument("--out", default=None)
    me.set_defaults(func=cmd_metrics)

    ex = sub.add_parser("experiment", help="run a TOML-configured Monte-Carlo grid")
    ex.add_argument("--config", required=True)
    ex.add_argument("--out", required=True)
    ex.add_argument("--seed", type=int, default=None, help="override base_seed")
    ex.add_argument("--threads", type=int, default=1)
    ex.set_defaults(func=cmd_experiment)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except harness.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (np.linalg.LinAlgError, matcher.InfeasibleMatchError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
