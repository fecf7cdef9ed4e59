"""Seeded Monte-Carlo experiments over grids of synthetic configurations.

A configuration is a flat TOML document; every grid key accepts a scalar or
a list and the grid is their Cartesian product::

    schema_version = 1
    base_seed = 7
    replications = 20
    estimators = ["naive", "oracle", "proposed", "proposed_plus", "crr"]
    match_modes = ["permutation"]
    lambda_rule = "lambda_star"     # | "two_lambda0" | "multiplier" | <number>
    n = [200, 500]
    d_frac = 0.03                   # or d = [...]
    k_frac = [0.05, 0.1, 0.2]
    q = 0
    sigma = [0.01, 0.1, 1.0]

Outputs in ``out_dir``: ``results.csv`` (one row per grid point, estimator,
match mode and replication), ``summary.json`` (per-configuration means) and
``timings.csv`` (wall times, kept apart so the first two are byte-identical
across reruns).
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import estimators as est
from . import matcher, metrics, relaxations
from .synth import SynthConfig, generate

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
ESTIMATORS = ("naive", "oracle", "proposed", "proposed_plus", "crr", "ds_reg", "ds_cons")
MATCH_MODES = ("threshold", "permutation", "constrained")
GRID_KEYS = ("n", "d", "d_frac", "m", "k_frac", "q", "sigma", "missing_frac", "many_to_one_frac")
METRIC_FIELDS = tuple(f.name for f in fields(metrics.MetricsReport))
RESULT_COLUMNS = (
    ("cell", "replication", "base_seed", "n", "d", "m", "k", "k_frac", "q", "sigma", "missing_frac",
     "many_to_one_frac", "estimator", "match_mode", "lam", "status")
    + METRIC_FIELDS
)


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass
class ExperimentConfig:
    grid: dict
    estimators: tuple = ("naive", "oracle", "proposed")
    match_modes: tuple = ("permutation",)
    lambda_rule: str | float = "lambda_star"
    lambda_multiplier: float = 1.0
    replications: int = 100
    base_seed: int = 0
    tau_multiplier: float = 1.0
    fw_max_iters: int = 100
    ds_reg_tune: bool = True
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        self.estimators = tuple(self.estimators)
        self.match_modes = tuple(self.match_modes)
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {self.schema_version}")
        if not self.estimators:
            raise ConfigError("estimators must be non-empty")
        bad = set(self.estimators) - set(ESTIMATORS)
        if bad:
            raise ConfigError(f"unknown estimators {sorted(bad)}")
        bad = set(self.match_modes) - set(MATCH_MODES)
        if bad or not self.match_modes:
            raise ConfigError(f"match_modes must be a non-empty subset of {MATCH_MODES}")
        if isinstance(self.lambda_rule, str) and self.lambda_rule not in ("lambda_star", "two_lambda0", "multiplier"):
            raise ConfigError(f"unknown lambda_rule {self.lambda_rule!r}")
        if self.replications < 1:
            raise ConfigError("replications must be positive")
        unknown = set(self.grid) - set(GRID_KEYS)
        if unknown:
            raise ConfigError(f"unknown grid keys {sorted(unknown)}")
        if "n" not in self.grid or not ("d" in self.grid or "d_frac" in self.grid):
            raise ConfigError("grid needs n and one of d / d_frac")
        self.grid = {k: tuple(v) if isinstance(v, (list, tuple)) else (v,) for k, v in self.grid.items()}
        if any(len(v) == 0 for v in self.grid.values()):
            raise ConfigError("grid lists must be non-empty")
        try:
            self.cells()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        doc = dict(doc)
        grid = {k: doc.pop(k) for k in GRID_KEYS if k in doc}
        names = {f.name for f in fields(cls)} - {"grid"}
        unknown = set(doc) - names
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        return cls(grid=grid, **doc)

    @classmethod
    def from_toml(cls, path) -> "ExperimentConfig":
        try:
            with open(path, "rb") as fh:
                doc = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from exc
        return cls.from_dict(doc)

    def to_dict(self) -> dict:
        out = asdict(self)
        grid = out.pop("grid")
        out.update({k: list(v) for k, v in grid.items()})
        out["estimators"] = list(self.estimators)
        out["match_modes"] = list(self.match_modes)
        return out

    def cells(self) -> list[SynthConfig]:
        """Grid points in canonical order (keys in ``GRID_KEYS`` order, values as listed)."""
        keys = [k for k in GRID_KEYS if k in self.grid]
        out = []
        for combo in itertools.product(*(self.grid[k] for k in keys)):
            point = dict(zip(keys, combo))
            n = int(point["n"])
            d = int(point["d"]) if "d" in point else max(1, int(round(point["d_frac"] * n)))
            m = int(point.get("m", d))
            out.append(SynthConfig(
                n=n, d=d, m=m,
                k_frac=float(point.get("k_frac", 0.0)),
                q=float(point.get("q", 0.0)),
                sigma=float(point.get("sigma", 1.0)),
                missing_frac=float(point.get("missing_frac", 0.0)),
                many_to_one_frac=float(point.get("many_to_one_frac", 0.0)),
                seed=int(self.base_seed),
            ))
        return out


def _choose_lambda(cfg: ExperimentConfig, cell: SynthConfig, sigma0: float) -> float:
    n, d, m, sigma = cell.n, cell.d, cell.m, cell.sigma
    rule = cfg.lambda_rule
    if not isinstance(rule, str):
        return float(rule)
    if rule == "lambda_star":
        return est.lambda_star(n, m, sigma)
    if rule == "two_lambda0":
        return 2.0 * est.lambda0(n, d, m, sigma)
    return cfg.lambda_multiplier * sigma0 / math.sqrt(n * m)


def _fit_estimator(name, data, truth, cell, lam, cfg):
    """Return ``(B_hat, extra)`` for one estimator."""
    k = cell.k
    if name == "naive":
        return est.fit_naive(data), None
    if name == "oracle":
        return est.fit_oracle(data, truth.theta_star), None
    if name in ("proposed", "proposed_plus"):
        if not lam > 0:
            raise ValueError("lambda must be positive")
        fit = est.fit_group_lasso(data, est.GroupLassoOptions(lam))
        if name == "proposed":
            return fit.B_hat, None
        return est.refit(data, est.estimate_mismatch_set(fit, top_k=k)), None
    if name == "crr":
        return est.fit_crr(data, est.CrrOptions(k)).B_hat, None
    if name == "ds_cons":
        _, B, _ = relaxations.fit_ds_cons(data, relaxations.FwOptions(max_iters=cfg.fw_max_iters, k=k))
        return B, None
    if name == "ds_reg":
        if not lam > 0:
            raise ValueError("lambda must be positive")
        exps = (-1, 0, 1, 2, 3) if cfg.ds_reg_tune else (0,)
        best = None
        for p in exps:
            _, B, _ = relaxations.fit_ds_reg(
                data, relaxations.FwOptions(max_iters=cfg.fw_max_iters, lam=lam * 2.0 ** (-p))
            )
            err = np.linalg.norm(B - truth.B_star)
            if best is None or err < best[0]:
                best = (err, B, p)
        return best[1], best[2]
    raise ValueError(name)


def _match(mode, data, B, cell, sigma0, cfg):
    if mode == "permutation":
        return matcher.match_permutation(data, B)
    if mode == "threshold":
        tau = cfg.tau_multiplier * matcher.default_tau(sigma0, cell.m, cell.n)
        return matcher.match_threshold(data, B, tau)
    return matcher.match_constrained(data, B, sigma0)


def run_replication(cfg: ExperimentConfig, cell_index: int, cell: SynthConfig, replication: int) -> tuple[list, list]:
    """All estimator x match-mode rows for one (grid point, replication)."""
    data, truth = generate(cell, replication=replication, stream=cell_index)
    B_star = truth.B_star
    base = metrics.MetricsReport(
        gamma_sq=metrics.gamma_sq(data.X, B_star),
        gamma0_sq=metrics.gamma0_sq(data.X, data.Y, B_star, truth.missing),
        snr=metrics.snr(B_star, cell.sigma, cell.m),
        stable_rank=metrics.stable_rank(B_star),
    )
    base.normalized_log_snr = (
        metrics.normalized_log_snr(cell.n, base.stable_rank, cell.sigma) if cell.sigma > 0 else math.inf
    )
    try:
        sigma0 = est.estimate_sigma0(data.X, data.Y)
    except (ValueError, np.linalg.LinAlgError):
        sigma0 = math.nan
    try:
        lam = _choose_lambda(cfg, cell, sigma0)
    except ValueError:
        lam = math.nan
    rows, timings = [], []
    head = {
        "cell": cell_index, "replication": replication, "base_seed": cfg.base_seed, "n": cell.n, "d": cell.d,
        "m": cell.m, "k": cell.k, "k_frac": cell.k_frac, "q": cell.q, "sigma": cell.sigma,
        "missing_frac": cell.missing_frac, "many_to_one_frac": cell.many_to_one_frac,
    }
    for name in cfg.estimators:
        t0 = time.perf_counter()
        try:
            B, _ = _fit_estimator(name, data, truth, cell, lam, cfg)
            status = "ok"
        except Exception as exc:  # fault isolation: record and continue
            logger.debug("cell %d rep %d %s failed: %s", cell_index, replication, name, exc)
            B, status = None, f"fit_error:{type(exc).__name__}"
        t_fit = time.perf_counter() - t0
        for mode in cfg.match_modes:
            rep = metrics.MetricsReport(**asdict(base))
            row_status = status
            t1 = time.perf_counter()
            if B is not None:
                rep.std_err = metrics.standardized_error(B, B_star, cell.sigma, cell.m, cell.d, cell.n)
                rep.r_squared = metrics.r_squared(data.X, data.Y, B)
                try:
                    res = _match(mode, data, B, cell, sigma0, cfg)
                    rep.hamming_frac = metrics.hamming_frac(res.theta_hat, truth.theta_star)
                    rep.rel_reduction = metrics.rel_reduction(res.theta_hat, truth.theta_star, data.Y)
                except Exception as exc:
                    row_status = f"match_error:{type(exc).__name__}"
            rows.append({**head, "estimator": name, "match_mode": mode, "lam": lam, "status": row_status,
                         **rep.to_dict()})
            timings.append((cell_index, replication, name, mode, t_fit + time.perf_counter() - t1))
    return rows, timings


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _results_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RESULT_COLUMNS)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in RESULT_COLUMNS])
    return buf.getvalue()


def _json_num(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None if math.isnan(v) else ("inf" if v > 0 else "-inf")
    return v


def summarize(rows) -> list[dict]:
    """Per (cell, estimator, match mode) means over successful replications."""
    groups: dict = {}
    for r in rows:
        groups.setdefault((r["cell"], r["estimator"], r["match_mode"]), []).append(r)
    out = []
    for (cell, name, mode), grp in sorted(groups.items(), key=lambda kv: (kv[0][0], ESTIMATORS.index(kv[0][1]), MATCH_MODES.index(kv[0][2]))):
        ok = [r for r in grp if r["status"] == "ok"]
        entry = {k: grp[0][k] for k in ("cell", "n", "d", "m", "k", "k_frac", "q", "sigma", "missing_frac", "many_to_one_frac")}
        entry.update(estimator=name, match_mode=mode, replications=len(grp), failures=len(grp) - len(ok))
        for f in METRIC_FIELDS:
            vals = np.array([r[f] for r in ok], dtype=float)
            vals = vals[~np.isnan(vals)]
            entry[f"mean_{f}"] = _json_num(float(np.mean(vals))) if vals.size else None
        out.append(entry)
    return out


@dataclass
class RunOutcome:
    rows: list
    summary: list
    timings: list = field(default_factory=list)

    @property
    def all_failed(self) -> bool:
        return bool(self.rows) and all(r["status"] != "ok" for r in self.rows)


def run(cfg: ExperimentConfig, out_dir=None, threads: int = 1) -> RunOutcome:
    """Run every (grid point, replication); results merge in canonical order regardless of ``threads``."""
    tasks = [(ci, cell, rep) for ci, cell in enumerate(cfg.cells()) for rep in range(cfg.replications)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda t: run_replication(cfg, *t), tasks))
    else:
        parts = [run_replication(cfg, *t) for t in tasks]
    rows = [r for p in parts for r in p[0]]
    timings = [t for p in parts for t in p[1]]
    outcome = RunOutcome(rows, summarize(rows), timings)
    if out_dir is not None:
        write_outputs(outcome, cfg, out_dir)
    return outcome


def write_outputs(outcome: RunOutcome, cfg: ExperimentConfig, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "results.csv").write_text(_results_csv(outcome.rows))
    summary = {"schema_version": SCHEMA_VERSION, "config": cfg.to_dict(), "rng": "Philox4x64-10", "cells": outcome.summary}
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("cell", "replication", "estimator", "match_mode", "wall_seconds"))
    for t in outcome.timings:
        w.writerow([*t[:4], f"{t[4]:.6f}"])
    (out / "timings.csv").write_text(buf.getvalue())


estimate_sigma0 = est.estimate_sigma0
