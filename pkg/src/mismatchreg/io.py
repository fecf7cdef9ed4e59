"""File formats.

Matrices are headerless, row-major CSV written with 17 significant digits so
floats round-trip exactly. Matches are a single column of integers in
``{0..n}`` (1-based, 0 = missing).
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .model import GeneralizedMatch, GroundTruth, RegressionData


def save_matrix(path, A) -> None:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    np.savetxt(path, A, delimiter=",", fmt="%.17g")


def load_matrix(path) -> np.ndarray:
    return np.atleast_2d(np.loadtxt(path, delimiter=",", dtype=float, ndmin=2))


def save_match(path, gm: GeneralizedMatch) -> None:
    np.savetxt(path, gm.theta.reshape(-1, 1), fmt="%d")


def load_match(path) -> GeneralizedMatch:
    return GeneralizedMatch(np.loadtxt(path, dtype=np.int64, ndmin=1).ravel())


def save_index_set(path, idx) -> None:
    """0-based indices written 1-based, one per line."""
    np.savetxt(path, np.asarray(idx, dtype=np.int64).reshape(-1, 1) + 1, fmt="%d")


def load_index_set(path) -> np.ndarray:
    text = Path(path).read_text().split()
    return np.array([int(t) - 1 for t in text], dtype=np.int64)


def dump_instance(out_dir, data: RegressionData, truth: GroundTruth | None = None, meta: dict | None = None) -> Path:
    """Write ``X.csv``, ``Y.csv`` and, with a ground truth, ``theta_star.csv``, ``B_star.csv``, ``noise.csv`` and ``meta.json``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_matrix(out / "X.csv", data.X)
    save_matrix(out / "Y.csv", data.Y)
    if truth is not None:
        save_match(out / "theta_star.csv", truth.theta_star)
        save_matrix(out / "B_star.csv", truth.B_star)
        if truth.noise is not None:
            save_matrix(out / "noise.csv", truth.noise)
        if truth.X_missing is not None and truth.missing.size:
            save_matrix(out / "X_missing.csv", truth.X_missing)
    meta = dict(meta or {})
    if truth is not None:
        meta.setdefault("sigma", truth.sigma)
    (out / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return out


def load_instance(in_dir) -> tuple[RegressionData, GroundTruth | None, dict]:
    src = Path(in_dir)
    data = RegressionData(load_matrix(src / "X.csv"), load_matrix(src / "Y.csv"))
    meta_path = src / "meta.json"
    meta = json.loads(meta_path.read_text()) if meta_path.exists() else {}
    truth = None
    if (src / "theta_star.csv").exists() and (src / "B_star.csv").exists():
        noise = load_matrix(src / "noise.csv") if (src / "noise.csv").exists() else None
        xm = load_matrix(src / "X_missing.csv") if (src / "X_missing.csv").exists() else None
        B = load_matrix(src / "B_star.csv")
        truth = GroundTruth(B, load_match(src / "theta_star.csv"), float(meta.get("sigma", 0.0)), noise, xm)
    return data, truth, meta
