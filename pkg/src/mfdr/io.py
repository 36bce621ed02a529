"""Result files: sparse path triplets, study aggregates and run manifests."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import time
from pathlib import Path

import numpy as np

from .data import Dataset, PathFit, PenaltySpec

PATH_COLUMNS = ("lambda_index", "feature_index", "value")
GRID_COLUMNS = ("lambda_index", "lambda", "n_selected", "kkt_violation", "converged", "iterations")
AGGREGATE_COLUMNS = ("lambda", "statistic", "method", "value")


def fnum(x) -> str:
    """Round-trip float formatting; empty for NaN."""
    x = float(x)
    return repr(x) if np.isfinite(x) else ""


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def path_csv(fit: PathFit) -> str:
    k_idx, j_idx = np.nonzero(fit.beta.T)
    rows = [(int(k), int(j), fnum(fit.beta[j, k])) for k, j in zip(k_idx, j_idx)]
    return _csv(PATH_COLUMNS, rows)


def grid_csv(fit: PathFit) -> str:
    rows = [
        (k, fnum(lam), int(fit.n_selected[k]), fnum(fit.kkt_violation[k]),
         int(bool(fit.converged[k])), int(fit.iterations[k]) if fit.iterations.size else 0)
        for k, lam in enumerate(fit.lambdas)
    ]
    return _csv(GRID_COLUMNS, rows)


def read_path(path_file: str | Path, grid_file: str | Path, p: int) -> tuple[np.ndarray, np.ndarray]:
    """Load ``(lambdas, beta)`` written by :func:`path_csv` / :func:`grid_csv`."""
    with open(grid_file, newline="") as fh:
        grid = list(csv.DictReader(fh))
    lambdas = np.array([float(r["lambda"]) for r in grid])
    beta = np.zeros((p, lambdas.size))
    with open(path_file, newline="") as fh:
        for r in csv.DictReader(fh):
            beta[int(r["feature_index"]), int(r["lambda_index"])] = float(r["value"])
    return lambdas, beta


def pathfit_from_beta(ds: Dataset, spec: PenaltySpec, beta: np.ndarray) -> PathFit:
    from .solver import kkt_check

    R = ds.y[:, None] - ds.X @ beta
    kkt = np.array([kkt_check(ds, beta[:, k], spec, k) for k in range(beta.shape[1])])
    return PathFit(spec, beta, R, kkt, np.ones(beta.shape[1], dtype=bool))


def aggregate_csv(rows) -> str:
    return _csv(AGGREGATE_COLUMNS, [(fnum(l), s, m, fnum(v)) for l, s, m, v in rows])


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def run_id(config: dict) -> str:
    """Deterministic identifier of a run's configuration."""
    blob = json.dumps(config, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def write_outputs(out_dir: Path, files: dict[str, str]) -> dict[str, str]:
    out_dir.mkdir(parents=True, exist_ok=True)
    hashes = {}
    for name, text in files.items():
        p = out_dir / name
        p.write_text(text)
        hashes[name] = sha256_file(p)
    return hashes


def write_manifest(out_dir: Path, config: dict, outputs: dict[str, str], version: str, started: float) -> Path:
    manifest = {
        "run_id": run_id({k: v for k, v in config.items() if k != "out_dir"}),
        "tool_version": version,
        "config": config,
        "outputs": outputs,
        "started": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(started)),
        "finished": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    return path
