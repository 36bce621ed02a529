"""Command-line interface: ``mfdr fit | perm | simulate | replay``.

Exit codes: 0 success, 2 usage, 3 input error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import __version__
from .analytic import METHODS, mfdr_analytic
from .data import DataError, PenaltySpec, default_grid, log_grid, read_csv, standardize
from .io import (
    aggregate_csv,
    fnum,
    grid_csv,
    path_csv,
    pathfit_from_beta,
    read_path,
    run_id,
    sha256_file,
    write_manifest,
    write_outputs,
)
from .permutation import GridMismatchError, PermutationPlan, mfdr_perm
from .simulation import PRESETS, SimDesign, StudyAborted, StudyConfig, choose_lambda_mfdr, preset, replicate_study
from .solver import SolverConfig, cross_validate, fit_path

EXIT_INPUT = 3
EXIT_NUMERIC = 4


class InputError(Exception):
    pass


class NumericalError(Exception):
    pass


def _add_data_args(p):
    p.add_argument("--data", required=True, help="CSV with a header row")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--response", help="name of the response column in --data")
    g.add_argument("--y-file", help="single-column CSV holding the response")


def _add_penalty_args(p, grid=True):
    p.add_argument("--penalty", choices=["lasso", "mcp", "enet"], default="lasso")
    p.add_argument("--gamma", type=float, default=3.0)
    p.add_argument("--alpha", type=float, default=1.0)
    if grid:
        p.add_argument("--nlambda", type=int, default=100)
        p.add_argument("--lambda-min-ratio", type=float, default=None)
    p.add_argument("--tol", type=float, default=1e-7)
    p.add_argument("--max-iter", type=int, default=100_000)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mfdr", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"mfdr {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fit", help="fit a path and estimate mFDR analytically")
    _add_data_args(f)
    _add_penalty_args(f)
    f.add_argument("--mfdr-target", type=float, default=None)
    f.add_argument("--cv", type=int, default=0, metavar="K", help="also run K-fold cross-validation")
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--out-dir", required=True)
    f.set_defaults(func=cmd_fit)

    p = sub.add_parser("perm", help="permutation mFDR estimates")
    _add_data_args(p)
    _add_penalty_args(p)
    p.add_argument("--method", choices=["perm-y", "perm-r"], default="perm-y")
    p.add_argument("--B", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--original-fit", default=None, help="output directory of a previous `fit` run")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_perm)

    s = sub.add_parser("simulate", help="replicate study on a synthetic design")
    s.add_argument("--preset", choices=sorted(PRESETS), default=None)
    for name, typ in [("n", int), ("p", int), ("causative", int), ("beta", float), ("m", int),
                      ("rho-corr", float), ("noise-rho", float), ("sigma", float)]:
        s.add_argument(f"--{name}", type=typ, default=None)
    s.add_argument("--noise", choices=["independent", "ar", "exchangeable"], default=None)
    _add_penalty_args(s, grid=False)
    s.add_argument("--nlambda", type=int, default=100)
    s.add_argument("--lambda-max", type=float, default=1.0)
    s.add_argument("--lambda-min", type=float, default=0.1)
    s.add_argument("--methods", default="analytic")
    s.add_argument("--B", type=int, default=100)
    s.add_argument("--reps", type=int, default=100)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--mfdr-target", type=float, default=None)
    s.add_argument("--out-dir", required=True)
    s.set_defaults(func=cmd_simulate)

    r = sub.add_parser("replay", help="rerun the command recorded in a manifest")
    r.add_argument("manifest")
    r.add_argument("--out-dir", default=None)
    r.set_defaults(func=cmd_replay)
    return ap


def _config(args) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k != "func"}
    inputs = {}
    for key in ("data", "y_file"):
        if cfg.get(key):
            inputs[key] = sha256_file(cfg[key])
    if cfg.get("original_fit"):
        d = Path(cfg["original_fit"])
        inputs["original_fit"] = {n: sha256_file(d / n) for n in ("path.csv", "grid.csv")}
    cfg["inputs"] = inputs
    return cfg


def _load(args):
    try:
        X, y, names = read_csv(args.data, args.response, args.y_file)
        return standardize(X, y, names)
    except OSError as exc:
        raise InputError(str(exc)) from exc


def _spec(args, ds) -> PenaltySpec:
    grid = default_grid(ds, args.nlambda, args.lambda_min_ratio)
    return PenaltySpec(args.penalty, grid, args.gamma, args.alpha)


def _solver(args) -> SolverConfig:
    return SolverConfig(max_iter=args.max_iter, tol=args.tol)


def _finish(args, config, files, started):
    out = Path(args.out_dir)
    rid = run_id({k: v for k, v in config.items() if k != "out_dir"})
    files = {k: (v(rid) if callable(v) else v) for k, v in files.items()}
    hashes = write_outputs(out, files)
    write_manifest(out, config, hashes, __version__, started)
    return rid


def cmd_fit(args) -> int:
    started = time.time()
    config = _config(args)
    ds = _load(args)
    spec = _spec(args, ds)
    fit = fit_path(ds, spec, _solver(args))
    table = mfdr_analytic(fit, ds)
    if not table.defined.any():
        raise NumericalError("sigma is undefined (saturated model) at every lambda")
    print(f"{spec.family}: {len(table)} lambdas, max KKT violation {fit.kkt_violation.max():.3g}, "
          f"{int((~fit.converged).sum())} unconverged")
    files = {
        "path.csv": path_csv(fit),
        "grid.csv": grid_csv(fit),
        "mfdr_analytic.csv": table.to_csv(),
        "mfdr_analytic.json": lambda rid: table.to_json(run_id=rid, penalty=spec.family, manifest="manifest.json"),
    }
    summary = {}
    if args.mfdr_target is not None:
        ch = choose_lambda_mfdr(table, args.mfdr_target)
        if ch.found:
            sel = [ds.feature_names[j] for j in fit.selected[ch.index]]
            print(f"lambda = {ch.lam!r} (mFDR {table.mfdr[ch.index]:.3f} < {args.mfdr_target}); "
                  f"{len(sel)} selected: {', '.join(sel)}")
        else:
            sel = []
            print(f"no qualifying lambda: every nonempty model has estimated mFDR >= {args.mfdr_target}")
        summary["mfdr_rule"] = {"target": args.mfdr_target, "found": ch.found, "lambda": ch.lam, "selected": sel}
    if args.cv:
        cv = cross_validate(ds, spec, args.cv, _solver(args), args.seed)
        k = cv.index_min
        print(f"CV lambda = {cv.lambda_min!r}: {int(fit.n_selected[k])} selected, "
              f"analytic mFDR {table.mfdr[k]:.3f}")
        files["cv.csv"] = "lambda,cv_error,cv_se\n" + "".join(
            f"{fnum(l)},{fnum(e)},{fnum(s)}\n" for l, e, s in zip(cv.lambdas, cv.cv_error, cv.cv_se)
        )
        summary["cv"] = {"k": args.cv, "lambda_min": cv.lambda_min, "index": k,
                         "n_selected": int(fit.n_selected[k]), "mfdr": float(table.mfdr[k])}
    if summary:
        files["summary.json"] = lambda rid: json.dumps({"run_id": rid, "manifest": "manifest.json", **summary}, indent=1)
    _finish(args, config, files, started)
    return 0


def cmd_perm(args) -> int:
    started = time.time()
    config = _config(args)
    ds = _load(args)
    spec = _spec(args, ds)
    cfg = _solver(args)
    original = None
    if args.original_fit:
        d = Path(args.original_fit)
        try:
            lambdas, beta = read_path(d / "path.csv", d / "grid.csv", ds.p)
        except (OSError, KeyError, ValueError) as exc:
            raise InputError(f"cannot read original fit in {d}: {exc}") from exc
        if lambdas.shape != spec.lambda_grid.shape or not np.allclose(lambdas, spec.lambda_grid, rtol=1e-12, atol=0):
            raise GridMismatchError("lambda grid does not match the original fit's grid")
        original = pathfit_from_beta(ds, spec, beta)
    plan = PermutationPlan(args.B, args.seed, args.method)
    table = mfdr_perm(ds, spec, cfg, plan, original)
    name = f"mfdr_{args.method}"
    files = {
        f"{name}.csv": table.to_csv(),
        f"{name}.json": lambda rid: table.to_json(run_id=rid, penalty=spec.family, B=args.B, seed=args.seed,
                                                  manifest="manifest.json"),
    }
    _finish(args, config, files, started)
    print(f"{args.method}: B={args.B}, seed={args.seed}, {len(table)} lambdas")
    return 0


def _design(args) -> SimDesign:
    base = preset(args.preset) if args.preset else SimDesign()
    overrides = {}
    for flag, field_name in [("n", "n"), ("p", "p"), ("causative", "causative"), ("beta", "beta"), ("m", "m"),
                             ("rho_corr", "rho_corr"), ("noise_rho", "noise_rho"), ("sigma", "sigma"),
                             ("noise", "noise_structure")]:
        v = getattr(args, flag)
        if v is not None:
            overrides[field_name] = v
    if not args.preset and not overrides:
        raise InputError("give --preset or explicit design flags")
    return replace(base, **overrides)


def cmd_simulate(args) -> int:
    started = time.time()
    config = _config(args)
    methods = tuple(m.strip() for m in args.methods.split(",") if m.strip())
    for m in methods:
        if m not in METHODS:
            raise InputError(f"unknown method {m!r}")
    design = _design(args)
    grid = tuple(float(x) for x in log_grid(args.lambda_max, args.lambda_min, args.nlambda))
    cfg = StudyConfig(grid, {"enet": "elastic-net"}.get(args.penalty, args.penalty), args.gamma, args.alpha,
                      methods, args.reps, args.B, args.seed, args.mfdr_target, _solver(args))
    res = replicate_study(design, cfg)
    files = {"aggregate.csv": aggregate_csv(res.aggregate_rows())}
    study = {"design": asdict(design), "R": args.reps, "R_used": res.R_used, "failures": res.failures,
             "methods": list(methods), "B": args.B, "seed": args.seed}
    if res.rule is not None:
        study["mfdr_rule"] = {
            "target": args.mfdr_target,
            "found_fraction": float(res.rule["found"].mean()),
            "realized_true_mfdr": res.rule_true_mfdr(),
            "mean_selected": float(res.rule["n_selected"].mean()),
            "mean_noise": float(res.rule["fd_true"].mean()),
            "mean_correlated": float(res.rule["correlated"].mean()),
            "mean_causative": float(res.rule["causative"].mean()),
        }
    files["study.json"] = lambda rid: json.dumps({"run_id": rid, "manifest": "manifest.json", **study}, indent=1)
    _finish(args, config, files, started)
    print(f"{args.preset or 'custom'}: {res.R_used}/{args.reps} replicates, methods {', '.join(methods)}")
    return 0


def cmd_replay(args) -> int:
    manifest = json.loads(Path(args.manifest).read_text())
    cfg = dict(manifest["config"])
    recorded = cfg.pop("inputs", {})
    ns = argparse.Namespace(**cfg)
    if args.out_dir:
        ns.out_dir = args.out_dir
    now = _config(ns)["inputs"]
    if now != recorded:
        raise InputError("input files changed since the manifest was written")
    funcs = {"fit": cmd_fit, "perm": cmd_perm, "simulate": cmd_simulate}
    return funcs[ns.command](ns)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InputError, DataError, GridMismatchError, FileNotFoundError) as exc:
        print(f"mfdr: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as exc:
        print(f"mfdr: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (NumericalError, StudyAborted, ArithmeticError) as exc:
        print(f"mfdr: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
