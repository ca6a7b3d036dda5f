"""Command-line drivers.

Subcommands: simulate (emit a dataset CSV), fit (QMLE report), test (one
dataset, one procedure), table (rejection-frequency harness), bounds
(asymptotic-size lower bounds), densities (figure data export).  Every run
writes a JSON manifest of its settings next to its outputs.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .critvals import CritConfig
from .harness import (
    DensityConfig,
    export_densities,
    run_bounds,
    run_table,
    table1_experiment,
)
from .model import (
    Dataset,
    ParamSpace,
    TrueConfig,
    config_from_mapping,
    read_config_file,
    simulate_dgp,
)
from .procedures import report_json, test_lrlf, test_s, test_ts
from .qmle import fit_profile, pi_grid_default


def _out_dir(args) -> str:
    os.makedirs(args.out, exist_ok=True)
    return args.out


def _write_manifest(path: str, args, extra: dict | None = None) -> None:
    manifest = {
        "command": vars(args).copy(),
        "version": __version__,
        "numpy": np.__version__,
    }
    manifest["command"].pop("func", None)
    if extra:
        manifest.update(extra)
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, default=str)


def _dgp_from_args(args) -> TrueConfig:
    values: dict[str, str] = {}
    if args.config:
        values.update(read_config_file(args.config))
    for key in ("beta1", "beta2", "zeta", "pi", "varphi", "kappa"):
        v = getattr(args, key, None)
        if v is not None:
            values[key] = str(v)
    return config_from_mapping(values)


def _cmd_simulate(args) -> int:
    out = _out_dir(args)
    cfg = _dgp_from_args(args)
    data = simulate_dgp(cfg, args.n, burn_in=args.burn_in, seed=args.seed)
    data.to_csv(os.path.join(out, "dataset.csv"))
    _write_manifest(os.path.join(out, "manifest.json"), args)
    print(f"wrote {args.n} observations to {out}/dataset.csv")
    return 0


def _cmd_fit(args) -> int:
    out = _out_dir(args)
    data = Dataset.from_csv(args.data)
    space = ParamSpace(pi_max=args.pi_max)
    grid = pi_grid_default(args.pi_max, args.pi_step)
    fit = fit_profile(data, space, restriction=args.restriction, pi_grid=grid)
    with open(os.path.join(out, "fit.json"), "w") as fh:
        json.dump(fit.to_dict(), fh, indent=2)
    _write_manifest(os.path.join(out, "manifest.json"), args)
    print(
        f"theta_hat: beta1={fit.theta_hat.beta1:.6g} beta2={fit.theta_hat.beta2:.6g} "
        f"zeta={fit.theta_hat.zeta:.6g} pi_hat={fit.pi_hat:.6g} Qn={fit.qn_value:.8g}"
    )
    return 0


def _cmd_test(args) -> int:
    out = _out_dir(args)
    data = Dataset.from_csv(args.data)
    space = ParamSpace(pi_max=args.pi_max)
    cfg = CritConfig(
        alpha=args.alpha,
        j_draws=args.j_draws,
        pi_grid=pi_grid_default(args.pi_max, args.pi_step),
        seed=args.seed,
    )
    runner = {"ts": test_ts, "s": test_s, "lrlf": test_lrlf}[args.procedure]
    result = runner(data, space, cfg, alpha=args.alpha)
    report_json(result, os.path.join(out, "report.json"))
    _write_manifest(os.path.join(out, "manifest.json"), args)
    print(f"{args.procedure}: reject={result.reject}")
    return 0


def _cmd_table(args) -> int:
    out = _out_dir(args)
    columns = [int(c) for c in args.columns.split(",")]
    j_draws = 10_000 if args.paper_scale else args.j_draws
    experiments = {
        str(c): table1_experiment(
            c,
            reps=args.reps,
            n=args.n,
            master_seed=args.seed,
            workers=args.workers,
            j_draws=j_draws,
            alpha=args.alpha,
        )
        for c in columns
    }
    result = run_table(experiments)
    result.to_csv(os.path.join(out, "table.csv"))
    result.write_manifest(os.path.join(out, "manifest.json"))
    for col in result.columns:
        rates = "  ".join(f"{p}={100 * col.rate(p):.1f}%" for p in col.counts)
        print(f"column {col.label}: {rates}  (completed {col.completed}, failed {col.failed})")
    return 0


def _cmd_bounds(args) -> int:
    out = _out_dir(args)
    scale = 0.1 if args.quick else 1.0
    report = run_bounds(
        alpha=args.alpha,
        J=max(1000, int(10_000 * scale)),
        N=max(500, int(2_000 * scale)),
        kernel_blocks=max(5_000, int(100_000 * scale)),
        j_blocks=max(5_000, int(100_000 * scale)),
        seed=args.seed,
    )
    with open(os.path.join(out, "bounds.json"), "w") as fh:
        json.dump(report.to_dict(), fh, indent=2)
    _write_manifest(os.path.join(out, "manifest.json"), args)
    print(
        f"TS bound: {100 * report.bound_ts:.2f}%   S bound: {100 * report.bound_s:.2f}%   "
        f"(weak: TS {100 * report.rp_ts_weak:.2f}%, S {100 * report.rp_s_weak:.2f}%; "
        f"strong rho={report.rho:.3f} -> {100 * report.rp_strong:.2f}%)"
    )
    return 0


def _cmd_densities(args) -> int:
    out = _out_dir(args)
    cfg = DensityConfig(
        b1=args.b1,
        n=args.n,
        reps=args.reps,
        J=args.j_draws,
        N=args.blocks,
        master_seed=args.seed,
        workers=args.workers,
        targets=tuple(args.targets.split(",")),
    )
    export = export_densities(cfg)
    export.to_csv_dir(out)
    _write_manifest(
        os.path.join(out, "manifest.json"),
        args,
        extra={"ks_distance": export.ks_distance, "failed_reps": export.failed_reps},
    )
    for target, ks in export.ks_distance.items():
        print(f"{target}: KS(finite, asymptotic) = {ks:.4f}")
    return 0


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="out", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="garchxtest",
        description="Covariate-relevance tests for GARCH-X models",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a dataset and write CSV")
    _add_common(p)
    p.add_argument("--config", help="key = value file with dgp parameters")
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--burn-in", type=int, default=100, dest="burn_in")
    for key in ("beta1", "beta2", "zeta", "pi", "varphi", "kappa"):
        p.add_argument(f"--{key}", type=float, default=None)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("fit", help="profile QMLE fit of a dataset")
    _add_common(p)
    p.add_argument("--data", required=True, help="dataset CSV (header t,y,x)")
    p.add_argument("--restriction", choices=["none", "beta2_zero", "both_betas_zero"], default="none")
    p.add_argument("--pi-max", type=float, default=0.9, dest="pi_max")
    p.add_argument("--pi-step", type=float, default=0.01, dest="pi_step")
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("test", help="run one procedure on one dataset")
    _add_common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--procedure", choices=["ts", "s", "lrlf"], required=True)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--pi-max", type=float, default=0.9, dest="pi_max")
    p.add_argument("--pi-step", type=float, default=0.1, dest="pi_step")
    p.add_argument("--j-draws", type=int, default=10_000, dest="j_draws")
    p.set_defaults(func=_cmd_test)

    p = sub.add_parser("table", help="rejection-frequency table harness")
    _add_common(p)
    p.add_argument("--columns", default="1,7,10,11", help="comma-separated column ids 1..11")
    p.add_argument("--reps", type=int, default=500)
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--j-draws", type=int, default=2_000, dest="j_draws")
    p.add_argument("--paper-scale", action="store_true", dest="paper_scale",
                   help="use the paper's J = 10,000 inner draws")
    p.set_defaults(func=_cmd_table)

    p = sub.add_parser("bounds", help="asymptotic-size lower bounds")
    _add_common(p)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--quick", action="store_true", help="reduced sizes for a fast pass")
    p.set_defaults(func=_cmd_bounds)

    p = sub.add_parser("densities", help="finite-sample vs asymptotic draw export")
    _add_common(p)
    p.add_argument("--b1", type=float, default=0.0)
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--reps", type=int, default=2_000)
    p.add_argument("--j-draws", type=int, default=10_000, dest="j_draws")
    p.add_argument("--blocks", type=int, default=2_000)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--targets", default="pi_hat,beta1,beta2,zeta,lr_dagger,lr")
    p.set_defaults(func=_cmd_densities)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
