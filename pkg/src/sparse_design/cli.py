"""Command-line front end: fit, design, predict, ridge, simulate, converge.

Every subcommand is reproducible: the same inputs and seed produce
byte-identical primary outputs (timestamps live only in the model file's
meta block).  Errors exit nonzero with a single ``error: ...`` line on
stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from . import __version__
from ._parallel import ENV_THREADS
from .data import Design, Domain, load_longitudinal, load_responses
from .errors import SparseDesignError
from .model import FitConfig, ModelFit, fit_model
from .predict import predict_responses, recover_trajectories
from .search import earliest_design, exhaustive_search, greedy_search, search_result_json
from .simulation import ScenarioSpec, run_benchmark
from .consistency import convergence_study
from .validation import select_ridge_cv, select_ridge_modified_cv


class _Parser(argparse.ArgumentParser):
    """Argparse variant whose errors are a single machine-parsable line."""

    def error(self, message: str):
        raise _CliError(message)


class _CliError(Exception):
    pass


def _float_list(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _write_json(doc: dict, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _build_parser() -> _Parser:
    parser = _Parser(prog="sparse-design")
    parser.add_argument("--threads", type=int, default=None, help=f"worker cap (0 = auto; env {ENV_THREADS})")
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="fit a model from longitudinal CSV data")
    p_fit.add_argument("--data", required=True)
    p_fit.add_argument("--responses")
    p_fit.add_argument("--grid-size", type=int, default=51)
    p_fit.add_argument("--domain", type=_float_list, default=None, metavar="LO,HI")
    p_fit.add_argument("--kernel", default="epanechnikov")
    p_fit.add_argument("--bandwidth-mu", type=float, default=None)
    p_fit.add_argument("--bandwidth-cov", type=float, default=None)
    p_fit.add_argument("--bandwidth-cross", type=float, default=None)
    p_fit.add_argument("--bandwidth-diag", type=float, default=None)
    p_fit.add_argument("--ridge", default=None, help="'auto', a number, or omit for the noise variance")
    p_fit.add_argument("--ridge-target", default="trajectory", choices=("trajectory", "response"))
    p_fit.add_argument("--ridge-p", type=int, default=3)
    p_fit.add_argument("--ridge-method", default=None, choices=(None, "cv", "modified-cv"))
    p_fit.add_argument("--fve", type=float, default=0.95)
    p_fit.add_argument("--seed", type=int, default=0)
    p_fit.add_argument("--out", required=True)

    p_design = sub.add_parser("design", help="select an optimal design for a fitted model")
    p_design.add_argument("--model", required=True)
    p_design.add_argument("--target", required=True, choices=("trajectory", "response"))
    p_design.add_argument("--p", type=int, required=True)
    p_design.add_argument("--method", default="exhaustive", choices=("exhaustive", "greedy"))
    p_design.add_argument("--alpha", type=float, default=None, help="earliest-design threshold (enables the domain scan)")
    p_design.add_argument("--allow-large", action="store_true")
    p_design.add_argument("--out", required=True)

    p_pred = sub.add_parser("predict", help="predict from observed design values")
    p_pred.add_argument("--model", required=True)
    p_pred.add_argument("--design", required=True)
    p_pred.add_argument("--obs", required=True, help="CSV: subject_id,t1,...,tp (values at design times)")
    p_pred.add_argument("--out", required=True)

    p_ridge = sub.add_parser("ridge", help="cross-validate the ridge parameter")
    p_ridge.add_argument("--data", required=True)
    p_ridge.add_argument("--responses")
    p_ridge.add_argument("--target", required=True, choices=("trajectory", "response"))
    p_ridge.add_argument("--p", type=int, required=True)
    p_ridge.add_argument("--method", required=True, choices=("cv", "modified-cv"))
    p_ridge.add_argument("--grid-size", type=int, default=51)
    p_ridge.add_argument("--L", type=int, default=10)
    p_ridge.add_argument("--split", type=float, default=0.75)
    p_ridge.add_argument("--tau", default="auto", help="match tolerance in time units, or 'auto' (one grid step)")
    p_ridge.add_argument("--omega", type=_float_list, default=None, help="comma list of ridge candidates")
    p_ridge.add_argument("--seed", type=int, default=0)
    p_ridge.add_argument("--out", required=True)

    p_sim = sub.add_parser("simulate", help="run the optimal-vs-random benchmark")
    p_sim.add_argument("--scenario", required=True, choices=("dense", "sparse"))
    p_sim.add_argument("--runs", type=int, required=True)
    p_sim.add_argument("--p-list", type=_int_list, required=True)
    p_sim.add_argument("--methods", type=lambda s: s.split(","), default=["exhaustive", "random"])
    p_sim.add_argument("--targets", type=lambda s: s.split(","), default=["trajectory", "response"])
    p_sim.add_argument("--grid-size", type=int, default=51)
    p_sim.add_argument("--n-train", type=int, default=100)
    p_sim.add_argument("--n-test", type=int, default=1000)
    p_sim.add_argument("--random-count", type=int, default=100)
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--out-dir", required=True)

    p_conv = sub.add_parser("converge", help="design-consistency trend study")
    p_conv.add_argument("--scenario", default="sparse", choices=("dense", "sparse"))
    p_conv.add_argument("--n-list", type=_int_list, required=True)
    p_conv.add_argument("--replicates", type=int, required=True)
    p_conv.add_argument("--p", type=int, default=2)
    p_conv.add_argument("--target", default="trajectory", choices=("trajectory", "response"))
    p_conv.add_argument("--grid-size", type=int, default=51)
    p_conv.add_argument("--seed", type=int, default=0)
    p_conv.add_argument("--out", required=True)

    sub.add_parser("version", help="print the package version")
    return parser


def _cmd_fit(args) -> int:
    domain = Domain(*args.domain) if args.domain else None
    sample = load_longitudinal(args.data, domain)
    responses = load_responses(args.responses, sample) if args.responses else None
    ridge: float | str | None
    if args.ridge is None:
        ridge = None
    elif args.ridge == "auto":
        ridge = "auto"
    else:
        ridge = float(args.ridge)
    method = args.ridge_method.replace("-", "_") if args.ridge_method else None
    cfg = FitConfig(
        grid_size=args.grid_size,
        kernel=args.kernel,
        bandwidth_mean=args.bandwidth_mu,
        bandwidth_autocov=args.bandwidth_cov,
        bandwidth_crosscov=args.bandwidth_cross,
        bandwidth_diag=args.bandwidth_diag,
        ridge=ridge,
        fve=args.fve,
        domain=domain,
        ridge_target=args.ridge_target,
        ridge_p=args.ridge_p,
        ridge_method=method,
        seed=args.seed,
    )
    model = fit_model(sample, responses, cfg)
    model.save(args.out)
    print(f"model written to {args.out}")
    return 0


def _cmd_design(args) -> int:
    model = ModelFit.load(args.model)
    if args.p > model.grid.size:
        raise _CliError(f"p={args.p} exceeds the model grid size {model.grid.size}")
    if args.alpha is not None:
        result = earliest_design(
            model, args.p, args.target, args.alpha, method=args.method, threads=args.threads
        )
    elif args.method == "exhaustive":
        result = exhaustive_search(
            model, args.p, args.target, threads=args.threads, allow_large=args.allow_large
        )
    else:
        result = greedy_search(model, args.p, args.target, threads=args.threads)
    _write_json(search_result_json(result), args.out)
    print(f"design written to {args.out}")
    return 0


def _cmd_predict(args) -> int:
    model = ModelFit.load(args.model)
    with open(args.design, encoding="utf-8") as fh:
        ddoc = json.load(fh)
    design = Design(np.asarray(ddoc["design_points"], dtype=float), ddoc["target"])
    ids = []
    rows = []
    with open(args.obs, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise _CliError(f"{args.obs}: empty file")
        expected = ["subject_id"] + [f"t{i + 1}" for i in range(design.p)]
        if [h.strip() for h in header] != expected:
            raise _CliError(f"{args.obs}: expected header {','.join(expected)!r}")
        for rownum, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != design.p + 1:
                raise _CliError(f"{args.obs}: row {rownum}: expected {design.p + 1} fields")
            ids.append(row[0].strip())
            try:
                rows.append([float(x) for x in row[1:]])
            except ValueError:
                raise _CliError(f"{args.obs}: row {rownum}: non-numeric value") from None
    if not rows:
        raise _CliError(f"{args.obs}: no data rows")
    u = np.asarray(rows)
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        if design.target == "response":
            preds = predict_responses(model, design, u)
            writer.writerow(["subject_id", "prediction"])
            for sid, val in zip(ids, preds):
                writer.writerow([sid, repr(float(val))])
        else:
            curves = recover_trajectories(model, design, u)
            writer.writerow(["subject_id", "time", "value"])
            for sid, curve in zip(ids, curves):
                for t, v in zip(model.grid.points, curve):
                    writer.writerow([sid, repr(float(t)), repr(float(v))])
    print(f"predictions written to {args.out}")
    return 0


def _cmd_ridge(args) -> int:
    sample = load_longitudinal(args.data)
    responses = load_responses(args.responses, sample) if args.responses else None
    cfg = FitConfig(grid_size=args.grid_size)
    if args.method == "cv":
        sel = select_ridge_cv(
            sample, responses, target=args.target, omega=args.omega, p=args.p,
            config=cfg, threads=args.threads,
        )
    else:
        tau = None if args.tau == "auto" else float(args.tau)
        sel = select_ridge_modified_cv(
            sample, responses, target=args.target, omega=args.omega, p=args.p,
            partitions=args.L, split=args.split, tau=tau, seed=args.seed, config=cfg,
        )
    _write_json(sel.to_json_dict(), args.out)
    print(f"ridge report written to {args.out}")
    return 0


def _cmd_simulate(args) -> int:
    spec = ScenarioSpec(
        kind=args.scenario,
        n_train=args.n_train,
        n_test=args.n_test,
        grid_size=args.grid_size,
        seed=args.seed,
    )
    report = run_benchmark(
        spec,
        runs=args.runs,
        p_list=args.p_list,
        methods=args.methods,
        targets=args.targets,
        random_count=args.random_count,
        threads=args.threads,
    )
    report.write(args.out_dir)
    print(f"benchmark written to {args.out_dir}/benchmark.csv and {args.out_dir}/summary.json")
    return 0


def _cmd_converge(args) -> int:
    spec = ScenarioSpec(kind=args.scenario, grid_size=args.grid_size, seed=args.seed)
    report = convergence_study(
        spec, args.n_list, args.replicates, p=args.p, target=args.target, threads=args.threads
    )
    csv_path = args.out[:-5] + ".csv" if args.out.endswith(".json") else args.out + ".csv"
    report.write(args.out, csv_path)
    print(f"convergence report written to {args.out} and {csv_path}")
    return 0


_COMMANDS = {
    "fit": _cmd_fit,
    "design": _cmd_design,
    "predict": _cmd_predict,
    "ridge": _cmd_ridge,
    "simulate": _cmd_simulate,
    "converge": _cmd_converge,
}


def run_cli(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "version":
            print(__version__)
            return 0
        return _COMMANDS[args.command](args)
    except _CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (SparseDesignError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
