"""Command-line front end: simulate | fit | predict | benchmark |
infer-network.

Options may come from a JSON file via --config; explicit flags override
file values. The default output directory is the SRRR_OUTPUT_DIR
environment variable, falling back to the current directory. Exit
codes: 0 success, 2 invalid arguments, 3 input-data error, 4 solver
failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import replace

import numpy as np

from . import estimator, matrix_io, selection, simulate, var_network
from .exceptions import (
    InputDataError,
    InvalidParameterError,
    ShapeError,
    SolverError,
    SrrrError,
    UndefinedMetricError,
)
from .sparse_eig import SparsityRule

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_SOLVER = 4

OUTPUT_DIR_ENV = "SRRR_OUTPUT_DIR"


def _out_dir(args) -> str:
    path = args.output_dir or os.environ.get(OUTPUT_DIR_ENV) or "."
    os.makedirs(path, exist_ok=True)
    return path


def _resolve(args, defaults: dict) -> dict:
    """Merge CLI flags over --config file values over built-in defaults."""
    file_cfg = {}
    if getattr(args, "config", None):
        file_cfg = matrix_io.read_json(args.config)
        if not isinstance(file_cfg, dict):
            raise InputDataError(f"{args.config} must contain a JSON object")
    vals = {}
    for key, default in defaults.items():
        cli_val = getattr(args, key, None)
        if cli_val is not None:
            vals[key] = cli_val
        elif key in file_cfg:
            vals[key] = file_cfg[key]
        else:
            vals[key] = default
    return vals


FIT_DEFAULTS = {
    "variant": "ridge",
    "rho": None,
    "sparsity": None,
    "threshold": None,
    "absolute_threshold": False,
    "v_threshold": None,
    "mu": 1e-3,
    "rank_max": None,
    "refit": True,
    "max_iters": 1000,
    "tol": 1e-10,
    "null_tol": 1e-4,
}

SIM_DEFAULTS = {
    "n": 100,
    "p": 100,
    "q": 200,
    "r": 3,
    "rho_x": 0.5,
    "rho_e": 0.5,
    "gamma": 0.1,
    "density": 0.05,
    "uv_zero_threshold": 0.01,
    "seed": 0,
}


def _add_fit_options(sub):
    sub.add_argument("--variant", choices=["ridge", "fast"], help="eigensolver variant")
    sub.add_argument("--rho", type=float, help="ridge added to X'X (default 1e-6 tr(P) n)")
    sub.add_argument("--sparsity", type=int, help="cardinality of u (keep s largest entries)")
    sub.add_argument("--threshold", type=float, help="threshold rule for u (relative to max entry)")
    sub.add_argument(
        "--absolute-threshold",
        action="store_const",
        const=True,
        dest="absolute_threshold",
        help="interpret --threshold as an absolute level",
    )
    sub.add_argument("--v-threshold", type=float, help="relative threshold applied to v")
    sub.add_argument("--mu", type=float, help="termination level relative to ||Y||_F^2/(nq)")
    sub.add_argument("--rank-max", type=int, dest="rank_max", help="cap on extracted factors")
    sub.add_argument(
        "--refit",
        action=argparse.BooleanOptionalAction,
        default=None,
        help="refit the middle matrix after each factor (default on)",
    )
    sub.add_argument("--max-iters", type=int, dest="max_iters", help="solver iteration cap")
    sub.add_argument("--tol", type=float, help="solver iterate tolerance")
    sub.add_argument("--null-tol", type=float, dest="null_tol", help="fast-variant null residual tolerance")


def _add_sim_options(sub):
    sub.add_argument("--n", type=int, help="training rows")
    sub.add_argument("--p", type=int, help="predictors")
    sub.add_argument("--q", type=int, help="responses")
    sub.add_argument("--r", type=int, help="planted rank")
    sub.add_argument("--rho-x", type=float, dest="rho_x", help="AR1 correlation of the design")
    sub.add_argument("--rho-e", type=float, dest="rho_e", help="AR1 correlation of the noise")
    sub.add_argument("--gamma", type=float, help="noise scale (0 for noiseless)")
    sub.add_argument("--density", type=float, help="fraction of nonzeros in the planted block")
    sub.add_argument(
        "--uv-zero-threshold", type=float, dest="uv_zero_threshold",
        help="zero singular-vector entries below this magnitude",
    )
    sub.add_argument("--seed", type=int, help="master RNG seed")


def _fit_config(vals) -> estimator.FitConfig:
    u_rule = None
    if vals["sparsity"] is not None and vals["threshold"] is not None:
        raise InvalidParameterError("--sparsity and --threshold are mutually exclusive")
    if vals["sparsity"] is not None:
        u_rule = SparsityRule.cardinality(int(vals["sparsity"]))
    elif vals["threshold"] is not None:
        u_rule = SparsityRule.threshold(
            float(vals["threshold"]), relative=not vals["absolute_threshold"]
        )
    return estimator.FitConfig(
        variant=vals["variant"],
        rho=vals["rho"],
        u_rule=u_rule,
        v_threshold=vals["v_threshold"],
        mu=float(vals["mu"]),
        r_max=vals["rank_max"],
        refit=bool(vals["refit"]),
        max_iters=int(vals["max_iters"]),
        tol=float(vals["tol"]),
        null_tol=float(vals["null_tol"]),
    )


def _sim_spec(vals) -> simulate.SimSpec:
    return simulate.SimSpec(
        n=int(vals["n"]),
        p=int(vals["p"]),
        q=int(vals["q"]),
        r=int(vals["r"]),
        rho_x=float(vals["rho_x"]),
        rho_e=float(vals["rho_e"]),
        gamma=float(vals["gamma"]),
        density=float(vals["density"]),
        uv_zero_threshold=float(vals["uv_zero_threshold"]),
        seed=int(vals["seed"]),
    ).validate()


def cmd_simulate(args) -> int:
    vals = _resolve(args, SIM_DEFAULTS)
    spec = _sim_spec(vals)
    out = _out_dir(args)
    rng = simulate.replication_rng(spec.seed, 0)
    truth = simulate.gen_coefficient(spec, rng)
    x, y = simulate.gen_dataset(spec, truth, rng)
    matrix_io.write_matrix_csv(os.path.join(out, "X.csv"), x)
    matrix_io.write_matrix_csv(os.path.join(out, "Y.csv"), y)
    matrix_io.write_matrix_csv(os.path.join(out, "C_true.csv"), truth.c)
    bp = min(spec.p, math.ceil(math.sqrt(spec.density) * spec.p))
    bq = min(spec.q, math.ceil(math.sqrt(spec.density) * spec.q))
    matrix_io.write_json(
        os.path.join(out, "truth.json"),
        {
            "rank": truth.rank,
            "singular_values": truth.singular_values,
            "u_supports": [s.tolist() for s in truth.u_supports],
            "v_supports": [s.tolist() for s in truth.v_supports],
            "seed": spec.seed,
            "generator": {
                "n": spec.n,
                "p": spec.p,
                "q": spec.q,
                "r": spec.r,
                "rho_x": spec.rho_x,
                "rho_e": spec.rho_e,
                "gamma": spec.gamma,
                "density": spec.density,
                "uv_zero_threshold": spec.uv_zero_threshold,
                "block": "contiguous-top-left",
                "block_shape": [bp, bq],
            },
        },
    )
    print(f"wrote X.csv ({spec.n}x{spec.p}), Y.csv ({spec.n}x{spec.q}), "
          f"C_true.csv, truth.json to {out}")
    return EXIT_OK


def cmd_fit(args) -> int:
    vals = _resolve(args, FIT_DEFAULTS)
    config = _fit_config(vals)
    x, _ = matrix_io.read_matrix_csv(args.x)
    y, _ = matrix_io.read_matrix_csv(args.y)
    if x.shape[0] != y.shape[0]:
        raise InputDataError(
            f"row counts differ: {args.x} has {x.shape[0]}, {args.y} has {y.shape[0]}"
        )
    out = _out_dir(args)
    model, sel, c_hat = estimator.fit_and_select(x, y, config)
    matrix_io.write_json(
        os.path.join(out, "model.json"),
        matrix_io.model_to_dict(model, selected_rank=sel.selected_rank, coefficient=c_hat),
    )
    matrix_io.write_matrix_csv(os.path.join(out, "C_hat.csv"), c_hat)
    final_loss = selection.loss(y, x, c_hat)
    print(f"extracted_rank={model.rank} selected_rank={sel.selected_rank} "
          f"loss={final_loss:.6g}")
    if args.c_true:
        c_true, _ = matrix_io.read_matrix_csv(args.c_true)
        err = simulate.normalized_estimation_error(c_hat, c_true)
        print(f"estimation_error={err:.6g}")
    return EXIT_OK


def cmd_predict(args) -> int:
    doc = matrix_io.read_json(args.model)
    _, _, coeff = matrix_io.model_from_dict(doc)
    x_new, _ = matrix_io.read_matrix_csv(args.x)
    if x_new.shape[1] != coeff.shape[0]:
        raise InputDataError(
            f"{args.x} has {x_new.shape[1]} columns, model expects {coeff.shape[0]}"
        )
    out = _out_dir(args)
    matrix_io.write_matrix_csv(os.path.join(out, "Yhat.csv"), x_new @ coeff)
    print(f"wrote Yhat.csv ({x_new.shape[0]}x{coeff.shape[1]}) to {out}")
    return EXIT_OK


def _sweep_grid(vals, kind: str) -> np.ndarray:
    lo = vals["sweep_min"]
    hi = vals["sweep_max"]
    count = vals["sweep_count"]
    if lo is None or hi is None:
        if kind == "mu":
            lo, hi, count = 1e-5, 1e-1, count or 5
        else:
            lo, hi, count = 1e-1, 20.0, count or 10
    return np.geomspace(float(lo), float(hi), int(count))


def cmd_benchmark(args) -> int:
    sim_vals = _resolve(args, {**SIM_DEFAULTS, "reps": 20, "jobs": 1,
                               "sweep": None, "sweep_min": None,
                               "sweep_max": None, "sweep_count": None})
    fit_vals = _resolve(args, FIT_DEFAULTS)
    spec = _sim_spec(sim_vals)
    config = _fit_config(fit_vals)
    out = _out_dir(args)

    if sim_vals["sweep"] in ("mu", "theta"):
        return _run_sweep(spec, config, sim_vals, out)

    reps = int(sim_vals["reps"])
    jobs = int(sim_vals["jobs"]) if sim_vals["jobs"] else (os.cpu_count() or 1)
    summary = simulate.run_replications(spec, config, reps=reps, jobs=jobs)
    lines = ["metric,mean,stderr"]
    for name in simulate.METRIC_NAMES:
        lines.append(
            f"{name},{matrix_io.format_float(summary.means[name])},"
            f"{matrix_io.format_float(summary.stderrs[name])}"
        )
    matrix_io.atomic_write_text(os.path.join(out, "summary.csv"), "\n".join(lines) + "\n")
    detail = []
    for i, rep in enumerate(summary.reports):
        detail.append(json.dumps({"replication": i, **rep.as_dict()}, sort_keys=True))
    for index, err in summary.failures:
        detail.append(json.dumps({"replication": index, "error": err}, sort_keys=True))
        print(f"replication {index} failed: {err}", file=sys.stderr)
    matrix_io.atomic_write_text(os.path.join(out, "detail.jsonl"), "\n".join(detail) + "\n")
    for name in simulate.METRIC_NAMES:
        print(f"{name}: mean={summary.means[name]:.6g} stderr={summary.stderrs[name]:.6g}")
    return EXIT_OK


def _run_sweep(spec, config, vals, out: str) -> int:
    kind = vals["sweep"]
    grid = _sweep_grid(vals, kind)
    rng = simulate.replication_rng(spec.seed, 0)
    truth = simulate.gen_coefficient(spec, rng)
    x, y = simulate.gen_dataset(spec, truth, rng)
    lines = []
    if kind == "mu":
        lines.append("mu,rank,sv1,sv2,sv3,sv4,sv5")
        for mu in grid:
            model = estimator.fit(x, y, replace(config, mu=float(mu)))
            svals = np.zeros(5)
            if model.rank > 0:
                found = np.linalg.svd(model.coefficient, compute_uv=False)[:5]
                svals[: found.size] = found
            lines.append(
                f"{matrix_io.format_float(mu)},{model.rank},"
                + ",".join(matrix_io.format_float(v) for v in svals)
            )
    else:
        lines.append("theta,rank,coef_index,coef_value")
        relative = not vals.get("absolute_threshold", False)
        for theta in grid:
            cfg = replace(config, u_rule=SparsityRule.threshold(float(theta), relative))
            try:
                model = estimator.fit(x, y, cfg)
            except SolverError as exc:
                print(f"theta={theta:.6g} failed: {exc}", file=sys.stderr)
                lines.append(f"{matrix_io.format_float(theta)},0,,")
                continue
            if model.rank == 0:
                lines.append(f"{matrix_io.format_float(theta)},0,,")
                continue
            u1 = model.factors[0].u
            for idx in np.flatnonzero(u1):
                lines.append(
                    f"{matrix_io.format_float(theta)},{model.rank},{idx},"
                    f"{matrix_io.format_float(u1[idx])}"
                )
    matrix_io.atomic_write_text(os.path.join(out, "sweep.csv"), "\n".join(lines) + "\n")
    print(f"wrote sweep.csv ({kind} grid of {grid.size}) to {out}")
    return EXIT_OK


def cmd_infer_network(args) -> int:
    vals = _resolve(args, {**FIT_DEFAULTS, "lags": 1, "standardize": False})
    config = _fit_config(vals)
    series, header = matrix_io.read_matrix_csv(args.series)
    lags = int(vals["lags"])
    out = _out_dir(args)
    model, sel, graph = var_network.fit_var_network(
        series, lags, config, standardize=bool(vals["standardize"])
    )
    d = series.shape[1]
    names = header if header and len(header) == d else [str(i) for i in range(d)]
    matrix_io.write_matrix_csv(os.path.join(out, "scores.csv"), graph.scores, header=names)
    edge_lines = ["source,target,score"]
    scores = graph.scores
    order = np.argsort(-scores, axis=None, kind="stable")
    for flat in order:
        i, j = divmod(int(flat), d)
        if scores[i, j] > 0:
            # score[i, j] measures influence of node j on node i
            edge_lines.append(
                f"{names[j]},{names[i]},{matrix_io.format_float(scores[i, j])}"
            )
    matrix_io.atomic_write_text(os.path.join(out, "edges.csv"), "\n".join(edge_lines) + "\n")
    matrix_io.write_json(
        os.path.join(out, "model.json"),
        matrix_io.model_to_dict(model, selected_rank=sel.selected_rank),
    )
    print(f"lags={lags} nodes={d} selected_rank={sel.selected_rank}")
    if args.reference:
        ref, _ = matrix_io.read_matrix_csv(args.reference)
        if ref.shape != (d, d):
            raise InputDataError(
                f"reference adjacency must be {d}x{d}, got {ref.shape}"
            )
        auc = var_network.evaluate_graph(graph.scores, ref != 0)
        print(f"edge_auc={auc:.6g}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="srrr",
        description="Sparse reduced-rank multi-response regression toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON file with option defaults")
        sp.add_argument("--output-dir", dest="output_dir",
                        help=f"output directory (default ${OUTPUT_DIR_ENV} or '.')")

    sp = sub.add_parser("simulate", help="generate a synthetic benchmark dataset")
    common(sp)
    _add_sim_options(sp)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("fit", help="fit the model to X.csv / Y.csv")
    common(sp)
    sp.add_argument("--x", required=True, help="predictor matrix CSV")
    sp.add_argument("--y", required=True, help="response matrix CSV")
    sp.add_argument("--c-true", dest="c_true", help="optional true coefficient CSV to score against")
    _add_fit_options(sp)
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("predict", help="predict responses from a fitted model")
    common(sp)
    sp.add_argument("--model", required=True, help="model.json from fit")
    sp.add_argument("--x", required=True, help="new predictor matrix CSV")
    sp.set_defaults(func=cmd_predict)

    sp = sub.add_parser("benchmark", help="replicated synthetic benchmark or parameter sweep")
    common(sp)
    _add_sim_options(sp)
    _add_fit_options(sp)
    sp.add_argument("--reps", type=int, help="number of replications (default 20)")
    sp.add_argument("--jobs", type=int, help="parallel workers (default all cores)")
    sp.add_argument("--sweep", choices=["mu", "theta"], help="sweep a solver parameter instead")
    sp.add_argument("--sweep-min", type=float, dest="sweep_min")
    sp.add_argument("--sweep-max", type=float, dest="sweep_max")
    sp.add_argument("--sweep-count", type=int, dest="sweep_count")
    sp.set_defaults(func=cmd_benchmark)

    sp = sub.add_parser("infer-network", help="fit a VAR and score an influence network")
    common(sp)
    sp.add_argument("--series", required=True, help="time-series CSV (rows = steps, columns = nodes)")
    sp.add_argument("--lags", type=int, help="number of lags (default 1)")
    sp.add_argument("--reference", help="optional reference adjacency CSV for AUC")
    sp.add_argument(
        "--standardize",
        action="store_const",
        const=True,
        help="scale nodes to unit variance before embedding",
    )
    _add_fit_options(sp)
    sp.set_defaults(func=cmd_infer_network)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InvalidParameterError, ShapeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InputDataError, UndefinedMetricError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except SrrrError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
