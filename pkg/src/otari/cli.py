"""Command-line surface: solve, adapt, gen-data, inspect.

Exit codes: 0 success, 1 usage error, 2 solver non-convergence,
3 I/O or file-format error. argparse's own usage exit is remapped to 1.
The only side effects are the files named by --out.

Marginals are always uniform here; weighted problems go through the
library API. The adapt config file is flat ``key = value`` lines with
``#`` comments; keys are the long flag names with underscores, and
explicit flags override the file.
"""

import argparse
import csv
import math
import sys

import numpy as np

from .adapt import ExperimentSpec, run_experiment
from .core import CONDITIONAL, RAW, Tolerances
from .datasets import LabeledDataset, gen_gaussian_clusters, load_csv, load_idx, squared_euclidean_cost
from .diagnostics import global_entropy, marginal_residual, sparsity
from .errors import (
    BadMagic,
    CountMismatch,
    DomainViolation,
    MaxIterations,
    NonFiniteIterate,
    OtariError,
    Overflow,
    ParseError,
    TruncatedFile,
)
from .planio import PlanExport, read_plan, write_plan
from .solvers import METHODS, solve

_IO_ERRORS = (OSError, ParseError, BadMagic, TruncatedFile, CountMismatch)
_SOLVER_ERRORS = (NonFiniteIterate, Overflow, MaxIterations)

_MODES = {"conditional": CONDITIONAL, "raw": RAW}

#: adapt options shared by flags and the config file, with parsers
_ADAPT_KEYS = {
    "source_idx": str,
    "source_csv": str,
    "target_idx": str,
    "target_csv": str,
    "label_column": str,
    "methods": str,
    "xi": str,
    "trials": int,
    "test_fraction": float,
    "seed": int,
    "subsample": int,
    "resize": int,
    "tol": float,
    "max_iter": int,
    "out": str,
    "format": str,
}


# ---------------------------------------------------------------------------
# input helpers


def _read_matrix(path):
    """Numeric CSV; one leading non-numeric row is accepted as a header."""
    rows = []
    lines = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            try:
                rows.append([float(cell) for cell in row])
            except ValueError:
                if not rows and lineno == 1:
                    continue
                raise ParseError(f"{path}: non-numeric cell", line=lineno) from None
            lines.append(lineno)
    if not rows:
        raise ParseError(f"{path}: no data rows")
    width = len(rows[0])
    for lineno, row in zip(lines, rows):
        if len(row) != width:
            raise ParseError(f"{path}: expected {width} columns", line=lineno)
    return np.array(rows)


def _read_points(path, label_column):
    if label_column is not None:
        return load_csv(path, label_column).points
    return _read_matrix(path)


def _read_config(path):
    opts = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParseError(f"{path}: expected key = value", line=lineno)
            key, value = (part.strip() for part in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in _ADAPT_KEYS:
                raise ValueError(f"unknown config key {key!r} ({path} line {lineno})")
            opts[key] = value
    return opts


def _resize_square(points, side):
    """Bilinear resample of square images flattened row-major."""
    n, d = points.shape
    src = math.isqrt(d)
    if src * src != d:
        raise DomainViolation(f"--resize needs square images, got {d} features")
    if src == side:
        return points
    imgs = points.reshape(n, src, src)
    pos = np.clip((np.arange(side) + 0.5) * (src / side) - 0.5, 0.0, src - 1.0)
    i0 = np.floor(pos).astype(int)
    i1 = np.minimum(i0 + 1, src - 1)
    w = pos - i0
    rows = imgs[:, i0, :] * (1.0 - w)[None, :, None] + imgs[:, i1, :] * w[None, :, None]
    out = rows[:, :, i0] * (1.0 - w)[None, None, :] + rows[:, :, i1] * w[None, None, :]
    return out.reshape(n, side * side)


def _subsample(ds, size, seed):
    if size is None or size >= len(ds):
        return ds
    keep = np.sort(np.random.default_rng(seed).choice(len(ds), size=size, replace=False))
    return LabeledDataset(points=ds.points[keep], labels=ds.labels[keep], name=ds.name)


def _emit(text, out):
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w") as fh:
            fh.write(text)


# ---------------------------------------------------------------------------
# subcommands


def _cmd_solve(args):
    if (args.cost is None) == (args.source is None or args.target is None):
        print("otari solve: give either --cost, or both --source and --target", file=sys.stderr)
        return 1
    if args.cost is not None:
        C = _read_matrix(args.cost)
    else:
        X_S = _read_points(args.source, args.label_column)
        X_T = _read_points(args.target, args.label_column)
        C = squared_euclidean_cost(X_S, X_T).values
    n, m = C.shape
    a = np.full(n, 1.0 / n)
    b = np.full(m, 1.0 / m)
    tolerances = None
    if args.tol is not None:
        tolerances = Tolerances(marginal_tol=args.tol, constraint_tol=args.tol)
    report = solve(
        C,
        a,
        b,
        args.method,
        xi=args.xi,
        xi_b=args.xi_b,
        eta=args.eta,
        epsilon=args.epsilon,
        mode=_MODES[args.norm],
        tolerances=tolerances,
        max_iterations=args.max_iter,
    )
    export = PlanExport.from_report(report)
    _emit(export.to_json() if args.format == "json" else export.to_csv(), args.out)
    if not report.converged:
        print(
            f"otari solve: {args.method} stopped before tolerance "
            f"(residuals {report.residuals})",
            file=sys.stderr,
        )
        return 2
    return 0


def _cmd_adapt(args):
    config = _read_config(args.config) if args.config else {}

    def opt(key, default=None):
        value = getattr(args, key)
        if value is None and key in config:
            value = _ADAPT_KEYS[key](config[key])
        return default if value is None else value

    label_column = opt("label_column", "label")
    datasets = {}
    for role in ("source", "target"):
        idx_path = opt(f"{role}_idx")
        csv_path = opt(f"{role}_csv")
        if (idx_path is None) == (csv_path is None):
            print(f"otari adapt: give exactly one of --{role}-idx / --{role}-csv", file=sys.stderr)
            return 1
        ds = load_idx(idx_path) if idx_path else load_csv(csv_path, label_column)
        datasets[role] = ds
    seed = opt("seed", 0)
    subsample = opt("subsample")
    resize = opt("resize")
    for role, ds in datasets.items():
        ds = _subsample(ds, subsample, seed)
        if resize is not None:
            ds = LabeledDataset(points=_resize_square(ds.points, resize), labels=ds.labels, name=ds.name)
        datasets[role] = ds
    methods = tuple(tok.strip() for tok in opt("methods", "exact,eotari-d").split(",") if tok.strip())
    try:
        xis = tuple(float(tok) for tok in str(opt("xi", "5")).split(","))
    except ValueError:
        print("otari adapt: --xi expects comma-separated numbers", file=sys.stderr)
        return 1
    solver_options = {}
    tol = opt("tol")
    if tol is not None:
        solver_options["tolerances"] = Tolerances(marginal_tol=tol, constraint_tol=tol)
    max_iter = opt("max_iter")
    if max_iter is not None:
        solver_options["max_iterations"] = max_iter
    spec = ExperimentSpec(
        source=datasets["source"],
        target=datasets["target"],
        methods=methods,
        xis=xis,
        trials=opt("trials", 10),
        test_fraction=opt("test_fraction", 0.1),
        seed=seed,
        solver_options=solver_options,
    )
    table = run_experiment(spec)
    fmt = opt("format", "csv")
    if fmt not in ("csv", "json"):
        print(f"otari adapt: unknown format {fmt!r}", file=sys.stderr)
        return 1
    _emit(table.to_csv() if fmt == "csv" else table.to_json(), opt("out"))
    return 0


def _cmd_gen_data(args):
    ds = gen_gaussian_clusters(
        args.k,
        args.n_per_cluster,
        d=args.d,
        spread=args.spread,
        rotation_deg=args.rotation,
        noise=args.noise,
        seed=args.seed,
    )
    header = [f"f{j}" for j in range(ds.points.shape[1])] + ["label"]
    lines = [",".join(header)]
    for x, y in zip(ds.points, ds.labels):
        lines.append(",".join(repr(float(v)) for v in x) + f",{int(y)}")
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def _cmd_inspect(args):
    export = read_plan(args.plan)
    P = export.plan
    res_row, res_col = marginal_residual(P, export.source_marginal, export.target_marginal)
    state = "yes" if export.converged else "no"
    print(f"method:            {export.method}")
    print(f"shape:             {P.shape[0]} x {P.shape[1]}")
    print(f"converged:         {state} ({export.iterations} iterations)")
    print(f"transport cost:    {export.objective!r}")
    print(f"global entropy:    {global_entropy(P):.6f}")
    print(
        "row perplexity:    "
        f"mean {export.row_perplexity.mean():.4f} "
        f"min {export.row_perplexity.min():.4f} max {export.row_perplexity.max():.4f}"
    )
    print(
        "col perplexity:    "
        f"mean {export.col_perplexity.mean():.4f} "
        f"min {export.col_perplexity.min():.4f} max {export.col_perplexity.max():.4f}"
    )
    print(f"marginal residual: row {res_row:.3e}  col {res_col:.3e}")
    print(f"nonzero fraction:  {1.0 - sparsity(P):.4f}")
    if export.residuals:
        pairs = "  ".join(f"{k}={v:.3e}" for k, v in sorted(export.residuals.items()))
        print(f"solver residuals:  {pairs}")
    return 0


# ---------------------------------------------------------------------------
# parser


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="otari",
        description="Optimal transport with adaptive pointwise regularisation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve one transport problem, uniform marginals")
    p.add_argument("--cost", help="cost matrix CSV (mutually exclusive with --source/--target)")
    p.add_argument("--source", help="source points CSV")
    p.add_argument("--target", help="target points CSV")
    p.add_argument("--label-column", help="drop this dataset column when reading points")
    p.add_argument("--method", required=True, choices=METHODS)
    p.add_argument("--xi", type=float, help="row perplexity bound (source side for -d)")
    p.add_argument("--xi-b", type=float, dest="xi_b", help="column-side bound for -d methods")
    p.add_argument("--eta", type=float, help="global regularisation budget (eot/qot)")
    p.add_argument("--epsilon", type=float, help="fixed penalty weight (eot/qot)")
    p.add_argument("--norm", choices=sorted(_MODES), default="conditional")
    p.add_argument("--tol", type=float, help="marginal and constraint tolerance")
    p.add_argument("--max-iter", type=int, dest="max_iter")
    p.add_argument("--out", help="output file (default: stdout)")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.set_defaults(handler=_cmd_solve)

    p = sub.add_parser(
        "adapt",
        help="domain adaptation accuracy table",
        epilog="config file: flat `key = value` lines, `#` comments, "
        "keys are these flag names with underscores; flags override the file",
    )
    p.add_argument("--config", help="experiment config file")
    p.add_argument("--source-idx", dest="source_idx", help="source IDX image file")
    p.add_argument("--source-csv", dest="source_csv", help="source dataset CSV")
    p.add_argument("--target-idx", dest="target_idx", help="target IDX image file")
    p.add_argument("--target-csv", dest="target_csv", help="target dataset CSV")
    p.add_argument("--label-column", dest="label_column", help="label column of dataset CSVs")
    p.add_argument("--methods", help="comma-separated method names")
    p.add_argument("--xi", help="comma-separated perplexity bounds")
    p.add_argument("--trials", type=int)
    p.add_argument("--test-fraction", type=float, dest="test_fraction")
    p.add_argument("--seed", type=int)
    p.add_argument("--subsample", type=int, help="cap each dataset at this many points")
    p.add_argument("--resize", type=int, help="resample square images to this side length")
    p.add_argument("--tol", type=float)
    p.add_argument("--max-iter", type=int, dest="max_iter")
    p.add_argument("--out")
    p.add_argument("--format", choices=("csv", "json"))
    p.set_defaults(handler=_cmd_adapt)

    p = sub.add_parser("gen-data", help="synthesise a labelled Gaussian-cluster CSV")
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--n-per-cluster", type=int, default=100, dest="n_per_cluster")
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--spread", type=float, default=3.0)
    p.add_argument("--rotation", type=float, default=0.0)
    p.add_argument("--noise", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output file (default: stdout)")
    p.set_defaults(handler=_cmd_gen_data)

    p = sub.add_parser("inspect", help="print diagnostics of a stored plan")
    p.add_argument("plan", help="plan JSON written by solve")
    p.set_defaults(handler=_cmd_inspect)

    return parser


def cli(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        return args.handler(args)
    except _IO_ERRORS as exc:
        print(f"otari {args.command}: {exc}", file=sys.stderr)
        return 3
    except _SOLVER_ERRORS as exc:
        print(f"otari {args.command}: {exc}", file=sys.stderr)
        return 2
    except (OtariError, ValueError) as exc:
        print(f"otari {args.command}: {exc}", file=sys.stderr)
        return 1


def main():
    sys.exit(cli())


if __name__ == "__main__":
    main()
