"""Command-line front door.

Subcommands: ``estimate`` (doubly robust ATT on CSV panels), ``simulate``
(one Monte Carlo cell), ``validate`` (panel admissibility check), and
``reproduce-tables`` (run cells from the bundled manifest). Exit codes:
0 success, 1 computation error, 2 input-validation error, 3 configuration
error. All randomness derives from ``--seed``; when the seed is omitted
one is drawn from the OS entropy pool and printed, so any run can be
reproduced after the fact.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from importlib import resources

import numpy as np

from . import __version__
from .bandwidth import BandwidthGrid
from .errors import ConfigError, DataError, LatentPanelError
from .estimator import EstimatorConfig, estimate_period
from .kernels import KERNELS
from .panel import load_csv, validate
from .simulate import CellConfig, DgpSpec, emit_table, merge_tables, parse_methods, run_cell

EXIT_OK = 0
EXIT_COMPUTE = 1
EXIT_DATA = 2
EXIT_CONFIG = 3


def _parse_grid(text: str) -> BandwidthGrid:
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigError(f"bandwidth grid must be lo:hi:count, got {text!r}")
    try:
        lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise ConfigError(f"bad bandwidth grid {text!r}") from None
    return BandwidthGrid.geometric(lo, hi, count)


def _parse_fixed_bandwidth(text: str) -> float:
    head, _, tail = text.partition(":")
    if head != "fixed" or not tail:
        raise ConfigError(f"bandwidth must look like fixed:H, got {text!r}")
    try:
        h = float(tail)
    except ValueError:
        raise ConfigError(f"bad fixed bandwidth {text!r}") from None
    if not h > 0:
        raise ConfigError(f"fixed bandwidth must be positive, got {h}")
    return h


def _load_config_file(path: str) -> dict:
    """key=value lines; '#' starts a comment; keys use flag names."""
    values = {}
    try:
        with open(path) as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{lineno}: expected key=value")
                key, _, val = line.partition("=")
                values[key.strip().replace("-", "_")] = val.strip()
    except OSError as err:
        raise ConfigError(f"cannot read config file {path}: {err}") from None
    return values


def _resolve_seed(args) -> int:
    if args.seed is not None:
        return args.seed
    seed = int.from_bytes(os.urandom(4), "little")
    print(f"seed: {seed} (generated; pass --seed {seed} to reproduce)")
    return seed


def _add_estimator_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--folds", default="2", help="fold count, 'loo', or 'none'")
    p.add_argument("--kernel", default="epanechnikov", choices=KERNELS)
    p.add_argument("--bandwidth-grid", default="0.05:5:30", metavar="LO:HI:COUNT")
    p.add_argument("--bandwidth", default=None, metavar="fixed:H",
                   help="bypass CV with a fixed bandwidth")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--trim", type=float, default=0.01,
                   help="propensities are clipped to <= 1 - TRIM")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--self-donors", choices=["include", "exclude"], default="include",
                   help="with --folds none: keep each unit in its own final donor set")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="latentpanel",
        description="Doubly robust ATT estimation and Monte Carlo harness "
        "for large panels with latent confounders.",
    )
    parser.add_argument("--version", action="version", version=f"latentpanel {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    est = sub.add_parser("estimate", help="estimate the ATT at one post period")
    est.add_argument("--config", default=None, help="key=value file; flags win")
    est.add_argument("--outcomes", required=True)
    est.add_argument("--treatment", required=True)
    est.add_argument("--t0", type=int, required=True)
    est.add_argument("--period", type=int, required=True)
    _add_estimator_flags(est)
    est.add_argument("--dump-distances", default=None, metavar="PATH")
    est.add_argument("--out", default=None, metavar="REPORT.CSV")

    sim = sub.add_parser("simulate", help="run one Monte Carlo cell")
    sim.add_argument("--config", default=None, help="key=value file; flags win")
    sim.add_argument("--model", type=int, required=True, choices=[1, 2, 3, 4, 5])
    sim.add_argument("--n", type=int, required=True)
    sim.add_argument("--t0", type=int, required=True)
    sim.add_argument("--reps", type=int, required=True)
    sim.add_argument("--methods", default="dr_pseudo:2")
    sim.add_argument("--seed", type=int, default=None)
    sim.add_argument("--jobs", type=int, default=None,
                     help="worker processes (default: all cores)")
    sim.add_argument("--kernel", default="epanechnikov", choices=KERNELS)
    sim.add_argument("--bandwidth-grid", default="0.05:5:30", metavar="LO:HI:COUNT")
    sim.add_argument("--trim", type=float, default=0.01)
    sim.add_argument("--alpha", type=float, default=0.05)
    sim.add_argument("--twfe-se", choices=["robust", "iid"], default="robust")
    sim.add_argument("--estimand-convention", choices=["conditional", "realized"],
                     default="conditional")
    sim.add_argument("--format", choices=["csv", "text"], default="csv")
    sim.add_argument("--external", action="append", default=[], metavar="CSV",
                     help="statistics CSV from an external method, merged as "
                          "extra columns (repeatable)")
    sim.add_argument("--out", default=None, metavar="TABLE.CSV")

    val = sub.add_parser("validate", help="check panel admissibility")
    val.add_argument("--outcomes", required=True)
    val.add_argument("--treatment", required=True)
    val.add_argument("--t0", type=int, required=True)

    rep = sub.add_parser("reproduce-tables", help="run manifest cells end to end")
    rep.add_argument("--cells", default="table", help="cell-name prefix filter")
    rep.add_argument("--reps", type=int, default=None, help="override manifest reps")
    rep.add_argument("--seed", type=int, default=None)
    rep.add_argument("--jobs", type=int, default=None)
    rep.add_argument("--out-dir", default=".")
    return parser


def _merge_config_file(argv, args, parser_factory):
    """Re-parse with config-file values as defaults; explicit flags win."""
    if getattr(args, "config", None) is None:
        return args
    file_values = _load_config_file(args.config)
    parser = parser_factory()
    sub_actions = [a for a in parser._actions if isinstance(a, argparse._SubParsersAction)]
    subparser = sub_actions[0].choices[args.command]
    known = {
        a.dest for a in subparser._actions if a.dest not in ("help", "config")
    }
    unknown = set(file_values) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    converted = {}
    for action in subparser._actions:
        if action.dest in file_values:
            raw = file_values[action.dest]
            converted[action.dest] = action.type(raw) if action.type else raw
    subparser.set_defaults(**converted)
    return parser.parse_args(argv)


def _estimator_config(args, seed: int) -> EstimatorConfig:
    fixed = _parse_fixed_bandwidth(args.bandwidth) if args.bandwidth else None
    return EstimatorConfig(
        folds=args.folds,
        kernel=args.kernel,
        grid=_parse_grid(args.bandwidth_grid),
        fixed_bandwidth=fixed,
        alpha=args.alpha,
        eps_trim=args.trim,
        seed=seed,
        self_donors=(args.self_donors == "include"),
    )


def _dump_distances(panel, config, path) -> None:
    from .crossfit import partition
    from .distance import pseudo_distances

    plan = partition(panel.n, config.fold_count(panel.n), config.seed)
    dist = pseudo_distances(panel, plan)
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["unit"] + list(panel.labels))
        for i in range(panel.n):
            row = [
                f"{dist.values[i, j]:.17g}" if dist.computed[i, j] else ""
                for j in range(panel.n)
            ]
            wr.writerow([panel.labels[i]] + row)


def _cmd_estimate(args) -> int:
    seed = _resolve_seed(args)
    config = _estimator_config(args, seed)
    config.check()
    panel = load_csv(args.outcomes, args.treatment, args.t0)
    if args.dump_distances:
        _dump_distances(panel, config, args.dump_distances)
    est = estimate_period(panel, args.period, config)
    print(
        f"period={args.period}  att={est.att:.6g}  se={est.se:.6g}  "
        f"ci=[{est.ci_low:.6g}, {est.ci_high:.6g}]  h={est.h_used:.6g}  "
        f"n1={est.n1}  clipped={est.diagnostics.n_clipped}"
    )
    if est.diagnostics.substituted_h:
        print("note: CV minimizer was estimation-infeasible; next-best bandwidth used")
    if args.out:
        with open(args.out, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(
                ["period", "att", "se", "ci_low", "ci_high", "h_cv", "n1", "n_clipped"]
            )
            wr.writerow(
                [args.period]
                + [f"{v:.17g}" for v in (est.att, est.se, est.ci_low, est.ci_high, est.h_used)]
                + [est.n1, est.diagnostics.n_clipped]
            )
    return EXIT_OK


def _cmd_simulate(args) -> int:
    seed = _resolve_seed(args)
    dgp = DgpSpec(model=args.model, n=args.n, t0=args.t0, seed=0)
    cell = CellConfig(
        kernel=args.kernel,
        grid=_parse_grid(args.bandwidth_grid),
        eps_trim=args.trim,
        alpha=args.alpha,
        twfe_se=args.twfe_se,
        estimand_convention=args.estimand_convention,
    )
    jobs = args.jobs if args.jobs is not None else (os.cpu_count() or 1)
    report = run_cell(
        dgp, parse_methods(args.methods), args.reps, seed, jobs=jobs, cell=cell
    )
    text = emit_table(report, args.format)
    if args.external:
        if args.format != "csv":
            raise ConfigError("--external requires --format csv")
        for path in args.external:
            try:
                with open(path) as fh:
                    text = merge_tables(text, fh.read())
            except OSError as err:
                raise ConfigError(f"cannot read external table {path}: {err}") from None
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _cmd_validate(args) -> int:
    # Bypass load_csv's raise-on-violation so every problem is listed.
    from .panel import Panel, _read_matrix  # noqa: PLC0415

    labels, cells_y, _ = _read_matrix(args.outcomes)
    _, cells_w, _ = _read_matrix(args.treatment)
    problems = []
    y = np.zeros((len(cells_y), len(cells_y[0])))
    for i, row in enumerate(cells_y):
        for j, cell in enumerate(row):
            try:
                y[i, j] = float(cell)
            except ValueError:
                problems.append(f"non-numeric outcome {cell!r} at unit {i}, period {j + 1}")
    w = np.zeros((len(cells_w), len(cells_w[0])), dtype=np.int8)
    for i, row in enumerate(cells_w):
        for j, cell in enumerate(row):
            v = cell.strip()
            if v in ("0", "1"):
                w[i, j] = int(v)
            else:
                problems.append(
                    f"treatment {cell!r} not in {{0,1}} at unit {i}, period {j + 1}"
                )
    if y.shape != w.shape:
        problems.append(f"outcomes {y.shape} but treatment {w.shape}")
    if not problems:
        panel = Panel(y, w, args.t0, labels=tuple(labels))
        problems = [v.message for v in validate(panel)]
    if not problems:
        print("panel is admissible")
        return EXIT_OK
    for msg in problems:
        print(f"violation: {msg}")
    return EXIT_DATA


def _read_manifest():
    text = resources.files("latentpanel").joinpath("tables.cfg").read_text()
    cells = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        name, _, body = line.partition(":")
        fields = dict(tok.split("=", 1) for tok in body.split())
        cells.append((name.strip(), fields))
    return cells


def _cmd_reproduce_tables(args) -> int:
    seed = _resolve_seed(args)
    jobs = args.jobs if args.jobs is not None else (os.cpu_count() or 1)
    cells = [c for c in _read_manifest() if c[0].startswith(args.cells)]
    if not cells:
        raise ConfigError(f"no manifest cells match prefix {args.cells!r}")
    os.makedirs(args.out_dir, exist_ok=True)
    for name, fields in cells:
        reps = args.reps if args.reps is not None else int(fields["reps"])
        dgp = DgpSpec(
            model=int(fields["model"]), n=int(fields["n"]), t0=int(fields["t0"]), seed=0
        )
        report = run_cell(dgp, parse_methods(fields["methods"]), reps, seed, jobs=jobs)
        path = os.path.join(args.out_dir, f"{name}.csv")
        with open(path, "w") as fh:
            fh.write(emit_table(report, "csv"))
        print(f"wrote {path}")
    return EXIT_OK


_COMMANDS = {
    "estimate": _cmd_estimate,
    "simulate": _cmd_simulate,
    "validate": _cmd_validate,
    "reproduce-tables": _cmd_reproduce_tables,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args = _merge_config_file(argv, args, build_parser)
        return _COMMANDS[args.command](args)
    except ConfigError as err:
        print(f"error: stage=config exit={EXIT_CONFIG} msg={err}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as err:
        stage = err.stage or "input"
        print(f"error: stage={stage} exit={EXIT_DATA} msg={err}", file=sys.stderr)
        return EXIT_DATA
    except LatentPanelError as err:
        stage = err.stage or "compute"
        print(f"error: stage={stage} exit={EXIT_COMPUTE} msg={err}", file=sys.stderr)
        return EXIT_COMPUTE


def console_entry() -> None:
    raise SystemExit(main())
