"""Command-line front end.

Tables and CSV go to standard output or to files under ``--out``; progress
and diagnostics go to standard error. The exit status is 0 on success and
the ``exit_code`` of the raised :class:`~fglht.errors.FglhtError` otherwise.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from importlib import resources
from pathlib import Path

from . import __version__
from .analysis import factor_pvalues, realdata_study
from .bootstrap import BootstrapKind, bootstrap_test
from .data import (
    FACTOR_NAMES,
    TEST_COLUMNS,
    build_contrast,
    build_factorial_design,
    export_table,
    fetch_noise_data,
    format_pvalue_table,
    format_rates_table,
    load_noise_data,
    surrogate_curves,
    write_beta_csv,
)
from .errors import ConfigError, FglhtError
from .model import estimate_beta
from .simulation import load_scenarios, run_scenario
from .stats import StatisticKind, reciprocal_shift_scale, scale_dataset

log = logging.getLogger("fglht")

# Index -> bundled scenario stem; 1-3 are Cases 1-3 as generated, 4-6 the
# same cases after multiplying by h(t) = 1 / (t + 1/43).
TABLES = {
    1: "case1",
    2: "case2",
    3: "case3",
    4: "case1_scaled",
    5: "case2_scaled",
    6: "case3_scaled",
}


def _bundled_scenario(stem: str) -> Path:
    ref = resources.files("fglht").joinpath("resources").joinpath("scenarios").joinpath(
        stem + ".json"
    )
    if not ref.is_file():
        raise ConfigError(f"no bundled scenario named {stem!r}")
    return Path(str(ref))


def _scenario_path(name: str) -> Path:
    path = Path(name)
    if path.is_file():
        return path
    if path.suffix == "" and "/" not in name:
        return _bundled_scenario(name)
    raise ConfigError(f"scenario file not found: {name}")


def _load_curves(args):
    if args.surrogate:
        log.warning("using the bundled synthetic surrogate curves, not measured data")
        return surrogate_curves()
    y, _, _ = load_noise_data(args.data, orientation=args.orientation, header=not args.no_header)
    return y


def _write(out: Path | None, name: str, payload: bytes) -> None:
    if out is None:
        return
    out.mkdir(parents=True, exist_ok=True)
    (out / name).write_bytes(payload)
    log.info("wrote %s", out / name)


# -- subcommands ----------------------------------------------------------


def cmd_fit(args) -> int:
    y = _load_curves(args)
    d = build_factorial_design()
    beta = estimate_beta(y, d)
    print(f"curves: {y.n}  grid points: {len(y.grid)}  design rank: {d.rank_k}  dof: {d.dof}")
    contrast = build_contrast("all").c_matrix @ beta.beta_hat
    print("factor  mean_effect  max_abs_effect")
    for name, row in zip(FACTOR_NAMES, contrast):
        print(f"{name:>6}  {row.mean():11.4f}  {abs(row).max():14.4f}")
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        write_beta_csv(args.out / "beta_hat.csv", beta)
        log.info("wrote %s", args.out / "beta_hat.csv")
    return 0


def cmd_test(args) -> int:
    y = _load_curves(args)
    d = build_factorial_design()
    if args.all:
        table = factor_pvalues(y, d, FACTOR_NAMES, args.M, args.seed, args.scaled, args.threads)
        sys.stdout.write(format_pvalue_table(table, "text"))
        _write(args.out, "pvalues.csv", export_table(table, "csv"))
        return 0
    if args.scaled:
        y = scale_dataset(y, reciprocal_shift_scale(y.grid))
    kind = StatisticKind(args.stat)
    boot = BootstrapKind(args.boot)
    res = bootstrap_test(
        y, d, build_contrast(args.factor), kind, boot, args.M, args.seed, workers=args.threads
    )
    decision = "reject" if res.p_value < args.alpha else "retain"
    print("factor,stat,boot,scaled,M,seed,observed,p_value,decision")
    print(
        f"{args.factor},{kind.value},{boot.value},{int(args.scaled)},{args.M},{args.seed},"
        f"{res.observed!r},{res.p_value:.4f},{decision}"
    )
    return 0


def _run_scenarios(path: Path, args) -> int:
    name, configs = load_scenarios(path, seed=args.seed)
    d = build_factorial_design()
    h = build_contrast("all")
    log.info("scenario %s: %d cells, workers=%d", name, len(configs), args.threads)
    start = time.perf_counter()
    reports = []
    for cfg in configs:
        reports.append(run_scenario(cfg, d, h, workers=args.threads))
    wall = time.perf_counter() - start
    sys.stdout.write(format_rates_table(reports, "text"))
    _write(args.out, f"{name}.csv", export_table(reports, "csv"))
    _write(args.out, f"{name}.txt", export_table(reports, "text"))
    base_seed = args.seed if args.seed is not None else "file"
    log.info("scenario %s finished: seed=%s wall time %.1fs", name, base_seed, wall)
    return 0


def cmd_simulate(args) -> int:
    return _run_scenarios(_scenario_path(args.scenario), args)


def cmd_reproduce_table(args) -> int:
    stem = TABLES[args.index] + ("_full" if args.full else "_desk")
    return _run_scenarios(_bundled_scenario(stem), args)


def cmd_reproduce_realdata(args) -> int:
    y = _load_curves(args)
    d = build_factorial_design()
    pvals = factor_pvalues(y, d, FACTOR_NAMES, args.M, args.seed, args.scaled, args.threads)
    study = realdata_study(
        y, d, FACTOR_NAMES, args.n_sims, args.m_boot, args.seed, args.scaled,
        args.residual_cov, workers=args.threads,
    )
    print("p-values")
    sys.stdout.write(format_pvalue_table(pvals, "text"))
    sizes = {"size": study.size.rates}
    powers = {name: rep.rates for name, rep in study.powers.items()}
    pct = {k: {c: 100 * v for c, v in row.items()} for k, row in {**sizes, **powers}.items()}
    print("empirical size and powers (percent)")
    head = ["", *TEST_COLUMNS]
    rows = [[k, *[("n/a" if c not in row else f"{row[c]:.1f}") for c in TEST_COLUMNS]]
            for k, row in pct.items()]
    widths = [max(len(r[i]) for r in [head, *rows]) for i in range(len(head))]
    for r in [head, *rows]:
        print("  ".join(cell.rjust(w) for cell, w in zip(r, widths)))
    _write(args.out, "realdata_pvalues.csv", export_table(pvals, "csv"))
    _write(args.out, "realdata_rates.csv",
           export_table([study.size, *study.powers.values()], "csv"))
    return 0


def cmd_fetch(args) -> int:
    digest = fetch_noise_data(args.url, args.dest)
    print(f"{args.dest}  sha256={digest}")
    return 0


# -- parser ---------------------------------------------------------------


def _data_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", type=Path, help="CSV with the 36 response curves")
    p.add_argument("--orientation", choices=("rows", "columns"), default="rows",
                   help="one curve per row (default) or per column")
    p.add_argument("--no-header", action="store_true",
                   help="the CSV has no header row and no label column")
    p.add_argument("--surrogate", action="store_true",
                   help="use the bundled synthetic curves instead of --data")


def _run_flags(p: argparse.ArgumentParser, seed_default: int | None = 0) -> None:
    p.add_argument("--seed", type=int, default=seed_default)
    p.add_argument("--threads", type=int, default=1, help="worker budget")
    p.add_argument("--out", type=Path, help="directory for CSV artifacts")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fglht",
        description="Scale-invariant tests for functional responses with a rank-deficient design.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="estimate the coefficient functions")
    _data_flags(p)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("test", help="bootstrap p-values for factor effects")
    _data_flags(p)
    _run_flags(p)
    p.add_argument("--factor", default="A", help="factor letter A-G (default A)")
    p.add_argument("--stat", choices=[k.value for k in StatisticKind], default="g")
    p.add_argument("--boot", choices=[b.value for b in BootstrapKind], default="nb")
    p.add_argument("--M", type=int, default=1000, help="bootstrap replicates")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--scaled", action="store_true", help="apply h(t) = 1/(t + 1/43)")
    p.add_argument("--all", action="store_true", help="every factor and every bootstrap test")
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("simulate", help="run a size/power scenario file")
    p.add_argument("scenario", help="JSON scenario file or the name of a bundled scenario")
    _run_flags(p, seed_default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("reproduce-table", help="run a bundled size/power study")
    p.add_argument("index", type=int, choices=sorted(TABLES),
                   help="1-3: Cases 1-3 unscaled; 4-6: the same cases scaled")
    p.add_argument("--full", action="store_true", help="1000 x 1000 instead of 500 x 500")
    _run_flags(p, seed_default=None)
    p.set_defaults(func=cmd_reproduce_table)

    p = sub.add_parser("reproduce-realdata", help="p-values, sizes and powers for the noise data")
    _data_flags(p)
    _run_flags(p)
    p.add_argument("--M", type=int, default=1000, help="bootstrap replicates for p-values")
    p.add_argument("--n-sims", type=int, default=500)
    p.add_argument("--m-boot", type=int, default=500)
    p.add_argument("--scaled", action="store_true")
    p.add_argument("--residual-cov", action="store_true",
                   help="simulate with the residual covariance instead of the raw-curve one")
    p.set_defaults(func=cmd_reproduce_realdata)

    p = sub.add_parser("fetch", help="download the noise data and record its checksum")
    p.add_argument("--url", required=True)
    p.add_argument("--dest", type=Path, required=True)
    p.set_defaults(func=cmd_fetch)
    return parser


def _configure_logging(verbose: bool) -> None:
    # A fresh handler per call so that it writes to the current sys.stderr.
    for handler in list(log.handlers):
        log.removeHandler(handler)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    log.addHandler(handler)
    log.setLevel(logging.DEBUG if verbose else logging.INFO)
    log.propagate = False


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _configure_logging(args.verbose)
    if getattr(args, "threads", 1) < 1:
        parser.error("--threads must be at least 1")
    if getattr(args, "data", None) is not None and getattr(args, "surrogate", False):
        parser.error("--data and --surrogate are mutually exclusive")
    try:
        return args.func(args)
    except FglhtError as exc:
        log.error("%s", exc)
        return exc.exit_code
    except OSError as exc:
        log.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
