"""Command-line entry point: ``measure-bench <subcommand> ...``."""
from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import logging
import os
import sys
import time
from pathlib import Path

from . import __version__
from .measures import MEASURES, MeasureError, all_dissimilarities
from .partition import cluster_sizes, build_reference_partition
from .regression import (TREND_PARAMETERS, RegressionError, fit_records, read_importance_csv,
                         read_significance_csv, relative_importance, scan_trends, significance_rows,
                         write_importance_csv, write_significance_csv)
from .report import (ReportError, emit_importance_bars, emit_score_lines, emit_significance_matrices,
                     emit_typology_table)
from .sweep import (CsvFormatError, GridConfig, SweepError, default_grid, format_real, load_grid_config,
                    read_csv, run_sweep, write_csv, write_errors_csv)
from .transforms import KINDS, TransformError, TransformSpec, apply_transform
from .typology import (TypologyError, TypologyResult, importance_profiles, read_typology_csv,
                       select_typology, write_silhouette_csv, write_typology_csv)

log = logging.getLogger("measure_bench")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INVALID = 3
EXIT_MISSING = 4
EXIT_MALFORMED = 5


def _csv_list(convert):
    def parse(text):
        return [convert(item) for item in str(text).split(",") if item.strip()]
    return parse


def _fixed_pair(text):
    key, sep, value = text.partition("=")
    if not sep or key not in TREND_PARAMETERS:
        raise argparse.ArgumentTypeError(f"expected <param>=<value> with param in {TREND_PARAMETERS}, got {text!r}")
    return key, float(value)


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key = value file; command-line flags override it")
    parser.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="measure-bench", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def partition_args(p, with_transform):
        p.add_argument("--n", type=int, required=False)
        p.add_argument("--k", type=int, required=False)
        p.add_argument("--h", type=float, default=0.0)
        if with_transform:
            p.add_argument("--t", choices=KINDS)
            p.add_argument("--q", type=float)

    p = sub.add_parser("generate", help="print the reference partition for n, k, h")
    partition_args(p, False)
    p.add_argument("--out", help="also write the labels, one per line")
    _common(p)

    p = sub.add_parser("transform", help="apply a transformation and print the result")
    partition_args(p, True)
    p.add_argument("--out", help="also write the transformed labels, one per line")
    _common(p)

    p = sub.add_parser("score", help="score one reference/transformed pair")
    partition_args(p, True)
    p.add_argument("--measures", type=_csv_list(str), default=list(MEASURES))
    _common(p)

    p = sub.add_parser("sweep", help="run the parameter grid and write scores.csv")
    p.add_argument("--default", action="store_true", help="use the default grid (also the base for --config)")
    p.add_argument("--n", type=_csv_list(int), help="comma separated n values")
    p.add_argument("--k", type=_csv_list(int), help="comma separated k values")
    p.add_argument("--h", type=_csv_list(float), help="comma separated h values")
    p.add_argument("--q", type=_csv_list(float), help="comma separated q values")
    p.add_argument("--t", type=_csv_list(str), help="comma separated transformations")
    p.add_argument("--measures", type=_csv_list(str))
    p.add_argument("--workers", type=int)
    p.add_argument("--out", required=True, help="output directory")
    _common(p)

    p = sub.add_parser("analyze", help="regression, importance, trends and significance from scores.csv")
    p.add_argument("scores")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--out", required=True, help="output directory")
    _common(p)

    p = sub.add_parser("typology", help="cluster the importance profiles")
    p.add_argument("importance")
    p.add_argument("--max-k", type=int, default=10)
    p.add_argument("--parsimony", action="store_true", help="prefer the smallest k within the margin")
    p.add_argument("--parsimony-margin", type=float, default=0.05)
    p.add_argument("--out", required=True, help="output directory")
    _common(p)

    p = sub.add_parser("report", help="draw SVG charts from the CSV outputs")
    p.add_argument("--scores", help="scores.csv, needed for score lines")
    p.add_argument("--analysis", required=True, help="directory written by analyze (and typology)")
    p.add_argument("--t", choices=KINDS, help="transformation for score lines")
    p.add_argument("--x", choices=TREND_PARAMETERS, help="x axis of score lines")
    p.add_argument("--lines", choices=TREND_PARAMETERS, help="one line per value of this parameter")
    p.add_argument("--measures", type=_csv_list(str), default=list(MEASURES))
    p.add_argument("--fixed", type=_fixed_pair, action="append", default=[], metavar="PARAM=VALUE")
    p.add_argument("--k-typology", type=int, help="number of typology clusters to draw")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--out", required=True, help="output directory")
    _common(p)

    p = sub.add_parser("pipeline", help="sweep, analyze, typology and report in one go")
    p.add_argument("--default", action="store_true")
    p.add_argument("--workers", type=int)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--parsimony", action="store_true")
    p.add_argument("--parsimony-margin", type=float, default=0.05)
    p.add_argument("--out", required=True)
    _common(p)
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv) -> argparse.Namespace:
    """Parse once to find ``--config``, load it as parser defaults, parse again."""
    args = parser.parse_args(argv)
    if not getattr(args, "config", None) or args.command in ("sweep", "pipeline"):
        return args
    cfg = configparser.ConfigParser()
    text = Path(args.config).read_text()
    cfg.read_string("[main]\n" + text)
    sub = parser._subparsers._group_actions[0].choices[args.command]
    known = {a.dest for a in sub._actions}
    values = {}
    for key, value in cfg["main"].items():
        dest = key.replace("-", "_")
        if dest not in known:
            raise SweepError(f"{args.config}: unknown key {key!r} for {args.command}")
        values[dest] = value
    sub.set_defaults(**values)
    return parser.parse_args(argv)


def _require(args, *names):
    missing = [f"--{n}" for n in names if getattr(args, n) is None]
    if missing:
        raise SweepError("missing required option(s): " + ", ".join(missing))


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_manifest(out: Path, config: dict, outputs, started: float) -> None:
    payload = json.dumps(config, sort_keys=True)
    manifest = {
        "tool": "measure-bench",
        "version": __version__,
        "config": config,
        "config_hash": hashlib.sha256(payload.encode()).hexdigest(),
        "outputs": {p.name: _sha256(p) for p in outputs},
        "elapsed_seconds": round(time.perf_counter() - started, 3),
    }
    tmp = out / "manifest.json.tmp"
    tmp.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    os.replace(tmp, out / "manifest.json")


def _reference(args):
    _require(args, "n", "k")
    return build_reference_partition(cluster_sizes(args.n, args.k, args.h))


def cmd_generate(args) -> int:
    _require(args, "n", "k")
    spec = cluster_sizes(args.n, args.k, args.h)
    part = build_reference_partition(spec)
    print(f"n={spec.n} k={spec.k} h={format_real(spec.h)} beta_max={format_real(spec.beta_max)} "
          f"increment={spec.increment} alpha={spec.alpha}")
    print("sizes: " + " ".join(map(str, spec.sizes)))
    if args.out:
        Path(args.out).write_text("\n".join(map(str, part.labels.tolist())) + "\n")
    return EXIT_OK


def _transformed(args):
    _require(args, "t", "q")
    ref = _reference(args)
    return ref, apply_transform(ref, TransformSpec(args.t, args.q))


def cmd_transform(args) -> int:
    _, out = _transformed(args)
    print(f"k'={out.k}")
    print("sizes: " + " ".join(map(str, out.sizes().tolist())))
    if args.out:
        Path(args.out).write_text("\n".join(map(str, out.labels.tolist())) + "\n")
    return EXIT_OK


def cmd_score(args) -> int:
    ref, out = _transformed(args)
    scores = all_dissimilarities(ref, out, args.measures)
    print(f"n={ref.n} k={ref.k} k'={out.k}")
    for m in args.measures:
        s = scores[m]
        flag = " (out of range)" if s.out_of_range else ""
        print(f"D_{m}\t{format_real(s.dissimilarity)}{flag}")
    return EXIT_OK


def _grid_from_args(args) -> GridConfig:
    grid = load_grid_config(args.config) if args.config else default_grid()
    values = grid.as_dict()
    for flag, key in (("n", "n_values"), ("k", "k_values"), ("h", "h_values"), ("q", "q_values"),
                      ("t", "transforms"), ("measures", "measures")):
        override = getattr(args, flag, None)
        if override is not None:
            values[key] = override
    return GridConfig(**values)


def _run_sweep(args, out: Path):
    grid = _grid_from_args(args)
    result = run_sweep(grid, args.workers)
    outputs = [out / "scores.csv"]
    write_csv(result.records, outputs[0])
    if result.errors:
        write_errors_csv(result.errors, out / "errors.csv")
        outputs.append(out / "errors.csv")
    print(f"{grid.pair_count} pairs, {len(result.records)} score rows, {len(result.errors)} error rows")
    if result.full_onc_admitted:
        print("note: onc at q=1 collapses every element into one cluster; those points are kept")
    config = {"grid": grid.as_dict(), "full_onc_admitted": result.full_onc_admitted,
              "error_rows": len(result.errors)}
    return result, outputs, config


def cmd_sweep(args) -> int:
    started = time.perf_counter()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _, outputs, config = _run_sweep(args, out)
    _write_manifest(out, config, outputs, started)
    return EXIT_OK


def _analyze(records, out: Path, alpha: float):
    model = fit_records(records)
    table = relative_importance(model)
    trends = scan_trends(records, table)
    paths = [out / "importance.csv", out / "significance.csv", out / "trends.csv", out / "model.json"]
    write_importance_csv(table, paths[0])
    write_significance_csv(significance_rows(model, alpha), paths[1])
    with open(paths[2], "w") as fh:
        fh.write("measure,transform,parameter,trend\n")
        for (m, t, p), flag in trends.items():
            fh.write(f"{m},{t},{p},{flag}\n")
    summary = {
        "n_obs": model.n_obs,
        "n_coefficients": int(model.coefficients.size),
        "r_squared": format_real(model.r_squared),
        "sum_squared_beta_std": format_real(float(table.importance.sum())),
        "residual_sigma": format_real(model.residual_sigma),
        "centering": {k: format_real(v) for k, v in model.spec.means.items()},
    }
    paths[3].write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(f"R^2 = {summary['r_squared']}, sum of squared beta weights = {summary['sum_squared_beta_std']}")
    return table, paths


def cmd_analyze(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _analyze(read_csv(args.scores), out, args.alpha)
    return EXIT_OK


def _typology(table, out: Path, args):
    result = select_typology(importance_profiles(table), max_k=getattr(args, "max_k", 10),
                             parsimony=args.parsimony, margin=args.parsimony_margin)
    paths = [out / "typology.csv", out / "silhouette.csv"]
    write_typology_csv(result, paths[0])
    write_silhouette_csv(result, paths[1])
    print(f"chosen k = {result.chosen_k}, silhouette = {format_real(result.silhouettes[result.chosen_k])}")
    return result, paths


def cmd_typology(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _typology(read_importance_csv(args.importance), out, args)
    return EXIT_OK


def _read_trends(path: Path) -> dict:
    trends = {}
    with open(path) as fh:
        next(fh)
        for line in fh:
            m, t, p, flag = line.rstrip("\n").split(",")
            trends[(m, t, p)] = flag
    return trends


def _typology_from_csv(directory: Path, table) -> TypologyResult:
    """Recompute the typology so every candidate k is available for drawing."""
    path = directory / "typology.csv"
    chosen = len({cid for cid, _ in read_typology_csv(path).values()}) if path.exists() else None
    result = select_typology(importance_profiles(table))
    if chosen is not None and chosen in result.assignments:
        result.chosen_k = chosen
    return result


def cmd_report(args) -> int:
    src, out = Path(args.analysis), Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    table = read_importance_csv(src / "importance.csv")
    if (src / "trends.csv").exists():
        table.trends = _read_trends(src / "trends.csv")
    written = [emit_importance_bars(table, out / "importance_bars.svg")]
    if (src / "significance.csv").exists():
        rows = read_significance_csv(src / "significance.csv")
        written.append(emit_significance_matrices(rows, out / "significance.svg", args.alpha))
    result = _typology_from_csv(src, table)
    written.append(emit_typology_table(result, out / "typology.svg", args.k_typology))
    if args.x:
        if not (args.scores and args.t):
            raise ReportError("score lines need --scores and --t")
        name = f"scores_{args.t}_{args.x}" + (f"_by_{args.lines}" if args.lines else "") + ".svg"
        written.append(emit_score_lines(read_csv(args.scores), args.measures, args.t, args.x,
                                        dict(args.fixed), out / name, args.lines))
    for path in written:
        print(path)
    return EXIT_OK


def cmd_pipeline(args) -> int:
    started = time.perf_counter()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name in ("n", "k", "h", "q", "t", "measures"):
        setattr(args, name, None)
    result, outputs, config = _run_sweep(args, out)
    table, paths = _analyze(result.records, out, args.alpha)
    outputs += paths
    typ, paths = _typology(table, out, args)
    outputs += paths
    outputs.append(emit_importance_bars(table, out / "importance_bars.svg"))
    outputs.append(emit_significance_matrices(read_significance_csv(out / "significance.csv"),
                                              out / "significance.svg", args.alpha))
    outputs.append(emit_typology_table(typ, out / "typology.svg"))
    config.update(alpha=args.alpha, parsimony=args.parsimony, parsimony_margin=args.parsimony_margin)
    _write_manifest(out, config, outputs, started)
    return EXIT_OK


COMMANDS = {
    "generate": cmd_generate, "transform": cmd_transform, "score": cmd_score, "sweep": cmd_sweep,
    "analyze": cmd_analyze, "typology": cmd_typology, "report": cmd_report, "pipeline": cmd_pipeline,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except (SweepError, ValueError, configparser.Error) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except (CsvFormatError, RegressionError, TypologyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MALFORMED
    except (TransformError, MeasureError, SweepError, ReportError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
