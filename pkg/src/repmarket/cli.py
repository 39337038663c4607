"""Command-line pipeline: validate, replay, aggregate, evaluate, dynamics,
p-value regression, full report, and synthetic fixture generation.

Outputs are deterministic for a given input and configuration; the
structured report (JSON) is the stable machine-readable form, the CSV files
are for humans and plotting.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import aggregate, dynamics, evaluate, lmsr, reference, synth
from .dataset import load_dataset, load_mapping, trades_for, validate
from .errors import (
    DegenerateInput,
    DegenerateTable,
    InsufficientPoints,
    NoReduction,
    RepmarketError,
)

DATA_DIR_ENV = "REPMARKET_DATA_DIR"


def _add_data_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--outcomes", help="outcomes (findings) CSV path")
    p.add_argument("--surveys", help="survey responses CSV path")
    p.add_argument("--trades", help="trades CSV path")
    p.add_argument("--mapping", help="column mapping JSON path")
    p.add_argument("--out", default="out", help="output directory (default: out)")


def _resolve_path(explicit: str | None, default_name: str) -> Path:
    if explicit:
        return Path(explicit)
    data_dir = os.environ.get(DATA_DIR_ENV)
    if data_dir:
        return Path(data_dir) / default_name
    raise SystemExit(
        f"no path for {default_name}: pass --{default_name.split('.')[0]} "
        f"or set {DATA_DIR_ENV}")


def _load(args):
    mapping = load_mapping(args.mapping) if args.mapping else None
    return load_dataset(
        _resolve_path(args.outcomes, "outcomes.csv"),
        _resolve_path(args.surveys, "surveys.csv"),
        _resolve_path(args.trades, "trades.csv"),
        mapping=mapping,
        p_threshold=getattr(args, "pvalue_threshold", 0.005),
    )


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(obj, path: Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _test_dict(result) -> dict:
    return {"statistic": result.statistic, "df": result.df,
            "p_value": result.p_value, "kind": result.kind}


# ----------------------------------------------------------------------
# pipeline assembly
# ----------------------------------------------------------------------

def run_pipeline(ds, threshold: float = 0.5, p_threshold: float = 0.005,
                 yates: bool = False,
                 loess_cfg: dynamics.LoessConfig | None = None) -> dict:
    """Compute everything the structured report carries.

    Returns {"report": ..., "scores": ..., "forecasts": ..., "curves": ...}.
    Pieces that are undefined on the given data (degenerate fixtures) are
    reported as null rather than failing the whole run.
    """
    loess_cfg = loess_cfg or dynamics.LoessConfig()
    forecasts = aggregate.aggregate_all(ds, threshold=threshold)
    scores = evaluate.score(forecasts, ds, threshold=threshold)
    table1 = evaluate.build_table1(ds, scores)
    table2 = evaluate.build_table2(ds.findings, p_threshold)

    tests: dict[str, dict | None] = {}
    try:
        over = evaluate.overestimation_tests(forecasts, ds)
        tests["overestimation_survey"] = _test_dict(over[aggregate.METHOD_MEAN])
        tests["overestimation_market"] = _test_dict(over[aggregate.METHOD_MARKET])
    except DegenerateInput:
        tests["overestimation_survey"] = tests["overestimation_market"] = None
    for name, fn in (("error_difference", evaluate.error_difference_test),
                     ("extremeness", evaluate.extremeness_test)):
        try:
            tests[name] = _test_dict(fn(scores))
        except DegenerateInput:
            tests[name] = None
    try:
        tests["accuracy_chi_square"] = _test_dict(
            evaluate.accuracy_comparison_test(scores, yates=yates))
    except DegenerateTable:
        tests["accuracy_chi_square"] = None

    quadrants = {}
    try:
        for method, (quad, result) in evaluate.asymmetry_tests(scores, yates=yates).items():
            short = "market" if method == aggregate.METHOD_MARKET else "survey"
            tests[f"asymmetry_{short}"] = _test_dict(result)
            quadrants[short] = {
                "predicted_fail": quad.predicted_fail_replicated
                + quad.predicted_fail_not_replicated,
                "fail_but_replicated": quad.predicted_fail_replicated,
                "predicted_replicate": quad.predicted_replicate_replicated
                + quad.predicted_replicate_not_replicated,
                "replicate_but_failed": quad.predicted_replicate_not_replicated,
            }
    except DegenerateTable:
        tests["asymmetry_market"] = tests["asymmetry_survey"] = None

    aggregators = {}
    for method in aggregate.SURVEY_METHODS:
        values = [s.forecast for s in scores if s.method == method]
        errors = [s.abs_error for s in scores if s.method == method]
        if not values:
            continue
        n = len(values)
        mean = sum(values) / n
        sd = (sum((v - mean) ** 2 for v in values) / (n - 1)) ** 0.5 if n > 1 else 0.0
        aggregators[method] = {"mean": mean, "sd": sd,
                               "mae": sum(errors) / n, "n": n}

    trade_counts = [len(trades_for(ds, fid)) for fid in ds.finding_ids()]
    dyn: dict[str, object] = {
        "trades_per_market_min": min(trade_counts) if trade_counts else None,
        "trades_per_market_max": max(trade_counts) if trade_counts else None,
        "trades_per_market_mean": (sum(trade_counts) / len(trade_counts)
                                   if trade_counts else None),
    }
    curves = {}
    for axis, label in ((dynamics.AXIS_TRADES, "trades"),
                        (dynamics.AXIS_HOURS, "hours")):
        raw = dynamics.mean_error_curve(ds, axis)
        try:
            smoothed = dynamics.loess_fit(raw, loess_cfg)
        except InsufficientPoints:
            smoothed = raw  # grid too small to smooth
        curves[label] = (raw, smoothed)
        try:
            dyn[f"milestone_{label}_90"] = dynamics.reduction_milestone(
                smoothed, 0.9).x_at_fraction
        except NoReduction:
            dyn[f"milestone_{label}_90"] = None
    hours_smoothed = curves["hours"][1]
    y = hours_smoothed.mean_abs_error
    total = float(y[0] - np.min(y))
    if total > 0:
        at_one = float(np.interp(1.0, hours_smoothed.x, y))
        dyn["first_hour_reduction_fraction"] = float(y[0] - at_one) / total
    else:
        dyn["first_hour_reduction_fraction"] = None
    try:
        dyn["late_smoothing"] = _test_dict(dynamics.late_trade_smoothing(ds))
    except DegenerateInput:
        dyn["late_smoothing"] = None

    report = {
        "counts": {"findings": len(ds.findings), "trades": len(ds.trades),
                   "surveys": len(ds.surveys)},
        "config": {"threshold": threshold, "p_threshold": p_threshold,
                   "yates": yates, "loess_span": loess_cfg.span,
                   "loess_degree": loess_cfg.degree},
        "table1": table1,
        "table2": table2,
        "tests": tests,
        "quadrants": quadrants,
        "correlations": evaluate.forecast_correlations(scores),
        "aggregators": aggregators,
        "dynamics": dyn,
    }
    return {"report": report, "forecasts": forecasts, "scores": scores,
            "curves": curves}


# ----------------------------------------------------------------------
# subcommands
# ----------------------------------------------------------------------

def cmd_validate(args) -> int:
    ds = _load(args)
    report = validate(ds)
    merged = {
        "load": ds.load_report.to_dict() if ds.load_report else None,
        "validation": report.to_dict(),
    }
    out = _out_dir(args)
    _write_json(merged, out / "validation.json")
    n_load_errors = len(ds.load_report.errors) if ds.load_report else 0
    print(f"records: {len(ds.findings)} findings, {len(ds.surveys)} surveys, "
          f"{len(ds.trades)} trades")
    print(f"load errors: {n_load_errors}; validation errors: {len(report.errors)}; "
          f"warnings: {len(report.warnings) }")
    print(f"wrote {out / 'validation.json'}")
    return 0 if report.ok() and n_load_errors == 0 else 1


def cmd_replay(args) -> int:
    ds = _load(args)
    fids = [args.finding] if args.finding else ds.finding_ids()
    out = _out_dir(args)
    path = out / "replay.csv"
    import csv as _csv
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = _csv.writer(fh)
        w.writerow(["finding_id", "trade_index", "price"])
        for fid in fids:
            prices = lmsr.replay(ds, fid, mode=args.mode,
                                 liquidity_b=args.liquidity_b)
            for i, p in enumerate(prices, start=1):
                w.writerow([fid, i, repr(p)])
    print(f"replayed {len(fids)} markets ({args.mode}) -> {path}")
    return 0


def cmd_aggregate(args) -> int:
    ds = _load(args)
    methods = tuple(args.method) if args.method else aggregate.ALL_METHODS
    forecasts = aggregate.aggregate_all(ds, methods=methods,
                                        threshold=args.threshold)
    out = _out_dir(args)
    aggregate.write_aggregates(forecasts, out / "aggregates.csv")
    print(f"{len(forecasts)} forecasts ({len(methods)} methods) -> "
          f"{out / 'aggregates.csv'}")
    return 0


def cmd_evaluate(args) -> int:
    ds = _load(args)
    result = run_pipeline(ds, threshold=args.threshold,
                          p_threshold=args.pvalue_threshold, yates=args.yates)
    out = _out_dir(args)
    evaluate.write_scores(result["scores"], out / "scores.csv")
    _write_json({"tests": result["report"]["tests"],
                 "quadrants": result["report"]["quadrants"],
                 "correlations": result["report"]["correlations"]},
                out / "evaluation.json")
    print(f"{len(result['scores'])} score rows -> {out / 'scores.csv'}")
    print(f"tests -> {out / 'evaluation.json'}")
    return 0


def cmd_dynamics(args) -> int:
    ds = _load(args)
    cfg = dynamics.LoessConfig(span=args.loess_span, degree=args.loess_degree)
    out = _out_dir(args)
    dyn = {}
    for axis, label, fname in ((dynamics.AXIS_TRADES, "trades", "curve_trades.csv"),
                               (dynamics.AXIS_HOURS, "hours", "curve_hours.csv")):
        raw = dynamics.mean_error_curve(ds, axis)
        try:
            smoothed = dynamics.loess_fit(raw, cfg)
        except InsufficientPoints:
            smoothed = raw
        dynamics.write_curves(raw, smoothed, out / fname)
        for fraction in (0.65, 0.9):
            key = f"milestone_{label}_{int(fraction * 100)}"
            try:
                dyn[key] = dynamics.reduction_milestone(smoothed, fraction).x_at_fraction
            except NoReduction:
                dyn[key] = None
    try:
        dyn["late_smoothing"] = _test_dict(
            dynamics.late_trade_smoothing(ds, args.cutoff_hours))
    except DegenerateInput:
        dyn["late_smoothing"] = None
    _write_json(dyn, out / "dynamics.json")
    print(f"curves -> {out / 'curve_trades.csv'}, {out / 'curve_hours.csv'}")
    print(f"milestones -> {out / 'dynamics.json'}")
    return 0


def cmd_pvalue(args) -> int:
    ds = _load(args)
    table2 = evaluate.build_table2(ds.findings, args.pvalue_threshold)
    out = _out_dir(args)
    evaluate.write_table2_csv(table2, out / "table2.csv")
    _write_json(table2, out / "table2.json")
    print(f"slope {table2['slope']:.4f} (se {table2['se_slope']:.4f}), "
          f"r_squared {table2['r_squared']:.4f} -> {out / 'table2.csv'}")
    return 0


def cmd_report(args) -> int:
    ds = _load(args)
    cfg = dynamics.LoessConfig(span=args.loess_span, degree=args.loess_degree)
    result = run_pipeline(ds, threshold=args.threshold,
                          p_threshold=args.pvalue_threshold,
                          yates=args.yates, loess_cfg=cfg)
    out = _out_dir(args)
    aggregate.write_aggregates(result["forecasts"], out / "aggregates.csv")
    evaluate.write_scores(result["scores"], out / "scores.csv")
    evaluate.write_table1_csv(result["report"]["table1"], out / "table1.csv")
    _write_json(result["report"]["table1"], out / "table1.json")
    evaluate.write_table2_csv(result["report"]["table2"], out / "table2.csv")
    _write_json(result["report"]["table2"], out / "table2.json")
    for label, fname in (("trades", "curve_trades.csv"), ("hours", "curve_hours.csv")):
        raw, smoothed = result["curves"][label]
        dynamics.write_curves(raw, smoothed, out / fname)
    _write_json(result["report"], out / "report.json")
    rows = reference.build_discrepancies(result["report"])
    import csv as _csv
    with open(out / "discrepancies.csv", "w", newline="", encoding="utf-8") as fh:
        w = _csv.writer(fh)
        w.writerow(["metric", "computed", "published", "delta", "note"])
        for r in rows:
            w.writerow([r["metric"],
                        "" if r["computed"] is None else r["computed"],
                        "" if r["published"] is None else r["published"],
                        "" if r["delta"] is None else repr(r["delta"]),
                        r["note"]])
    pooled = [r for r in result["report"]["table1"]["rows"]
              if r["project"] == "Pooled"]
    if pooled:
        p = pooled[0]
        print(f"pooled: {p['n_findings']} findings, {p['n_replicated']} replicated")
    print(f"report -> {out / 'report.json'}; discrepancies -> "
          f"{out / 'discrepancies.csv'}")
    return 0


def cmd_synth(args) -> int:
    ds = synth.synthetic_dataset(seed=args.seed, n_markets=args.markets,
                                 n_traders=args.traders,
                                 liquidity_b=args.liquidity_b)
    paths = synth.write_fixture(ds, args.out)
    print(f"seed {args.seed}: {len(ds.findings)} markets, {len(ds.trades)} trades, "
          f"{len(ds.surveys)} survey responses")
    for name, path in paths.items():
        print(f"  {name}: {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="repmarket",
        description="Replication prediction-market replay, aggregation, and "
                    "evaluation pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="load the three tables and audit invariants")
    _add_data_args(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("replay", help="price time series per market")
    _add_data_args(p)
    p.add_argument("--finding", help="replay a single market")
    p.add_argument("--mode", choices=[lmsr.PRICE_TAKING, lmsr.SIMULATED],
                   default=lmsr.PRICE_TAKING)
    p.add_argument("--liquidity-b", type=float, default=None,
                   help="liquidity for simulated replay")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("aggregate", help="per-finding aggregated forecasts")
    _add_data_args(p)
    p.add_argument("--method", action="append", choices=aggregate.ALL_METHODS,
                   help="repeatable; default: all methods")
    p.add_argument("--threshold", type=float, default=0.5,
                   help="binarization threshold (default 0.5)")
    p.set_defaults(func=cmd_aggregate)

    p = sub.add_parser("evaluate", help="score forecasts and run the tests")
    _add_data_args(p)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--pvalue-threshold", type=float, default=0.005)
    p.add_argument("--yates", action="store_true",
                   help="apply continuity correction to chi-square tests")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("dynamics", help="error-reduction curves and milestones")
    _add_data_args(p)
    p.add_argument("--loess-span", type=float, default=0.75)
    p.add_argument("--loess-degree", type=int, choices=(1, 2), default=2)
    p.add_argument("--cutoff-hours", type=float, default=168.0,
                   help="late-trade smoothing cutoff (default one week)")
    p.set_defaults(func=cmd_dynamics)

    p = sub.add_parser("pvalue", help="p-value-category regression")
    _add_data_args(p)
    p.add_argument("--pvalue-threshold", type=float, default=0.005)
    p.set_defaults(func=cmd_pvalue)

    p = sub.add_parser("report", help="full pipeline with discrepancy notes")
    _add_data_args(p)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--pvalue-threshold", type=float, default=0.005)
    p.add_argument("--yates", action="store_true")
    p.add_argument("--loess-span", type=float, default=0.75)
    p.add_argument("--loess-degree", type=int, choices=(1, 2), default=2)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("synth", help="generate a synthetic fixture dataset")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--markets", type=int, default=12)
    p.add_argument("--traders", type=int, default=8)
    p.add_argument("--liquidity-b", type=float, default=lmsr.DEFAULT_LIQUIDITY)
    p.add_argument("--out", default="out", help="output directory")
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except RepmarketError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
