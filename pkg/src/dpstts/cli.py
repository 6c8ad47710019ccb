"""Command line front end: ``build``, ``synthesize``, ``evaluate`` and ``pipeline``.

Settings resolve as command-line flag, then ``--config`` JSON file, then the
built-in defaults (20x20x16 grid, v=2, delta=0.5, max length 125, 20x20
evaluation grid, sanity bound 0.1% of |D|, top-200 patterns, 15-minute bins).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .dp import derive_seed
from .errors import ConfigError, DPSTTSError, EmptyDataset
from .fileio import atomic_write_text
from .grid import GridSpec, discretize_dataset
from .ingest import (
    dumps_jsonl_dataset,
    filter_dataset,
    make_domain,
    parse_jsonl_dataset,
    parse_porto_csv,
)
from .metrics import EvalGrid, EvalParams, MetricsReport, evaluate_all
from .model import build_model, dumps_model, load_model
from .synth import DEFAULT_MAX_LEN, GenerationConfig, generate_dataset

log = logging.getLogger("dpstts")

EXIT_IO = 3

DEFAULTS = {
    "format": "jsonl",
    "bbox": "41.104,-8.665,41.250,-8.528",
    "time_window": "14:00-18:00",
    "grid": "20x20x16",
    "v": 2,
    "epsilon": 1.0,
    "epsilons": "0.5,1",
    "delta": 0.5,
    "seed": 0,
    "count": None,
    "max_len": DEFAULT_MAX_LEN,
    "eval_grid": "20x20",
    "sanity_fraction": 0.001,
    "top_k": 200,
    "bin_minutes": 15.0,
    "runs": 1,
    "sampling_interval": 15.0,
    "max_reject_ratio": 0.01,
}


def _dims(text: str, n: int, flag: str) -> tuple[int, ...]:
    parts = str(text).lower().split("x")
    try:
        dims = tuple(int(p) for p in parts)
    except ValueError:
        dims = ()
    if len(dims) != n or min(dims) < 1:
        raise ConfigError(f"{flag} expects {'x'.join('N' * n)}, got {text!r}")
    return dims


def grid_from_args(args) -> GridSpec:
    g_w, g_h, g_t = _dims(args.grid, 3, "--grid")
    return GridSpec(g_w, g_h, g_t, int(args.v))


def eval_params_from_args(args) -> EvalParams:
    cols, rows = _dims(args.eval_grid, 2, "--eval-grid")
    return EvalParams(
        grid=EvalGrid(rows, cols),
        sanity_fraction=float(args.sanity_fraction),
        top_k=int(args.top_k),
        bin_seconds=float(args.bin_minutes) * 60.0,
    )


def read_dataset(path, fmt: str, args):
    path = Path(path)
    with open(path, encoding="utf-8", newline="") as fh:
        if fmt == "jsonl":
            return parse_jsonl_dataset(fh, float(args.max_reject_ratio), source=str(path))
        if fmt == "porto-csv":
            return parse_porto_csv(fh, float(args.sampling_interval), float(args.max_reject_ratio),
                                   source=str(path))
    raise ConfigError(f"unknown format {fmt!r}")


def _load_domain(args):
    if getattr(args, "model", None) and Path(args.model).exists():
        model = load_model(args.model)
        return model.domain, bool(model.metadata.get("time_of_day", False))
    return make_domain(args.bbox, args.time_window)


def _filtered_real(args, dom, tod):
    raw = read_dataset(args.input, args.format, args)
    real = filter_dataset(raw, dom, tod)
    log.info("real dataset: %d trajectories read, %d kept inside the domain", len(raw), len(real))
    if len(real) == 0:
        raise EmptyDataset(f"{args.input}: no trajectory intersects the domain")
    return real


def _build(args, real, dom, tod, epsilon, seed):
    grid = grid_from_args(args)
    da = discretize_dataset(real, dom, grid)
    dropped = len(real) - len(da)
    if len(da) == 0:
        raise EmptyDataset("no trajectory survives discretization")
    model = build_model(da, dom, grid, float(epsilon), float(args.delta), seed)
    model.metadata["time_of_day"] = tod
    b = model.budget
    log.info("model: |D_a|=%d (dropped %d), grid %s, v=%d", len(da), dropped, grid.shape, grid.v)
    log.info("epsilon consumed: eps_s=%r + eps_m=%r = %r", b.eps_s, b.eps_m, b.eps_s + b.eps_m)
    return model


def _write_report(path, report: MetricsReport, extra=None):
    path = Path(path)
    doc = report.to_dict()
    if extra:
        doc.update(extra)
    atomic_write_text(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")
    for which in ("real", "syn"):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["bin_start_seconds", "probability"])
        w.writerows(report.plot_rows(which))
        atomic_write_text(path.with_name(f"{path.stem}.temporal_{which}.csv"), buf.getvalue())


def _average(reports: list[MetricsReport]) -> tuple[MetricsReport, dict]:
    """Mean scores across runs; histograms of the synthetic side averaged too."""
    first = reports[0]
    means = {k: float(np.mean([r.scores()[k] for r in reports])) for k in MetricsReport.SCORES}
    hist_syn = np.mean([r.temporal_hist_syn for r in reports], axis=0).tolist()
    avg = MetricsReport(**means, temporal_hist_real=first.temporal_hist_real,
                        temporal_hist_syn=hist_syn, bin_start_seconds=first.bin_start_seconds)
    per_run = {f"{k}_per_run": [r.scores()[k] for r in reports] for k in MetricsReport.SCORES}
    return avg, {"runs": len(reports), **per_run}


# --- subcommands -----------------------------------------------------------

def cmd_build(args) -> int:
    dom, tod = make_domain(args.bbox, args.time_window)
    real = _filtered_real(args, dom, tod)
    model = _build(args, real, dom, tod, args.epsilon, int(args.seed))
    atomic_write_text(args.model, dumps_model(model))
    log.info("wrote model %s", args.model)
    return 0


def cmd_synthesize(args) -> int:
    model = load_model(args.model)
    cfg = GenerationConfig.for_model(model, args.count, int(args.max_len), int(args.seed))
    syn = generate_dataset(model, cfg)
    atomic_write_text(args.out, dumps_jsonl_dataset(syn))
    log.info("wrote %d synthetic trajectories to %s", len(syn), args.out)
    return 0


def cmd_evaluate(args) -> int:
    dom, tod = _load_domain(args)
    params = eval_params_from_args(args)
    real = _filtered_real(args, dom, tod)
    runs = int(args.runs)
    if runs > 1 or not args.synthetic:
        if not args.model:
            raise ConfigError("--runs or a missing --synthetic requires --model")
        model = load_model(args.model)
        reports = []
        for r in range(runs):
            cfg = GenerationConfig.for_model(model, args.count, int(args.max_len),
                                             derive_seed(int(args.seed), r))
            reports.append(evaluate_all(real, generate_dataset(model, cfg), dom, params))
        report, extra = _average(reports)
    else:
        syn = filter_dataset(read_dataset(args.synthetic, "jsonl", args), dom, tod)
        report, extra = evaluate_all(real, syn, dom, params), {"runs": 1}
    _write_report(args.out, report, extra)
    log.info("scores: %s", json.dumps(report.scores(), sort_keys=True))
    return 0


def cmd_pipeline(args) -> int:
    dom, tod = make_domain(args.bbox, args.time_window)
    params = eval_params_from_args(args)
    real = _filtered_real(args, dom, tod)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        epsilons = [float(e) for e in str(args.epsilons).split(",") if e.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad --epsilons {args.epsilons!r}") from exc
    summary = {}
    for eps in epsilons:
        reports = []
        for r in range(int(args.runs)):
            seed = derive_seed(int(args.seed), r)
            tag = f"eps{eps:g}_run{r}"
            model = _build(args, real, dom, tod, eps, seed)
            atomic_write_text(out / f"model_{tag}.json", dumps_model(model))
            cfg = GenerationConfig.for_model(model, args.count, int(args.max_len), seed)
            syn = generate_dataset(model, cfg)
            atomic_write_text(out / f"synthetic_{tag}.jsonl", dumps_jsonl_dataset(syn))
            report = evaluate_all(real, syn, dom, params)
            _write_report(out / f"report_{tag}.json", report)
            reports.append(report)
        avg, extra = _average(reports)
        _write_report(out / f"report_eps{eps:g}_mean.json", avg, extra)
        summary[f"{eps:g}"] = avg.scores()
        log.info("epsilon=%g mean over %d runs: %s", eps, len(reports), json.dumps(avg.scores(), sort_keys=True))
    atomic_write_text(out / "summary.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return 0


# --- argument parsing ------------------------------------------------------

def _add_input(p):
    p.add_argument("--input", required=True, help="raw trajectory dataset")
    p.add_argument("--format", choices=["jsonl", "porto-csv"])
    p.add_argument("--sampling-interval", type=float, help="seconds between Porto polyline points")
    p.add_argument("--max-reject-ratio", type=float)


def _add_domain(p):
    p.add_argument("--bbox", help="lat_min,lon_min,lat_max,lon_max")
    p.add_argument("--time-window", help="HH:MM-HH:MM (time of day) or start,end epoch seconds")


def _add_model_params(p):
    p.add_argument("--grid", help="WxHxT cube counts")
    p.add_argument("--v", type=int, help="dwell jump: max time-slice advance within one cell")
    p.add_argument("--delta", type=float, help="share of epsilon spent on the start distribution")


def _add_generation(p):
    p.add_argument("--count", type=int, help="synthetic trajectories (default: source size)")
    p.add_argument("--max-len", type=int)


def _add_eval(p):
    p.add_argument("--eval-grid", help="WxH evaluation grid")
    p.add_argument("--sanity-fraction", type=float)
    p.add_argument("--top-k", type=int)
    p.add_argument("--bin-minutes", type=float)
    p.add_argument("--runs", type=int)


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dpstts", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="JSON file of default settings")
    parser.add_argument("--log-level", default="INFO")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="discretize a dataset and build a private model")
    _add_input(p)
    _add_domain(p)
    _add_model_params(p)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--model", required=True, help="output model file")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("synthesize", help="sample synthetic trajectories from a model")
    p.add_argument("--model", required=True)
    _add_generation(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True, help="output JSON-lines dataset")
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("evaluate", help="score a synthetic dataset against the real one")
    _add_input(p)
    p.add_argument("--synthetic", help="synthetic JSON-lines dataset")
    p.add_argument("--model", help="model file; supplies the domain and enables --runs")
    _add_domain(p)
    _add_generation(p)
    _add_eval(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True, help="report JSON; plot CSVs are written alongside")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("pipeline", help="build, synthesize and evaluate for several budgets")
    _add_input(p)
    _add_domain(p)
    _add_model_params(p)
    p.add_argument("--epsilons", help="comma-separated budgets")
    p.add_argument("--seed", type=int)
    _add_generation(p)
    _add_eval(p)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_pipeline)
    return parser


def parse_args(argv=None) -> argparse.Namespace:
    parser = make_parser()
    args = parser.parse_args(argv)
    config = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                config = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{args.config}: {exc}") from exc
        if not isinstance(config, dict):
            raise ConfigError(f"{args.config}: expected a JSON object")
        config = {k.replace("-", "_"): v for k, v in config.items()}
    for key, default in DEFAULTS.items():
        if getattr(args, key, None) is None and hasattr(args, key):
            setattr(args, key, config.get(key, default))
    for key, value in config.items():
        if getattr(args, key, None) is None:
            setattr(args, key, value)
    return args


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
    except DPSTTSError as exc:
        print(f"dpstts: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"dpstts: error: {exc}", file=sys.stderr)
        return EXIT_IO
    logging.basicConfig(level=str(args.log_level).upper(), format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except DPSTTSError as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return exc.exit_code
    except OSError as exc:
        log.error("I/O error: %s", exc)
        return EXIT_IO
    except ValueError as exc:
        # invalid values that only surface once a component validates them
        log.error("ConfigError: %s", exc)
        return ConfigError.exit_code


if __name__ == "__main__":
    sys.exit(main())
