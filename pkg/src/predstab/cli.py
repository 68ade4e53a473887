"""Command-line interface: ``predstab assess | simulate | fit | version``.

Exit codes: 0 success, 1 runtime failure, 2 usage error (bad flags or
config). Diagnostics go to stderr as one ``predstab: <kind>: <message>`` line.
"""

import argparse
import hashlib
import json
import logging
import os
import sys
from dataclasses import replace

import numpy as np

from . import __version__
from ._random import NORMAL_METHOD, TAG_ORIGINAL, derive_rng
from .curves import DEFAULT_GRID, DEFAULT_SPAN, Curve, write_curves_csv
from .dataset import load_csv, read_flat_config
from .engines import ENGINES, ModelSpec, fit_spec, load_model_spec, model_to_json
from .exceptions import PredStabError
from .plots import RENDERER_VERSION, render_report, render_simulation
from .simstudy import experiment_from_mapping, level_summaries, run_sim_experiment
from .stability import (CLASSIFICATION_RULE, QUANTILE_METHOD, RECOMMENDED_B, build_report,
                        run_bootstrap_stability)

logger = logging.getLogger("predstab")

METHODS = {
    "seed_derivation": "numpy SeedSequence([master_seed, tag, ...]); original tag 0, replicate tag 1 + b",
    "normal_generator": NORMAL_METHOD,
    "percentiles": f"empirical, numpy method={QUANTILE_METHOD!r}",
    "classification_rule": CLASSIFICATION_RULE,
    "smoother": "local linear loess, tricube weights, no robustness iterations",
    "band_smoothing": "loess of percentile offsets from the original risk",
    "renderer_version": RENDERER_VERSION,
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _config_spec(path, engine):
    spec = load_model_spec(path) if path else ModelSpec()
    return spec.with_overrides(engine=engine)


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_json(path, payload):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(payload, indent=2, sort_keys=True, allow_nan=False) + "\n")


def _write_svgs(out_dir, docs):
    os.makedirs(os.path.join(out_dir, "plots"), exist_ok=True)
    for name, svg in docs.items():
        with open(os.path.join(out_dir, "plots", f"{name}.svg"), "w", encoding="utf-8") as fh:
            fh.write(svg)


def _warn_small_b(B):
    if B < RECOMMENDED_B:
        logger.warning("B=%d is below the recommended minimum of %d bootstrap replicates", B, RECOMMENDED_B)


def cmd_assess(args):
    spec = args.spec
    ds = load_csv(args.data, args.outcome, args.subgroup)
    _warn_small_b(args.B)
    bp = run_bootstrap_stability(ds, spec, B=args.B, master_seed=args.seed, n_jobs=args.workers)
    report = build_report(bp, threshold=args.threshold, span=args.span)

    out = args.out_dir
    os.makedirs(os.path.join(out, "curves"), exist_ok=True)
    bp.to_csv(os.path.join(out, "predictions.csv"))
    _write_mape_csv(os.path.join(out, "mape.csv"), report)
    _write_report_curves(os.path.join(out, "curves"), report)
    _write_svgs(out, render_report(report))

    provenance = {
        "version": __version__,
        "spec": spec.to_dict(),
        "seed": args.seed,
        "B": args.B,
        "successful_replicates": bp.B,
        "failures": [{"replicate": b, "reason": r} for b, r in bp.failures],
        "data": {"file": os.path.basename(args.data), "sha256": _sha256(args.data), "n": ds.n,
                 "events": ds.n_events, "outcome": args.outcome, "predictors": list(ds.predictor_names),
                 "subgroup": args.subgroup},
        "threshold": args.threshold,
        "span": args.span,
        "n_grid": DEFAULT_GRID,
        "methods": METHODS,
    }
    metrics = report.summary()
    metrics.pop("failures", None)
    if report.c_statistic_bootstrap is not None:
        metrics["c_statistic"]["bootstrap"] = [float(v) for v in report.c_statistic_bootstrap]
    _write_json(os.path.join(out, "report.json"), {"provenance": provenance, "metrics": metrics})
    print(f"wrote report bundle to {out} (average MAPE {report.average_mape:.6g}, "
          f"{bp.B}/{args.B} replicates)")
    return 0


def _fmt(v):
    return repr(float(v))


def _write_mape_csv(path, report):
    bp, band = report.predictions, report.band
    cols = ["individual", "outcome", "original_risk", "mape", "lower", "upper", "lower_smooth", "upper_smooth"]
    data = [np.arange(bp.n), bp.outcome, bp.original, report.mape_per_individual, band.lower, band.upper,
            band.lower_fitted, band.upper_fitted]
    if report.classification_index is not None:
        cols.append("classification_index")
        data.append(report.classification_index)
    if bp.subgroup is not None:
        cols.append("subgroup")
        data.append(bp.subgroup)
    writers = [str, str] + [_fmt] * (len(cols) - 2)
    if bp.subgroup is not None:
        writers[-1] = _csv_text
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(cols) + "\n")
        for row in zip(*data):
            fh.write(",".join(w(v) for w, v in zip(writers, row)) + "\n")


def _csv_text(s):
    s = str(s)
    return '"' + s.replace('"', '""') + '"' if any(ch in s for ch in ',"\n') else s


def _write_report_curves(curve_dir, report):
    series = {"original": report.calibration_original}
    series.update({f"bootstrap_{int(b) + 1}": cv for b, cv in
                   zip(report.predictions.replicate_ids, report.calibration_bootstrap)})
    write_curves_csv(os.path.join(curve_dir, "calibration.csv"), series)
    band = report.band
    write_curves_csv(os.path.join(curve_dir, "band.csv"), {
        "lower": Curve(band.grid, band.lower_smooth, "band"),
        "upper": Curve(band.grid, band.upper_smooth, "band"),
    })
    if report.decision_original is not None:
        d0 = report.decision_original
        series = {"original": d0.model, "treat_all": d0.treat_all, "treat_none": d0.treat_none}
        series.update({f"bootstrap_{int(b) + 1}": d.model for b, d in
                       zip(report.predictions.replicate_ids, report.decision_bootstrap)})
        write_curves_csv(os.path.join(curve_dir, "decision.csv"), series)


def _experiment(args):
    values = read_flat_config(args.config) if args.config else {}
    exp = experiment_from_mapping(values, source=args.config or "defaults")
    overrides = {}
    if args.n_models is not None:
        overrides["n_models"] = args.n_models
    if args.n_eval is not None:
        overrides["n_eval"] = args.n_eval
    if args.sizes:
        overrides["sample_sizes"] = tuple(args.sizes)
    if args.engine:
        overrides["spec"] = exp.spec.with_overrides(engine=args.engine)
    if overrides:
        exp = replace(exp, **overrides)
    return exp


def cmd_simulate(args):
    exp = args.experiment
    result = run_sim_experiment(exp, args.seed, n_jobs=args.workers)
    tables = level_summaries(result)
    out = args.out_dir
    os.makedirs(out, exist_ok=True)
    for name, df in tables.items():
        df.to_csv(os.path.join(out, f"{name}.csv"), index=False, lineterminator="\n")
    _write_svgs(out, render_simulation(result, tables))
    index = {
        "version": __version__,
        "seed": args.seed,
        "experiment": exp.to_dict(),
        "tables": sorted(f"{name}.csv" for name in tables),
        "tracked_individuals": [
            {"target": float(t), "row": int(i), "true_risk": float(r)}
            for t, i, r in zip(exp.tracked_risks, result.tracked_index, result.tracked_true_risk)
        ],
        "subgroup_size": result.subgroup_size,
        "failures": {str(n): [{"replicate": b, "reason": r} for b, r in c.failures]
                     for n, c in sorted(result.cells.items())},
        "methods": {**METHODS, **result.metadata,
                    "seed_derivation": "numpy SeedSequence([master_seed, 2, n_dev, replicate]); evaluation [master_seed, 3]"},
    }
    _write_json(os.path.join(out, "index.json"), index)
    print(f"wrote simulation bundle to {out}")
    return 0


def cmd_fit(args):
    spec = args.spec
    ds = load_csv(args.data, args.outcome)
    model = fit_spec(spec, ds, derive_rng(args.seed, TAG_ORIGINAL))
    text = model_to_json(model, spec=spec.to_dict(), seed=args.seed, version=__version__) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_version(args):
    print(__version__)
    return 0


def build_parser():
    p = _Parser(prog="predstab", description="Bootstrap instability assessment of clinical risk models.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    a = sub.add_parser("assess", help="bootstrap instability report for a dataset")
    a.add_argument("--data", required=True, help="CSV of complete cases")
    a.add_argument("--outcome", required=True, help="binary 0/1 outcome column")
    a.add_argument("--subgroup", help="optional subgroup label column")
    a.add_argument("--engine", choices=ENGINES, help="model-building strategy (default lasso_cv)")
    a.add_argument("--B", type=int, default=RECOMMENDED_B, help="bootstrap replicates (default 200)")
    a.add_argument("--seed", type=int, required=True, help="master seed (required)")
    a.add_argument("--threshold", type=float, help="risk threshold; enables classification and decision outputs")
    a.add_argument("--out-dir", required=True)
    a.add_argument("--span", type=float, default=DEFAULT_SPAN, help="loess span for curves and bands")
    a.add_argument("--config", help="flat key=value file of engine hyperparameters")
    a.add_argument("--workers", type=int, default=1, help="parallel worker processes")
    a.set_defaults(func=cmd_assess)

    s = sub.add_parser("simulate", help="repeated-development simulation study")
    s.add_argument("--config", help="flat key=value experiment config")
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--out-dir", required=True)
    s.add_argument("--engine", choices=ENGINES)
    s.add_argument("--n-models", type=int)
    s.add_argument("--n-eval", type=int)
    s.add_argument("--sizes", type=int, nargs="+", help="development sample sizes")
    s.add_argument("--workers", type=int, default=1)
    s.set_defaults(func=cmd_simulate)

    f = sub.add_parser("fit", help="fit one model and export it as JSON")
    f.add_argument("--data", required=True)
    f.add_argument("--outcome", required=True)
    f.add_argument("--engine", choices=ENGINES)
    f.add_argument("--seed", type=int, required=True)
    f.add_argument("--config")
    f.add_argument("--out", help="output path (default stdout)")
    f.set_defaults(func=cmd_fit)

    v = sub.add_parser("version", help="print the library version")
    v.set_defaults(func=cmd_version)
    return p


def _diag(kind, message):
    text = " ".join(str(message).split())
    sys.stderr.write(f"predstab: {kind}: {text}\n")


def main(argv=None):
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("predstab: %(levelname)s: %(message)s"))
    root = logging.getLogger("predstab")
    root.handlers[:] = [handler]
    root.setLevel(logging.WARNING)
    root.propagate = False

    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "B", 1) < 1:
            raise UsageError("--B must be at least 1")
        if getattr(args, "workers", 1) == 0:
            raise UsageError("--workers must be nonzero")
    except UsageError as exc:
        _diag("usage-error", exc)
        return 2
    try:
        # configs are usage: resolve them before any work starts
        if args.command in ("assess", "fit"):
            args.spec = _config_spec(args.config, args.engine)
        elif args.command == "simulate":
            args.experiment = _experiment(args)
    except PredStabError as exc:
        _diag("usage-error", exc)
        return 2
    try:
        return args.func(args)
    except (PredStabError, ValueError, OSError) as exc:
        _diag(f"error: {type(exc).__name__}", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
