"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 partial batch failure, 3 data or
format error.
"""

import argparse
import csv
import datetime
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import SCHEMA_VERSION, __version__
from .datasets import file_digest, load_descriptors, read_records, save_descriptors
from .descriptors import ALL_DESCRIPTORS, BlockGridSpec, analyze
from .errors import EncostError, JoinError
from .estimation import (FitConfig, assign_folds, class_map, cross_validate,
                         descriptor_grid_evaluation, fit_energy_linear, fit_oracle,
                         fit_time_model, oracle_bound_mape)
from .models import (ContentFactorSpec, CostModel, default_intra_count, predict_energy,
                     predict_time_kpix, content_factor)
from .power import MeasurementSeries, PowerTrace, confidence_satisfied, encoding_energy
from .y4m import open_y4m

EXIT_OK, EXIT_USAGE, EXIT_PARTIAL, EXIT_DATA = 0, 1, 2, 3

log = logging.getLogger("encost")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _manifest(args, inputs, digest=None) -> dict:
    config = {k: v for k, v in sorted(vars(args).items()) if k not in ("func",)}
    out = {
        "command": args.command,
        "inputs": [str(p) for p in inputs],
        "config": json.loads(json.dumps(config, default=str)),
        "tool_version": __version__,
        "dataset_hash": digest,
    }
    if not args.reproducible:
        out["created"] = datetime.datetime.now(datetime.timezone.utc).isoformat()
    return out


def _dump(data, path=None):
    text = json.dumps(data, indent=2, sort_keys=True) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("ENCOST_THREADS", "")))
    except ValueError:
        return os.cpu_count() or 1


def _selection(text):
    names = [n.strip() for n in text.split(",") if n.strip()]
    unknown = set(names) - set(ALL_DESCRIPTORS)
    if unknown:
        raise argparse.ArgumentTypeError(f"unknown descriptors: {', '.join(sorted(unknown))}")
    return names


def cmd_analyze(args) -> int:
    inputs = list(args.input or [])
    if args.list:
        inputs += [ln.strip() for ln in Path(args.list).read_text().splitlines() if ln.strip()]
    if not inputs:
        raise UsageError("analyze needs --input or --list")
    ultrafast = {}
    if args.ultrafast_csv:
        with open(args.ultrafast_csv, newline="") as fh:
            ultrafast = {row["sequence_id"]: float(row["t_preset13"]) for row in csv.DictReader(fh)}
    if args.ultrafast_time is not None:
        if len(inputs) != 1:
            raise UsageError("--ultrafast-time applies to a single input; use --ultrafast-csv")
        ultrafast[Path(inputs[0]).stem] = args.ultrafast_time
    spec = BlockGridSpec(args.block_size)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    def run(path):
        seq = Path(path).stem if path != "-" else "stdin"
        with open_y4m(path) as stream:
            ds = analyze(stream, spec, args.descriptors, seq, ultrafast.get(seq),
                         args.frame_aggregate)
        target = out_dir / f"{seq}.json"
        save_descriptors(target, ds, {"manifest": _manifest(args, [path])})
        return target

    failures = 0
    with ThreadPoolExecutor(min(_threads(), len(inputs))) as pool:
        futures = [(p, pool.submit(run, p)) for p in inputs]
        for path, fut in futures:
            try:
                print(fut.result())
            except (EncostError, OSError) as exc:
                failures += 1
                print(f"{path}: {exc}", file=sys.stderr)
    if failures == 0:
        return EXIT_OK
    return EXIT_PARTIAL if failures < len(inputs) else EXIT_DATA


def _content_spec(args) -> ContentFactorSpec:
    s_norm, t_norm = args.spatial_normalizer, args.temporal_normalizer
    if args.spatial == "ultrafast":
        s_norm = t_norm = "identity"
    return ContentFactorSpec(args.spatial, args.temporal, s_norm, t_norm, args.floor)


def _fit_config(args) -> FitConfig:
    return FitConfig(args.objective, args.max_iterations, args.tolerance, seed=args.seed)


def _load_inputs(args):
    records = read_records(args.records)
    descriptors = load_descriptors(args.descriptors) if args.descriptors else {}
    return records, descriptors


def _check_join(records, descriptors, specs):
    if all(s.is_blind for s in specs):
        return
    missing = {r.sequence_id for r in records} - set(descriptors)
    if missing:
        raise JoinError("records reference sequences without descriptors: "
                        + ", ".join(sorted(missing)), missing)


def cmd_fit(args) -> int:
    records, descriptors = _load_inputs(args)
    spec = _content_spec(args)
    _check_join(records, descriptors, [spec])
    fit = fit_time_model(records, descriptors, spec, _fit_config(args))
    energy = None
    if any(r.energy_j is not None for r in records):
        energy = fit_energy_linear(records, args.energy_weighting)
    meta = fit.metadata()
    meta.update({
        "preset_range": [min(r.preset for r in records), max(r.preset for r in records)],
        "crf_range": [min(r.crf for r in records), max(r.crf for r in records)],
        "n_records": len(records),
        "energy_weighting": args.energy_weighting,
        "manifest": _manifest(args, [args.records] + ([args.descriptors] if args.descriptors else []),
                              file_digest(args.records, *([args.descriptors] if args.descriptors else []))),
    })
    if not args.reproducible:
        meta["date"] = meta["manifest"]["created"]
    first = next(iter(descriptors.values()), None)
    model = CostModel(fit.params, spec, energy,
                      first.block_spec if first else BlockGridSpec(), meta)
    model.save(args.out)
    print(f"objective {fit.objective:.6g}  training MAPE {fit.train_mape:.2f}%"
          + ("" if fit.converged else "  (not converged)"))
    return EXIT_OK


def cmd_evaluate(args) -> int:
    records, descriptors = _load_inputs(args)
    folds = assign_folds(class_map(records), args.folds, args.seed)
    cfg = _fit_config(args)
    energy_mode = None if args.energy_mode == "none" else args.energy_mode
    inputs = [args.records] + ([args.descriptors] if args.descriptors else [])
    manifest = _manifest(args, inputs, file_digest(*inputs))
    out = {"schema_version": SCHEMA_VERSION, "manifest": manifest,
           "folds": {s: f for s, f in sorted(folds.fold_of.items())}}
    if args.grid:
        grid = descriptor_grid_evaluation(records, descriptors, cfg, folds, energy_mode)
        out["grid"] = grid.to_dict()
        text = "Encoding time MAPE (%)\n" + grid.table("time")
        if any(c.energy_mape is not None for c in grid.cells):
            text += "\nEncoding energy MAPE (%)\n" + grid.table("energy")
    else:
        spec = _content_spec(args)
        _check_join(records, descriptors, [spec])
        report = cross_validate(records, descriptors, spec, cfg, folds, energy_mode)
        out["report"] = report.to_dict()
        text = (f"{spec.label}: mean MAPE {report.mean_mape:.2f}% over folds "
                + ", ".join(f"{v:.2f}" for v in report.per_fold_mape) + "\n")
        if report.energy_mean_mape is not None:
            text += f"energy mean MAPE {report.energy_mean_mape:.2f}%\n"
    sys.stdout.write(text)
    if args.out:
        _dump(out, args.out)
        Path(args.out).with_suffix(".txt").write_text(text)
    return EXIT_OK


def cmd_oracle(args) -> int:
    records = read_records(args.records)
    fit, oracle = fit_oracle(records, _fit_config(args))
    bound = oracle_bound_mape(records, fit.params, oracle)
    print(f"content-blind MAPE {fit.train_mape:.2f}%  oracle-factor MAPE {bound:.2f}%")
    csv_text = oracle.to_csv()
    if args.out:
        Path(args.out).write_text(csv_text)
    else:
        sys.stdout.write(csv_text)
    return EXIT_OK


def cmd_predict(args) -> int:
    model = CostModel.load(args.model)
    ds = None
    if args.descriptors:
        ds = next(iter(load_descriptors(args.descriptors).values()))
    width = args.width or (ds.width if ds else None)
    height = args.height or (ds.height if ds else None)
    frames = args.frames or (ds.frame_count if ds else None)
    if not (width and height and frames):
        raise UsageError("need --width, --height and --frames (or a descriptor file carrying them)")
    meta = model.fit_metadata
    for name, value in (("preset", args.preset), ("crf", args.crf)):
        lo, hi = meta.get(f"{name}_range", (value, value))
        if not lo <= value <= hi:
            log.warning("%s %d outside fitted range [%d, %d]; extrapolating", name, value, lo, hi)
    n_intra = args.n_intra or default_intra_count(frames, args.fps)
    c = content_factor(ds, model.content_spec)
    t_kpix = predict_time_kpix(model.time_params, c, n_intra, args.crf, args.preset)
    result = {"content_factor": c, "time_kpix": t_kpix,
              "time_s": t_kpix * width * height / 1000.0 * frames}
    if model.energy_params is not None:
        result["energy_j"] = predict_energy(model.energy_params, t_kpix, width, height, frames)
    if args.json:
        _dump(result)
    else:
        print(f"time_s {result['time_s']:.6g}")
        if "energy_j" in result:
            print(f"energy_j {result['energy_j']:.6g}")
    return EXIT_OK


def cmd_ingest_power(args) -> int:
    result = {}
    if args.total or args.idle:
        if not (args.total and args.idle):
            raise UsageError("--total and --idle go together")
        total = PowerTrace.from_csv(args.total, "total")
        idle = PowerTrace.from_csv(args.idle, "idle")
        duration = args.duration if args.duration is not None else total.end
        result["duration_s"] = duration
        result["energy_j"] = encoding_energy(total, idle, duration)
    if args.series:
        conf = confidence_satisfied(MeasurementSeries.from_csv(args.series, args.alpha, args.beta))
        result["confidence"] = {"satisfied": conf.satisfied, "lhs": conf.lhs, "rhs": conf.rhs,
                                "m": conf.m, "mean": conf.mean, "std": conf.std,
                                "t_critical": conf.t_critical, "alpha": args.alpha,
                                "beta": args.beta,
                                "quantile_convention": conf.quantile_convention}
    if not result:
        raise UsageError("ingest-power needs --total/--idle and/or --series")
    if args.json:
        _dump(result)
        return EXIT_OK
    if "energy_j" in result:
        print(f"E_enc {result['energy_j']:.6g} J over {result['duration_s']:.6g} s")
    if "confidence" in result:
        c = result["confidence"]
        print(f"m {c['m']}  lhs {c['lhs']:.6g}  rhs {c['rhs']:.6g}  "
              f"{'satisfied' if c['satisfied'] else 'not satisfied'}")
    return EXIT_OK


def _add_model_flags(p):
    p.add_argument("--records", required=True, help="encoding records CSV")
    p.add_argument("--descriptors", help="descriptor JSON file or directory")
    p.add_argument("--spatial", default="vca", choices=("si", "vca", "var", "ultrafast", "none"))
    p.add_argument("--temporal", default="vca", choices=("ti", "vca", "flow", "ultrafast", "none"))
    p.add_argument("--spatial-normalizer", default="ln", choices=("ln", "identity"))
    p.add_argument("--temporal-normalizer", default="identity", choices=("ln", "identity"))
    p.add_argument("--floor", type=float, default=1e-6)
    p.add_argument("--objective", default="relative-squared",
                   choices=("relative-squared", "absolute-squared"))
    p.add_argument("--max-iterations", type=int, default=200)
    p.add_argument("--tolerance", type=float, default=1e-12)
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="encost", description="SVT-AV1 encoding time and energy modeling from video content descriptors")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    parser.add_argument("--reproducible", action="store_true",
                        help="omit timestamps so identical inputs give byte-identical outputs")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("analyze", help="compute content descriptors of Y4M files")
    p.add_argument("--input", action="append", help="Y4M file ('-' for stdin); repeatable")
    p.add_argument("--list", help="file with one Y4M path per line")
    p.add_argument("--block-size", type=int, default=32, choices=(16, 32, 64))
    p.add_argument("--descriptors", type=_selection, default=list(ALL_DESCRIPTORS),
                   help="comma-separated subset of " + ",".join(ALL_DESCRIPTORS))
    p.add_argument("--frame-aggregate", default="mean", choices=("mean", "max"))
    p.add_argument("--ultrafast-time", type=float, help="preset-13 encode time in seconds")
    p.add_argument("--ultrafast-csv", help="CSV with sequence_id,t_preset13")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("fit", help="fit time and energy models")
    _add_model_flags(p)
    p.add_argument("--energy-weighting", default="ordinary", choices=("ordinary", "relative"))
    p.add_argument("--out", required=True, help="model JSON path")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("evaluate", help="cross-validated evaluation")
    _add_model_flags(p)
    p.add_argument("--grid", action="store_true", help="evaluate every descriptor pairing")
    p.add_argument("--folds", type=int, default=3)
    p.add_argument("--energy-mode", default="all", choices=("all", "cv", "none"))
    p.add_argument("--out", help="report JSON path; a .txt table is written alongside")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("oracle", help="per-sequence oracle content factors (CSV)")
    p.add_argument("--records", required=True)
    p.add_argument("--objective", default="relative-squared",
                   choices=("relative-squared", "absolute-squared"))
    p.add_argument("--max-iterations", type=int, default=200)
    p.add_argument("--tolerance", type=float, default=1e-12)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("predict", help="predict encoding time and energy")
    p.add_argument("--model", required=True)
    p.add_argument("--descriptors", help="descriptor JSON of the sequence")
    p.add_argument("--preset", type=int, required=True)
    p.add_argument("--crf", type=int, required=True)
    p.add_argument("--n-intra", type=int)
    p.add_argument("--fps", type=float, default=30.0, help="for the default intra count")
    p.add_argument("--width", type=int)
    p.add_argument("--height", type=int)
    p.add_argument("--frames", type=int)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("ingest-power", help="idle-subtracted energy and stopping rule")
    p.add_argument("--total", help="total power trace CSV (t_s,power_w)")
    p.add_argument("--idle", help="idle power trace CSV (t_s,power_w)")
    p.add_argument("--duration", type=float, help="encode duration T in seconds")
    p.add_argument("--series", help="repeated energy measurements CSV (energy_j)")
    p.add_argument("--alpha", type=float, default=0.99)
    p.add_argument("--beta", type=float, default=0.02)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_ingest_power)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"encost {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (EncostError, OSError, KeyError) as exc:
        print(f"encost {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
