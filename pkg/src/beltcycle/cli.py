"""Command-line entry point.

Subcommands: generate, train, eval, infer, quantize, report. Every run is
deterministic given its inputs and seed(s) and writes a manifest listing
parameters plus SHA-256 hashes of inputs and outputs, enough to re-run it.
Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .classifiers import FAMILIES, default_params
from .datamodel import CycleClass, DataFormatError, OperationMode
from .evaluate import (
    DEFAULT_TOLERANCE_SECONDS,
    ExperimentConfig,
    ExperimentReport,
    fixed_split_run,
    index_dataset,
    loocv_run,
    train_duty_classifier,
    train_mode_classifier,
)
from .features import extract_series
from .ingest import (
    Dataset,
    iter_sensor_csv,
    read_dataset,
    write_dataset,
    write_events_csv,
)
from .modelio import load_model, save_model
from .pipeline import PipelineConfig
from .quantize import agreement_report, calibrate, quantize_mlp, quantize_tree_model
from .streaming import StreamingPipeline
from .synth import GeneratorConfig, default_config, drifted_year_config, generate_dataset, noiseless_config

MANIFEST_TAG = "beltcycle-manifest/1"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # noqa: A003 - argparse API
        raise UsageError(message)


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with path.open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write_manifest(
    path: Path, command: str, parameters: dict, inputs: dict[str, Path],
    outputs: dict[str, Path],
) -> None:
    manifest = {
        "format": MANIFEST_TAG,
        "tool_version": __version__,
        "command": command,
        "parameters": parameters,
        "inputs": {k: {"path": str(p), "sha256": _sha256(p)} for k, p in inputs.items()},
        "outputs": {k: {"path": str(p), "sha256": _sha256(p)} for k, p in outputs.items()},
    }
    path.write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _parse_seed_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x != ""]
    except ValueError:
        raise UsageError(f"invalid seed list {text!r}") from None


def _parse_month_list(text: str | None) -> list[str] | None:
    if text is None:
        return None
    return [x for x in text.split(",") if x != ""]


# --------------------------------------------------------------------------
# generate


def cmd_generate(args) -> int:
    if args.config is not None:
        config = GeneratorConfig.from_dict(json.loads(Path(args.config).read_text()))
    elif args.preset == "drifted-year":
        config = drifted_year_config()
    elif args.preset == "noiseless":
        config = noiseless_config()
    else:
        config = default_config()
    if args.seed is not None:
        config.seed = args.seed
    if args.n_cycles is not None:
        config.n_cycles = args.n_cycles
    if args.p_abnormal is not None:
        config.p_abnormal = args.p_abnormal
    try:
        config.validate()
    except ValueError as exc:
        raise UsageError(str(exc)) from None

    dataset = generate_dataset(config)
    out = Path(args.out)
    paths = write_dataset(dataset, out)

    by_class = {c: 0 for c in CycleClass}
    for ev in dataset.reference_cycles:
        by_class[ev.cycle_class] += 1
    print(f"generated {len(dataset.records)} records, "
          f"{len(dataset.reference_cycles)} cycles "
          f"({by_class[CycleClass.NORMAL]} normal / {by_class[CycleClass.ABNORMAL]} abnormal)")
    cycles_by_month = dataset.cycles_by_month()
    for tag, recs in dataset.records_by_month().items():
        print(f"  {tag}: {len(recs)} records, {len(cycles_by_month.get(tag, []))} cycles")

    _write_manifest(out / "manifest.json", "generate",
                    {"config": config.to_dict()}, {},
                    {k: p for k, p in paths.items()})
    return 0


# --------------------------------------------------------------------------
# train


def _require_family(name: str) -> str:
    if name not in FAMILIES:
        raise UsageError(f"unknown model family {name!r}; choose from {', '.join(FAMILIES)}")
    return name


def cmd_train(args) -> int:
    dataset = read_dataset(args.dataset)
    months = index_dataset(dataset)
    cfg = ExperimentConfig(
        approach=args.approach,
        mode_family=_require_family(args.model),
        duty_family=_require_family(args.duty_model),
        mode_params=None if args.grid else default_params(args.model),
        duty_params=None if args.grid else default_params(args.duty_model),
        tolerance_s=args.tolerance,
    )
    month_list = list(months.values())
    mode_model, mode_params = train_mode_classifier(month_list, cfg, args.seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_model(mode_model, out)
    outputs = {"mode_model": out}
    parameters = {
        "approach": args.approach, "model": args.model, "seed": args.seed,
        "grid_search": bool(args.grid), "mode_hyperparameters": _jsonable(mode_params),
    }
    if args.approach == 3:
        duty_model, duty_params = train_duty_classifier(month_list, mode_model, cfg, args.seed)
        duty_out = Path(args.duty_out) if args.duty_out else out.with_name(out.stem + ".duty.json")
        save_model(duty_model, duty_out)
        outputs["duty_model"] = duty_out
        parameters["duty_model"] = args.duty_model
        parameters["duty_hyperparameters"] = _jsonable(duty_params)
    inputs = {"sensors": Path(args.dataset) / "sensors.csv",
              "events": Path(args.dataset) / "events.csv"}
    _write_manifest(out.with_name(out.stem + ".manifest.json"), "train",
                    parameters, inputs, outputs)
    print(f"trained {args.model} (approach {args.approach}); wrote {out}")
    for name, params in (("mode", mode_params),):
        print(f"  {name} hyperparameters: {_jsonable(params)}")
    return 0


def _jsonable(value):
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    return value


# --------------------------------------------------------------------------
# eval


def cmd_eval(args) -> int:
    if args.tolerance <= 0:
        raise UsageError("tolerance must be positive")
    dataset = read_dataset(args.dataset)
    cfg = ExperimentConfig(
        approach=args.approach,
        mode_family=_require_family(args.model),
        duty_family=_require_family(args.duty_model),
        mode_params=None if args.grid else default_params(args.model),
        duty_params=None if args.grid else default_params(args.duty_model),
        tolerance_s=args.tolerance,
    )
    seeds = _parse_seed_list(args.seeds)
    duty_seeds = _parse_seed_list(args.duty_seeds) if args.duty_seeds else None
    train_months = _parse_month_list(args.train_months)
    test_months = _parse_month_list(args.test_months)
    if (train_months is None) != (test_months is None):
        raise UsageError("--train-months and --test-months must be given together")
    if train_months is not None:
        report = fixed_split_run(dataset, cfg, train_months, test_months, seeds, duty_seeds)
    else:
        report = loocv_run(dataset, cfg, seeds, duty_seeds)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    metrics_path = out / "metrics.csv"
    report.write_csv(metrics_path)
    summary = report.summary_table()
    summary_path = out / "summary.txt"
    summary_path.write_text(summary + "\n", encoding="utf-8")
    print(summary)
    if args.detection_only:
        print(f"detection mean F1: {report.mean_f1('detection'):.4f}")
    _write_manifest(out / "manifest.json", "eval",
                    {"approach": args.approach, "model": args.model,
                     "duty_model": args.duty_model, "tolerance": args.tolerance,
                     "seeds": seeds, "duty_seeds": duty_seeds,
                     "train_months": train_months, "test_months": test_months,
                     "grid_search": bool(args.grid)},
                    {"sensors": Path(args.dataset) / "sensors.csv",
                     "events": Path(args.dataset) / "events.csv"},
                    {"metrics": metrics_path, "summary": summary_path})
    return 0


# --------------------------------------------------------------------------
# infer


def cmd_infer(args) -> int:
    sensors = Path(args.sensors)
    if sensors.is_dir():
        sensors = sensors / "sensors.csv"
    mode_model = load_model(args.model_file)
    duty_model = load_model(args.duty_model_file) if args.duty_model_file else None
    pipe = PipelineConfig(args.approach, mode_model, duty_model,
                          speed_threshold=args.speed_threshold)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    modes_path = out / "predicted_modes.csv"
    events_path = out / "events.csv"

    stream = StreamingPipeline(pipe)
    events = []
    with modes_path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write("timestamp_min,predicted_mode,filtered_mode\n")
        for record in iter_sensor_csv(sensors):
            step = stream.push(record)
            for ts, raw, filt in step.rows:
                fh.write(f"{ts},{OperationMode(raw).display_name},"
                         f"{OperationMode(filt).display_name}\n")
            events.extend(step.events)
        step = stream.finish()
        for ts, raw, filt in step.rows:
            fh.write(f"{ts},{OperationMode(raw).display_name},"
                     f"{OperationMode(filt).display_name}\n")
        events.extend(step.events)
    write_events_csv(events, events_path)

    print(f"emitted {len(events)} events; "
          f"{len(stream.pending_onsets)} pending open cycle(s)")
    for onset in stream.pending_onsets:
        print(f"  pending cycle open since minute {onset} (not emitted)")
    inputs = {"sensors": sensors, "mode_model": Path(args.model_file)}
    if args.duty_model_file:
        inputs["duty_model"] = Path(args.duty_model_file)
    _write_manifest(out / "manifest.json", "infer",
                    {"approach": args.approach,
                     "speed_threshold": args.speed_threshold,
                     "pending_onsets": stream.pending_onsets,
                     "dropped_short": stream.dropped_short},
                    inputs,
                    {"predicted_modes": modes_path, "events": events_path})
    return 0


# --------------------------------------------------------------------------
# quantize


def cmd_quantize(args) -> int:
    model = load_model(args.model_file)
    dataset = read_dataset(args.dataset)
    X = np.concatenate([extract_series(seg)
                        for seg in dataset.records_by_month().values()])
    family = getattr(model, "kind", None) or "mlp"
    if family in ("dt", "rf", "et", "xgb"):
        quantized = quantize_tree_model(model, calibrate(X))
    else:
        quantized = quantize_mlp(model, X)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_model(quantized, out)
    report = agreement_report(model, quantized, X)
    print(f"quantized {family}; argmax agreement on calibration set: "
          f"{report.agreement:.4f} ({report.disagreement_count()} disagreements / "
          f"{report.n_samples} samples)")
    clamped = getattr(quantized, "clamped_thresholds", 0)
    if clamped:
        print(f"  warning: {clamped} tree threshold(s) clamped to the int8 range")
    _write_manifest(out.with_name(out.stem + ".manifest.json"), "quantize",
                    {"agreement": report.agreement, "clamped_thresholds": clamped},
                    {"model": Path(args.model_file),
                     "sensors": Path(args.dataset) / "sensors.csv"},
                    {"quantized_model": out})
    return 0


# --------------------------------------------------------------------------
# report


def cmd_report(args) -> int:
    report = ExperimentReport.read_csv(args.metrics)
    table = report.summary_table()
    print(table)
    if args.out:
        Path(args.out).write_text(table + "\n", encoding="utf-8")
    return 0


# --------------------------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(prog="beltcycle",
                     description="Conveyor-belt duty-cycle anomaly detection toolkit")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a synthetic labeled dataset")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--config", help="generator config JSON file")
    p.add_argument("--preset", choices=("default", "drifted-year", "noiseless"),
                   default="default")
    p.add_argument("--seed", type=int)
    p.add_argument("--n-cycles", type=int)
    p.add_argument("--p-abnormal", type=float)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="train classifier(s) on a labeled dataset")
    p.add_argument("dataset", help="dataset directory")
    p.add_argument("--approach", type=int, choices=(1, 2, 3), required=True)
    p.add_argument("--model", default="et", help="mode classifier family")
    p.add_argument("--duty-model", default="et", help="duty-cycle classifier family (approach 3)")
    p.add_argument("--out", required=True, help="output model JSON path")
    p.add_argument("--duty-out", help="output duty model path (approach 3)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--grid", action="store_true", help="run the full hyperparameter grid search")
    p.add_argument("--tolerance", type=float, default=DEFAULT_TOLERANCE_SECONDS)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="cross-validated or fixed-split evaluation")
    p.add_argument("dataset", help="dataset directory")
    p.add_argument("--approach", type=int, choices=(1, 2, 3), required=True)
    p.add_argument("--model", default="et")
    p.add_argument("--duty-model", default="et")
    p.add_argument("--tolerance", type=float, default=DEFAULT_TOLERANCE_SECONDS)
    p.add_argument("--seeds", default="0,1,2,3,4,5,6,7,8,9")
    p.add_argument("--duty-seeds", default=None)
    p.add_argument("--grid", action="store_true")
    p.add_argument("--train-months", help="comma-separated month tags (fixed split)")
    p.add_argument("--test-months", help="comma-separated month tags (fixed split)")
    p.add_argument("--detection-only", action="store_true",
                   help="also print the class-insensitive detection F1")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("infer", help="streaming inference over a sensor CSV")
    p.add_argument("sensors", help="sensors.csv path or dataset directory")
    p.add_argument("--approach", type=int, choices=(1, 2, 3), required=True)
    p.add_argument("--model-file", required=True)
    p.add_argument("--duty-model-file")
    p.add_argument("--speed-threshold", type=float, default=5.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("quantize", help="post-training int8 quantization of a model")
    p.add_argument("--model-file", required=True)
    p.add_argument("--dataset", required=True, help="calibration dataset directory")
    p.add_argument("--out", required=True, help="output quantized model path")
    p.set_defaults(func=cmd_quantize)

    p = sub.add_parser("report", help="summarize a metrics CSV")
    p.add_argument("metrics", help="metrics.csv produced by eval")
    p.add_argument("--out", help="optional summary output path")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (DataFormatError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except BrokenPipeError:
        return 0
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
