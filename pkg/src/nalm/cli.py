"""Command line entry point: ``nalm <command> ...``.

Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass
from datetime import date
from pathlib import Path
from typing import Sequence

import numpy as np
import yaml

from . import artifacts
from .config import ConfigError, PipelineConfig, ServiceSource, load_pipeline_config, load_section
from .disaggregation import Backend, TrainConfig, load_model, predict, save_model, train
from .evaluation import (confusion, format_metric_table, metric_table, metric_table_json, parse_counts_csv,
                         with_overall)
from .ingest import (IngestConfig, RawSampleFile, build_day, day_start, expand_paths, format_trace_file,
                     read_trace_file, resample_to_1hz)
from .report import ReportTemplate, build_model, load_template, render_report, serialize_model
from .synthetic import SCENARIOS, generate
from .traces import AGGREGATE, LabelConfig, PowerTrace, StateMask, TraceSet, aggregate, label_set
from .usage import DebounceConfig, extract_usages, format_usages

log = logging.getLogger("nalm")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2
SCENARIO_USERS = {"separable": "Alice", "benchmark": "Rune"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise UsageError(f"{self.prog}: {message}")


def _day(text: str) -> date:
    try:
        return date.fromisoformat(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected YYYY-MM-DD, got {text!r}") from None


# stages, shared by the single commands and the pipeline


def stage_ingest(files: Sequence[Path], day: date, config: IngestConfig) -> TraceSet:
    return build_day([read_trace_file(f) for f in expand_paths(files)], day, config)


def stage_synthesize(traces: TraceSet, labels: LabelConfig) -> tuple[PowerTrace, StateMask]:
    return aggregate(traces), label_set(traces, labels)


@dataclass(frozen=True)
class ReportArtifacts:
    usages: str
    behavior: bytes
    report: str


def stage_report(mask: StateMask, user: str, home: str, template: ReportTemplate,
                 debounce: DebounceConfig) -> ReportArtifacts:
    usages = extract_usages(mask, debounce)
    model = build_model(user, usages, mask.appliances, home_id=home)
    return ReportArtifacts(format_usages(usages), serialize_model(model), render_report(model, template))


def _write(path: Path, data: str | bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, str):
        data = data.encode("utf-8")
    path.write_bytes(data)
    log.info("wrote %s", path)


def _read_aggregate(path: Path) -> PowerTrace:
    return artifacts.parse_aggregate(path.read_bytes(), str(path))


def _train_config(args) -> TrainConfig:
    raw = dict(load_section(args.config, "training"))
    if getattr(args, "backend", None):
        raw["backend"] = args.backend
    if args.seed is not None:
        raw["seed"] = args.seed
    try:
        return TrainConfig.from_dict(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"training config: {exc}") from exc


# commands


def cmd_ingest(args) -> None:
    config = IngestConfig.from_dict(load_section(args.config, "ingest"))
    _write(args.out, artifacts.save_trace_archive(stage_ingest(args.files, args.day, config)))


def cmd_synthesize(args) -> None:
    traces = artifacts.load_trace_archive(args.archive.read_bytes())
    agg, labels = stage_synthesize(traces, LabelConfig.from_dict(load_section(args.config, "labels")))
    _write(args.out / "aggregate.csv", artifacts.format_aggregate(agg))
    _write(args.out / "labels.json", artifacts.save_mask(labels))


def cmd_train(args) -> None:
    labels = artifacts.load_mask(args.labels.read_text(encoding="utf-8"))
    model = train(_read_aggregate(args.aggregate), labels, _train_config(args), n_jobs=args.jobs)
    _write(args.out, save_model(model))


def cmd_predict(args) -> None:
    model = load_model(args.model.read_bytes())
    _write(args.out, artifacts.save_mask(predict(model, _read_aggregate(args.aggregate))))


def cmd_evaluate(args) -> None:
    if args.counts is not None:
        if args.pred or args.truth:
            raise UsageError("evaluate takes either --counts or PRED TRUTH, not both")
        counts = with_overall(parse_counts_csv(args.counts.read_text(encoding="utf-8")))
    elif args.pred and args.truth:
        pred = artifacts.load_mask(args.pred.read_text(encoding="utf-8"))
        truth = artifacts.load_mask(args.truth.read_text(encoding="utf-8"))
        counts = confusion(pred, truth)
    else:
        raise UsageError("evaluate needs PRED and TRUTH mask files, or --counts FILE")
    table = metric_table(counts)
    sys.stdout.write(format_metric_table(table))
    if args.out:
        _write(args.out, metric_table_json(table, counts))


def cmd_report(args) -> None:
    mask = artifacts.load_mask(args.mask.read_text(encoding="utf-8"))
    debounce = DebounceConfig.from_dict(load_section(args.config, "debounce"))
    out = stage_report(mask, args.user, args.home, load_template(args.template), debounce)
    if args.usages:
        _write(args.usages, out.usages)
    if args.model_out:
        _write(args.model_out, out.behavior)
    if args.out:
        _write(args.out, out.report)
    sys.stdout.write(out.report)


def cmd_serve(args) -> None:
    from .storage import ServiceConfig, serve

    serve(ServiceConfig.from_env(host=args.host, port=args.port, data_dir=args.data_dir, max_batch=args.max_batch))


def cmd_push(args) -> None:
    from .storage import StorageClient

    trace = _read_aggregate(args.aggregate)
    start = day_start(trace.day)
    rows = [(start + i, w) for i, w in enumerate(trace.samples.tolist())]
    client = StorageClient(args.service_url)
    accepted = sum(client.post(args.home, rows[i:i + args.batch]) for i in range(0, len(rows), args.batch))
    print(f"accepted {accepted} measurements for {args.home}")


def run_pipeline(config: PipelineConfig, out: Path, jobs: int = 1) -> ReportArtifacts:
    """Every stage in sequence, writing the same files the single commands write."""
    train_traces = stage_ingest(config.train.files, config.train.day, config.ingest)
    _write(out / "train" / "traces.nalmtr", artifacts.save_trace_archive(train_traces))
    train_agg, train_labels = stage_synthesize(train_traces, config.labels)
    _write(out / "train" / "aggregate.csv", artifacts.format_aggregate(train_agg))
    _write(out / "train" / "labels.json", artifacts.save_mask(train_labels))
    # later stages read back what was written, exactly as the single commands do
    model_bytes = save_model(train(_read_aggregate(out / "train" / "aggregate.csv"),
                                   artifacts.load_mask((out / "train" / "labels.json").read_text()),
                                   config.training, n_jobs=jobs))
    _write(out / "model.nalm", model_bytes)

    truth = None
    if config.test.files:
        test_traces = stage_ingest(config.test.files, config.test.day, config.ingest)
        _write(out / "test" / "traces.nalmtr", artifacts.save_trace_archive(test_traces))
        test_agg, truth = stage_synthesize(test_traces, config.labels)
        _write(out / "test" / "labels.json", artifacts.save_mask(truth))
    if config.service is not None:
        from .storage import StorageClient

        raw = StorageClient(config.service.url).fetch_day(config.service.home, config.test.day)
        test_agg = resample_to_1hz(raw, config.ingest.gap_fill, config.test.day, AGGREGATE)
        if test_agg.partial:
            raise ValueError(f"service data for {config.service.home} does not cover {config.test.day}")
    _write(out / "test" / "aggregate.csv", artifacts.format_aggregate(test_agg))

    model = load_model((out / "model.nalm").read_bytes())
    _write(out / "predicted.json", artifacts.save_mask(predict(model, _read_aggregate(out / "test" / "aggregate.csv"))))
    pred = artifacts.load_mask((out / "predicted.json").read_text())
    if truth is not None:
        counts = confusion(pred, artifacts.load_mask((out / "test" / "labels.json").read_text()))
        table = metric_table(counts)
        _write(out / "metrics.txt", format_metric_table(table))
        _write(out / "metrics.json", metric_table_json(table, counts))
    result = stage_report(pred, config.user, config.home, config.report_template(), config.debounce)
    _write(out / "usages.csv", result.usages)
    _write(out / "behavior.xml", result.behavior)
    _write(out / "report.txt", result.report)
    return result


def cmd_pipeline(args) -> None:
    config = load_pipeline_config(args.config)
    service = None
    if args.service_url or args.home:
        if not (args.service_url and args.home):
            raise UsageError("--service-url and --home go together")
        service = ServiceSource(args.service_url, args.home)
    config = config.with_overrides(seed=args.seed, service=service)
    result = run_pipeline(config, args.out, jobs=args.jobs)
    if config.test.files:
        sys.stdout.write((args.out / "metrics.txt").read_text())
    sys.stdout.write(result.report)


def cmd_generate(args) -> None:
    scenario = SCENARIOS[args.scenario]
    seed = 0 if args.seed is None else args.seed
    days = generate(scenario, seed)
    for split, synthetic in zip(("train", "test"), days):
        start = day_start(synthetic.traces.day)
        for appliance, trace in synthetic.traces.traces.items():
            seconds = start + np.arange(len(trace), dtype=np.int64)
            raw = RawSampleFile(appliance.name, seconds, trace.samples, appliance=appliance.name)
            _write(args.out / split / f"{appliance.name}.csv", format_trace_file(raw))
    config = {
        "seed": seed,
        "user": SCENARIO_USERS[scenario.name],
        "home": f"{scenario.name}-home",
        "train": {"day": scenario.days[0].isoformat(), "files": ["train"]},
        "test": {"day": scenario.days[1].isoformat(), "files": ["test"]},
        "ingest": {"gap_fill": 10, "appliances": {p.name: p.type_tag for p in scenario.profiles}},
        "training": {"backend": args.backend, "window_w": 9},
        "debounce": {"min_gap": 60, "min_len": 120},
        "template": "usage",
    }
    _write(args.out / "pipeline.yaml", yaml.safe_dump(config, sort_keys=False))


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nalm", description="Appliance usage detection from an aggregate power signal.")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging (-vv for debug)")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def command(name: str, func, help: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help, description=help)
        p.set_defaults(func=func)
        return p

    p = command("ingest", cmd_ingest, "Build a trace archive from per-appliance files of one day.")
    p.add_argument("files", nargs="+", type=Path)
    p.add_argument("--day", type=_day, required=True)
    p.add_argument("--config", type=Path)
    p.add_argument("--out", type=Path, required=True)

    p = command("synthesize", cmd_synthesize, "Write the virtual meter aggregate and threshold labels of an archive.")
    p.add_argument("archive", type=Path)
    p.add_argument("--config", type=Path)
    p.add_argument("--out", type=Path, required=True, help="directory for aggregate.csv and labels.json")

    p = command("train", cmd_train, "Train a disaggregation model.")
    p.add_argument("aggregate", type=Path)
    p.add_argument("labels", type=Path)
    p.add_argument("--backend", choices=[b.value for b in Backend])
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--config", type=Path)
    p.add_argument("--out", type=Path, required=True)

    p = command("predict", cmd_predict, "Predict per-second appliance states.")
    p.add_argument("model", type=Path)
    p.add_argument("aggregate", type=Path)
    p.add_argument("--out", type=Path, required=True)

    p = command("evaluate", cmd_evaluate, "Print the metric table for predicted vs true masks or a counts file.")
    p.add_argument("pred", type=Path, nargs="?")
    p.add_argument("truth", type=Path, nargs="?")
    p.add_argument("--counts", type=Path, help="CSV with name,tp,fp,tn,fn rows")
    p.add_argument("--out", type=Path, help="also write the table as JSON")

    p = command("report", cmd_report, "Render a usage report from a predicted mask.")
    p.add_argument("mask", type=Path)
    p.add_argument("--user", required=True)
    p.add_argument("--home", default="home")
    p.add_argument("--template", default="usage", help="built-in template name or YAML file")
    p.add_argument("--config", type=Path)
    p.add_argument("--usages", type=Path, help="write the usage list here")
    p.add_argument("--model-out", type=Path, help="write the behavior model document here")
    p.add_argument("--out", type=Path)

    p = command("serve", cmd_serve, "Run the measurement storage service.")
    p.add_argument("--host")
    p.add_argument("--port", type=int)
    p.add_argument("--data-dir", type=Path)
    p.add_argument("--max-batch", type=int)

    p = command("push", cmd_push, "Upload an aggregate file to the storage service.")
    p.add_argument("aggregate", type=Path)
    p.add_argument("--service-url", required=True)
    p.add_argument("--home", required=True)
    p.add_argument("--batch", type=int, default=5000)

    p = command("pipeline", cmd_pipeline, "Run ingest through report as configured.")
    p.add_argument("--config", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--service-url")
    p.add_argument("--home")

    p = command("generate", cmd_generate, "Write a synthetic scenario as appliance files plus a pipeline config.")
    p.add_argument("scenario", choices=sorted(SCENARIOS))
    p.add_argument("--seed", type=int)
    p.add_argument("--backend", choices=[b.value for b in Backend], default=Backend.FOREST.value)
    p.add_argument("--out", type=Path, required=True)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=[logging.WARNING, logging.INFO, logging.DEBUG][min(args.verbose, 2)],
                            format="%(levelname)s %(name)s: %(message)s")
        if getattr(args, "jobs", 1) < 1:
            raise UsageError("--jobs must be >= 1")
        args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except KeyboardInterrupt:
        return EXIT_RUNTIME
    except Exception as exc:
        log.debug("failure", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
