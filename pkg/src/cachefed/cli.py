"""Command-line entry point.

Exit codes: 0 success, 1 runtime or data error, 2 usage or config error.
Errors are reported on stderr as a single JSON object.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import re
import sys
from typing import Any, Optional

from . import __version__
from .analytics import LabelError, daily_aggregate, outcomes_from_labels
from .core import ValidationError, config_from_dict, config_to_dict
from .engine import simulate
from .ingest import (IngestError, read_outcomes, read_trace, schema_for_path, write_bytes,
                     write_outcomes, write_trace)
from .report import write_analytics
from .whatif import ScenarioError, diff, run_scenarios, scenarios_from_dict
from .workload import WorkloadSpec, generate_trace

EXIT_OK, EXIT_DATA, EXIT_USAGE = 0, 1, 2
_SAFE_NAME = re.compile(r"^[A-Za-z0-9._-]+$")


class CliError(Exception):
    def __init__(self, code: int, kind: str, messages, **details):
        self.code = code
        self.payload = {"error": kind, "messages": list(messages), **details}
        super().__init__(kind)


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _load_json(path: str, what: str) -> Any:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise CliError(EXIT_USAGE, f"unreadable {what}", [str(exc)])
    except ValueError as exc:
        raise CliError(EXIT_USAGE, f"invalid {what}", [str(exc)])


def _write_json(path: str, doc: Any) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _manifest(command: str, inputs: dict[str, str], **extra) -> dict[str, Any]:
    return {
        "tool": "cachefed",
        "version": __version__,
        "command": command,
        "inputs": {role: {"path": path, "sha256": _sha256(path)} for role, path in inputs.items()},
        **extra,
    }


def _load_trace(path: str, skip_bad_rows: bool):
    try:
        events, report = read_trace(path)
    except IngestError as exc:
        raise CliError(EXIT_DATA, "unparseable trace", [str(exc)])
    if report.rows_rejected and not skip_bad_rows:
        raise CliError(EXIT_DATA, "unparseable trace",
                       [f"{report.rows_rejected} of {report.rows_read} rows rejected"],
                       ingest_report=report.to_dict())
    return events, report


def cmd_generate(args) -> int:
    doc = _load_json(args.spec, "workload spec")
    if isinstance(doc, dict) and args.seed is not None:
        doc = {**doc, "seed": args.seed}
    try:
        spec = WorkloadSpec.from_dict(doc)
    except (ValidationError, TypeError) as exc:
        raise CliError(EXIT_USAGE, "invalid workload spec",
                       getattr(exc, "errors", [str(exc)]))
    trace = generate_trace(spec)
    write_bytes(args.out, write_trace(trace, schema_for_path(args.out)))
    return EXIT_OK


def _simulate_into(trace, config, out_dir: str) -> list[str]:
    outcomes = simulate(trace, config)
    os.makedirs(out_dir, exist_ok=True)
    write_bytes(os.path.join(out_dir, "outcomes.csv"), write_outcomes(outcomes))
    extra = {
        "bypassed": sum(1 for o in outcomes if o.bypassed),
        "evicted_files": sum(len(o.evicted) for o in outcomes),
    }
    return ["outcomes.csv"] + write_analytics(daily_aggregate(outcomes), out_dir, extra)


def _load_config(path: str):
    try:
        return config_from_dict(_load_json(path, "config"))
    except ValidationError as exc:
        raise CliError(EXIT_USAGE, "invalid config", exc.errors)


def cmd_simulate(args) -> int:
    config = _load_config(args.config)
    trace, report = _load_trace(args.trace, args.skip_bad_rows)
    outputs = _simulate_into(trace, config, args.out)
    _write_json(os.path.join(args.out, "manifest.json"), _manifest(
        "simulate", {"trace": args.trace, "config": args.config},
        config=config_to_dict(config), ingest=report.to_dict(), outputs=outputs))
    return EXIT_OK


def cmd_analyze(args) -> int:
    if args.outcomes:
        try:
            outcomes = read_outcomes(args.outcomes)
        except IngestError as exc:
            raise CliError(EXIT_DATA, "unparseable outcomes", [str(exc)])
        inputs = {"outcomes": args.outcomes}
        ingest = None
    else:
        events, report = _load_trace(args.labeled_trace, args.skip_bad_rows)
        try:
            outcomes = outcomes_from_labels(events)
        except LabelError as exc:
            raise CliError(EXIT_USAGE, "missing hit labels", [str(exc)])
        inputs = {"labeled_trace": args.labeled_trace}
        ingest = report.to_dict()
    outputs = write_analytics(daily_aggregate(outcomes), args.out)
    _write_json(os.path.join(args.out, "manifest.json"),
                _manifest("analyze", inputs, ingest=ingest, outputs=outputs))
    return EXIT_OK


def cmd_whatif(args) -> int:
    doc = _load_json(args.scenarios, "scenario file")
    try:
        doc_trace, configs = scenarios_from_dict(doc)
    except ScenarioError as exc:
        raise CliError(EXIT_USAGE, "invalid scenarios", [str(exc)])
    except ValidationError as exc:
        raise CliError(EXIT_USAGE, "invalid scenarios", exc.errors)
    bad = [name for name, _ in configs if not _SAFE_NAME.match(name)]
    if bad:
        raise CliError(EXIT_USAGE, "invalid scenarios",
                       [f"scenario name not usable as a directory name: {n!r}" for n in bad])
    trace_path = args.trace
    if trace_path is None and doc_trace is not None:
        trace_path = os.path.join(os.path.dirname(os.path.abspath(args.scenarios)), doc_trace)
    if trace_path is None:
        raise CliError(EXIT_USAGE, "no trace", ["pass --trace or set \"trace\" in the scenario file"])
    trace, report = _load_trace(trace_path, args.skip_bad_rows)

    results = run_scenarios(trace, configs, workers=args.workers)
    os.makedirs(args.out, exist_ok=True)
    for name, cfg in configs:
        res = results[name]
        sub = os.path.join(args.out, name)
        os.makedirs(sub, exist_ok=True)
        write_bytes(os.path.join(sub, "outcomes.csv"), write_outcomes(res.outcomes))
        write_analytics(list(res.records), sub, {"metrics": res.metrics()})

    baseline = results[configs[0][0]]
    diffs = [diff(baseline, results[name]).to_dict() for name, _ in configs[1:]]
    _write_json(os.path.join(args.out, "diff.json"), {"baseline": baseline.name, "diffs": diffs})
    rows = ["variant,metric,baseline,variant_value,absolute,relative"]
    fmt = lambda v: "" if v is None else repr(v)  # noqa: E731
    for d in diffs:
        for metric, vals in d["deltas"].items():
            rows.append(",".join([d["variant"], metric, fmt(vals["baseline"]),
                                  fmt(vals["variant"]), fmt(vals["absolute"]),
                                  fmt(vals["relative"])]))
    with open(os.path.join(args.out, "diff.csv"), "w") as fh:
        fh.write("\n".join(rows) + "\n")
    _write_json(os.path.join(args.out, "manifest.json"), _manifest(
        "whatif", {"trace": trace_path, "scenarios": args.scenarios},
        trace_digest=baseline.trace_digest, ingest=report.to_dict(),
        scenarios={name: config_to_dict(cfg) for name, cfg in configs}))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cachefed",
                                     description="Cache federation trace simulator and analytics")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic Zipf trace")
    p.add_argument("--spec", required=True, help="workload spec JSON")
    p.add_argument("--out", required=True, help="trace file (.csv, .jsonl, optionally .gz)")
    p.add_argument("--seed", type=int, help="override the spec's seed")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("simulate", help="replay a trace against a federation config")
    p.add_argument("--trace", required=True)
    p.add_argument("--config", required=True, help="federation config JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--skip-bad-rows", action="store_true",
                   help="drop rejected trace rows instead of failing")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("analyze", help="analytics over outcomes or a hit-labeled trace")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--outcomes", help="outcomes.csv written by simulate")
    src.add_argument("--labeled-trace", help="trace whose rows carry observed_hit")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--skip-bad-rows", action="store_true")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("whatif", help="replay one trace under several configs")
    p.add_argument("--trace", help="trace file; overrides the scenario file's trace")
    p.add_argument("--scenarios", required=True, help="scenario document JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--skip-bad-rows", action="store_true")
    p.set_defaults(func=cmd_whatif)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(json.dumps(exc.payload, sort_keys=True), file=sys.stderr)
        return exc.code
    except OSError as exc:
        print(json.dumps({"error": "io error", "messages": [str(exc)]}), file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
