"""Replay one trace under several federation configs and compare the results.

A scenario document is a JSON object::

    {
      "trace": "trace.csv",                 # optional, relative to the document
      "base": { ...federation config... },
      "scenarios": [
        {"name": "baseline"},
        {"name": "fifo", "overrides": {"eviction_policy": "fifo"}},
        {"name": "big-n1", "node_overrides": {"n1": {"capacity_bytes": 2000000000000}}}
      ]
    }

``overrides`` replace top-level config keys; ``node_overrides`` patch
individual nodes by ``node_id``. The first scenario is the diff baseline.
"""
from __future__ import annotations

import copy
import hashlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Any, Mapping, Optional, Sequence

from .analytics import (DailyRecord, RateSummary, SummaryTable, daily_aggregate,
                        frequency_reduction, rate_summary, summarize, volume_reduction)
from .core import AccessEvent, FederationConfig, SimOutcome, ValidationError, config_from_dict
from .engine import simulate
from .ingest import write_trace


class ScenarioError(ValueError):
    pass


def trace_digest(trace: Sequence[AccessEvent]) -> str:
    """SHA-256 of the canonical CSV encoding of the trace."""
    return hashlib.sha256(write_trace(trace)).hexdigest()


@dataclass(frozen=True)
class ScenarioResult:
    name: str
    config: FederationConfig
    trace_digest: str
    outcomes: tuple[SimOutcome, ...]
    records: tuple[DailyRecord, ...]

    @property
    def summary(self) -> SummaryTable:
        return summarize(self.records, "all")

    @property
    def rates(self) -> RateSummary:
        return rate_summary(self.records)

    def metrics(self) -> dict[str, Optional[float]]:
        recs = self.records
        accesses = sum(r.accesses for r in recs)
        hits = sum(r.hits for r in recs)
        rates = self.rates
        return {
            "accesses": accesses,
            "hits": hits,
            "misses": accesses - hits,
            "hit_ratio": hits / accesses if accesses else None,
            "transfer_bytes": sum(r.miss_bytes for r in recs),
            "shared_bytes": sum(r.hit_bytes for r in recs),
            "frequency_reduction_daily_mean": rates.frequency_daily_mean,
            "frequency_reduction_totals_ratio": rates.frequency_totals_ratio,
            "volume_reduction_daily_mean": rates.volume_daily_mean,
            "volume_reduction_totals_ratio": rates.volume_totals_ratio,
            "evicted_files": sum(len(o.evicted) for o in self.outcomes),
            "bypassed": sum(1 for o in self.outcomes if o.bypassed),
        }


def run_scenario(name: str, trace: Sequence[AccessEvent], config: FederationConfig,
                 digest: Optional[str] = None) -> ScenarioResult:
    outcomes = simulate(trace, config)
    return ScenarioResult(name, config, digest or trace_digest(trace), tuple(outcomes),
                          tuple(daily_aggregate(outcomes)))


def _run_one(args):
    return run_scenario(*args)


def run_scenarios(trace: Sequence[AccessEvent], configs: Sequence[tuple[str, FederationConfig]],
                  workers: int = 1) -> dict[str, ScenarioResult]:
    """Simulate and analyze ``trace`` once per named config.

    Runs share nothing, so ``workers > 1`` fans them out over processes
    with results identical to a sequential run.
    """
    if not configs:
        raise ScenarioError("at least one scenario is required")
    names = [name for name, _ in configs]
    dupes = sorted({n for n in names if names.count(n) > 1})
    if dupes:
        raise ScenarioError(f"duplicate scenario names: {', '.join(dupes)}")
    trace = list(trace)
    digest = trace_digest(trace)
    jobs = [(name, trace, cfg, digest) for name, cfg in configs]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            results = list(pool.map(_run_one, jobs))
    else:
        results = [_run_one(job) for job in jobs]
    return {r.name: r for r in results}


@dataclass(frozen=True)
class Delta:
    baseline: Optional[float]
    variant: Optional[float]

    @property
    def absolute(self) -> Optional[float]:
        if self.baseline is None or self.variant is None:
            return None
        return self.variant - self.baseline

    @property
    def relative(self) -> Optional[float]:
        if self.absolute is None or not self.baseline:
            return None
        return self.absolute / self.baseline


@dataclass(frozen=True)
class ScenarioDiff:
    baseline: ScenarioResult
    variant: ScenarioResult

    @property
    def baseline_summary(self) -> SummaryTable:
        return self.baseline.summary

    @property
    def variant_summary(self) -> SummaryTable:
        return self.variant.summary

    @property
    def deltas(self) -> dict[str, Delta]:
        base = self.baseline.metrics()
        var = self.variant.metrics()
        return {k: Delta(base[k], var[k]) for k in base}

    def daily_rates(self) -> dict[str, dict[str, list]]:
        out = {}
        for label, res in (("baseline", self.baseline), ("variant", self.variant)):
            out[label] = {
                "frequency": [(r.day, frequency_reduction(r)) for r in res.records],
                "volume": [(r.day, volume_reduction(r)) for r in res.records],
            }
        return out

    def to_dict(self) -> dict[str, Any]:
        return {
            "baseline": self.baseline.name,
            "variant": self.variant.name,
            "trace_digest": self.baseline.trace_digest,
            "deltas": {k: {"baseline": d.baseline, "variant": d.variant,
                           "absolute": d.absolute, "relative": d.relative}
                       for k, d in self.deltas.items()},
        }


def diff(baseline: ScenarioResult, variant: ScenarioResult) -> ScenarioDiff:
    if baseline.trace_digest != variant.trace_digest:
        raise ScenarioError("scenario results come from different traces "
                            f"({baseline.trace_digest[:12]} vs {variant.trace_digest[:12]})")
    return ScenarioDiff(baseline, variant)


def scenarios_from_dict(doc: Mapping[str, Any]) -> tuple[Optional[str], list[tuple[str, FederationConfig]]]:
    """Parse a scenario document into ``(trace path or None, [(name, config), ...])``."""
    if not isinstance(doc, Mapping):
        raise ValidationError(["scenario document must be an object"])
    unknown = sorted(set(doc) - {"trace", "base", "scenarios"})
    if unknown:
        raise ValidationError([f"unknown scenario document key: {k}" for k in unknown])
    base = doc.get("base", {})
    entries = doc.get("scenarios")
    if not isinstance(entries, list) or not entries:
        raise ValidationError(["scenarios must be a non-empty list"])
    names = [e.get("name") if isinstance(e, Mapping) else None for e in entries]
    dupes = sorted({n for n in names if n is not None and names.count(n) > 1})
    if dupes:
        raise ScenarioError(f"duplicate scenario names: {', '.join(dupes)}")

    errors: list[str] = []
    out = []
    for i, entry in enumerate(entries):
        if not isinstance(entry, Mapping) or not isinstance(entry.get("name"), str) \
                or not entry["name"]:
            errors.append(f"scenarios[{i}] needs a non-empty string name")
            continue
        extra = sorted(set(entry) - {"name", "overrides", "node_overrides"})
        if extra:
            errors.append(f"scenarios[{i}] has unknown keys: {extra}")
            continue
        cfg = copy.deepcopy(dict(base))
        cfg.update(entry.get("overrides", {}))
        patches = entry.get("node_overrides", {})
        nodes = cfg.get("nodes", [])
        known = {n.get("node_id") for n in nodes if isinstance(n, Mapping)}
        for node_id, patch in patches.items():
            if node_id not in known:
                errors.append(f"scenarios[{i}] node_overrides names unknown node: {node_id}")
        cfg["nodes"] = [
            {**n, **patches.get(n.get("node_id"), {})} if isinstance(n, Mapping) else n
            for n in nodes
        ]
        try:
            out.append((entry["name"], config_from_dict(cfg)))
        except ValidationError as exc:
            errors.extend(f"scenario {entry['name']}: {e}" for e in exc.errors)
    if errors:
        raise ValidationError(errors)
    trace = doc.get("trace")
    return (trace if isinstance(trace, str) else None), out
