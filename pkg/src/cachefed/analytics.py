"""Daily aggregates and traffic-reduction metrics over outcome streams.

Hits are "shared" volume (traffic saved), misses are "transfer" volume
fetched from the origin. Byte sums are exact int64 arithmetic; rounding
happens only when formatting TB values for display.
"""
from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .core import PB, SECONDS_PER_DAY, TB, AccessEvent, SimOutcome

UNKNOWN_NODE = "unknown"
EPOCH = dt.date(1970, 1, 1)


class LabelError(ValueError):
    """A labeled trace lacks the hit/miss labels needed for analysis."""


@dataclass
class OutcomeFrame:
    """Column-oriented outcomes: what the aggregation actually consumes."""

    timestamp: np.ndarray      # float64 seconds
    origin_bytes: np.ndarray   # int64
    cache_bytes: np.ndarray    # int64
    is_hit: np.ndarray         # bool
    node_code: np.ndarray      # int32 index into ``node_names``
    node_names: list[str]

    def __len__(self):
        return len(self.timestamp)

    @classmethod
    def from_columns(cls, timestamp, size_bytes, is_hit, nodes: Sequence[str]) -> "OutcomeFrame":
        """Frame from a labeled trace in column form; hits are served from cache."""
        ts = np.asarray(timestamp, dtype=np.float64)
        size = np.asarray(size_bytes, dtype=np.int64)
        hit = np.asarray(is_hit, dtype=bool)
        names, codes = np.unique(np.asarray(nodes, dtype=object).astype(str), return_inverse=True)
        return cls(ts, np.where(hit, 0, size), np.where(hit, size, 0), hit,
                   codes.astype(np.int32), [str(n) for n in names])

    @classmethod
    def from_outcomes(cls, outcomes: Iterable[SimOutcome]) -> "OutcomeFrame":
        outcomes = list(outcomes)
        names = sorted({o.served_by for o in outcomes})
        index = {n: i for i, n in enumerate(names)}
        return cls(
            np.fromiter((o.event.timestamp for o in outcomes), np.float64, len(outcomes)),
            np.fromiter((o.origin_bytes for o in outcomes), np.int64, len(outcomes)),
            np.fromiter((o.cache_bytes for o in outcomes), np.int64, len(outcomes)),
            np.fromiter((o.is_hit for o in outcomes), bool, len(outcomes)),
            np.fromiter((index[o.served_by] for o in outcomes), np.int32, len(outcomes)),
            names,
        )


def outcomes_from_labels(events: Iterable[AccessEvent]) -> list[SimOutcome]:
    """Turn a trace carrying ``observed_hit`` labels into outcomes, no simulation.

    Raises
    ------
    LabelError
        If any event lacks ``observed_hit``.
    """
    out = []
    for i, e in enumerate(events):
        if e.observed_hit is None:
            raise LabelError(f"event {i} ({e.file}) has no observed_hit label")
        node = e.observed_node or UNKNOWN_NODE
        if e.observed_hit:
            out.append(SimOutcome(e, node, True, 0, e.size_bytes))
        else:
            out.append(SimOutcome(e, node, False, e.size_bytes, 0))
    return out


@dataclass(frozen=True)
class NodeDay:
    accesses: int
    hit_bytes: int
    miss_bytes: int

    @property
    def total_bytes(self) -> int:
        return self.hit_bytes + self.miss_bytes


@dataclass(frozen=True)
class DailyRecord:
    day: dt.date
    accesses: int
    hits: int
    misses: int
    hit_bytes: int
    miss_bytes: int
    per_node: dict[str, NodeDay] = field(default_factory=dict)

    @property
    def total_bytes(self) -> int:
        return self.hit_bytes + self.miss_bytes


def utc_day(timestamp: float) -> dt.date:
    return EPOCH + dt.timedelta(days=math.floor(timestamp / SECONDS_PER_DAY))


def daily_aggregate(outcomes: Union[OutcomeFrame, Iterable[SimOutcome]]) -> list[DailyRecord]:
    """One record per UTC day with at least one outcome, in day order."""
    frame = outcomes if isinstance(outcomes, OutcomeFrame) else OutcomeFrame.from_outcomes(outcomes)
    if len(frame) == 0:
        return []
    day = np.floor(frame.timestamp / SECONDS_PER_DAY).astype(np.int64)
    order = np.lexsort((frame.node_code, day))
    day_s = day[order]
    code_s = frame.node_code[order]
    origin_s = frame.origin_bytes[order]
    cache_s = frame.cache_bytes[order]
    hit_s = frame.is_hit[order].astype(np.int64)

    change = np.empty(len(order), dtype=bool)
    change[0] = True
    change[1:] = (day_s[1:] != day_s[:-1]) | (code_s[1:] != code_s[:-1])
    starts = np.flatnonzero(change)
    counts = np.diff(np.append(starts, len(order)))
    g_day = day_s[starts]
    g_code = code_s[starts]
    g_hits = np.add.reduceat(hit_s, starts)
    g_origin = np.add.reduceat(origin_s, starts)
    g_cache = np.add.reduceat(cache_s, starts)

    records = []
    i = 0
    n_groups = len(starts)
    while i < n_groups:
        j = i
        d = g_day[i]
        while j < n_groups and g_day[j] == d:
            j += 1
        per_node = {
            frame.node_names[g_code[k]]: NodeDay(int(counts[k]), int(g_cache[k]), int(g_origin[k]))
            for k in range(i, j)
        }
        accesses = int(counts[i:j].sum())
        hits = int(g_hits[i:j].sum())
        records.append(DailyRecord(
            day=EPOCH + dt.timedelta(days=int(d)),
            accesses=accesses,
            hits=hits,
            misses=accesses - hits,
            hit_bytes=int(g_cache[i:j].sum()),
            miss_bytes=int(g_origin[i:j].sum()),
            per_node=dict(sorted(per_node.items())),
        ))
        i = j
    return records


def frequency_reduction(rec: DailyRecord) -> Optional[float]:
    """Accesses per origin transfer; ``None`` on a day without misses."""
    if rec.misses == 0:
        return None
    return rec.accesses / rec.misses


def volume_reduction(rec: DailyRecord) -> Optional[float]:
    """Requested volume per transferred byte; ``None`` when nothing was transferred."""
    if rec.miss_bytes == 0:
        return None
    return (rec.hit_bytes + rec.miss_bytes) / rec.miss_bytes


def mean_defined(values: Iterable[Optional[float]]) -> Optional[float]:
    vals = [v for v in values if v is not None]
    if not vals:
        return None
    return math.fsum(vals) / len(vals)


Series = list[tuple[dt.date, Optional[float]]]


def moving_average(series: Series, window_days: int = 7) -> Series:
    """Trailing calendar-day mean over ``[d - window + 1, d]``.

    Undefined (``None``) values are skipped rather than treated as zero;
    a day whose window holds no defined value stays undefined.
    """
    if window_days < 1:
        raise ValueError(f"window_days must be >= 1, got {window_days}")
    out: Series = []
    defined = [(d, v) for d, v in series if v is not None]
    lo = 0
    hi = 0
    for day, _ in series:
        first = day - dt.timedelta(days=window_days - 1)
        while hi < len(defined) and defined[hi][0] <= day:
            hi += 1
        while lo < hi and defined[lo][0] < first:
            lo += 1
        window = [v for _, v in defined[lo:hi]]
        out.append((day, math.fsum(window) / len(window) if window else None))
    return out


NodeShares = list[tuple[dt.date, dict[str, float]]]


def node_proportions(recs: Iterable[DailyRecord]) -> dict[str, NodeShares]:
    """Per-day share of each node in miss, hit and total volume.

    Days whose total for a metric is zero are omitted from that metric.
    """
    out: dict[str, NodeShares] = {"miss": [], "hit": [], "total": []}
    getters = {
        "miss": lambda nd: nd.miss_bytes,
        "hit": lambda nd: nd.hit_bytes,
        "total": lambda nd: nd.total_bytes,
    }
    for rec in recs:
        for metric, get in getters.items():
            values = {node: get(nd) for node, nd in rec.per_node.items()}
            total = sum(values.values())
            if total == 0:
                continue
            out[metric].append((rec.day, {node: v / total for node, v in values.items()}))
    return out


@dataclass(frozen=True)
class SummaryRow:
    label: str
    accesses: int
    transfer_bytes: int
    shared_bytes: int

    @property
    def transfer_tb(self) -> float:
        return self.transfer_bytes / TB

    @property
    def shared_tb(self) -> float:
        return self.shared_bytes / TB


@dataclass(frozen=True)
class DailyAverage:
    accesses: float
    transfer_tb: float
    shared_tb: float


@dataclass(frozen=True)
class SummaryTable:
    rows: tuple[SummaryRow, ...]
    total: SummaryRow
    active_days: int

    @property
    def daily_average(self) -> DailyAverage:
        if self.active_days == 0:
            return DailyAverage(0.0, 0.0, 0.0)
        n = self.active_days
        return DailyAverage(self.total.accesses / n, self.total.transfer_tb / n,
                            self.total.shared_tb / n)

    def display_rows(self) -> list[tuple[str, str, str, str]]:
        """Rows formatted the way the summary is usually printed: TB to 2 decimals."""
        lines = [(r.label, f"{r.accesses:,}", f"{r.transfer_tb:,.2f}", f"{r.shared_tb:,.2f}")
                 for r in self.rows]
        t = self.total
        lines.append(("Total", f"{t.accesses:,}", f"{t.transfer_tb:,.2f}", f"{t.shared_tb:,.2f}"))
        a = self.daily_average
        lines.append(("Daily average", f"{a.accesses:,.2f}", f"{a.transfer_tb:,.2f}",
                      f"{a.shared_tb:,.2f}"))
        return lines


def summarize(recs: Sequence[DailyRecord], period: str = "month") -> SummaryTable:
    """Roll daily records up into period rows, a Total row and a daily average.

    The daily average divides by active days (days with any access), not by
    calendar days.
    """
    if period not in ("month", "all"):
        raise ValueError(f"unknown period: {period}")
    groups: dict[str, list[int]] = {}
    active = 0
    for rec in recs:
        if rec.accesses == 0:
            continue
        active += 1
        label = f"{rec.day.year:04d}-{rec.day.month:02d}" if period == "month" else "all"
        acc = groups.setdefault(label, [0, 0, 0])
        acc[0] += rec.accesses
        acc[1] += rec.miss_bytes
        acc[2] += rec.hit_bytes
    rows = tuple(SummaryRow(label, *vals) for label, vals in groups.items())
    total = SummaryRow("Total", sum(r.accesses for r in rows), sum(r.transfer_bytes for r in rows),
                       sum(r.shared_bytes for r in rows))
    return SummaryTable(rows, total, active)


@dataclass(frozen=True)
class SavingsReport:
    hit_bytes: int

    @property
    def tb(self) -> float:
        return self.hit_bytes / TB

    @property
    def pb(self) -> float:
        return self.hit_bytes / PB


def savings_report(recs: Iterable[DailyRecord]) -> SavingsReport:
    return SavingsReport(sum(r.hit_bytes for r in recs))


@dataclass(frozen=True)
class RateSummary:
    """Period-level reduction rates, both as daily means and as totals ratios.

    The two differ in general; ``*_daily_mean`` weights every defined day
    equally, ``*_totals_ratio`` divides period totals.
    """

    frequency_daily_mean: Optional[float]
    frequency_totals_ratio: Optional[float]
    volume_daily_mean: Optional[float]
    volume_totals_ratio: Optional[float]
    frequency_defined_days: int
    volume_defined_days: int


def rate_summary(recs: Sequence[DailyRecord]) -> RateSummary:
    freq = [frequency_reduction(r) for r in recs]
    vol = [volume_reduction(r) for r in recs]
    accesses = sum(r.accesses for r in recs)
    misses = sum(r.misses for r in recs)
    hit_b = sum(r.hit_bytes for r in recs)
    miss_b = sum(r.miss_bytes for r in recs)
    return RateSummary(
        frequency_daily_mean=mean_defined(freq),
        frequency_totals_ratio=accesses / misses if misses else None,
        volume_daily_mean=mean_defined(vol),
        volume_totals_ratio=(hit_b + miss_b) / miss_b if miss_b else None,
        frequency_defined_days=sum(v is not None for v in freq),
        volume_defined_days=sum(v is not None for v in vol),
    )
