"""Plot-ready CSV and JSON outputs for a set of daily records.

Files written by :func:`write_analytics` (``day`` is ``YYYY-MM-DD`` UTC;
empty cells are undefined values):

==========================  ===================================================
daily_totals.csv            day,accesses,hits,misses,hit_bytes,miss_bytes,total_bytes
total_by_node.csv           day,node,bytes,share
miss_by_node.csv            day,node,bytes,share
hit_by_node.csv             day,node,bytes,share
hit_miss_proportion.csv     day,hit_count_share,miss_count_share,hit_bytes_share,miss_bytes_share
freq_reduction.csv          day,rate,rate_ma7
vol_reduction.csv           day,rate,rate_ma7
miss_ma7.csv                day,miss_bytes,miss_bytes_ma7
hit_ma7.csv                 day,hit_bytes,hit_bytes_ma7
summary_table.csv           period,accesses,transfer_tb,shared_tb
summary.json                summary table, reduction rates, savings
==========================  ===================================================
"""
from __future__ import annotations

import csv
import json
import os
from typing import Any, Optional, Sequence

from .analytics import (DailyRecord, frequency_reduction, moving_average, node_proportions,
                        rate_summary, savings_report, summarize, volume_reduction)

MA_WINDOW = 7


def _cell(value: Optional[float]) -> str:
    return "" if value is None else repr(float(value))


def _write_csv(path: str, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def summary_document(recs: Sequence[DailyRecord], extra: Optional[dict] = None) -> dict[str, Any]:
    table = summarize(recs, "month")
    rates = rate_summary(recs)
    savings = savings_report(recs)
    avg = table.daily_average
    doc = {
        "summary_table": {
            "rows": [
                {"period": r.label, "accesses": r.accesses, "transfer_bytes": r.transfer_bytes,
                 "shared_bytes": r.shared_bytes, "transfer_tb": round(r.transfer_tb, 2),
                 "shared_tb": round(r.shared_tb, 2)}
                for r in table.rows
            ],
            "total": {"accesses": table.total.accesses,
                      "transfer_bytes": table.total.transfer_bytes,
                      "shared_bytes": table.total.shared_bytes,
                      "transfer_tb": round(table.total.transfer_tb, 2),
                      "shared_tb": round(table.total.shared_tb, 2)},
            "daily_average": {"accesses": round(avg.accesses, 2),
                              "transfer_tb": round(avg.transfer_tb, 2),
                              "shared_tb": round(avg.shared_tb, 2)},
            "active_days": table.active_days,
        },
        "reduction_rates": {
            "frequency_daily_mean": rates.frequency_daily_mean,
            "frequency_totals_ratio": rates.frequency_totals_ratio,
            "volume_daily_mean": rates.volume_daily_mean,
            "volume_totals_ratio": rates.volume_totals_ratio,
            "frequency_defined_days": rates.frequency_defined_days,
            "volume_defined_days": rates.volume_defined_days,
        },
        "savings": {"hit_bytes": savings.hit_bytes, "tb": savings.tb, "pb": savings.pb},
    }
    if extra:
        doc.update(extra)
    return doc


def write_analytics(recs: Sequence[DailyRecord], out_dir: str,
                    extra_summary: Optional[dict] = None) -> list[str]:
    """Write every plot-ready CSV plus ``summary.json``; returns the file names."""
    os.makedirs(out_dir, exist_ok=True)
    p = lambda name: os.path.join(out_dir, name)  # noqa: E731
    written = []

    _write_csv(p("daily_totals.csv"),
               ["day", "accesses", "hits", "misses", "hit_bytes", "miss_bytes", "total_bytes"],
               [[r.day.isoformat(), r.accesses, r.hits, r.misses, r.hit_bytes, r.miss_bytes,
                 r.total_bytes] for r in recs])
    written.append("daily_totals.csv")

    shares = node_proportions(recs)
    by_day = {r.day: r for r in recs}
    value_of = {"total": lambda nd: nd.total_bytes, "miss": lambda nd: nd.miss_bytes,
                "hit": lambda nd: nd.hit_bytes}
    for metric in ("total", "miss", "hit"):
        rows = []
        for day, share in shares[metric]:
            per_node = by_day[day].per_node
            for node, s in share.items():
                rows.append([day.isoformat(), node, value_of[metric](per_node[node]), repr(s)])
        name = f"{metric}_by_node.csv"
        _write_csv(p(name), ["day", "node", "bytes", "share"], rows)
        written.append(name)

    rows = []
    for r in recs:
        byte_total = r.total_bytes
        rows.append([
            r.day.isoformat(), repr(r.hits / r.accesses), repr(r.misses / r.accesses),
            _cell(r.hit_bytes / byte_total if byte_total else None),
            _cell(r.miss_bytes / byte_total if byte_total else None),
        ])
    _write_csv(p("hit_miss_proportion.csv"),
               ["day", "hit_count_share", "miss_count_share", "hit_bytes_share",
                "miss_bytes_share"], rows)
    written.append("hit_miss_proportion.csv")

    for name, fn in (("freq_reduction.csv", frequency_reduction),
                     ("vol_reduction.csv", volume_reduction)):
        series = [(r.day, fn(r)) for r in recs]
        ma = moving_average(series, MA_WINDOW)
        _write_csv(p(name), ["day", "rate", "rate_ma7"],
                   [[d.isoformat(), _cell(v), _cell(m)] for (d, v), (_, m) in zip(series, ma)])
        written.append(name)

    for name, attr in (("miss_ma7.csv", "miss_bytes"), ("hit_ma7.csv", "hit_bytes")):
        series = [(r.day, float(getattr(r, attr))) for r in recs]
        ma = moving_average(series, MA_WINDOW)
        _write_csv(p(name), ["day", attr, f"{attr}_ma7"],
                   [[r.day.isoformat(), getattr(r, attr), _cell(m)]
                    for r, (_, m) in zip(recs, ma)])
        written.append(name)

    table = summarize(recs, "month")
    avg = table.daily_average
    rows = [[r.label, r.accesses, f"{r.transfer_tb:.2f}", f"{r.shared_tb:.2f}"] for r in table.rows]
    rows.append(["Total", table.total.accesses, f"{table.total.transfer_tb:.2f}",
                 f"{table.total.shared_tb:.2f}"])
    rows.append(["Daily average", f"{avg.accesses:.2f}", f"{avg.transfer_tb:.2f}",
                 f"{avg.shared_tb:.2f}"])
    _write_csv(p("summary_table.csv"), ["period", "accesses", "transfer_tb", "shared_tb"], rows)
    written.append("summary_table.csv")

    with open(p("summary.json"), "w") as fh:
        json.dump(summary_document(recs, extra_summary), fh, indent=2, sort_keys=True)
        fh.write("\n")
    written.append("summary.json")
    return written
