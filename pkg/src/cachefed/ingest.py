"""Reading and writing access traces and simulation outcomes.

Canonical CSV layout (header row first)::

    timestamp,file,size_bytes,client,observed_node,observed_hit

Empty cells encode absent optionals; ``observed_hit`` is ``true``/``false``.
JSON-lines traces carry one object per line with the same keys; absent
optionals are omitted. Files whose name ends in ``.gz`` are gzip streams.
"""
from __future__ import annotations

import csv
import gzip
import io
import json
import math
import os
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import IO, Iterable, Mapping, Optional, Union

from .core import AccessEvent, SimOutcome

CANONICAL_FIELDS = ("timestamp", "file", "size_bytes", "client", "observed_node", "observed_hit")
MANDATORY_FIELDS = CANONICAL_FIELDS[:4]
MAX_REPORTED_REJECTIONS = 100


class IngestError(Exception):
    pass


class TraceReadError(IngestError):
    """The input stream could not be read or decoded at all."""


class TraceOrderError(IngestError):
    """Raised in strict mode when timestamps go backwards."""


@dataclass(frozen=True)
class TraceSchema:
    format: str = "csv"
    fields: Optional[Mapping[str, str]] = None
    timestamp_encoding: str = "epoch-seconds"
    header: bool = True

    def __post_init__(self):
        if self.format not in ("csv", "json-lines"):
            raise ValueError(f"unknown trace format: {self.format}")
        if self.timestamp_encoding not in ("epoch-seconds", "rfc3339"):
            raise ValueError(f"unknown timestamp encoding: {self.timestamp_encoding}")
        mapping = dict(zip(CANONICAL_FIELDS, CANONICAL_FIELDS))
        if self.fields is not None:
            unknown = set(self.fields) - set(CANONICAL_FIELDS)
            if unknown:
                raise ValueError(f"unknown trace fields in mapping: {sorted(unknown)}")
            mapping.update(self.fields)
        missing = [f for f in MANDATORY_FIELDS if not mapping.get(f)]
        if missing:
            raise ValueError(f"mandatory fields not mapped: {missing}")
        object.__setattr__(self, "fields", mapping)
        if not self.header and self.format == "csv" and self.fields != dict(
                zip(CANONICAL_FIELDS, CANONICAL_FIELDS)):
            raise ValueError("headerless CSV is positional; a field mapping has no effect")

    def column(self, name: str) -> str:
        return self.fields[name]


@dataclass
class IngestReport:
    rows_read: int = 0
    rows_accepted: int = 0
    rows_rejected: int = 0
    rejections: list[tuple[int, str]] = field(default_factory=list)

    def accept(self) -> None:
        self.rows_read += 1
        self.rows_accepted += 1

    def reject(self, line: int, reason: str) -> None:
        self.rows_read += 1
        self.rows_rejected += 1
        if len(self.rejections) < MAX_REPORTED_REJECTIONS:
            self.rejections.append((line, reason))

    def to_dict(self) -> dict:
        return {
            "rows_read": self.rows_read,
            "rows_accepted": self.rows_accepted,
            "rows_rejected": self.rows_rejected,
            "rejections": [{"line": ln, "reason": r} for ln, r in self.rejections],
        }


class _RowError(Exception):
    pass


def schema_for_path(path: Union[str, os.PathLike], **kwargs) -> TraceSchema:
    name = os.fspath(path)
    if name.endswith(".gz"):
        name = name[:-3]
    fmt = "json-lines" if name.endswith((".jsonl", ".ndjson", ".json")) else "csv"
    return TraceSchema(format=fmt, **kwargs)


# value codecs -----------------------------------------------------------

def _parse_timestamp(raw, encoding: str) -> float:
    if encoding == "rfc3339":
        if not isinstance(raw, str):
            raise _RowError("bad timestamp")
        text = raw.strip()
        if text[-1:] in ("Z", "z"):
            text = text[:-1] + "+00:00"
        try:
            dt = datetime.fromisoformat(text)
        except ValueError:
            raise _RowError("bad timestamp") from None
        if dt.tzinfo is None:
            raise _RowError("bad timestamp: missing UTC offset")
        return dt.timestamp()
    if isinstance(raw, bool):
        raise _RowError("bad timestamp")
    if isinstance(raw, (int, float)):
        value = float(raw)
    else:
        try:
            value = float(raw)
        except (TypeError, ValueError):
            raise _RowError("bad timestamp") from None
    if not math.isfinite(value):
        raise _RowError("bad timestamp")
    return value


def _format_timestamp(ts: float, encoding: str) -> str:
    if encoding == "rfc3339":
        dt = datetime.fromtimestamp(ts, tz=timezone.utc)
        return dt.isoformat(timespec="microseconds").replace("+00:00", "Z")
    return repr(float(ts))


def _parse_size(raw) -> int:
    if isinstance(raw, bool):
        raise _RowError("bad size")
    if isinstance(raw, int):
        value = raw
    elif isinstance(raw, str):
        text = raw.strip()
        try:
            value = int(text, 10)
        except ValueError:
            raise _RowError("bad size") from None
    else:
        raise _RowError("bad size")
    if value < 0:
        raise _RowError("negative size")
    return value


_TRUE = {"true", "1", "hit"}
_FALSE = {"false", "0", "miss"}


def _parse_hit(raw) -> Optional[bool]:
    if raw is None or raw == "":
        return None
    if isinstance(raw, bool):
        return raw
    if isinstance(raw, str):
        text = raw.strip().lower()
        if text in _TRUE:
            return True
        if text in _FALSE:
            return False
    raise _RowError("bad observed_hit")


def _build_event(values: Mapping[str, object], schema: TraceSchema) -> AccessEvent:
    for name in MANDATORY_FIELDS:
        if values.get(name) is None:
            raise _RowError(f"missing field: {name}")
    ts = _parse_timestamp(values["timestamp"], schema.timestamp_encoding)
    size = _parse_size(values["size_bytes"])
    file_id = values["file"]
    client = values["client"]
    if not isinstance(file_id, str) or not isinstance(client, str):
        raise _RowError("bad field type")
    if not file_id:
        raise _RowError("empty file id")
    node = values.get("observed_node")
    if node == "":
        node = None
    if node is not None and not isinstance(node, str):
        raise _RowError("bad observed_node")
    hit = _parse_hit(values.get("observed_hit"))
    return AccessEvent(ts, file_id, size, client, node, hit)


# parsing ----------------------------------------------------------------

def _decode(source: Union[bytes, IO[bytes]]) -> str:
    try:
        data = source if isinstance(source, (bytes, bytearray)) else source.read()
    except (OSError, EOFError, gzip.BadGzipFile) as exc:
        raise TraceReadError(f"cannot read trace: {exc}") from exc
    if isinstance(data, str):
        return data
    try:
        return bytes(data).decode("utf-8-sig")
    except UnicodeDecodeError as exc:
        raise TraceReadError(f"trace is not valid UTF-8: {exc}") from exc


def _iter_csv(text: str, schema: TraceSchema, report: IngestReport):
    reader = csv.reader(io.StringIO(text, newline=""))
    if schema.header:
        try:
            header = next(reader)
        except StopIteration:
            return
        except csv.Error as exc:
            raise TraceReadError(f"malformed CSV header: {exc}") from exc
        index = {name: i for i, name in enumerate(header)}
        positions = {}
        for canon in CANONICAL_FIELDS:
            col = schema.column(canon)
            if col in index:
                positions[canon] = index[col]
        missing = [f for f in MANDATORY_FIELDS if f not in positions]
        if missing:
            raise TraceReadError(f"CSV header lacks mandatory columns: {missing}")
        width = len(header)
    else:
        positions = {name: i for i, name in enumerate(CANONICAL_FIELDS)}
        width = None
    while True:
        try:
            row = next(reader)
        except StopIteration:
            return
        except csv.Error as exc:
            report.reject(reader.line_num, f"malformed CSV: {exc}")
            continue
        line = reader.line_num
        if not row:
            continue
        if width is not None and len(row) != width:
            report.reject(line, f"expected {width} columns, got {len(row)}")
            continue
        if width is None and not len(MANDATORY_FIELDS) <= len(row) <= len(CANONICAL_FIELDS):
            report.reject(line, f"expected 4-6 columns, got {len(row)}")
            continue
        values = {name: row[i] for name, i in positions.items() if i < len(row)}
        yield line, values


def _iter_jsonl(text: str, schema: TraceSchema, report: IngestReport):
    lookup = {canon: schema.column(canon) for canon in CANONICAL_FIELDS}
    # JSON strings cannot hold raw CR/LF, but may hold U+2028 etc.; split on LF only
    for line, raw in enumerate(text.split("\n"), start=1):
        raw = raw.rstrip("\r")
        if not raw.strip():
            continue
        try:
            obj = json.loads(raw)
        except ValueError:
            report.reject(line, "malformed JSON")
            continue
        if not isinstance(obj, dict):
            report.reject(line, "JSON row is not an object")
            continue
        yield line, {canon: obj.get(key) for canon, key in lookup.items()}


def parse_trace(source: Union[bytes, IO[bytes]], schema: TraceSchema = TraceSchema(),
                strict: bool = False) -> tuple[list[AccessEvent], IngestReport]:
    """Parse a trace into time-sorted events plus an ingest report.

    Rows that fail validation are rejected with a reason and never coerced.
    A stable sort is applied so ties keep input order.

    Raises
    ------
    TraceReadError
        If the stream cannot be read or decoded.
    TraceOrderError
        If ``strict`` and an accepted row is earlier than its predecessor.
    """
    text = _decode(source)
    report = IngestReport()
    rows = _iter_csv(text, schema, report) if schema.format == "csv" else \
        _iter_jsonl(text, schema, report)
    events = []
    last = -math.inf
    for line, values in rows:
        try:
            event = _build_event(values, schema)
        except _RowError as exc:
            report.reject(line, str(exc))
            continue
        if strict and event.timestamp < last:
            raise TraceOrderError(f"line {line}: timestamp {event.timestamp} precedes {last}")
        last = max(last, event.timestamp)
        events.append(event)
        report.accept()
    events.sort(key=lambda e: e.timestamp)
    return events, report


def open_maybe_gzip(path: Union[str, os.PathLike], mode: str = "rb"):
    if os.fspath(path).endswith(".gz"):
        return gzip.open(path, mode)
    return open(path, mode)


def read_trace(path, schema: Optional[TraceSchema] = None, strict: bool = False):
    schema = schema or schema_for_path(path)
    try:
        with open_maybe_gzip(path) as fh:
            return parse_trace(fh, schema, strict=strict)
    except OSError as exc:
        raise TraceReadError(f"cannot read {os.fspath(path)}: {exc}") from exc


# writing ----------------------------------------------------------------

def _format_hit(value: Optional[bool]) -> str:
    if value is None:
        return ""
    return "true" if value else "false"


class _CsvWriter:
    """csv.writer with "\n" line endings that still quotes fields holding a bare CR."""

    def __init__(self, buf):
        self._plain = csv.writer(buf, lineterminator="\n")
        self._quoted = csv.writer(buf, lineterminator="\n", quoting=csv.QUOTE_ALL)

    def writerow(self, row):
        row = [str(v) for v in row]
        if any("\r" in v for v in row):
            self._quoted.writerow(row)
        else:
            self._plain.writerow(row)


def write_trace(events: Iterable[AccessEvent], schema: TraceSchema = TraceSchema()) -> bytes:
    """Serialize events; ``parse_trace`` of the result reproduces them."""
    buf = io.StringIO(newline="")
    enc = schema.timestamp_encoding
    if schema.format == "csv":
        writer = _CsvWriter(buf)
        if schema.header:
            writer.writerow([schema.column(f) for f in CANONICAL_FIELDS])
        for e in events:
            writer.writerow([
                _format_timestamp(e.timestamp, enc), e.file, str(e.size_bytes), e.client,
                e.observed_node or "", _format_hit(e.observed_hit),
            ])
    else:
        for e in events:
            obj = {
                schema.column("timestamp"): (_format_timestamp(e.timestamp, enc)
                                             if enc == "rfc3339" else e.timestamp),
                schema.column("file"): e.file,
                schema.column("size_bytes"): e.size_bytes,
                schema.column("client"): e.client,
            }
            if e.observed_node is not None:
                obj[schema.column("observed_node")] = e.observed_node
            if e.observed_hit is not None:
                obj[schema.column("observed_hit")] = e.observed_hit
            buf.write(json.dumps(obj, ensure_ascii=False, separators=(",", ":")))
            buf.write("\n")
    return buf.getvalue().encode("utf-8")


def write_bytes(path, data: bytes) -> None:
    """Write ``data``; gzip output (when ``.gz``) carries no mtime so it is reproducible."""
    name = os.fspath(path)
    if name.endswith(".gz"):
        with open(name, "wb") as raw, gzip.GzipFile(filename="", mode="wb", fileobj=raw,
                                                    mtime=0) as gz:
            gz.write(data)
    else:
        with open(name, "wb") as fh:
            fh.write(data)


# outcomes ---------------------------------------------------------------

OUTCOME_FIELDS = ("timestamp", "file", "size_bytes", "client", "served_by", "is_hit",
                  "origin_bytes", "cache_bytes", "bypassed", "evicted")


def write_outcomes(outcomes: Iterable[SimOutcome]) -> bytes:
    """CSV with one row per outcome; ``evicted`` is a JSON list of ``[file, bytes]``."""
    buf = io.StringIO(newline="")
    writer = _CsvWriter(buf)
    writer.writerow(OUTCOME_FIELDS)
    for o in outcomes:
        e = o.event
        writer.writerow([
            repr(e.timestamp), e.file, e.size_bytes, e.client, o.served_by,
            _format_hit(o.is_hit), o.origin_bytes, o.cache_bytes, _format_hit(o.bypassed),
            json.dumps([list(x) for x in o.evicted], separators=(",", ":")),
        ])
    return buf.getvalue().encode("utf-8")


def parse_outcomes(source: Union[bytes, IO[bytes]]) -> list[SimOutcome]:
    """Read an outcomes CSV produced by :func:`write_outcomes`.

    Outcome files are tool output, so any malformed row is fatal.
    """
    text = _decode(source)
    reader = csv.DictReader(io.StringIO(text, newline=""))
    if reader.fieldnames is None:
        return []
    missing = set(OUTCOME_FIELDS) - set(reader.fieldnames)
    if missing:
        raise TraceReadError(f"outcomes file lacks columns: {sorted(missing)}")
    out = []
    for row in reader:
        try:
            event = AccessEvent(float(row["timestamp"]), row["file"], int(row["size_bytes"]),
                                row["client"])
            out.append(SimOutcome(
                event=event,
                served_by=row["served_by"],
                is_hit=_parse_hit(row["is_hit"]),
                origin_bytes=int(row["origin_bytes"]),
                cache_bytes=int(row["cache_bytes"]),
                evicted=tuple((f, int(b)) for f, b in json.loads(row["evicted"] or "[]")),
                bypassed=bool(_parse_hit(row["bypassed"])),
            ))
        except (ValueError, TypeError, _RowError) as exc:
            raise TraceReadError(f"malformed outcomes row {reader.line_num}: {exc}") from exc
    return out


def read_outcomes(path) -> list[SimOutcome]:
    try:
        with open_maybe_gzip(path) as fh:
            return parse_outcomes(fh)
    except OSError as exc:
        raise TraceReadError(f"cannot read {os.fspath(path)}: {exc}") from exc
