import gzip

import pytest
from hypothesis import given
from hypothesis import strategies as st

from cachefed.core import AccessEvent
from cachefed.ingest import (IngestReport, TraceOrderError, TraceReadError, TraceSchema,
                             parse_outcomes, parse_trace, read_trace, write_bytes, write_outcomes,
                             write_trace)
from cachefed.workload import WorkloadSpec, generate_trace

CSV = TraceSchema()
JSONL = TraceSchema(format="json-lines")
HEADERLESS = TraceSchema(header=False)


def test_empty_input():
    events, report = parse_trace(b"", CSV)
    assert events == []
    assert (report.rows_read, report.rows_accepted, report.rows_rejected) == (0, 0, 0)


def test_single_headerless_row():
    events, report = parse_trace(b"1625097600,fileA,1000000000,client1\n", HEADERLESS)
    assert events == [AccessEvent(1625097600.0, "fileA", 10**9, "client1")]
    assert report.rows_accepted == 1


def test_negative_size_rejected():
    data = b"timestamp,file,size_bytes,client\n1,a,-5,c\n2,b,5,c\n"
    events, report = parse_trace(data, CSV)
    assert [e.file for e in events] == ["b"]
    assert report.rows_rejected == 1
    assert report.rejections == [(2, "negative size")]


@pytest.mark.parametrize("row, reason", [
    (b"x,a,5,c", "bad timestamp"),
    (b"nan,a,5,c", "bad timestamp"),
    (b"inf,a,5,c", "bad timestamp"),
    (b"1,a,5.0,c", "bad size"),
    (b"1,a,1e3,c", "bad size"),
    (b"1,,5,c", "empty file id"),
    (b"1,a,5,c,n1,maybe", "bad observed_hit"),
    (b"1,a,5", "expected 4-6 columns, got 3"),
])
def test_row_rejections(row, reason):
    events, report = parse_trace(row + b"\n", HEADERLESS)
    assert events == []
    assert report.rejections == [(1, reason)]


def test_header_width_mismatch():
    _, report = parse_trace(b"timestamp,file,size_bytes,client\n1,a,5\n", CSV)
    assert report.rejections == [(2, "expected 4 columns, got 3")]


def test_missing_json_field():
    events, report = parse_trace(b'{"timestamp": 1, "file": "a", "client": "c"}\n', JSONL)
    assert report.rejections == [(1, "missing field: size_bytes")]
    events, report = parse_trace(b'{"timestamp": 1, "file": "a", "size_bytes": true, '
                                 b'"client": "c"}\nnot json\n[1]\n', JSONL)
    assert [r for _, r in report.rejections] == ["bad size", "malformed JSON",
                                                "JSON row is not an object"]


def test_out_of_order_sorted_stably():
    data = b"timestamp,file,size_bytes,client\n5,a,1,c\n1,b,1,c\n5,c,1,c\n1,d,1,c\n"
    events, _ = parse_trace(data, CSV)
    assert [e.file for e in events] == ["b", "d", "a", "c"]
    with pytest.raises(TraceOrderError):
        parse_trace(data, CSV, strict=True)


def test_unreadable_stream():
    with pytest.raises(TraceReadError):
        parse_trace(b"\xff\xfe\xfa", CSV)
    with pytest.raises(TraceReadError, match="mandatory"):
        parse_trace(b"when,what\n1,2\n", CSV)


def test_custom_mapping_and_rfc3339():
    schema = TraceSchema(fields={"timestamp": "time", "file": "lfn", "size_bytes": "bytes",
                                 "client": "host"}, timestamp_encoding="rfc3339")
    data = b"time,lfn,bytes,host\n2021-07-01T00:00:00Z,/store/a.root,42,h1\n"
    events, report = parse_trace(data, schema)
    assert events == [AccessEvent(1625097600.0, "/store/a.root", 42, "h1")]
    events, report = parse_trace(b"time,lfn,bytes,host\n2021-07-01T00:00:00,/a,1,h\n", schema)
    assert report.rejections == [(2, "bad timestamp: missing UTC offset")]


def test_schema_requires_mandatory_fields():
    with pytest.raises(ValueError):
        TraceSchema(fields={"file": ""})
    with pytest.raises(ValueError):
        TraceSchema(format="parquet")


def test_empty_write():
    assert write_trace([], CSV) == b"timestamp,file,size_bytes,client,observed_node,observed_hit\n"
    assert write_trace([], JSONL) == b""


def test_observed_labels_round_trip():
    events = [AccessEvent(1.5, "a", 3, "c", "n7", True), AccessEvent(2.0, "b", 0, "c", None, False)]
    for schema in (CSV, JSONL):
        back, report = parse_trace(write_trace(events, schema), schema)
        assert back == events
        assert report.rows_rejected == 0


def test_generated_trace_round_trips_byte_exactly():
    trace = generate_trace(WorkloadSpec(200, 0.8, 10**8, 1.5, 500, 2, 1.6e9, 3))
    for schema in (CSV, JSONL):
        data = write_trace(trace, schema)
        back, _ = parse_trace(data, schema)
        assert back == trace
        assert write_trace(back, schema) == data


def test_gzip_file(tmp_path):
    events = [AccessEvent(1.0, "a", 3, "c")]
    path = tmp_path / "t.jsonl.gz"
    write_bytes(path, write_trace(events, JSONL))
    assert read_trace(path)[0] == events
    assert gzip.decompress(path.read_bytes()).startswith(b'{"timestamp"')
    other = tmp_path / "u.jsonl.gz"
    write_bytes(other, write_trace(events, JSONL))
    assert other.read_bytes() == path.read_bytes()


def test_read_missing_file(tmp_path):
    with pytest.raises(TraceReadError):
        read_trace(tmp_path / "nope.csv")


text = st.text(st.characters(blacklist_categories=("Cs",), blacklist_characters="\x00"),
               max_size=12)
events_st = st.builds(
    AccessEvent,
    timestamp=st.floats(-1e10, 1e10, allow_nan=False),
    file=text.filter(bool),
    size_bytes=st.integers(0, 2**62),
    client=text,
    observed_node=st.one_of(st.none(), text.filter(bool)),
    observed_hit=st.one_of(st.none(), st.booleans()),
)


@given(st.lists(events_st, max_size=20), st.sampled_from([CSV, JSONL]))
def test_round_trip_property(events, schema):
    events = sorted(events, key=lambda e: e.timestamp)
    back, report = parse_trace(write_trace(events, schema), schema)
    assert back == events
    assert report.rows_accepted == len(events) and report.rows_rejected == 0


@given(st.binary(max_size=300), st.sampled_from([CSV, JSONL, HEADERLESS]))
def test_report_identity_on_fuzz(data, schema):
    try:
        events, report = parse_trace(data, schema)
    except TraceReadError:
        return
    assert report.rows_read == report.rows_accepted + report.rows_rejected
    assert len(events) == report.rows_accepted
    assert [e.timestamp for e in events] == sorted(e.timestamp for e in events)


@given(st.lists(st.text("0123456789,-.abc\n\"", max_size=40), max_size=10))
def test_report_identity_on_csvish_text(lines):
    data = ("timestamp,file,size_bytes,client\n" + "\n".join(lines)).encode()
    events, report = parse_trace(data, CSV)
    assert report.rows_read == report.rows_accepted + report.rows_rejected


def test_rejections_capped_at_100():
    data = b"timestamp,file,size_bytes,client\n" + b"1,a,-1,c\n" * 150
    _, report = parse_trace(data, CSV)
    assert report.rows_rejected == 150
    assert len(report.rejections) == 100
    assert isinstance(report, IngestReport)


def test_outcomes_round_trip():
    from cachefed.core import SimOutcome
    e = AccessEvent(3.25, "f,1", 10, "c")
    outs = [SimOutcome(e, "n1", False, 10, 0, (("old", 4), ("o,ld2", 5))),
            SimOutcome(e, "n1", True, 0, 10), SimOutcome(e, "origin-direct", False, 10, 0, (), True)]
    assert parse_outcomes(write_outcomes(outs)) == outs
