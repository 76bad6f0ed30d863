import io

import pytest

from bdci.trace import (Kind, LabelMismatchError, PairingError, PointKind,
                        ProgramPoint, TraceLog, TraceParseError, TypedValue,
                        merge_traces, parse_trace, program_points, samples_at,
                        serialize_trace)

HEADER = "# bdci trace v1\n"


def parse(text):
    return parse_trace(io.StringIO(text))


def test_parse_single_exit_block():
    trace = parse(HEADER
                  + "PP getSaving ENTER 1\nV price int 600\nEE\n"
                  + "PP getSaving EXIT 1\nV return int 12\nV price int 600\nEE\n")
    assert len(trace) == 2
    exit_sample = trace.samples[1]
    assert exit_sample.program_point == ProgramPoint("getSaving", PointKind.EXIT)
    assert exit_sample.bindings["return"] == TypedValue(Kind.INT, 12)
    assert exit_sample.bindings["price"] == TypedValue(Kind.INT, 600)


def test_empty_stream_header_only():
    assert len(parse(HEADER)) == 0


def test_label_line():
    trace = parse(HEADER + "L base\n")
    assert trace.source_label == "base"


def test_missing_header():
    with pytest.raises(TraceParseError):
        parse("PP f ENTER 0\nEE\n")


def test_malformed_line_reports_number():
    with pytest.raises(TraceParseError) as err:
        parse(HEADER + "PP f ENTER 0\nV x int\nEE\n")
    assert err.value.line_no == 3


def test_exit_without_enter_is_pairing_error():
    with pytest.raises(PairingError):
        parse(HEADER + "PP f EXIT 0\nEE\n")


def test_exit_pairs_by_invocation_id():
    with pytest.raises(PairingError):
        parse(HEADER + "PP f ENTER 0\nEE\nPP f EXIT 1\nEE\n")


def test_non_finite_float_rejected():
    with pytest.raises(TraceParseError):
        parse(HEADER + "PP f ENTER 0\nV x float inf\nEE\n")


def test_return_at_enter_rejected():
    with pytest.raises(TraceParseError):
        parse(HEADER + "PP f ENTER 0\nV return int 1\nEE\n")


def test_kind_change_at_point_rejected():
    text = (HEADER + "PP f ENTER 0\nV x int 1\nEE\n"
            + "PP f ENTER 1\nV x float 1.0\nEE\n")
    with pytest.raises(TraceParseError):
        parse(text)


def test_value_kinds():
    trace = parse(HEADER + "PP f ENTER 0\nV a int -3\nV b uint 7\nV c bool 1\n"
                  "V d float 2.5\nV e ptr 0\nEE\n")
    b = trace.samples[0].bindings
    assert b["a"].kind is Kind.INT and b["a"].value == -3
    assert b["d"].kind is Kind.FLOAT and b["d"].value == 2.5
    assert b["e"].kind is Kind.PTR and b["e"].value == 0


def test_round_trip():
    text = (HEADER + "L v7\nPP f ENTER 0\nV x int 5\nEE\n"
            + "PP f EXIT 0\nV return int 6\nV x int 5\nEE\n")
    trace = parse(text)
    assert serialize_trace(trace) == text
    assert parse(serialize_trace(trace)) == trace


def test_samples_at_selects_point_and_preserves_order():
    trace = parse(HEADER + "PP f ENTER 0\nV x int 1\nEE\nPP g ENTER 0\nEE\n"
                  + "PP f ENTER 1\nV x int 2\nEE\n")
    pp = ProgramPoint("f", PointKind.ENTER)
    hits = samples_at(trace, pp)
    assert [s.bindings["x"].value for s in hits] == [1, 2]
    assert samples_at(trace, ProgramPoint("missing", PointKind.ENTER)) == ()


def test_enter_and_exit_are_distinct_points():
    trace = parse(HEADER + "PP f ENTER 0\nEE\nPP f EXIT 0\nEE\n")
    enter = samples_at(trace, ProgramPoint("f", PointKind.ENTER))
    exit_ = samples_at(trace, ProgramPoint("f", PointKind.EXIT))
    assert len(enter) == 1 and len(exit_) == 1
    assert all(s not in exit_ for s in enter)


def test_samples_at_partitions_trace():
    trace = parse(HEADER + "PP f ENTER 0\nEE\nPP g ENTER 0\nEE\nPP f ENTER 1\nEE\n")
    union = [s for pp in program_points(trace) for s in samples_at(trace, pp)]
    assert sorted(union, key=id) == sorted(trace.samples, key=id)


def test_merge_single_is_identity_up_to_renumbering():
    t = parse(HEADER + "L x\nPP f ENTER 3\nEE\n")
    merged = merge_traces([t])
    assert len(merged) == 1
    assert merged.source_label == "x"
    assert merged.samples[0].invocation_id == 0


def test_merge_cardinality_and_unique_ids():
    t1 = parse(HEADER + "PP getSaving ENTER 1\nEE\nPP getSaving EXIT 1\nEE\n")
    t2 = parse(HEADER + "PP getSaving ENTER 1\nEE\nPP getSaving EXIT 1\nEE\n")
    merged = merge_traces([t1, t2])
    assert len(merged) == len(t1) + len(t2)
    enter_ids = [s.invocation_id for s in merged.samples
                 if s.program_point.kind is PointKind.ENTER]
    assert len(set(enter_ids)) == len(enter_ids)
    # pairing still holds after renumbering
    assert parse(serialize_trace(merged)) == merged


def test_merge_label_mismatch():
    t1 = TraceLog((), "a")
    t2 = TraceLog((), "b")
    with pytest.raises(LabelMismatchError):
        merge_traces([t1, t2])


def test_program_point_rendering_and_parsing():
    pp = ProgramPoint("getSaving", PointKind.EXIT)
    assert pp.rendered == "getSaving_EXIT"
    assert ProgramPoint.parse("getSaving_EXIT") == pp
    with pytest.raises(ValueError):
        ProgramPoint.parse("justAName")


def test_base_corpus_trace_covers_exactly_the_three_functions(corpus_traces):
    trace = corpus_traces["base"]
    names = {pp.rendered for pp in program_points(trace)}
    assert names == {f"{fn}_{kind}"
                     for fn in ("getTotalPrice", "getDiscountedPrice", "getSaving")
                     for kind in ("ENTER", "EXIT")}
    # one EXIT sample per driver invocation of getSaving
    saving_exits = samples_at(trace, ProgramPoint("getSaving", PointKind.EXIT))
    assert len(saving_exits) == 6
