import re

import pytest

from bdci.analyzer import (AnalyzerInputError, ChangeStatus, NO_CONFLICTS_LINE,
                           behavioral_changes, coverage_gaps, detect_conflicts,
                           interfering_region, render_report)
from bdci.miner import PropertySet
from bdci.proplogic import EquivResult, parse_condition
from bdci.trace import Kind, PointKind, ProgramPoint


def pp(name, kind="EXIT"):
    return ProgramPoint(name, PointKind[kind])


def ps(point, text, kinds=None, uncomparable=False):
    if uncomparable:
        return PropertySet(point, frozenset(), 0, uncomparable=True)
    atoms = parse_condition(text).atoms
    names = {v for a in atoms for v in a.variables()}
    return PropertySet(point, atoms, 10,
                       kinds=kinds or {n: Kind.INT for n in names})


def prop_map(**conditions):
    out = {}
    for name, text in conditions.items():
        point = pp(name)
        out[point] = ps(point, text) if text is not None else ps(point, "", uncomparable=True)
    return out


class TestBehavioralChanges:
    def test_strictness_flip_is_changed(self):
        base = prop_map(getTotalPrice="(> return price)")
        ver = prop_map(getTotalPrice="(>= return price)")
        changes = behavioral_changes(base, ver)
        assert changes.points[pp("getTotalPrice")].status is ChangeStatus.CHANGED

    def test_identical_maps_unchanged(self):
        base = prop_map(f="(> port 0)", g="(= x 3)")
        changes = behavioral_changes(base, dict(base))
        assert changes.changed() == set()

    def test_semantically_equal_rewrite_unchanged(self):
        base = prop_map(f="(> port 0)")
        ver = prop_map(f="(>= port 1)")
        changes = behavioral_changes(base, ver)
        assert changes.points[pp("f")].status is ChangeStatus.UNCHANGED

    def test_uncomparable_when_either_side_lacks_samples(self):
        base = prop_map(f="(> port 0)")
        ver = prop_map(f=None)
        changes = behavioral_changes(base, ver)
        assert changes.points[pp("f")].status is ChangeStatus.UNCOMPARABLE

    def test_monitored_set_mismatch_rejected(self):
        with pytest.raises(AnalyzerInputError):
            behavioral_changes(prop_map(f="true"), prop_map(g="true"))

    def test_atom_deltas(self):
        base = prop_map(f="(and (> x 0) (< x 10))")
        ver = prop_map(f="(and (> x 0) (< x 20))")
        change = behavioral_changes(base, ver).points[pp("f")]
        assert [str(a.rhs) for a in change.same_atoms] == ["0"]
        assert [a.rhs for a in change.dropped_atoms] == [10]
        assert [a.rhs for a in change.new_atoms] == [20]


class TestInterferingRegion:
    def test_point_changed_in_both(self):
        base = prop_map(f="(> x 0)", g="(> y 0)")
        ch1 = behavioral_changes(base, prop_map(f="(> x 1)", g="(> y 0)"))
        ch2 = behavioral_changes(base, prop_map(f="(>= x 0)", g="(> y 0)"))
        assert interfering_region(ch1, ch2) == {pp("f")}

    def test_one_side_unchanged_empty_region(self):
        base = prop_map(f="(> x 0)")
        ch1 = behavioral_changes(base, prop_map(f="(> x 0)"))
        ch2 = behavioral_changes(base, prop_map(f="(> x 5)"))
        assert interfering_region(ch1, ch2) == set()

    def test_uncomparable_excluded_and_reported_as_gap(self):
        base = prop_map(f="(> x 0)")
        ch1 = behavioral_changes(base, prop_map(f="(> x 5)"))
        ch2 = behavioral_changes(base, prop_map(f=None))
        assert interfering_region(ch1, ch2) == set()
        assert coverage_gaps(ch1, ch2) == [(pp("f"), False, True)]


class TestDetectConflicts:
    def test_live_conflict_when_all_three_disagree(self):
        base = prop_map(getSaving="(> return 10)")
        p1 = prop_map(getSaving="(>= return 0)")
        p2 = prop_map(getSaving="(>= return 10)")
        outcome = detect_conflicts(base, p1, p2)
        assert len(outcome.live_conflicts()) == 1
        report = outcome.reports[0]
        assert report.program_point == pp("getSaving")
        for verdict in (report.verdict_01, report.verdict_02, report.verdict_12):
            assert verdict.result is EquivResult.NOT_EQUIVALENT

    def test_equivalent_parallel_changes_suppressed(self):
        base = prop_map(f="(> port 0)")
        p1 = prop_map(f="(> port 1)")
        p2 = prop_map(f="(>= port 2)")
        outcome = detect_conflicts(base, p1, p2)
        assert outcome.live_conflicts() == []
        assert len(outcome.suppressed_conflicts()) == 1
        assert outcome.reports[0].reason == "equivalent parallel changes"

    def test_noise_variable_suppression(self):
        base = prop_map(f="(and (= fd 3) (> x 0))")
        p1 = prop_map(f="(and (= fd 4) (> x 0))")
        p2 = prop_map(f="(and (= fd 5) (> x 0))")
        outcome = detect_conflicts(base, p1, p2, suppressed_variables=["fd"])
        assert outcome.live_conflicts() == []
        assert "suppressed variables" in outcome.reports[0].reason
        # without the noise list the same case is live
        live = detect_conflicts(base, p1, p2)
        assert len(live.live_conflicts()) == 1

    def test_suppression_is_per_variable_not_blanket(self):
        base = prop_map(f="(and (= fd 3) (> x 0))")
        p1 = prop_map(f="(and (= fd 4) (> x 1))")
        p2 = prop_map(f="(and (= fd 5) (>= x 0))")
        outcome = detect_conflicts(base, p1, p2, suppressed_variables=["fd"])
        assert len(outcome.live_conflicts()) == 1  # x still differs

    def test_no_change_safety(self):
        base = prop_map(f="(> x 0)", g="(= y 2)")
        p2 = prop_map(f="(> x 9)", g="(= y 7)")
        outcome = detect_conflicts(base, dict(base), p2)
        assert outcome.live_conflicts() == []

    def test_symmetry_of_conflict_points(self):
        base = prop_map(f="(> x 0)", g="(> y 0)")
        p1 = prop_map(f="(> x 1)", g="(> y 2)")
        p2 = prop_map(f="(>= x 0)", g="(> y 2)")
        fwd = detect_conflicts(base, p1, p2)
        rev = detect_conflicts(base, p2, p1)
        assert {r.program_point for r in fwd.reports if r.live} == \
               {r.program_point for r in rev.reports if r.live}


BLOCK_RE = re.compile(
    r"HIGHER-ORDER CONFLICT: function (?P<point>\S+)\n"
    r"Model 0<->1: (?P<c01>.+);\n"
    r"Model 0<->2: (?P<c02>.+);\n"
    r"Model 1<->2: (?P<c12>.+);\n")


class TestRenderReport:
    def outcome(self):
        base = prop_map(getSaving="(> return 10)")
        p1 = prop_map(getSaving="(>= return 0)")
        p2 = prop_map(getSaving="(>= return 10)")
        return detect_conflicts(base, p1, p2)

    def test_block_format(self):
        text = render_report(self.outcome())
        match = BLOCK_RE.search(text)
        assert match and match.group("point") == "getSaving_EXIT"

    def test_empty_report(self):
        base = prop_map(f="(> x 0)")
        outcome = detect_conflicts(base, dict(base), dict(base))
        assert render_report(outcome) == NO_CONFLICTS_LINE + "\n"

    def test_gap_summary_lists_sides(self):
        base = prop_map(f="(> x 0)", g="(> y 0)")
        p1 = prop_map(f="(> x 1)", g=None)
        p2 = prop_map(f="(>= x 0)", g="(> y 0)")
        text = render_report(detect_conflicts(base, p1, p2),
                             labels=("base", "alpha", "beta"))
        assert "COVERAGE GAPS:" in text
        assert "g_EXIT: uncomparable in alpha" in text

    def test_every_block_reparses(self):
        text = render_report(self.outcome())
        blocks = BLOCK_RE.findall(text)
        assert blocks
        for _, c01, c02, c12 in blocks:
            for pair in (c01, c02, c12):
                left, sep, right = pair.partition("<->")
                assert sep
                parse_condition(left)
                parse_condition(right)

    def test_suppressed_summary(self):
        base = prop_map(f="(> port 0)")
        p1 = prop_map(f="(> port 1)")
        p2 = prop_map(f="(>= port 2)")
        text = render_report(detect_conflicts(base, p1, p2))
        assert text.startswith(NO_CONFLICTS_LINE)
        assert "SUPPRESSED CONFLICTS:" in text
        assert "f_EXIT: equivalent parallel changes" in text
