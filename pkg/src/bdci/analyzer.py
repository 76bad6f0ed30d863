"""Behavioral change computation and higher-order conflict detection.

A branch *changes* a program point when its mined condition is not
equivalent to the base version's.  Points changed in both compared branches
form the interfering region; a report is emitted per interfering point and
is live only when the two branches' conditions also disagree with each
other.  Points that lost comparability (too few samples, function never
executed) are excluded and surfaced as coverage gaps.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Sequence

from . import proplogic
from .miner import PropertySet
from .proplogic import AtomicProperty, Condition, EquivResult, EquivVerdict, serialize
from .trace import ProgramPoint

DEFAULT_SUPPRESSED_VARIABLES: tuple[str, ...] = ()


class AnalyzerInputError(Exception):
    pass


class ChangeStatus(Enum):
    UNCHANGED = "UNCHANGED"
    CHANGED = "CHANGED"
    UNCOMPARABLE = "UNCOMPARABLE"


@dataclass(frozen=True)
class PointChange:
    point: ProgramPoint
    status: ChangeStatus
    base_condition: Condition | None
    version_condition: Condition | None
    same_atoms: tuple[AtomicProperty, ...] = ()
    dropped_atoms: tuple[AtomicProperty, ...] = ()
    new_atoms: tuple[AtomicProperty, ...] = ()
    verdict: EquivVerdict | None = None


@dataclass(frozen=True)
class ChangeSet:
    """Per-point behavioral delta of one branch version vs the base."""

    label: str
    points: dict[ProgramPoint, PointChange]

    def changed(self) -> set[ProgramPoint]:
        return {p for p, c in self.points.items() if c.status is ChangeStatus.CHANGED}

    def uncomparable(self) -> set[ProgramPoint]:
        return {p for p, c in self.points.items() if c.status is ChangeStatus.UNCOMPARABLE}

    def count_changed(self) -> int:
        return len(self.changed())


def _sorted_atoms(atoms: Iterable[AtomicProperty]) -> tuple[AtomicProperty, ...]:
    return tuple(sorted(atoms, key=AtomicProperty.sort_key))


def behavioral_changes(base_props: Mapping[ProgramPoint, PropertySet],
                       version_props: Mapping[ProgramPoint, PropertySet],
                       label: str = "",
                       grid_budget: int = proplogic.DEFAULT_GRID_BUDGET) -> ChangeSet:
    """Classify every monitored point as UNCHANGED / CHANGED / UNCOMPARABLE
    and record the atom-level delta."""
    if set(base_props) != set(version_props):
        only_base = {p.rendered for p in set(base_props) - set(version_props)}
        only_ver = {p.rendered for p in set(version_props) - set(base_props)}
        raise AnalyzerInputError(
            f"monitored sets differ (base only: {sorted(only_base)}, "
            f"version only: {sorted(only_ver)})")
    points: dict[ProgramPoint, PointChange] = {}
    for pp in base_props:
        base_ps, ver_ps = base_props[pp], version_props[pp]
        if base_ps.uncomparable or ver_ps.uncomparable:
            points[pp] = PointChange(
                pp, ChangeStatus.UNCOMPARABLE,
                None if base_ps.uncomparable else base_ps.condition(),
                None if ver_ps.uncomparable else ver_ps.condition())
            continue
        base_cond, ver_cond = base_ps.condition(), ver_ps.condition()
        verdict = proplogic.equivalent(base_cond, ver_cond,
                                       kinds_a=base_ps.kinds, kinds_b=ver_ps.kinds,
                                       grid_budget=grid_budget)
        status = (ChangeStatus.CHANGED
                  if verdict.result is EquivResult.NOT_EQUIVALENT
                  else ChangeStatus.UNCHANGED)
        points[pp] = PointChange(
            pp, status, base_cond, ver_cond,
            same_atoms=_sorted_atoms(base_cond.atoms & ver_cond.atoms),
            dropped_atoms=_sorted_atoms(base_cond.atoms - ver_cond.atoms),
            new_atoms=_sorted_atoms(ver_cond.atoms - base_cond.atoms),
            verdict=verdict)
    return ChangeSet(label, points)


def interfering_region(changes1: ChangeSet, changes2: ChangeSet) -> set[ProgramPoint]:
    """Points whose condition changed in both branches.  Points that are
    uncomparable on either side never enter the region."""
    if set(changes1.points) != set(changes2.points):
        raise AnalyzerInputError("change sets cover different monitored sets")
    return changes1.changed() & changes2.changed()


def coverage_gaps(changes1: ChangeSet, changes2: ChangeSet) -> list[tuple[ProgramPoint, bool, bool]]:
    """Uncomparable points, flagged per branch side."""
    un1, un2 = changes1.uncomparable(), changes2.uncomparable()
    return [(pp, pp in un1, pp in un2)
            for pp in sorted(un1 | un2, key=lambda p: p.rendered)]


@dataclass(frozen=True)
class ConflictReport:
    program_point: ProgramPoint
    conditions: tuple[str, str, str]           # base, branch 1, branch 2 texts
    verdict_01: EquivVerdict
    verdict_02: EquivVerdict
    verdict_12: EquivVerdict
    suppressed: bool = False
    reason: str = ""

    @property
    def live(self) -> bool:
        return not self.suppressed


@dataclass(frozen=True)
class AnalysisOutcome:
    """Everything one three-way comparison produced."""

    reports: tuple[ConflictReport, ...]
    changes1: ChangeSet
    changes2: ChangeSet
    gaps: tuple[tuple[ProgramPoint, bool, bool], ...]

    def live_conflicts(self) -> list[ConflictReport]:
        return [r for r in self.reports if r.live]

    def suppressed_conflicts(self) -> list[ConflictReport]:
        return [r for r in self.reports if r.suppressed]


def _differing_atoms(c1: Condition, c2: Condition) -> set[AtomicProperty]:
    return (c1.atoms - c2.atoms) | (c2.atoms - c1.atoms)


def detect_conflicts(base_props: Mapping[ProgramPoint, PropertySet],
                     props1: Mapping[ProgramPoint, PropertySet],
                     props2: Mapping[ProgramPoint, PropertySet],
                     suppressed_variables: Sequence[str] = DEFAULT_SUPPRESSED_VARIABLES,
                     labels: tuple[str, str] = ("branch 1", "branch 2"),
                     grid_budget: int = proplogic.DEFAULT_GRID_BUDGET) -> AnalysisOutcome:
    """Report one conflict per interfering program point.

    A report is suppressed when the two branch conditions are equivalent
    (the same change landed on both branches) or when every differing atom
    mentions only noise-listed variables.
    """
    changes1 = behavioral_changes(base_props, props1, labels[0], grid_budget)
    changes2 = behavioral_changes(base_props, props2, labels[1], grid_budget)
    region = interfering_region(changes1, changes2)
    noise = set(suppressed_variables)

    reports: list[ConflictReport] = []
    for pp in sorted(region, key=lambda p: p.rendered):
        ps0, ps1, ps2 = base_props[pp], props1[pp], props2[pp]
        c0, c1, c2 = ps0.condition(), ps1.condition(), ps2.condition()
        v01 = changes1.points[pp].verdict
        v02 = changes2.points[pp].verdict
        v12 = proplogic.equivalent(c1, c2, kinds_a=ps1.kinds, kinds_b=ps2.kinds,
                                   grid_budget=grid_budget)
        suppressed, reason = False, ""
        if v12.result is EquivResult.EQUIVALENT:
            suppressed, reason = True, "equivalent parallel changes"
        else:
            differing = _differing_atoms(c1, c2)
            diff_vars = {v for atom in differing for v in atom.variables()}
            if noise and differing and diff_vars <= noise:
                suppressed = True
                reason = ("differs only on suppressed variables: "
                          + ", ".join(sorted(diff_vars)))
        reports.append(ConflictReport(
            pp, (serialize(c0), serialize(c1), serialize(c2)),
            v01, v02, v12, suppressed=suppressed, reason=reason))
    return AnalysisOutcome(tuple(reports), changes1, changes2,
                           tuple(coverage_gaps(changes1, changes2)))


NO_CONFLICTS_LINE = "NO HIGHER-ORDER CONFLICTS"


def render_report(outcome: AnalysisOutcome | Sequence[ConflictReport],
                  labels: tuple[str, str, str] = ("base", "branch 1", "branch 2")) -> str:
    """Render conflict blocks in the fixed report format::

        HIGHER-ORDER CONFLICT: function <point>
        Model 0<->1: <base condition><-><branch 1 condition>;
        Model 0<->2: <base condition><-><branch 2 condition>;
        Model 1<->2: <branch 1 condition><-><branch 2 condition>;

    followed by a summary of suppressed reports and coverage gaps.
    """
    if isinstance(outcome, AnalysisOutcome):
        reports: Sequence[ConflictReport] = outcome.reports
        gaps = outcome.gaps
    else:
        reports, gaps = outcome, ()
    live = [r for r in reports if r.live]
    suppressed = [r for r in reports if r.suppressed]

    sections: list[str] = []
    if not live:
        sections.append(NO_CONFLICTS_LINE)
    for r in live:
        c0, c1, c2 = r.conditions
        sections.append("\n".join([
            f"HIGHER-ORDER CONFLICT: function {r.program_point.rendered}",
            f"Model 0<->1: {c0}<->{c1};",
            f"Model 0<->2: {c0}<->{c2};",
            f"Model 1<->2: {c1}<->{c2};",
        ]))
    if suppressed:
        lines = ["SUPPRESSED CONFLICTS:"]
        lines += [f"  {r.program_point.rendered}: {r.reason}" for r in suppressed]
        sections.append("\n".join(lines))
    if gaps:
        lines = ["COVERAGE GAPS:"]
        for pp, in_1, in_2 in gaps:
            sides = [labels[1]] * in_1 + [labels[2]] * in_2
            lines.append(f"  {pp.rendered}: uncomparable in {', '.join(sides)}")
        sections.append("\n".join(lines))
    return "\n\n".join(sections) + "\n"
