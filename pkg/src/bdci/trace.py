"""Execution-trace file format and in-memory trace model.

A trace is a flat text file produced by an instrumented program while its
test suite runs.  Each function entry or exit is one block::

    # bdci trace v1
    L base
    PP getSaving ENTER 1
    V price int 600
    V quantity int 2
    EE

Values are numeric only (int/uint/bool/float/ptr); booleans are 0/1 and
pointers are decimal addresses with 0 meaning null.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable

HEADER_LINE = "# bdci trace v1"

RETURN_VAR = "return"


class TraceError(Exception):
    """Base class for trace-format errors."""


class TraceParseError(TraceError):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class PairingError(TraceError):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class LabelMismatchError(TraceError):
    pass


class Kind(Enum):
    INT = "int"
    UINT = "uint"
    BOOL = "bool"
    FLOAT = "float"
    PTR = "ptr"


class PointKind(Enum):
    ENTER = "ENTER"
    EXIT = "EXIT"


@dataclass(frozen=True, order=True)
class ProgramPoint:
    """Entry or exit of a named function, e.g. ``getSaving_EXIT``."""

    function_name: str
    kind: PointKind

    def __post_init__(self):
        if not self.function_name or any(c.isspace() for c in self.function_name):
            raise ValueError(f"bad function name: {self.function_name!r}")

    @property
    def rendered(self) -> str:
        return f"{self.function_name}_{self.kind.value}"

    @classmethod
    def parse(cls, name: str) -> "ProgramPoint":
        for kind in (PointKind.ENTER, PointKind.EXIT):
            suffix = "_" + kind.value
            if name.endswith(suffix) and len(name) > len(suffix):
                return cls(name[: -len(suffix)], kind)
        raise ValueError(f"not a rendered program point: {name!r}")


@dataclass(frozen=True)
class TypedValue:
    kind: Kind
    value: int | float

    def __post_init__(self):
        if self.kind is Kind.FLOAT:
            if not isinstance(self.value, (int, float)) or not math.isfinite(self.value):
                raise ValueError(f"float value must be finite, got {self.value!r}")
            object.__setattr__(self, "value", float(self.value))
            return
        if not isinstance(self.value, int) or isinstance(self.value, bool):
            raise ValueError(f"{self.kind.value} value must be an exact integer")
        if self.kind is Kind.BOOL and self.value not in (0, 1):
            raise ValueError(f"bool value must be 0 or 1, got {self.value}")
        if self.kind in (Kind.UINT, Kind.PTR) and self.value < 0:
            raise ValueError(f"{self.kind.value} value must be non-negative")


@dataclass(frozen=True)
class Sample:
    """One observation of variable values at a program point."""

    program_point: ProgramPoint
    invocation_id: int
    bindings: dict[str, TypedValue]

    def __post_init__(self):
        if self.invocation_id < 0:
            raise ValueError("invocation_id must be non-negative")
        if self.program_point.kind is PointKind.ENTER and RETURN_VAR in self.bindings:
            raise ValueError(f"'{RETURN_VAR}' may only be bound at EXIT points")


@dataclass(frozen=True)
class TraceLog:
    samples: tuple[Sample, ...]
    source_label: str = ""

    def __len__(self) -> int:
        return len(self.samples)


def _parse_value(kind_tok: str, value_tok: str, line_no: int) -> TypedValue:
    try:
        kind = Kind(kind_tok)
    except ValueError:
        raise TraceParseError(line_no, f"unknown value kind {kind_tok!r}") from None
    try:
        if kind is Kind.FLOAT:
            value = float(value_tok)
            if not math.isfinite(value):
                raise TraceParseError(line_no, f"non-finite float {value_tok!r}")
        else:
            value = int(value_tok)
        return TypedValue(kind, value)
    except TraceParseError:
        raise
    except ValueError as exc:
        raise TraceParseError(line_no, f"bad {kind_tok} literal {value_tok!r}: {exc}") from None


def parse_trace(stream: Iterable[str]) -> TraceLog:
    """Parse the ``# bdci trace v1`` line format into a :class:`TraceLog`.

    Raises :class:`TraceParseError` for malformed lines (with line number)
    and :class:`PairingError` for an EXIT block with no earlier matching
    ENTER of the same function and invocation id.
    """
    lines = iter(stream)
    line_no = 0

    def next_line() -> str | None:
        nonlocal line_no
        for raw in lines:
            line_no += 1
            return raw.rstrip("\n")
        return None

    first = next_line()
    if first is None or first.strip() != HEADER_LINE:
        raise TraceParseError(line_no or 1, f"missing header {HEADER_LINE!r}")

    label = ""
    samples: list[Sample] = []
    open_invocations: set[tuple[str, int]] = set()
    seen_label = False
    kinds_at_point: dict[tuple[ProgramPoint, str], Kind] = {}

    line = next_line()
    while line is not None:
        stripped = line.strip()
        if not stripped:
            line = next_line()
            continue
        parts = stripped.split()
        if parts[0] == "L":
            if seen_label:
                raise TraceParseError(line_no, "duplicate L line")
            if samples:
                raise TraceParseError(line_no, "L line must precede all PP blocks")
            if len(parts) != 2:
                raise TraceParseError(line_no, "L line takes exactly one label")
            label = parts[1]
            seen_label = True
            line = next_line()
            continue
        if parts[0] != "PP":
            raise TraceParseError(line_no, f"expected PP block, got {stripped!r}")
        if len(parts) != 4:
            raise TraceParseError(line_no, "PP line needs: PP <function> <ENTER|EXIT> <id>")
        fn, kind_tok, id_tok = parts[1], parts[2], parts[3]
        if kind_tok not in ("ENTER", "EXIT"):
            raise TraceParseError(line_no, f"bad point kind {kind_tok!r}")
        try:
            invocation_id = int(id_tok)
        except ValueError:
            raise TraceParseError(line_no, f"bad invocation id {id_tok!r}") from None
        if invocation_id < 0:
            raise TraceParseError(line_no, "invocation id must be non-negative")
        try:
            pp = ProgramPoint(fn, PointKind(kind_tok))
        except ValueError as exc:
            raise TraceParseError(line_no, str(exc)) from None

        bindings: dict[str, TypedValue] = {}
        pp_line = line_no
        line = next_line()
        while line is not None and line.strip() and line.split()[0] == "V":
            vparts = line.split()
            if len(vparts) != 4:
                raise TraceParseError(line_no, "V line needs: V <name> <kind> <value>")
            name = vparts[1]
            if name in bindings:
                raise TraceParseError(line_no, f"duplicate variable {name!r} in block")
            bindings[name] = _parse_value(vparts[2], vparts[3], line_no)
            line = next_line()
        if line is None or line.strip() != "EE":
            raise TraceParseError(line_no if line is not None else pp_line,
                                  "PP block not terminated by EE")

        if pp.kind is PointKind.ENTER:
            if RETURN_VAR in bindings:
                raise TraceParseError(line_no, f"'{RETURN_VAR}' bound at an ENTER point")
            open_invocations.add((fn, invocation_id))
        else:
            if (fn, invocation_id) not in open_invocations:
                raise PairingError(line_no, f"EXIT of {fn} id {invocation_id} has no prior ENTER")
        for name, tv in bindings.items():
            key = (pp, name)
            prior = kinds_at_point.get(key)
            if prior is None:
                kinds_at_point[key] = tv.kind
            elif prior is not tv.kind:
                raise TraceParseError(
                    line_no, f"variable {name!r} at {pp.rendered} changes kind "
                             f"{prior.value} -> {tv.kind.value}")
        samples.append(Sample(pp, invocation_id, bindings))
        line = next_line()

    return TraceLog(tuple(samples), label)


def _render_value(tv: TypedValue) -> str:
    if tv.kind is Kind.FLOAT:
        return repr(tv.value)
    return str(tv.value)


def serialize_trace(trace: TraceLog) -> str:
    """Inverse of :func:`parse_trace`; emits the canonical line format."""
    out = [HEADER_LINE]
    if trace.source_label:
        out.append(f"L {trace.source_label}")
    for sample in trace.samples:
        pp = sample.program_point
        out.append(f"PP {pp.function_name} {pp.kind.value} {sample.invocation_id}")
        for name, tv in sample.bindings.items():
            out.append(f"V {name} {tv.kind.value} {_render_value(tv)}")
        out.append("EE")
    return "\n".join(out) + "\n"


def load_trace(path) -> TraceLog:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_trace(fh)


def load_trace_dir(directory) -> TraceLog:
    """Parse and merge every ``*.trace`` file under ``directory``."""
    from pathlib import Path
    paths = sorted(Path(directory).rglob("*.trace"))
    return merge_traces([load_trace(p) for p in paths])


def samples_by_point(trace: TraceLog) -> dict[ProgramPoint, list[Sample]]:
    out: dict[ProgramPoint, list[Sample]] = {}
    for s in trace.samples:
        out.setdefault(s.program_point, []).append(s)
    return out


def samples_at(trace: TraceLog, pp: ProgramPoint) -> tuple[Sample, ...]:
    """All samples of ``trace`` taken at ``pp``, in trace order."""
    return tuple(s for s in trace.samples if s.program_point == pp)


def program_points(trace: TraceLog) -> list[ProgramPoint]:
    """Distinct program points in first-appearance order."""
    seen: dict[ProgramPoint, None] = {}
    for s in trace.samples:
        seen.setdefault(s.program_point, None)
    return list(seen)


def merge_traces(traces: list[TraceLog]) -> TraceLog:
    """Concatenate traces from one version, renumbering invocation ids so
    they stay unique per function."""
    if not traces:
        return TraceLog(())
    label = traces[0].source_label
    for t in traces[1:]:
        if t.source_label != label:
            raise LabelMismatchError(
                f"cannot merge traces labelled {label!r} and {t.source_label!r}")
    next_id: dict[str, int] = {}
    merged: list[Sample] = []
    for t in traces:
        remap: dict[tuple[str, int], int] = {}
        for s in t.samples:
            key = (s.program_point.function_name, s.invocation_id)
            if key not in remap:
                fn = s.program_point.function_name
                remap[key] = next_id.get(fn, 0)
                next_id[fn] = remap[key] + 1
            merged.append(Sample(s.program_point, remap[key], s.bindings))
    return TraceLog(tuple(merged), label)
