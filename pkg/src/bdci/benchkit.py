"""Conflict-injection harness: mutation operators and detection campaigns.

Three operators are supported, each making exactly one syntactic change
inside a branch's changed region:

* SSDL -- delete one whole statement (replaced by ``;``)
* OCNG -- negate the controlling condition of an ``if``/``while``
* CRCR -- replace an integer literal with 0, 1, -1, literal+1 or literal-1

A campaign builds base / branch-1 / branch-2 working copies per case
(branch 2 carrying the mutation), runs the corpus tests to collect traces,
pushes them through the full detection pipeline, and tabulates the results.
"""

from __future__ import annotations

import logging
import re
import shlex
import shutil
import subprocess
import tempfile
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Sequence

from . import proplogic
from .analyzer import AnalysisOutcome, detect_conflicts
from .miner import DEFAULT_MIN_SAMPLES, mine_point_map
from .scoper import extract_functions, load_tree, monitored_for_comparison, tokenize
from .trace import load_trace_dir, samples_by_point

logger = logging.getLogger(__name__)


class MutationError(Exception):
    pass


class InapplicableMutationError(MutationError):
    pass


class Operator(Enum):
    SSDL = "SSDL"
    OCNG = "OCNG"
    CRCR = "CRCR"


@dataclass(frozen=True)
class MutationSpec:
    operator: Operator
    file: str
    line_start: int
    line_end: int
    seed: int = 0

    def __post_init__(self):
        if self.line_start < 1 or self.line_end < self.line_start:
            raise MutationError(f"bad line range {self.line_start}-{self.line_end}")


_INT_LITERAL_RE = re.compile(r"\d+\Z")


def _in_range(spec: MutationSpec, line: int) -> bool:
    return spec.line_start <= line <= spec.line_end


def _statement_sites(tokens, spec: MutationSpec) -> list[tuple[int, int, str]]:
    """Simple statements (``...;`` at paren depth 0) fully inside the range."""
    sites = []
    start_idx = None
    paren_depth = 0
    for i, tok in enumerate(tokens):
        if tok.text == "(":
            paren_depth += 1
        elif tok.text == ")":
            paren_depth = max(0, paren_depth - 1)
        if start_idx is None and tok.text not in "{};":
            start_idx = i
        if tok.text in "{}":
            start_idx = None
        elif tok.text == ";" and paren_depth == 0:
            if start_idx is not None:
                first, last = tokens[start_idx], tok
                if _in_range(spec, first.line) and _in_range(spec, last.line):
                    sites.append((first.start, last.end, ";"))
            start_idx = None
    return sites


def _condition_sites(tokens, spec: MutationSpec, source: str) -> list[tuple[int, int, str]]:
    """Controlling conditions of if/while statements inside the range."""
    sites = []
    for i, tok in enumerate(tokens):
        if tok.text not in ("if", "while") or not _in_range(spec, tok.line):
            continue
        if i + 1 >= len(tokens) or tokens[i + 1].text != "(":
            continue
        depth = 0
        close = None
        for j in range(i + 1, len(tokens)):
            if tokens[j].text == "(":
                depth += 1
            elif tokens[j].text == ")":
                depth -= 1
                if depth == 0:
                    close = tokens[j]
                    break
        if close is None or not _in_range(spec, close.line):
            continue
        open_tok = tokens[i + 1]
        inner = source[open_tok.end:close.start].strip()
        sites.append((open_tok.end, close.start, f"!({inner})"))
    return sites


def _literal_sites(tokens, spec: MutationSpec) -> list[tuple[int, int, str]]:
    """Integer literals inside the range, times their replacement values."""
    sites = []
    for i, tok in enumerate(tokens):
        if not _INT_LITERAL_RE.match(tok.text) or not _in_range(spec, tok.line):
            continue
        prev_text = tokens[i - 1].text if i > 0 else ""
        next_text = tokens[i + 1].text if i + 1 < len(tokens) else ""
        if prev_text == "." or next_text == ".":
            continue  # part of a float literal
        value = int(tok.text)
        replacements = []
        for candidate in (0, 1, -1, value + 1, value - 1):
            if candidate != value and candidate not in replacements:
                replacements.append(candidate)
        for repl in replacements:
            sites.append((tok.start, tok.end, str(repl)))
    return sites


def mutate(source: str, spec: MutationSpec) -> str:
    """Apply exactly one mutation chosen by ``spec.seed`` among the
    applicable sites in the target line range."""
    spans = extract_functions(source, spec.file)
    if not any(s.start_line <= spec.line_start and spec.line_end <= s.end_line
               for s in spans):
        raise MutationError(
            f"{spec.file}:{spec.line_start}-{spec.line_end} is not inside a function")
    tokens = tokenize(source)
    if spec.operator is Operator.SSDL:
        sites = _statement_sites(tokens, spec)
    elif spec.operator is Operator.OCNG:
        sites = _condition_sites(tokens, spec, source)
    else:
        sites = _literal_sites(tokens, spec)
    if not sites:
        raise InapplicableMutationError(
            f"no {spec.operator.value} site in {spec.file}:"
            f"{spec.line_start}-{spec.line_end}")
    start, end, replacement = sites[spec.seed % len(sites)]
    return source[:start] + replacement + source[end:]


# ---------------------------------------------------------------------------
# campaigns


@dataclass(frozen=True)
class Corpus:
    """Three version directories plus the command that builds one version
    and runs its tests.  The command template receives {workdir},
    {tracedir} and {label}."""

    base_dir: str
    branch1_dir: str
    branch2_dir: str
    test_command: str


@dataclass(frozen=True)
class CampaignCase:
    name: str
    mutation: MutationSpec | None = None   # None: unmutated base case
    expect: str = ""


@dataclass
class CaseResult:
    name: str
    operator: str
    status: str                    # "ok" or "error"
    expect: str = ""
    error: str = ""
    atoms: tuple[int, int, int] = (0, 0, 0)          # base, branch 1, branch 2
    delta1: tuple[int, int, int] = (0, 0, 0)         # same, dropped, new
    delta2: tuple[int, int, int] = (0, 0, 0)
    changed1: int = 0
    changed2: int = 0
    conflicts: int = 0
    suppressed: int = 0
    gaps: int = 0
    conflict_points: tuple[str, ...] = ()

    @property
    def detected(self) -> bool:
        return self.conflicts >= 1


@dataclass
class CampaignResult:
    cases: list[CaseResult] = field(default_factory=list)

    def to_table(self) -> str:
        header = ["case", "operator", "status", "props_base", "props_b1",
                  "same1/del1/new1", "props_b2", "same2/del2/new2",
                  "changed_1", "changed_2", "conflicts", "detected",
                  "expect", "gaps"]
        rows = ["\t".join(header)]
        for c in self.cases:
            rows.append("\t".join([
                c.name, c.operator, c.status,
                str(c.atoms[0]), str(c.atoms[1]),
                "/".join(map(str, c.delta1)),
                str(c.atoms[2]),
                "/".join(map(str, c.delta2)),
                str(c.changed1), str(c.changed2), str(c.conflicts),
                "yes" if c.detected else "no", c.expect or "-", str(c.gaps),
            ]))
        return "\n".join(rows) + "\n"

    def summary(self) -> str:
        lines = []
        for c in self.cases:
            if c.status != "ok":
                lines.append(f"{c.name}: ERROR ({c.error})")
                continue
            what = f"{c.conflicts} conflict(s)"
            if c.suppressed:
                what += f", {c.suppressed} suppressed"
            if c.gaps:
                what += f", {c.gaps} coverage gap(s)"
            lines.append(f"{c.name}: {what}")
        detected = sum(1 for c in self.cases if c.status == "ok" and c.detected)
        lines.append(f"detected in {detected}/{len(self.cases)} cases")
        return "\n".join(lines) + "\n"


def _run_tests(command: str, workdir: Path, tracedir: Path, label: str):
    cmd = command.format(workdir=shlex.quote(str(workdir)),
                         tracedir=shlex.quote(str(tracedir)),
                         label=shlex.quote(label))
    proc = subprocess.run(cmd, shell=True, capture_output=True, text=True)
    if proc.returncode != 0:
        raise MutationError(
            f"test command failed for {label}: {proc.stderr.strip() or proc.stdout.strip()}")


def _analyze_case(corpus: Corpus, workroot: Path, case: CampaignCase,
                  min_samples: int, grid_budget: int,
                  suppressed_variables: Sequence[str]) -> CaseResult:
    operator = case.mutation.operator.value if case.mutation else "-"
    result = CaseResult(case.name, operator, "ok", expect=case.expect)

    case_dir = workroot / case.name
    dirs = {"base": Path(corpus.base_dir), "branch1": Path(corpus.branch1_dir),
            "branch2": Path(corpus.branch2_dir)}
    workdirs: dict[str, Path] = {}
    for label, src in dirs.items():
        dst = case_dir / label
        shutil.copytree(src, dst)
        workdirs[label] = dst
    if case.mutation is not None:
        target = workdirs["branch2"] / case.mutation.file
        if not target.is_file():
            raise MutationError(f"mutation target {case.mutation.file} not in branch 2 tree")
        target.write_text(mutate(target.read_text(encoding="utf-8"), case.mutation),
                          encoding="utf-8")

    samples = {}
    for label, workdir in workdirs.items():
        tracedir = case_dir / "traces" / label
        tracedir.mkdir(parents=True)
        _run_tests(corpus.test_command, workdir, tracedir, label)
        samples[label] = samples_by_point(load_trace_dir(tracedir))

    trees = {label: load_tree(wd) for label, wd in workdirs.items()}
    monitored = sorted(monitored_for_comparison(trees["base"], trees["branch1"],
                                                trees["branch2"]),
                       key=lambda p: p.rendered)
    maps = {label: mine_point_map(samples[label], monitored, min_samples=min_samples)
            for label in workdirs}
    outcome = detect_conflicts(maps["base"], maps["branch1"], maps["branch2"],
                               suppressed_variables=suppressed_variables,
                               grid_budget=grid_budget)
    _fill_counts(result, maps, outcome)
    return result


def _fill_counts(result: CaseResult, maps, outcome: AnalysisOutcome):
    def atom_total(label):
        return sum(len(ps.atoms) for ps in maps[label].values())

    def delta(changes):
        same = sum(len(c.same_atoms) for c in changes.points.values())
        dropped = sum(len(c.dropped_atoms) for c in changes.points.values())
        new = sum(len(c.new_atoms) for c in changes.points.values())
        return (same, dropped, new)

    result.atoms = (atom_total("base"), atom_total("branch1"), atom_total("branch2"))
    result.delta1 = delta(outcome.changes1)
    result.delta2 = delta(outcome.changes2)
    result.changed1 = outcome.changes1.count_changed()
    result.changed2 = outcome.changes2.count_changed()
    result.conflicts = len(outcome.live_conflicts())
    result.suppressed = len(outcome.suppressed_conflicts())
    result.gaps = len(outcome.gaps)
    result.conflict_points = tuple(r.program_point.rendered
                                   for r in outcome.live_conflicts())


def run_campaign(corpus: Corpus, cases: Sequence[CampaignCase],
                 workroot: str | Path | None = None,
                 min_samples: int = DEFAULT_MIN_SAMPLES,
                 grid_budget: int = proplogic.DEFAULT_GRID_BUDGET,
                 suppressed_variables: Sequence[str] = ()) -> CampaignResult:
    """Run every case; build or trace failures mark the case ERROR and the
    campaign continues."""
    root = Path(workroot) if workroot is not None else Path(tempfile.mkdtemp(prefix="bdci-campaign-"))
    result = CampaignResult()
    for case in cases:
        try:
            result.cases.append(_analyze_case(corpus, root, case, min_samples,
                                              grid_budget, suppressed_variables))
        except Exception as exc:
            operator = case.mutation.operator.value if case.mutation else "-"
            logger.warning("case %s failed: %s", case.name, exc)
            result.cases.append(CaseResult(case.name, operator, "error",
                                           expect=case.expect, error=str(exc)))
    return result


# ---------------------------------------------------------------------------
# campaign spec files


def parse_campaign_spec(text: str, base_dir: str | Path = ".") -> tuple[Corpus, list[CampaignCase]]:
    """Parse a campaign spec file.

    Format (one directive per line, ``#`` comments)::

        corpus base=<dir> branch1=<dir> branch2=<dir> tests=<command>
        case <name> [operator=<op> file=<f> lines=<a>-<b> seed=<n>] [expect=<text>]

    Relative corpus directories resolve against the spec file's directory.
    """
    base = Path(base_dir)
    corpus: Corpus | None = None
    cases: list[CampaignCase] = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = shlex.split(line)
        kw = dict(p.split("=", 1) for p in parts[1:] if "=" in p)
        if parts[0] == "corpus":
            try:
                tests = kw["tests"].replace("{specdir}", str(base.resolve()))
                corpus = Corpus(str(base / kw["base"]), str(base / kw["branch1"]),
                                str(base / kw["branch2"]), tests)
            except KeyError as exc:
                raise MutationError(f"line {line_no}: corpus needs {exc}") from None
        elif parts[0] == "case":
            positional = [p for p in parts[1:] if "=" not in p]
            if len(positional) != 1:
                raise MutationError(f"line {line_no}: case needs exactly one name")
            name = positional[0]
            mutation = None
            if "operator" in kw:
                try:
                    op = Operator(kw["operator"])
                except ValueError:
                    raise MutationError(
                        f"line {line_no}: unknown operator {kw['operator']!r}") from None
                m = re.match(r"(\d+)-(\d+)\Z", kw.get("lines", ""))
                if not m:
                    raise MutationError(f"line {line_no}: lines=<start>-<end> required")
                mutation = MutationSpec(op, kw.get("file", ""), int(m.group(1)),
                                        int(m.group(2)), int(kw.get("seed", 0)))
                if not mutation.file:
                    raise MutationError(f"line {line_no}: file=<path> required")
            cases.append(CampaignCase(name, mutation, kw.get("expect", "")))
        else:
            raise MutationError(f"line {line_no}: unknown directive {parts[0]!r}")
    if corpus is None:
        raise MutationError("spec file has no corpus directive")
    return corpus, cases
