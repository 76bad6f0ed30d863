"""Map textual diffs to changed functions and compute the monitored set.

Works on C-like sources: top-level functions with brace-delimited bodies.
Parsing is deliberately shallow -- a tokenizer that skips comments, string
and character literals, and preprocessor lines, plus balanced-brace
scanning.  That is enough to span functions, normalize signatures, and
over-approximate the call graph by the ``name (`` token pattern.
"""

from __future__ import annotations

import difflib
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

from .trace import PointKind, ProgramPoint

logger = logging.getLogger(__name__)

_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")
_KEYWORDS = {"if", "for", "while", "switch", "return", "sizeof", "do", "else", "case"}


@dataclass(frozen=True)
class Token:
    text: str
    line: int
    start: int = 0   # character offsets into the source
    end: int = 0


@dataclass(frozen=True)
class FunctionSpan:
    name: str
    file: str
    start_line: int   # 1-based, inclusive
    end_line: int     # 1-based, inclusive
    signature_text: str

    def contains_line(self, line: int) -> bool:
        return self.start_line <= line <= self.end_line


@dataclass(frozen=True)
class CallGraph:
    nodes: frozenset[str]
    edges: frozenset[tuple[str, str]]

    def callers(self, name: str) -> set[str]:
        return {u for u, v in self.edges if v == name}

    def callees(self, name: str) -> set[str]:
        return {v for u, v in self.edges if u == name}


def merge_graphs(graphs: Iterable[CallGraph]) -> CallGraph:
    nodes: set[str] = set()
    edges: set[tuple[str, str]] = set()
    for g in graphs:
        nodes |= g.nodes
        edges |= g.edges
    return CallGraph(frozenset(nodes), frozenset(edges))


def tokenize(source: str) -> list[Token]:
    """C-like tokens with line numbers; comments, string/char literals and
    preprocessor lines are consumed and not emitted."""
    tokens: list[Token] = []
    i, line = 0, 1
    n = len(source)
    at_line_start = True
    while i < n:
        c = source[i]
        if c == "\n":
            line += 1
            i += 1
            at_line_start = True
            continue
        if c in " \t\r":
            i += 1
            continue
        if at_line_start and c == "#":
            while i < n and source[i] != "\n":
                if source[i] == "\\" and i + 1 < n and source[i + 1] == "\n":
                    line += 1
                    i += 1
                i += 1
            continue
        at_line_start = False
        if c == "/" and i + 1 < n and source[i + 1] == "/":
            while i < n and source[i] != "\n":
                i += 1
            continue
        if c == "/" and i + 1 < n and source[i + 1] == "*":
            i += 2
            while i + 1 < n and not (source[i] == "*" and source[i + 1] == "/"):
                if source[i] == "\n":
                    line += 1
                i += 1
            i += 2
            continue
        if c in "\"'":
            quote = c
            i += 1
            while i < n and source[i] != quote:
                if source[i] == "\\":
                    i += 1
                if i < n and source[i] == "\n":
                    line += 1
                i += 1
            i += 1
            continue
        if c.isalnum() or c == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            tokens.append(Token(source[i:j], line, i, j))
            i = j
            continue
        tokens.append(Token(c, line, i, i + 1))
        i += 1
    return tokens


def _normalize_signature(param_tokens: list[Token]) -> str:
    """Strip whitespace and parameter names, keep types."""
    params: list[list[str]] = [[]]
    depth = 0
    for tok in param_tokens:
        if tok.text == "(":
            depth += 1
        elif tok.text == ")":
            depth -= 1
        if tok.text == "," and depth == 0:
            params.append([])
        else:
            params[-1].append(tok.text)
    rendered = []
    for words in params:
        if not words:
            continue
        idents = [w for w in words if _IDENT_RE.match(w)]
        if len(idents) >= 2:
            # the final identifier is the parameter name
            for k in range(len(words) - 1, -1, -1):
                if words[k] == idents[-1]:
                    words = words[:k] + words[k + 1:]
                    break
        rendered.append("".join(words))
    return ",".join(rendered)


def _function_spans(tokens: list[Token], file: str,
                    collect_bodies: dict[str, list[Token]] | None = None) -> list[FunctionSpan]:
    spans: list[FunctionSpan] = []
    depth = 0
    pending: list[Token] = []
    i = 0
    n = len(tokens)
    while i < n:
        tok = tokens[i]
        if depth == 0:
            if tok.text == "{":
                span = _match_signature(pending)
                close, body = _scan_braces(tokens, i)
                if close is None:
                    logger.warning("%s: unbalanced braces at EOF; tail unmapped", file)
                    return spans
                if span is not None:
                    name, sig, start = span
                    spans.append(FunctionSpan(name, file, start, tokens[close].line, sig))
                    if collect_bodies is not None:
                        collect_bodies[name] = body
                pending = []
                i = close + 1
                continue
            if tok.text in ";}":
                pending = []
            else:
                pending.append(tok)
        i += 1
    return spans


def _scan_braces(tokens: list[Token], open_idx: int):
    depth = 0
    for j in range(open_idx, len(tokens)):
        if tokens[j].text == "{":
            depth += 1
        elif tokens[j].text == "}":
            depth -= 1
            if depth == 0:
                return j, tokens[open_idx + 1:j]
    return None, []


def _match_signature(pending: list[Token]):
    """Recognize ``<decl tokens> name ( params )`` ahead of an opening brace."""
    if not pending or pending[-1].text != ")":
        return None
    depth = 0
    open_idx = None
    for k in range(len(pending) - 1, -1, -1):
        if pending[k].text == ")":
            depth += 1
        elif pending[k].text == "(":
            depth -= 1
            if depth == 0:
                open_idx = k
                break
    if open_idx is None or open_idx == 0:
        return None
    name_tok = pending[open_idx - 1]
    if not _IDENT_RE.match(name_tok.text) or name_tok.text in _KEYWORDS:
        return None
    if any(t.text == "=" for t in pending[:open_idx]):
        return None  # initializer, not a definition
    signature = _normalize_signature(pending[open_idx + 1:-1])
    return name_tok.text, signature, pending[0].line


def extract_functions(source: str, file: str) -> list[FunctionSpan]:
    """One span per top-level function definition, in file order."""
    return _function_spans(tokenize(source), file)


@dataclass
class SourceTree:
    """Parsed view of one version's source directory."""

    root: str
    sources: dict[str, str]
    spans: dict[str, list[FunctionSpan]] = field(default_factory=dict)
    bodies: dict[str, list[Token]] = field(default_factory=dict)

    def __post_init__(self):
        if not self.spans:
            for file in sorted(self.sources):
                bodies: dict[str, list[Token]] = {}
                file_spans = _function_spans(tokenize(self.sources[file]), file, bodies)
                self.spans[file] = file_spans
                for name, body in bodies.items():
                    if name in self.bodies:
                        logger.warning("duplicate function %s; keeping first definition", name)
                        continue
                    self.bodies[name] = body

    def functions(self) -> dict[str, FunctionSpan]:
        out: dict[str, FunctionSpan] = {}
        for file in sorted(self.spans):
            for span in self.spans[file]:
                out.setdefault(span.name, span)
        return out


def load_tree(root: str | Path, pattern: str = "*.c") -> SourceTree:
    root = Path(root)
    sources: dict[str, str] = {}
    for path in sorted(root.rglob(pattern)):
        sources[str(path.relative_to(root))] = path.read_text(encoding="utf-8")
    return SourceTree(str(root), sources)


@dataclass(frozen=True)
class ChangedFunctions:
    """Diff outcome: function name -> signature_changed flag, plus changed
    lines that fall outside every function span."""

    changed: dict[str, bool]
    outside: tuple[tuple[str, int, str], ...] = ()

    def names(self) -> set[str]:
        return set(self.changed)


def _changed_lines(base: str, version: str) -> tuple[set[int], set[int]]:
    base_lines = base.splitlines()
    ver_lines = version.splitlines()
    in_base: set[int] = set()
    in_version: set[int] = set()
    matcher = difflib.SequenceMatcher(None, base_lines, ver_lines, autojunk=False)
    for op, i1, i2, j1, j2 in matcher.get_opcodes():
        if op == "equal":
            continue
        in_base.update(range(i1 + 1, i2 + 1))
        in_version.update(range(j1 + 1, j2 + 1))
    return in_base, in_version


def changed_functions(base_tree: SourceTree, version_tree: SourceTree) -> ChangedFunctions:
    """Functions with any added/deleted/modified line inside their span, in
    either tree; differing normalized signatures are flagged."""
    changed: dict[str, bool] = {}
    outside: list[tuple[str, int, str]] = []
    base_funcs = base_tree.functions()
    ver_funcs = version_tree.functions()

    for file in sorted(set(base_tree.sources) | set(version_tree.sources)):
        base_src = base_tree.sources.get(file, "")
        ver_src = version_tree.sources.get(file, "")
        lines_base, lines_ver = _changed_lines(base_src, ver_src)
        for side, lines, tree in (("base", lines_base, base_tree),
                                  ("version", lines_ver, version_tree)):
            spans = tree.spans.get(file, [])
            for line in sorted(lines):
                hit = next((s for s in spans if s.contains_line(line)), None)
                if hit is None:
                    outside.append((file, line, side))
                else:
                    changed.setdefault(hit.name, False)

    for name in list(changed):
        b, v = base_funcs.get(name), ver_funcs.get(name)
        if b is not None and v is not None and b.signature_text != v.signature_text:
            changed[name] = True
    return ChangedFunctions(changed, tuple(outside))


def call_graph(tree: SourceTree) -> CallGraph:
    """Edge u->v iff the token sequence ``v (`` occurs in u's body and v is
    a function defined in the tree.  Over-approximate by construction."""
    names = set(tree.bodies)
    edges: set[tuple[str, str]] = set()
    for caller in sorted(names):
        body = tree.bodies[caller]
        for tok, nxt in zip(body, body[1:]):
            if nxt.text == "(" and tok.text in names:
                edges.add((caller, tok.text))
    return CallGraph(frozenset(names), frozenset(edges))


def monitored_for_comparison(base_tree: SourceTree, tree_a: SourceTree,
                             tree_b: SourceTree) -> set[ProgramPoint]:
    """Monitored set for a three-way comparison: functions changed in either
    branch, over the union of all three trees' call graphs."""
    ch_a = changed_functions(base_tree, tree_a)
    ch_b = changed_functions(base_tree, tree_b)
    changed: dict[str, bool] = dict(ch_a.changed)
    for name, sig in ch_b.changed.items():
        changed[name] = changed.get(name, False) or sig
    graph = merge_graphs([call_graph(t) for t in (base_tree, tree_a, tree_b)])
    return monitored_set(changed, graph)


def monitored_set(changed: Mapping[str, bool] | set[str],
                  graph: CallGraph) -> set[ProgramPoint]:
    """ENTER and EXIT points of the changed functions plus their direct
    callers and callees; functions with a changed signature contribute only
    their neighbors, not their own points."""
    if not isinstance(changed, Mapping):
        changed = {name: False for name in changed}
    unknown = set(changed) - set(graph.nodes)
    if unknown:
        raise ValueError(f"changed functions not in call graph: {sorted(unknown)}")
    monitored: set[str] = set()
    for name, signature_changed in changed.items():
        if not signature_changed:
            monitored.add(name)
        monitored |= graph.callers(name)
        monitored |= graph.callees(name)
    return {ProgramPoint(fn, kind)
            for fn in monitored
            for kind in (PointKind.ENTER, PointKind.EXIT)}
