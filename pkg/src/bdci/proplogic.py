"""Conditions (conjunctions of atomic properties): canonical text form,
parsing, and a boundary-grid decision procedure for equivalence/entailment.

The property language is deliberately small -- order and equality atoms
against constants, a bounded ``or`` of equalities, and order atoms between
two variables.  Over that fragment the truth of a condition only changes at
mentioned constants (and, for variable-variable atoms, where variables pass
each other), so equivalence can be decided exactly by evaluating both
conditions over a finite grid of boundary values.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from typing import Mapping

import numpy as np

from .trace import Kind

DEFAULT_GRID_BUDGET = 10**6
DEFAULT_MAX_VARS = 8

Number = int | float


class ConditionParseError(Exception):
    def __init__(self, position: int, message: str):
        super().__init__(f"at position {position}: {message}")
        self.position = position


class GridBudgetError(Exception):
    pass


class KindMismatchError(TypeError):
    pass


class Shape(Enum):
    """Atom shapes, in canonical rank order."""

    EQ_CONST = 0
    GE_CONST = 1
    LE_CONST = 2
    GT_CONST = 3
    LT_CONST = 4
    NOT_EQ = 5       # always against 0; doubles as not-null for pointers
    ONE_OF = 6
    VAR_EQ = 7
    VAR_LT = 8
    VAR_LE = 9
    VAR_GT = 10
    VAR_GE = 11


_BINARY_SHAPES = {Shape.VAR_EQ, Shape.VAR_LT, Shape.VAR_LE, Shape.VAR_GT, Shape.VAR_GE}


@dataclass(frozen=True)
class AtomicProperty:
    """A single atomic property such as ``(> return 10)`` or ``(<= return price)``.

    ``rhs`` is a number for constant shapes, a variable name for binary
    shapes, and an ascending tuple of 2-3 numbers for ONE_OF.
    """

    shape: Shape
    lhs: str
    rhs: Number | str | tuple[Number, ...]

    def __post_init__(self):
        if self.shape in _BINARY_SHAPES:
            if not isinstance(self.rhs, str):
                raise ValueError(f"{self.shape.name} needs a variable rhs")
            if self.rhs == self.lhs:
                raise ValueError("binary atom over a single variable")
        elif self.shape is Shape.ONE_OF:
            if (not isinstance(self.rhs, tuple) or not 2 <= len(self.rhs) <= 3
                    or len(set(self.rhs)) != len(self.rhs)
                    or list(self.rhs) != sorted(self.rhs)):
                raise ValueError("ONE_OF needs 2-3 distinct ascending constants")
        else:
            if isinstance(self.rhs, (str, tuple)):
                raise ValueError(f"{self.shape.name} needs a constant rhs")
            if self.shape is Shape.NOT_EQ and self.rhs != 0:
                raise ValueError("NOT_EQ is only supported against 0")

    @property
    def is_binary(self) -> bool:
        return self.shape in _BINARY_SHAPES

    def variables(self) -> tuple[str, ...]:
        if self.is_binary:
            return (self.lhs, self.rhs)  # type: ignore[return-value]
        return (self.lhs,)

    def constants(self) -> tuple[Number, ...]:
        if self.is_binary:
            return ()
        if self.shape is Shape.ONE_OF:
            return tuple(self.rhs)  # type: ignore[arg-type]
        return (self.rhs,)  # type: ignore[return-value]

    def sort_key(self):
        return (self.variables(), self.shape.value, self.constants())

    def holds(self, env: Mapping[str, Number]) -> bool:
        a = env[self.lhs]
        if self.is_binary:
            b = env[self.rhs]  # type: ignore[index]
            return {Shape.VAR_EQ: a == b, Shape.VAR_LT: a < b, Shape.VAR_LE: a <= b,
                    Shape.VAR_GT: a > b, Shape.VAR_GE: a >= b}[self.shape]
        if self.shape is Shape.ONE_OF:
            return a in self.rhs  # type: ignore[operator]
        k = self.rhs
        return {Shape.EQ_CONST: a == k, Shape.GE_CONST: a >= k, Shape.LE_CONST: a <= k,
                Shape.GT_CONST: a > k, Shape.LT_CONST: a < k,
                Shape.NOT_EQ: a != 0}[self.shape]


def not_null(name: str) -> AtomicProperty:
    """Pointer non-nullness, rendered ``(not (= name 0))``."""
    return AtomicProperty(Shape.NOT_EQ, name, 0)


@dataclass(frozen=True)
class Condition:
    """A conjunction of atoms; the empty conjunction is ``true``."""

    atoms: frozenset[AtomicProperty] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "atoms", frozenset(self.atoms))

    def variables(self) -> list[str]:
        names: set[str] = set()
        for atom in self.atoms:
            names.update(atom.variables())
        return sorted(names)

    def sorted_atoms(self) -> list[AtomicProperty]:
        return sorted(self.atoms, key=AtomicProperty.sort_key)

    def holds(self, env: Mapping[str, Number]) -> bool:
        return all(atom.holds(env) for atom in self.atoms)


TRUE_CONDITION = Condition()


class EquivResult(Enum):
    EQUIVALENT = "EQUIVALENT"
    NOT_EQUIVALENT = "NOT_EQUIVALENT"
    APPROXIMATE = "APPROXIMATE"


@dataclass(frozen=True)
class EquivVerdict:
    result: EquivResult
    witness: dict[str, Number] | None = None
    # set only for APPROXIMATE: outcome of the canonical-atom-set comparison
    syntactic_equal: bool | None = None

    def __post_init__(self):
        if self.result is EquivResult.NOT_EQUIVALENT and self.witness is None:
            raise ValueError("NOT_EQUIVALENT needs a witness")
        if self.result is EquivResult.EQUIVALENT and self.witness is not None:
            raise ValueError("EQUIVALENT carries no witness")


# ---------------------------------------------------------------------------
# canonical text form


def _render_num(k: Number) -> str:
    if isinstance(k, float):
        return repr(k)
    return str(k)


def _render_atom(atom: AtomicProperty) -> str:
    op = {Shape.EQ_CONST: "=", Shape.GE_CONST: ">=", Shape.LE_CONST: "<=",
          Shape.GT_CONST: ">", Shape.LT_CONST: "<",
          Shape.VAR_EQ: "=", Shape.VAR_LT: "<", Shape.VAR_LE: "<=",
          Shape.VAR_GT: ">", Shape.VAR_GE: ">="}
    if atom.shape is Shape.NOT_EQ:
        return f"(not (= {atom.lhs} 0))"
    if atom.shape is Shape.ONE_OF:
        inner = " ".join(f"(= {atom.lhs} {_render_num(k)})" for k in atom.rhs)  # type: ignore[union-attr]
        return f"(or {inner})"
    if atom.is_binary:
        return f"({op[atom.shape]} {atom.lhs} {atom.rhs})"
    return f"({op[atom.shape]} {atom.lhs} {_render_num(atom.rhs)})"  # type: ignore[arg-type]


def serialize(condition: Condition) -> str:
    """Canonical text: atoms in canonical order, conjunction folded left
    (``(and (and a1 a2) a3)``), empty condition rendered ``true``."""
    atoms = condition.sorted_atoms()
    if not atoms:
        return "true"
    text = _render_atom(atoms[0])
    for atom in atoms[1:]:
        text = f"(and {text} {_render_atom(atom)})"
    return text


_TOKEN_RE = re.compile(r"\(|\)|[^\s()]+")
_INT_RE = re.compile(r"[+-]?\d+\Z")


def _tokenize(text: str) -> list[tuple[str, int]]:
    return [(m.group(0), m.start()) for m in _TOKEN_RE.finditer(text)]


def _parse_sexpr(tokens: list[tuple[str, int]], i: int):
    tok, pos = tokens[i]
    if tok == "(":
        items = []
        i += 1
        while True:
            if i >= len(tokens):
                raise ConditionParseError(pos, "unclosed '('")
            if tokens[i][0] == ")":
                return (items, pos), i + 1
            node, i = _parse_sexpr(tokens, i)
            items.append(node)
    if tok == ")":
        raise ConditionParseError(pos, "unexpected ')'")
    return (tok, pos), i + 1


def _as_number(tok: str) -> Number | None:
    if _INT_RE.match(tok):
        return int(tok)
    try:
        return float(tok)
    except ValueError:
        return None


def _expect_atom_operands(items, pos, op):
    if len(items) != 3:
        raise ConditionParseError(pos, f"'{op}' takes exactly two operands")
    (lhs, lpos), (rhs, _) = items[1], items[2]
    if not isinstance(lhs, str) or _as_number(lhs) is not None:
        raise ConditionParseError(lpos, f"'{op}' needs a variable on the left")
    return lhs, rhs


_ORDER_OPS = {"<": (Shape.LT_CONST, Shape.VAR_LT), "<=": (Shape.LE_CONST, Shape.VAR_LE),
              ">": (Shape.GT_CONST, Shape.VAR_GT), ">=": (Shape.GE_CONST, Shape.VAR_GE),
              "=": (Shape.EQ_CONST, Shape.VAR_EQ)}


def _interpret_atom(node) -> AtomicProperty:
    items, pos = node
    if not isinstance(items, list) or not items:
        raise ConditionParseError(pos, "expected an atom")
    head, hpos = items[0]
    if isinstance(head, list):
        raise ConditionParseError(hpos, "operator expected")
    if head == "not":
        if len(items) != 2:
            raise ConditionParseError(pos, "'not' takes exactly one operand")
        inner, ipos = items[1]
        if not isinstance(inner, list) or not inner or inner[0][0] != "=":
            raise ConditionParseError(ipos, "'not' must wrap an equality")
        lhs, rhs = _expect_atom_operands(inner, ipos, "=")
        if not isinstance(rhs, str) or _as_number(rhs) != 0:
            raise ConditionParseError(ipos, "'not' equality must compare against 0")
        return AtomicProperty(Shape.NOT_EQ, lhs, 0)
    if head == "or":
        if not 3 <= len(items) <= 4:
            raise ConditionParseError(pos, "'or' takes two or three disjuncts")
        var = None
        values: list[Number] = []
        for sub, spos in items[1:]:
            if not isinstance(sub, list) or not sub or sub[0][0] != "=":
                raise ConditionParseError(spos, "'or' disjuncts must be flat equalities")
            lhs, rhs = _expect_atom_operands(sub, spos, "=")
            num = _as_number(rhs) if isinstance(rhs, str) else None
            if num is None:
                raise ConditionParseError(spos, "'or' equality needs a constant")
            if var is None:
                var = lhs
            elif var != lhs:
                raise ConditionParseError(spos, "'or' disjuncts must share one variable")
            values.append(num)
        if len(set(values)) != len(values):
            raise ConditionParseError(pos, "'or' constants must be distinct")
        return AtomicProperty(Shape.ONE_OF, var, tuple(sorted(values)))
    if head in _ORDER_OPS:
        lhs, rhs = _expect_atom_operands(items, pos, head)
        if not isinstance(rhs, str):
            raise ConditionParseError(pos, f"'{head}' needs a constant or variable")
        num = _as_number(rhs)
        const_shape, var_shape = _ORDER_OPS[head]
        if num is not None:
            return AtomicProperty(const_shape, lhs, num)
        return AtomicProperty(var_shape, lhs, rhs)
    raise ConditionParseError(hpos, f"unknown operator {head!r}")


def _collect_atoms(node, out: list[AtomicProperty]):
    items, pos = node
    if isinstance(items, list) and items and items[0][0] == "and":
        if len(items) != 3:
            raise ConditionParseError(pos, "'and' takes exactly two operands")
        _collect_atoms(items[1], out)
        _collect_atoms(items[2], out)
        return
    out.append(_interpret_atom(node))


def parse_condition(text: str) -> Condition:
    """Parse the :func:`serialize` grammar (arbitrary whitespace tolerated)."""
    tokens = _tokenize(text)
    if not tokens:
        raise ConditionParseError(0, "empty input")
    node, i = _parse_sexpr(tokens, 0)
    if i != len(tokens):
        raise ConditionParseError(tokens[i][1], "trailing tokens after condition")
    if node[0] == "true":
        return TRUE_CONDITION
    if isinstance(node[0], str):
        raise ConditionParseError(node[1], f"expected a condition, got {node[0]!r}")
    atoms: list[AtomicProperty] = []
    _collect_atoms(node, atoms)
    return Condition(frozenset(atoms))


# ---------------------------------------------------------------------------
# boundary-grid decision procedure


def _components(conditions: list[Condition]) -> dict[str, frozenset[str]]:
    """Group variables linked by binary atoms; constants are shared within a
    group so variable-variable orderings keep enough room on the grid."""
    parent: dict[str, str] = {}

    def find(x: str) -> str:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for cond in conditions:
        for atom in cond.atoms:
            for v in atom.variables():
                parent.setdefault(v, v)
            if atom.is_binary:
                a, b = find(atom.lhs), find(atom.rhs)  # type: ignore[arg-type]
                if a != b:
                    parent[a] = b
    groups: dict[str, set[str]] = {}
    for v in parent:
        groups.setdefault(find(v), set()).add(v)
    return {v: frozenset(groups[find(v)]) for v in parent}


def _grid_for(conditions: list[Condition],
              kinds: Mapping[str, Kind],
              max_vars: int) -> dict[str, list[Number]]:
    comp_of = _components(conditions)
    if len(comp_of) > max_vars:
        raise GridBudgetError(
            f"{len(comp_of)} variables exceed the {max_vars}-variable budget")

    consts: dict[str, set[Number]] = {v: set() for v in comp_of}
    for cond in conditions:
        for atom in cond.atoms:
            for k in atom.constants():
                consts[atom.lhs].add(k)

    grids: dict[str, list[Number]] = {}
    for var, comp in comp_of.items():
        kind = kinds.get(var, Kind.INT)
        if kind in (Kind.BOOL, Kind.PTR):
            grids[var] = [0, 1]
            continue
        shared: set[Number] = set()
        for member in comp:
            shared.update(consts[member])
        k = len(comp)
        if kind is Kind.FLOAT:
            grids[var] = _float_grid(shared, k)
        else:
            grids[var] = _int_grid(shared, k)
    return grids


def _int_grid(shared: set[Number], k: int) -> list[int]:
    if not shared:
        half = max(1, k // 2)
        return list(range(-half, half + 1))
    base = {int(c) for c in shared}
    grid = set(base)
    for c in base:
        for j in range(1, k + 2):
            grid.add(c - j)
            grid.add(c + j)
    return sorted(grid)


def _float_grid(shared: set[Number], k: int) -> list[float]:
    if not shared:
        half = max(1, k // 2)
        return [float(x) for x in range(-half, half + 1)]
    base = sorted(float(c) for c in shared)
    grid = set(base)
    for lo, hi in zip(base, base[1:]):
        for i in range(1, k + 1):
            grid.add(lo + (hi - lo) * i / (k + 1))
    for j in range(1, max(1, k) + 1):
        grid.add(base[0] - j)
        grid.add(base[-1] + j)
    return sorted(grid)


def grid(c1: Condition, c2: Condition,
         kinds: Mapping[str, Kind] | None = None,
         max_vars: int = DEFAULT_MAX_VARS) -> dict[str, list[Number]]:
    """Per-variable candidate value sets covering every truth region of the
    pair of conditions."""
    return _grid_for([c1, c2], kinds or {}, max_vars)


def _merge_kinds(kinds_a: Mapping[str, Kind] | None,
                 kinds_b: Mapping[str, Kind] | None) -> dict[str, Kind]:
    merged: dict[str, Kind] = dict(kinds_a or {})
    for name, kind in (kinds_b or {}).items():
        prior = merged.get(name)
        if prior is None:
            merged[name] = kind
        elif _kind_family(prior) != _kind_family(kind):
            raise KindMismatchError(
                f"variable {name!r} is {prior.value} on one side, {kind.value} on the other")
    return merged


def _kind_family(kind: Kind) -> str:
    # int and uint share one comparison domain; bool joins it as 0/1
    if kind in (Kind.INT, Kind.UINT, Kind.BOOL):
        return "int"
    return kind.value


def _atom_truth(atom: AtomicProperty, axes: dict[str, np.ndarray]) -> np.ndarray:
    a = axes[atom.lhs]
    if atom.is_binary:
        b = axes[atom.rhs]  # type: ignore[index]
        op = {Shape.VAR_EQ: np.equal, Shape.VAR_LT: np.less, Shape.VAR_LE: np.less_equal,
              Shape.VAR_GT: np.greater, Shape.VAR_GE: np.greater_equal}[atom.shape]
        return op(a, b)
    if atom.shape is Shape.ONE_OF:
        result = None
        for k in atom.rhs:  # type: ignore[union-attr]
            term = a == k
            result = term if result is None else (result | term)
        return result  # type: ignore[return-value]
    k = atom.rhs
    op = {Shape.EQ_CONST: np.equal, Shape.GE_CONST: np.greater_equal,
          Shape.LE_CONST: np.less_equal, Shape.GT_CONST: np.greater,
          Shape.LT_CONST: np.less}.get(atom.shape)
    if op is not None:
        return op(a, k)
    return a != 0  # NOT_EQ


def _condition_truth(cond: Condition, axes: dict[str, np.ndarray],
                     shape: tuple[int, ...]) -> np.ndarray:
    truth = np.ones(shape, dtype=bool)
    for atom in cond.sorted_atoms():
        truth = truth & _atom_truth(atom, axes)
    return truth


def _broadcast_axes(names: list[str], grids: dict[str, list[Number]],
                    kinds: Mapping[str, Kind]) -> tuple[dict[str, np.ndarray], tuple[int, ...]]:
    n = len(names)
    axes: dict[str, np.ndarray] = {}
    shape = tuple(len(grids[v]) for v in names)
    for i, v in enumerate(names):
        dtype = np.float64 if kinds.get(v, Kind.INT) is Kind.FLOAT else np.int64
        arr = np.asarray(grids[v], dtype=dtype)
        idx: list = [None] * n
        idx[i] = slice(None)
        axes[v] = arr[tuple(idx)]
    return axes, shape


def equivalent(c1: Condition, c2: Condition,
               kinds_a: Mapping[str, Kind] | None = None,
               kinds_b: Mapping[str, Kind] | None = None,
               grid_budget: int = DEFAULT_GRID_BUDGET,
               max_vars: int = DEFAULT_MAX_VARS) -> EquivVerdict:
    """Decide whether two conditions hold for exactly the same values.

    Evaluates both conditions over the full boundary grid.  Returns
    NOT_EQUIVALENT with the first disagreeing assignment (variables sorted
    by name, values ascending) as witness.  If the grid would exceed
    ``grid_budget`` points the verdict degrades to APPROXIMATE and only the
    canonical atom sets are compared.
    """
    kinds = _merge_kinds(kinds_a, kinds_b)
    grids = _grid_for([c1, c2], kinds, max_vars)
    names = sorted(grids)
    if not names:
        return EquivVerdict(EquivResult.EQUIVALENT)
    total = 1
    for v in names:
        total *= len(grids[v])
    if total > grid_budget:
        return EquivVerdict(EquivResult.APPROXIMATE,
                            syntactic_equal=(c1.atoms == c2.atoms))
    axes, shape = _broadcast_axes(names, grids, kinds)
    disagree = _condition_truth(c1, axes, shape) ^ _condition_truth(c2, axes, shape)
    if not disagree.any():
        return EquivVerdict(EquivResult.EQUIVALENT)
    flat = int(np.argmax(disagree))
    coords = np.unravel_index(flat, shape)
    witness = {v: grids[v][coords[i]] for i, v in enumerate(names)}
    return EquivVerdict(EquivResult.NOT_EQUIVALENT, witness=witness)


def entails(c1: Condition, c2: Condition,
            kinds_a: Mapping[str, Kind] | None = None,
            kinds_b: Mapping[str, Kind] | None = None,
            grid_budget: int = DEFAULT_GRID_BUDGET,
            max_vars: int = DEFAULT_MAX_VARS) -> bool:
    """True iff ``c2`` holds at every grid point where ``c1`` holds.

    Over budget, falls back to the conservative syntactic check
    ``c2.atoms <= c1.atoms``.
    """
    kinds = _merge_kinds(kinds_a, kinds_b)
    grids = _grid_for([c1, c2], kinds, max_vars)
    names = sorted(grids)
    if not names:
        return True
    total = 1
    for v in names:
        total *= len(grids[v])
    if total > grid_budget:
        return c2.atoms <= c1.atoms
    axes, shape = _broadcast_axes(names, grids, kinds)
    holds_1 = _condition_truth(c1, axes, shape)
    holds_2 = _condition_truth(c2, axes, shape)
    return not bool((holds_1 & ~holds_2).any())


# ---------------------------------------------------------------------------
# condition-map persistence (one `<point> := <condition>` line per point)

UNCOMPARABLE_TEXT = "?uncomparable"


def format_condition_line(point_name: str, condition: Condition | None) -> str:
    if condition is None:
        return f"{point_name} := {UNCOMPARABLE_TEXT}"
    return f"{point_name} := {serialize(condition)}"


def parse_condition_line(line: str) -> tuple[str, Condition | None]:
    name, sep, rest = line.partition(":=")
    if not sep:
        raise ConditionParseError(0, f"missing ':=' in {line!r}")
    name = name.strip()
    rest = rest.strip()
    if rest == UNCOMPARABLE_TEXT:
        return name, None
    return name, parse_condition(rest)
