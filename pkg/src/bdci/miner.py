"""Template-based likely-invariant miner.

Per program point, every template over the observed variables is
instantiated, bound to the tightest constants the samples allow, and kept
only if no sample falsifies it.  Surviving atoms are then reduced to a
minimal conjunction (nothing entailed by the rest is reported).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from . import proplogic
from .proplogic import AtomicProperty, Condition, Shape
from .trace import Kind, ProgramPoint, RETURN_VAR, Sample

logger = logging.getLogger(__name__)

DEFAULT_MIN_SAMPLES = 5

# int, uint and bool values share one comparison domain
_INT_FAMILY = (Kind.INT, Kind.UINT, Kind.BOOL)


class MinerInputError(Exception):
    pass


class CoverageError(Exception):
    """A candidate mentions a variable some sample does not bind."""


@dataclass(frozen=True)
class Candidate:
    """A template instance whose constant (if any) is still unbound."""

    shape: Shape
    lhs: str
    rhs_var: str | None = None


@dataclass(frozen=True)
class PropertySet:
    """The mined pre- or post-condition of one program point."""

    program_point: ProgramPoint
    atoms: frozenset[AtomicProperty]
    sample_count: int
    uncomparable: bool = False
    kinds: dict[str, Kind] = field(default_factory=dict)

    def condition(self) -> Condition:
        return Condition(self.atoms)


def _var_order(name: str) -> tuple[int, str]:
    # the return value leads in binary atoms: (> return price), never (< price return)
    return (0 if name == RETURN_VAR else 1, name)


def instantiate_templates(variables: dict[str, Kind]) -> set[Candidate]:
    """Every candidate atom over the given variables.

    Unary shapes for each int/uint/float variable (floats keep only the
    ordering shapes), non-null/always-null for pointers, equality for bools,
    and all ordered binary shapes plus equality for each unordered pair of
    same-kind numeric variables.
    """
    candidates: set[Candidate] = set()
    for name in sorted(variables):
        kind = variables[name]
        if kind in (Kind.INT, Kind.UINT):
            for shape in (Shape.EQ_CONST, Shape.GE_CONST, Shape.LE_CONST,
                          Shape.GT_CONST, Shape.LT_CONST, Shape.NOT_EQ, Shape.ONE_OF):
                candidates.add(Candidate(shape, name))
        elif kind is Kind.FLOAT:
            for shape in (Shape.GE_CONST, Shape.LE_CONST, Shape.GT_CONST, Shape.LT_CONST):
                candidates.add(Candidate(shape, name))
        elif kind is Kind.BOOL:
            candidates.add(Candidate(Shape.EQ_CONST, name))
        elif kind is Kind.PTR:
            candidates.add(Candidate(Shape.NOT_EQ, name))
            candidates.add(Candidate(Shape.EQ_CONST, name))

    names = sorted(variables, key=_var_order)
    for i, u in enumerate(names):
        for v in names[i + 1:]:
            fam_u, fam_v = _family(variables[u]), _family(variables[v])
            if fam_u != fam_v or fam_u not in ("int", "float"):
                continue
            if variables[u] is Kind.BOOL or variables[v] is Kind.BOOL:
                continue
            for shape in (Shape.VAR_EQ, Shape.VAR_LT, Shape.VAR_LE,
                          Shape.VAR_GT, Shape.VAR_GE):
                candidates.add(Candidate(shape, u, v))
    return candidates


def _family(kind: Kind) -> str:
    if kind in _INT_FAMILY:
        return "int"
    return kind.value


def _values(candidate_var: str, samples: Sequence[Sample]) -> list[int | float]:
    values = []
    for s in samples:
        tv = s.bindings.get(candidate_var)
        if tv is None:
            raise CoverageError(
                f"variable {candidate_var!r} missing from a sample at "
                f"{s.program_point.rendered}")
        values.append(tv.value)
    return values


def check_atom(candidate: Candidate, samples: Sequence[Sample],
               kind: Kind | None = None) -> tuple[bool, AtomicProperty | None]:
    """Bind the candidate's constant to the tightest value the samples
    allow and report whether the bound atom survives falsification."""
    if not samples:
        return False, None
    if kind is None:
        tv = samples[0].bindings.get(candidate.lhs)
        kind = tv.kind if tv is not None else Kind.INT
    a = _values(candidate.lhs, samples)

    if candidate.rhs_var is not None:
        b = _values(candidate.rhs_var, samples)
        rel = {Shape.VAR_EQ: lambda x, y: x == y,
               Shape.VAR_LT: lambda x, y: x < y,
               Shape.VAR_LE: lambda x, y: x <= y,
               Shape.VAR_GT: lambda x, y: x > y,
               Shape.VAR_GE: lambda x, y: x >= y}[candidate.shape]
        if all(rel(x, y) for x, y in zip(a, b)):
            return True, AtomicProperty(candidate.shape, candidate.lhs, candidate.rhs_var)
        return False, None

    lo, hi = min(a), max(a)
    shape = candidate.shape
    if shape is Shape.EQ_CONST:
        if lo == hi and (kind is not Kind.PTR or lo == 0):
            return True, AtomicProperty(shape, candidate.lhs, lo)
        return False, None
    if shape is Shape.NOT_EQ:
        if all(x != 0 for x in a):
            return True, AtomicProperty(shape, candidate.lhs, 0)
        return False, None
    if shape is Shape.ONE_OF:
        distinct = sorted(set(a))
        if 2 <= len(distinct) <= 3:
            return True, AtomicProperty(shape, candidate.lhs, tuple(distinct))
        return False, None
    if kind is Kind.FLOAT:
        # float bounds bind the observed extremum directly, so the strict
        # shapes are falsified by that extremum and never survive
        bound = {Shape.GE_CONST: lo, Shape.LE_CONST: hi,
                 Shape.GT_CONST: lo, Shape.LT_CONST: hi}[shape]
    else:
        bound = {Shape.GE_CONST: lo, Shape.LE_CONST: hi,
                 Shape.GT_CONST: lo - 1, Shape.LT_CONST: hi + 1}[shape]
    atom = AtomicProperty(shape, candidate.lhs, bound)
    if all(atom.holds({candidate.lhs: x}) for x in a):
        return True, atom
    return False, None


def _point_variables(samples: Sequence[Sample]) -> dict[str, Kind]:
    variables: dict[str, Kind] = {}
    for s in samples:
        for name, tv in s.bindings.items():
            prior = variables.get(name)
            if prior is None:
                variables[name] = tv.kind
            elif _family(prior) != _family(tv.kind):
                raise MinerInputError(
                    f"variable {name!r} observed as both {prior.value} and {tv.kind.value}")
    return variables


def _bound_excludes_zero(atom: AtomicProperty) -> bool:
    k = atom.rhs
    if atom.shape is Shape.GE_CONST:
        return k > 0
    if atom.shape is Shape.GT_CONST:
        return k >= 0
    if atom.shape is Shape.LE_CONST:
        return k < 0
    if atom.shape is Shape.LT_CONST:
        return k <= 0
    return False


def _prefers_inclusive(extremum: int | float) -> bool:
    # round extrema read as deliberate thresholds; keep them inclusive
    return isinstance(extremum, int) and extremum % 10 == 0


def _select_unary(name: str, kind: Kind, survivors: dict[Shape, AtomicProperty]) -> list[AtomicProperty]:
    if Shape.EQ_CONST in survivors:
        return [survivors[Shape.EQ_CONST]]
    if Shape.ONE_OF in survivors:
        return [survivors[Shape.ONE_OF]]
    chosen: list[AtomicProperty] = []
    if kind is Kind.FLOAT:
        for shape in (Shape.GE_CONST, Shape.LE_CONST):
            if shape in survivors:
                chosen.append(survivors[shape])
    elif kind in (Kind.INT, Kind.UINT):
        ge, gt = survivors.get(Shape.GE_CONST), survivors.get(Shape.GT_CONST)
        if ge is not None and gt is not None:
            chosen.append(ge if _prefers_inclusive(ge.rhs) else gt)
        le, lt = survivors.get(Shape.LE_CONST), survivors.get(Shape.LT_CONST)
        if le is not None and lt is not None:
            chosen.append(le if _prefers_inclusive(le.rhs) else lt)
    elif kind is Kind.PTR and Shape.NOT_EQ in survivors:
        return [survivors[Shape.NOT_EQ]]
    if (kind in (Kind.INT, Kind.UINT) and Shape.NOT_EQ in survivors
            and not any(_bound_excludes_zero(a) for a in chosen)):
        chosen.append(survivors[Shape.NOT_EQ])
    return chosen


_BINARY_PREFERENCE = (Shape.VAR_EQ, Shape.VAR_LT, Shape.VAR_GT, Shape.VAR_LE, Shape.VAR_GE)


def mine_properties(samples: Sequence[Sample],
                    min_samples: int = DEFAULT_MIN_SAMPLES,
                    grid_budget: int = proplogic.DEFAULT_GRID_BUDGET) -> PropertySet:
    """Mine the minimal conjunction of surviving atoms for one program point.

    Below ``min_samples`` observations the point is reported uncomparable
    with no atoms.
    """
    samples = list(samples)
    if not samples:
        raise MinerInputError("cannot mine an empty sample set without a program point")
    points = {s.program_point for s in samples}
    if len(points) != 1:
        raise MinerInputError(f"samples span {len(points)} program points")
    pp = samples[0].program_point
    variables = _point_variables(samples)
    if len(samples) < min_samples:
        return PropertySet(pp, frozenset(), len(samples), uncomparable=True,
                           kinds=variables)

    unary_survivors: dict[str, dict[Shape, AtomicProperty]] = {v: {} for v in variables}
    binary_survivors: dict[tuple[str, str], dict[Shape, AtomicProperty]] = {}
    for candidate in instantiate_templates(variables):
        try:
            survives, atom = check_atom(candidate, samples, kind=variables[candidate.lhs])
        except CoverageError as exc:
            logger.warning("discarding candidate %s: %s", candidate, exc)
            continue
        if not survives or atom is None:
            continue
        if candidate.rhs_var is None:
            unary_survivors[candidate.lhs][candidate.shape] = atom
        else:
            binary_survivors.setdefault((candidate.lhs, candidate.rhs_var), {})[candidate.shape] = atom

    selected: list[AtomicProperty] = []
    for name in sorted(variables):
        selected.extend(_select_unary(name, variables[name], unary_survivors[name]))
    for pair in sorted(binary_survivors):
        survivors = binary_survivors[pair]
        for shape in _BINARY_PREFERENCE:
            if shape in survivors:
                selected.append(survivors[shape])
                break

    atoms = _minimize(selected, variables, grid_budget)
    return PropertySet(pp, frozenset(atoms), len(samples), kinds=variables)


def _minimize(atoms: Iterable[AtomicProperty], kinds: dict[str, Kind],
              grid_budget: int) -> list[AtomicProperty]:
    """Drop every atom entailed by the conjunction of the others.

    Runs in two stages: first against only the atoms over the candidate's
    own variables (small grids, removes relations subsumed by bounds), then
    an exact fixpoint over what is left.  The first stage keeps variable
    components small enough that the second stays within the grid budget.
    """
    kept = sorted(atoms, key=AtomicProperty.sort_key)
    for atom in list(kept):
        local = set(atom.variables())
        rest = [a for a in kept if a != atom and set(a.variables()) <= local]
        if rest and _entailed(rest, atom, kinds, grid_budget):
            kept.remove(atom)

    if len({v for a in kept for v in a.variables()}) > proplogic.DEFAULT_MAX_VARS:
        logger.warning("too many variables for entailment minimization; "
                       "keeping locally minimized atoms")
        return kept
    changed = True
    while changed:
        changed = False
        for atom in list(kept):
            rest = [a for a in kept if a != atom]
            if _entailed(rest, atom, kinds, grid_budget):
                kept.remove(atom)
                changed = True
    return kept


def _entailed(rest: list[AtomicProperty], atom: AtomicProperty,
              kinds: dict[str, Kind], grid_budget: int) -> bool:
    return proplogic.entails(Condition(frozenset(rest)), Condition(frozenset({atom})),
                             kinds_a=kinds, kinds_b=kinds, grid_budget=grid_budget)


def mine_point_map(samples_by_point: dict[ProgramPoint, Sequence[Sample]],
                   monitored: Iterable[ProgramPoint],
                   min_samples: int = DEFAULT_MIN_SAMPLES) -> dict[ProgramPoint, PropertySet]:
    """Mine every monitored point; points with no samples come back as
    uncomparable placeholders."""
    result: dict[ProgramPoint, PropertySet] = {}
    for pp in monitored:
        samples = list(samples_by_point.get(pp, ()))
        if not samples:
            result[pp] = PropertySet(pp, frozenset(), 0, uncomparable=True)
        else:
            result[pp] = mine_properties(samples, min_samples=min_samples)
    return result
