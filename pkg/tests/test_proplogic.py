import pytest

from bdci.proplogic import (AtomicProperty, Condition, ConditionParseError,
                            EquivResult, GridBudgetError, KindMismatchError,
                            Shape, entails, equivalent, format_condition_line,
                            grid, not_null, parse_condition,
                            parse_condition_line, serialize)
from bdci.trace import Kind


def cond(text):
    return parse_condition(text)


def atoms(*specs):
    return Condition(frozenset(specs))


class TestSerialize:
    def test_single_atom(self):
        assert serialize(atoms(AtomicProperty(Shape.GT_CONST, "port", 1))) == "(> port 1)"

    def test_empty_condition_is_true(self):
        assert serialize(Condition()) == "true"

    def test_left_nested_conjunction_canonical_order(self):
        c = atoms(not_null("data"), not_null("file"), not_null("key"),
                  AtomicProperty(Shape.EQ_CONST, "line", 46))
        assert serialize(c) == ("(and (and (and (not (= data 0)) (not (= file 0)))"
                                " (not (= key 0))) (= line 46))")

    def test_one_of_ascending(self):
        c = atoms(AtomicProperty(Shape.ONE_OF, "max", (51, 231)), not_null("table"))
        assert serialize(c) == "(and (or (= max 51) (= max 231)) (not (= table 0)))"

    def test_binary_atoms(self):
        assert serialize(atoms(AtomicProperty(Shape.VAR_GT, "return", "price"))) == \
            "(> return price)"


class TestParse:
    def test_true(self):
        assert cond("true") == Condition()

    def test_figure_spacing_tolerated(self):
        assert cond("(not ( = data 0))") == atoms(not_null("data"))

    def test_round_trip(self):
        c = atoms(AtomicProperty(Shape.GE_CONST, "x", -3),
                  AtomicProperty(Shape.ONE_OF, "y", (1, 2, 9)),
                  AtomicProperty(Shape.VAR_LE, "x", "y"),
                  not_null("p"))
        assert cond(serialize(c)) == c

    def test_and_arity_error(self):
        with pytest.raises(ConditionParseError):
            cond("(and (= x 1))")

    def test_non_flat_or_rejected(self):
        with pytest.raises(ConditionParseError):
            cond("(or (or (= x 1) (= x 2)) (= x 3))")

    def test_unknown_operator(self):
        with pytest.raises(ConditionParseError) as err:
            cond("(>> x 1)")
        assert err.value.position >= 0

    def test_not_requires_zero(self):
        with pytest.raises(ConditionParseError):
            cond("(not (= x 5))")

    def test_trailing_tokens(self):
        with pytest.raises(ConditionParseError):
            cond("(= x 1) (= y 2)")

    def test_float_constants(self):
        c = cond("(>= f 2.5)")
        assert c == atoms(AtomicProperty(Shape.GE_CONST, "f", 2.5))
        assert serialize(c) == "(>= f 2.5)"


class TestGrid:
    def test_constants_plus_neighbors_and_sentinels(self):
        g = grid(cond("(> port 0)"), cond("(> port 1)"))
        assert g["port"] == [-2, -1, 0, 1, 2, 3]

    def test_default_grid_without_constants(self):
        g = grid(cond("true"), atoms(AtomicProperty(Shape.GT_CONST, "x", 0)))
        assert -1 in g["x"] and 1 in g["x"]
        g = grid(Condition(), atoms(AtomicProperty(Shape.VAR_LT, "x", "y")))
        assert g["x"] == [-1, 0, 1] and g["y"] == [-1, 0, 1]

    def test_float_single_constant(self):
        g = grid(atoms(AtomicProperty(Shape.GE_CONST, "f", 1000.0)), Condition(),
                 kinds={"f": Kind.FLOAT})
        assert g["f"] == [999.0, 1000.0, 1001.0]

    def test_float_midpoints(self):
        g = grid(cond("(and (>= f 1.0) (<= f 2.0))"), Condition(),
                 kinds={"f": Kind.FLOAT})
        assert 1.5 in g["f"]

    def test_bool_and_ptr_domains(self):
        g = grid(cond("(= flag 1)"), cond("(not (= p 0))"),
                 kinds={"flag": Kind.BOOL, "p": Kind.PTR})
        assert g["flag"] == [0, 1] and g["p"] == [0, 1]

    def test_shared_constants_within_component(self):
        g = grid(cond("(and (< x y) (> x 5))"), Condition())
        assert 5 in g["y"] and 6 in g["y"]

    def test_too_many_variables(self):
        names = "abcdefghi"
        c = Condition(frozenset(
            AtomicProperty(Shape.GE_CONST, n, 0) for n in names))
        with pytest.raises(GridBudgetError):
            grid(c, Condition())


class TestEquivalent:
    def test_port_shift_not_equivalent_with_witness(self):
        v = equivalent(cond("(> port 0)"), cond("(> port 1)"))
        assert v.result is EquivResult.NOT_EQUIVALENT
        assert v.witness == {"port": 1}

    def test_integer_bound_tightening_equivalent(self):
        assert equivalent(cond("(> port 0)"), cond("(>= port 1)")).result \
            is EquivResult.EQUIVALENT

    def test_interval_rewriting_equivalent(self):
        v = equivalent(cond("(and (> x 0) (< x 5))"), cond("(and (>= x 1) (<= x 4))"))
        assert v.result is EquivResult.EQUIVALENT

    def test_equivalent_carries_no_witness(self):
        assert equivalent(cond("true"), cond("true")).witness is None

    def test_variable_chain_in_tight_interval(self):
        # needs three distinct values strictly between 5 and 9
        chain = cond("(and (and (and (< x y) (< y z)) (> x 5)) (< z 9))")
        unsat = cond("(and (> x 5) (< x 5))")
        v = equivalent(chain, unsat)
        assert v.result is EquivResult.NOT_EQUIVALENT
        assert chain.holds(v.witness) != unsat.holds(v.witness)

    def test_budget_fallback_is_approximate(self):
        c1 = cond("(> x 1000000)")
        v = equivalent(c1, c1, grid_budget=2)
        assert v.result is EquivResult.APPROXIMATE
        assert v.syntactic_equal is True

    def test_kind_mismatch(self):
        with pytest.raises(KindMismatchError):
            equivalent(cond("(> x 0)"), cond("(> x 0)"),
                       kinds_a={"x": Kind.INT}, kinds_b={"x": Kind.FLOAT})

    def test_uint_and_int_share_domain(self):
        v = equivalent(cond("(> x 0)"), cond("(>= x 1)"),
                       kinds_a={"x": Kind.UINT}, kinds_b={"x": Kind.INT})
        assert v.result is EquivResult.EQUIVALENT

    def test_float_bounds_not_subject_to_integer_tightening(self):
        kinds = {"f": Kind.FLOAT}
        v = equivalent(cond("(>= f 1.0)"), cond("(> f 1.0)"), kinds, kinds)
        assert v.result is EquivResult.NOT_EQUIVALENT
        assert v.witness == {"f": 1.0}
        # over the integers the same pair would collapse to (>= 2)
        v_int = equivalent(cond("(>= x 2)"), cond("(> x 1)"))
        assert v_int.result is EquivResult.EQUIVALENT

    def test_float_midpoints_expose_interval_differences(self):
        kinds = {"f": Kind.FLOAT}
        v = equivalent(cond("(and (>= f 1.0) (<= f 2.0))"),
                       cond("(and (> f 0.9) (< f 2.1))"), kinds, kinds)
        assert v.result is EquivResult.NOT_EQUIVALENT
        w = v.witness["f"]
        assert (0.9 < w < 1.0) or (2.0 < w < 2.1)


class TestEntails:
    def test_equality_entails_bound(self):
        assert entails(cond("(= x 3)"), cond("(>= x 1)"))

    def test_true_does_not_entail_bound(self):
        assert not entails(cond("true"), cond("(> x 0)"))

    def test_relation_plus_bound_entails_weaker_relation(self):
        assert entails(cond("(and (> return price) (>= price 0))"),
                       cond("(>= return price)"))

    def test_reflexive(self):
        c = cond("(and (> x 0) (< x 9))")
        assert entails(c, c)


def test_condition_line_round_trip():
    line = format_condition_line("getSaving_EXIT", cond("(> return 10)"))
    assert line == "getSaving_EXIT := (> return 10)"
    name, parsed = parse_condition_line(line)
    assert name == "getSaving_EXIT" and parsed == cond("(> return 10)")
    name, parsed = parse_condition_line(format_condition_line("f_ENTER", None))
    assert name == "f_ENTER" and parsed is None
