from __future__ import annotations

import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polyforge.values import (
    BOOL,
    BoolV,
    DictT,
    DictV,
    FLOAT,
    FloatV,
    FunctionType,
    INT,
    IntV,
    ListT,
    ListV,
    NONE,
    NONE_T,
    NoneT,
    OptionalT,
    PType,
    STR,
    StrV,
    TupleT,
    TupleV,
    UNKNOWN,
    UnionT,
    ArityMismatch,
    UnsupportedValue,
    infer_signature,
    parse_literal,
    python_literal,
    signature_from_json,
    signature_to_json,
    type_from_json,
    type_of,
    type_to_json,
    union,
    union_all,
    value_from_json,
    value_to_json,
)


class Case:
    def __init__(self, args, expected):
        self.args = args
        self.expected = expected


# ---------------------------------------------------------------------------
# parse_literal


class TestParseLiteral:
    def test_nested_list_tuple_none(self):
        assert parse_literal("[1, (2.5, None)]") == ListV(
            (IntV(1), TupleV((FloatV(2.5), NONE)))
        )

    def test_dict(self):
        assert parse_literal('{1: "a"}') == DictV(((IntV(1), StrV("a")),))

    def test_set_rejected(self):
        with pytest.raises(UnsupportedValue):
            parse_literal("{1, 2}")

    def test_identifier_rejected(self):
        with pytest.raises(UnsupportedValue):
            parse_literal("x")

    def test_call_rejected(self):
        with pytest.raises(UnsupportedValue):
            parse_literal("f(1)")

    def test_comprehension_rejected(self):
        with pytest.raises(UnsupportedValue):
            parse_literal("[x for x in y]")

    def test_negative_numbers(self):
        assert parse_literal("-3") == IntV(-3)
        assert parse_literal("-2.5") == FloatV(-2.5)

    def test_bool_is_not_int(self):
        assert parse_literal("True") == BoolV(True)
        assert parse_literal("True") != IntV(1)

    def test_non_ascii_string_rejected(self):
        with pytest.raises(UnsupportedValue):
            parse_literal('"café"')

    def test_duplicate_dict_keys_rejected(self):
        with pytest.raises(UnsupportedValue):
            parse_literal("{1: 2, 1: 3}")


# ---------------------------------------------------------------------------
# type_of


class TestTypeOf:
    def test_none(self):
        assert type_of(NONE) == NONE_T

    def test_homogeneous_list(self):
        assert type_of(ListV((IntV(1), IntV(2)))) == ListT(INT)

    def test_empty_list(self):
        assert type_of(ListV(())) == ListT(UNKNOWN)

    def test_tuple_positional(self):
        assert type_of(TupleV((IntV(1), StrV("a")))) == TupleT((INT, STR))

    def test_dict(self):
        assert type_of(DictV(((IntV(1), StrV("a")),))) == DictT(INT, STR)

    def test_bool_not_int(self):
        assert type_of(BoolV(True)) == BOOL
        assert type_of(BoolV(True)) != INT

    def test_list_with_none_element(self):
        assert type_of(ListV((IntV(1), NONE))) == ListT(OptionalT(INT))


# ---------------------------------------------------------------------------
# union


class TestUnion:
    def test_int_none_optional(self):
        assert union(INT, NONE_T) == OptionalT(INT)

    def test_union_int_int_none_simplifies(self):
        assert union_all([INT, INT, NONE_T]) == OptionalT(INT)

    def test_idempotent(self):
        assert union(INT, INT) == INT

    def test_bool_int_general_union(self):
        assert union(BOOL, INT) == UnionT(frozenset({BOOL, INT}))

    def test_unknown_is_identity(self):
        assert union(UNKNOWN, INT) == INT
        assert union(INT, UNKNOWN) == INT
        assert union(UNKNOWN, UNKNOWN) == UNKNOWN

    def test_structural_list_join(self):
        assert union(ListT(INT), ListT(NONE_T)) == ListT(OptionalT(INT))

    def test_tuple_same_arity_joins(self):
        assert union(TupleT((INT, STR)), TupleT((NONE_T, STR))) == TupleT(
            (OptionalT(INT), STR)
        )

    def test_tuple_arity_mismatch_is_union(self):
        result = union(TupleT((INT,)), TupleT((INT, INT)))
        assert isinstance(result, UnionT)

    def test_optional_absorbs_more_none(self):
        assert union(OptionalT(INT), NONE_T) == OptionalT(INT)

    def test_optional_widens_inner(self):
        assert union(OptionalT(INT), STR) == OptionalT(UnionT(frozenset({INT, STR})))


# ---------------------------------------------------------------------------
# infer_signature


class TestInferSignature:
    def test_optional_int_argument(self):
        tests = [Case((IntV(1),), IntV(2)), Case((NONE,), IntV(0))]
        sig = infer_signature(tests)
        assert sig == FunctionType(params=(OptionalT(INT),), ret=INT)

    def test_single_test(self):
        sig = infer_signature([Case((StrV("a"), BoolV(True)), StrV("b"))])
        assert sig == FunctionType(params=(STR, BOOL), ret=STR)

    def test_empty_list_evidence(self):
        tests = [Case((ListV(()),), IntV(0)), Case((ListV((IntV(1),)),), IntV(1))]
        sig = infer_signature(tests)
        assert sig == FunctionType(params=(ListT(INT),), ret=INT)

    def test_arity_mismatch(self):
        with pytest.raises(ArityMismatch):
            infer_signature([Case((IntV(1),), IntV(1)), Case((IntV(1), IntV(2)), IntV(3))])

    def test_empty_rejected(self):
        with pytest.raises(ArityMismatch):
            infer_signature([])


# ---------------------------------------------------------------------------
# hypothesis strategies


def ptype_strategy():
    atoms = st.sampled_from([INT, FLOAT, BOOL, STR, NONE_T, UNKNOWN])
    return st.recursive(
        atoms,
        lambda inner: st.one_of(
            st.builds(ListT, inner),
            st.builds(lambda es: TupleT(tuple(es)), st.lists(inner, max_size=3)),
            st.builds(DictT, inner, inner),
        ),
        max_leaves=6,
    )


def pvalue_strategy():
    atoms = st.one_of(
        st.integers(min_value=-(10**6), max_value=10**6).map(IntV),
        st.floats(allow_nan=False, allow_infinity=False,
                  min_value=-1e6, max_value=1e6).map(FloatV),
        st.booleans().map(BoolV),
        st.text(alphabet=st.characters(min_codepoint=32, max_codepoint=126),
                max_size=8).map(StrV),
        st.just(NONE),
    )

    def build_dict(pairs):
        seen, out = set(), []
        for k, v in pairs:
            if k not in seen:
                seen.add(k)
                out.append((k, v))
        return DictV(tuple(out))

    return st.recursive(
        atoms,
        lambda inner: st.one_of(
            st.lists(inner, max_size=3).map(lambda xs: ListV(tuple(xs))),
            st.lists(inner, max_size=3).map(lambda xs: TupleV(tuple(xs))),
            st.lists(st.tuples(inner, inner), max_size=3).map(build_dict),
        ),
        max_leaves=8,
    )


def _well_formed(t: PType) -> bool:
    """Check the normalization invariants recursively."""
    if isinstance(t, UnionT):
        if len(t.members) < 2:
            return False
        for m in t.members:
            if isinstance(m, (UnionT, NoneT)):
                return False
        return all(_well_formed(m) for m in t.members)
    if isinstance(t, OptionalT):
        if isinstance(t.inner, (NoneT, OptionalT)):
            return False
        return _well_formed(t.inner)
    if isinstance(t, ListT):
        return _well_formed(t.elem)
    if isinstance(t, TupleT):
        return all(_well_formed(e) for e in t.elems)
    if isinstance(t, DictT):
        return _well_formed(t.key) and _well_formed(t.val)
    return True


class TestUnionProperties:
    @given(ptype_strategy(), ptype_strategy())
    def test_commutative(self, a, b):
        assert union(a, b) == union(b, a)

    @given(ptype_strategy(), ptype_strategy(), ptype_strategy())
    @settings(max_examples=60)
    def test_associative(self, a, b, c):
        assert union(union(a, b), c) == union(a, union(b, c))

    @given(ptype_strategy())
    def test_idempotent(self, a):
        assert union(a, a) == a

    @given(ptype_strategy(), ptype_strategy())
    def test_normalized(self, a, b):
        assert _well_formed(union(a, b))

    @given(pvalue_strategy())
    def test_type_of_never_union(self, v):
        # unions only arise from folding over several tests
        t = type_of(v)
        assert _well_formed(t)


class TestInferSignatureProperties:
    @given(st.lists(
        st.tuples(pvalue_strategy(), pvalue_strategy(), pvalue_strategy()),
        min_size=1, max_size=5,
    ))
    @settings(max_examples=40)
    def test_permutation_invariant(self, rows):
        tests = [Case((a, b), r) for a, b, r in rows]
        expected = infer_signature(tests)
        for perm in itertools.islice(itertools.permutations(tests), 12):
            assert infer_signature(list(perm)) == expected


class TestDictSemantics:
    def test_order_insensitive_equality(self):
        a = DictV(((IntV(1), StrV("a")), (IntV(2), StrV("b"))))
        b = DictV(((IntV(2), StrV("b")), (IntV(1), StrV("a"))))
        assert a == b
        assert hash(a) == hash(b)

    def test_insertion_order_preserved(self):
        d = DictV(((IntV(2), StrV("b")), (IntV(1), StrV("a"))))
        assert d.pairs[0][0] == IntV(2)

    def test_duplicate_keys_rejected(self):
        with pytest.raises(UnsupportedValue):
            DictV(((IntV(1), StrV("a")), (IntV(1), StrV("b"))))


class TestRoundTrips:
    @given(pvalue_strategy())
    @settings(max_examples=80)
    def test_value_json_round_trip(self, v):
        assert value_from_json(value_to_json(v)) == v

    @given(pvalue_strategy())
    @settings(max_examples=80)
    def test_python_literal_round_trip(self, v):
        assert parse_literal(python_literal(v)) == v

    @given(ptype_strategy(), ptype_strategy())
    @settings(max_examples=60)
    def test_type_json_round_trip(self, a, b):
        t = union(a, b)
        assert type_from_json(type_to_json(t)) == t

    def test_signature_json_round_trip(self):
        sig = FunctionType(params=(OptionalT(INT), ListT(STR)), ret=BOOL)
        assert signature_from_json(signature_to_json(sig)) == sig

    def test_big_int_survives_json(self):
        v = IntV(10**40)
        assert value_from_json(value_to_json(v)) == v
