"""First-order value universe and the type lattice inferred from it.

Values are the things that may appear as literal arguments or expected
results of a test case: atoms (ints, floats, bools, strings, none) and
collections (lists, tuples, dicts).  Types mirror the values, plus
``UnionT``/``OptionalT`` which only arise from folding several tests
together, and ``UnknownT`` for positions with no evidence (e.g. an empty
list).
"""

from __future__ import annotations

import ast
import json
from dataclasses import dataclass
from typing import Iterable, Sequence


class UnsupportedValue(ValueError):
    """Raised for expressions outside the first-order literal universe."""


class ArityMismatch(ValueError):
    """Raised when test cases for one function disagree on argument count."""


# ---------------------------------------------------------------------------
# Values


class PValue:
    __slots__ = ()


@dataclass(frozen=True, slots=True)
class IntV(PValue):
    v: int


@dataclass(frozen=True, slots=True)
class FloatV(PValue):
    v: float


@dataclass(frozen=True, slots=True)
class BoolV(PValue):
    v: bool


@dataclass(frozen=True, slots=True)
class StrV(PValue):
    v: str

    def __post_init__(self) -> None:
        if not self.v.isascii():
            raise UnsupportedValue(f"non-ASCII string: {self.v!r}")


@dataclass(frozen=True, slots=True)
class NoneV(PValue):
    pass


NONE = NoneV()


@dataclass(frozen=True, slots=True)
class ListV(PValue):
    items: tuple[PValue, ...]


@dataclass(frozen=True, slots=True)
class TupleV(PValue):
    items: tuple[PValue, ...]


@dataclass(frozen=True, slots=True)
class DictV(PValue):
    """Ordered key/value pairs; equality ignores insertion order."""

    pairs: tuple[tuple[PValue, PValue], ...]

    def __post_init__(self) -> None:
        keys = [k for k, _ in self.pairs]
        if len(keys) != len(set(keys)):
            raise UnsupportedValue("duplicate dict keys")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DictV):
            return NotImplemented
        return frozenset(self.pairs) == frozenset(other.pairs)

    def __hash__(self) -> int:
        return hash(frozenset(self.pairs))


# ---------------------------------------------------------------------------
# Types


class PType:
    __slots__ = ()


@dataclass(frozen=True, slots=True)
class IntT(PType):
    pass


@dataclass(frozen=True, slots=True)
class FloatT(PType):
    pass


@dataclass(frozen=True, slots=True)
class BoolT(PType):
    pass


@dataclass(frozen=True, slots=True)
class StrT(PType):
    pass


@dataclass(frozen=True, slots=True)
class NoneT(PType):
    pass


@dataclass(frozen=True, slots=True)
class UnknownT(PType):
    pass


@dataclass(frozen=True, slots=True)
class ListT(PType):
    elem: PType


@dataclass(frozen=True, slots=True)
class TupleT(PType):
    elems: tuple[PType, ...]


@dataclass(frozen=True, slots=True)
class DictT(PType):
    key: PType
    val: PType


@dataclass(frozen=True, slots=True)
class UnionT(PType):
    members: frozenset[PType]


@dataclass(frozen=True, slots=True)
class OptionalT(PType):
    inner: PType


INT = IntT()
FLOAT = FloatT()
BOOL = BoolT()
STR = StrT()
NONE_T = NoneT()
UNKNOWN = UnknownT()


@dataclass(frozen=True, slots=True)
class FunctionType:
    params: tuple[PType, ...]
    ret: PType


# ---------------------------------------------------------------------------
# Parsing literals


def parse_literal(text: str) -> PValue:
    """Parse a literal expression into a PValue.

    Accepts atoms, (optionally signed) numbers, and nested
    lists/tuples/dicts.  Anything else (identifiers, calls, sets,
    comprehensions, non-ASCII strings) raises UnsupportedValue.
    """
    try:
        tree = ast.parse(text.strip(), mode="eval")
    except SyntaxError as exc:
        raise UnsupportedValue(f"not a literal: {text!r}") from exc
    return value_from_node(tree.body)


def value_from_node(node: ast.expr) -> PValue:
    if isinstance(node, ast.Constant):
        c = node.value
        if c is None:
            return NONE
        if isinstance(c, bool):
            return BoolV(c)
        if isinstance(c, int):
            return IntV(c)
        if isinstance(c, float):
            return FloatV(c)
        if isinstance(c, str):
            return StrV(c)
        raise UnsupportedValue(f"unsupported constant: {c!r}")
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        operand = value_from_node(node.operand)
        if isinstance(operand, BoolV) or not isinstance(operand, (IntV, FloatV)):
            raise UnsupportedValue("sign applied to a non-number")
        sign = -1 if isinstance(node.op, ast.USub) else 1
        if isinstance(operand, IntV):
            return IntV(sign * operand.v)
        return FloatV(sign * operand.v)
    if isinstance(node, ast.List):
        return ListV(tuple(value_from_node(e) for e in node.elts))
    if isinstance(node, ast.Tuple):
        return TupleV(tuple(value_from_node(e) for e in node.elts))
    if isinstance(node, ast.Dict):
        pairs = []
        for k, v in zip(node.keys, node.values):
            if k is None:  # **splat
                raise UnsupportedValue("dict unpacking is not a literal")
            pairs.append((value_from_node(k), value_from_node(v)))
        return DictV(tuple(pairs))
    raise UnsupportedValue(f"unsupported expression: {ast.dump(node)}")


def python_literal(v: PValue) -> str:
    """Render a PValue back to Python source text."""
    if isinstance(v, NoneV):
        return "None"
    if isinstance(v, BoolV):
        return "True" if v.v else "False"
    if isinstance(v, (IntV, StrV)):
        return repr(v.v)
    if isinstance(v, FloatV):
        return repr(v.v)
    if isinstance(v, ListV):
        return "[" + ", ".join(python_literal(e) for e in v.items) + "]"
    if isinstance(v, TupleV):
        inner = ", ".join(python_literal(e) for e in v.items)
        if len(v.items) == 1:
            inner += ","
        return "(" + inner + ")"
    if isinstance(v, DictV):
        return "{" + ", ".join(
            f"{python_literal(k)}: {python_literal(val)}" for k, val in v.pairs
        ) + "}"
    raise UnsupportedValue(f"cannot render {v!r}")


# ---------------------------------------------------------------------------
# Typing


def type_of(v: PValue) -> PType:
    if isinstance(v, NoneV):
        return NONE_T
    if isinstance(v, BoolV):
        return BOOL
    if isinstance(v, IntV):
        return INT
    if isinstance(v, FloatV):
        return FLOAT
    if isinstance(v, StrV):
        return STR
    if isinstance(v, ListV):
        return ListT(union_all(type_of(e) for e in v.items))
    if isinstance(v, TupleV):
        return TupleT(tuple(type_of(e) for e in v.items))
    if isinstance(v, DictV):
        return DictT(
            union_all(type_of(k) for k, _ in v.pairs),
            union_all(type_of(val) for _, val in v.pairs),
        )
    raise UnsupportedValue(f"cannot type {v!r}")


def union_all(types: Iterable[PType]) -> PType:
    result: PType = UNKNOWN
    for t in types:
        result = union(result, t)
    return result


def _expand(t: PType) -> tuple[list[PType], bool]:
    """Split a type into non-optional member list and a has-none flag."""
    if isinstance(t, UnknownT):
        return [], False
    if isinstance(t, NoneT):
        return [], True
    if isinstance(t, OptionalT):
        members, _ = _expand(t.inner)
        return members, True
    if isinstance(t, UnionT):
        out: list[PType] = []
        has_none = False
        for m in t.members:
            ms, n = _expand(m)
            out.extend(ms)
            has_none = has_none or n
        return out, has_none
    return [t], False


def _try_join(a: PType, b: PType) -> PType | None:
    """Structural join of two non-union, non-optional members, or None."""
    if a == b:
        return a
    if isinstance(a, ListT) and isinstance(b, ListT):
        return ListT(union(a.elem, b.elem))
    if isinstance(a, TupleT) and isinstance(b, TupleT) and len(a.elems) == len(b.elems):
        return TupleT(tuple(union(x, y) for x, y in zip(a.elems, b.elems)))
    if isinstance(a, DictT) and isinstance(b, DictT):
        return DictT(union(a.key, b.key), union(a.val, b.val))
    return None


def _merge_members(members: Sequence[PType]) -> list[PType]:
    merged: list[PType] = []
    for m in members:
        for i, existing in enumerate(merged):
            joined = _try_join(existing, m)
            if joined is not None:
                merged[i] = joined
                break
        else:
            merged.append(m)
    return merged


def union(a: PType, b: PType) -> PType:
    """Idempotent, commutative, associative join of two types.

    UnknownT is the identity.  NoneT combined with anything else yields
    OptionalT; unions are flattened and never contain NoneT or nested
    unions.
    """
    members_a, none_a = _expand(a)
    members_b, none_b = _expand(b)
    merged = _merge_members(list(members_a) + list(members_b))
    has_none = none_a or none_b
    if not merged:
        return NONE_T if has_none else UNKNOWN
    core: PType = merged[0] if len(merged) == 1 else UnionT(frozenset(merged))
    return OptionalT(core) if has_none else core


def contains_union(t: PType) -> bool:
    """True if a UnionT occurs anywhere in the type (Optional is fine)."""
    if isinstance(t, UnionT):
        return True
    if isinstance(t, ListT):
        return contains_union(t.elem)
    if isinstance(t, TupleT):
        return any(contains_union(e) for e in t.elems)
    if isinstance(t, DictT):
        return contains_union(t.key) or contains_union(t.val)
    if isinstance(t, OptionalT):
        return contains_union(t.inner)
    return False


def contains_unknown(t: PType) -> bool:
    if isinstance(t, UnknownT):
        return True
    if isinstance(t, ListT):
        return contains_unknown(t.elem)
    if isinstance(t, TupleT):
        return any(contains_unknown(e) for e in t.elems)
    if isinstance(t, DictT):
        return contains_unknown(t.key) or contains_unknown(t.val)
    if isinstance(t, OptionalT):
        return contains_unknown(t.inner)
    if isinstance(t, UnionT):
        return any(contains_unknown(m) for m in t.members)
    return False


def translatable_for_typed(sig: FunctionType) -> bool:
    """Whether a signature can be rendered for a statically typed target.

    General unions (outside Optional) and surviving UnknownT have no
    principled monomorphic encoding, so such functions are kept only for
    untyped targets.
    """
    all_types = list(sig.params) + [sig.ret]
    return not any(contains_union(t) or contains_unknown(t) for t in all_types)


def infer_signature(tests: Sequence["TestCaseLike"]) -> FunctionType:
    """Fold union over the argument and result types of all tests."""
    if not tests:
        raise ArityMismatch("cannot infer a signature from zero tests")
    arity = len(tests[0].args)
    for t in tests:
        if len(t.args) != arity:
            raise ArityMismatch(f"expected {arity} args, got {len(t.args)}")
    params = tuple(
        union_all(type_of(t.args[i]) for t in tests) for i in range(arity)
    )
    ret = union_all(type_of(t.expected) for t in tests)
    return FunctionType(params=params, ret=ret)


class TestCaseLike:
    """Structural protocol: anything with .args and .expected PValues."""

    args: Sequence[PValue]
    expected: PValue


# ---------------------------------------------------------------------------
# JSON round-trip (checkpoint format)


def value_to_json(v: PValue) -> dict:
    if isinstance(v, NoneV):
        return {"tag": "none"}
    if isinstance(v, BoolV):
        return {"tag": "bool", "v": v.v}
    if isinstance(v, IntV):
        return {"tag": "int", "v": str(v.v)}
    if isinstance(v, FloatV):
        return {"tag": "float", "v": v.v}
    if isinstance(v, StrV):
        return {"tag": "str", "v": v.v}
    if isinstance(v, ListV):
        return {"tag": "list", "items": [value_to_json(e) for e in v.items]}
    if isinstance(v, TupleV):
        return {"tag": "tuple", "items": [value_to_json(e) for e in v.items]}
    if isinstance(v, DictV):
        return {
            "tag": "dict",
            "pairs": [[value_to_json(k), value_to_json(val)] for k, val in v.pairs],
        }
    raise UnsupportedValue(f"cannot serialize {v!r}")


def value_from_json(d: dict) -> PValue:
    tag = d["tag"]
    if tag == "none":
        return NONE
    if tag == "bool":
        return BoolV(d["v"])
    if tag == "int":
        return IntV(int(d["v"]))
    if tag == "float":
        return FloatV(float(d["v"]))
    if tag == "str":
        return StrV(d["v"])
    if tag == "list":
        return ListV(tuple(value_from_json(e) for e in d["items"]))
    if tag == "tuple":
        return TupleV(tuple(value_from_json(e) for e in d["items"]))
    if tag == "dict":
        return DictV(tuple((value_from_json(k), value_from_json(v)) for k, v in d["pairs"]))
    raise UnsupportedValue(f"bad value tag: {tag!r}")


def type_to_json(t: PType) -> dict:
    if isinstance(t, IntT):
        return {"tag": "int"}
    if isinstance(t, FloatT):
        return {"tag": "float"}
    if isinstance(t, BoolT):
        return {"tag": "bool"}
    if isinstance(t, StrT):
        return {"tag": "str"}
    if isinstance(t, NoneT):
        return {"tag": "none"}
    if isinstance(t, UnknownT):
        return {"tag": "unknown"}
    if isinstance(t, ListT):
        return {"tag": "list", "elem": type_to_json(t.elem)}
    if isinstance(t, TupleT):
        return {"tag": "tuple", "elems": [type_to_json(e) for e in t.elems]}
    if isinstance(t, DictT):
        return {"tag": "dict", "key": type_to_json(t.key), "val": type_to_json(t.val)}
    if isinstance(t, OptionalT):
        return {"tag": "optional", "inner": type_to_json(t.inner)}
    if isinstance(t, UnionT):
        # sort members by their serialized form for a stable wire format
        out = sorted((type_to_json(m) for m in t.members), key=json.dumps)
        return {"tag": "union", "members": out}
    raise UnsupportedValue(f"cannot serialize {t!r}")


def type_from_json(d: dict) -> PType:
    tag = d["tag"]
    atoms = {
        "int": INT, "float": FLOAT, "bool": BOOL,
        "str": STR, "none": NONE_T, "unknown": UNKNOWN,
    }
    if tag in atoms:
        return atoms[tag]
    if tag == "list":
        return ListT(type_from_json(d["elem"]))
    if tag == "tuple":
        return TupleT(tuple(type_from_json(e) for e in d["elems"]))
    if tag == "dict":
        return DictT(type_from_json(d["key"]), type_from_json(d["val"]))
    if tag == "optional":
        return OptionalT(type_from_json(d["inner"]))
    if tag == "union":
        return UnionT(frozenset(type_from_json(m) for m in d["members"]))
    raise UnsupportedValue(f"bad type tag: {tag!r}")


def signature_to_json(sig: FunctionType) -> dict:
    return {
        "params": [type_to_json(t) for t in sig.params],
        "ret": type_to_json(sig.ret),
    }


def signature_from_json(d: dict) -> FunctionType:
    return FunctionType(
        params=tuple(type_from_json(t) for t in d["params"]),
        ret=type_from_json(d["ret"]),
    )
