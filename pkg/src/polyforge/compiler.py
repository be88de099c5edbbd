"""Compile validated test cases into target-language assertions.

The compiler is deterministic and recursive: a value plus its expected
type yields a literal string via the language's printing rules, and an
assertion wraps the call expression and expected value in the
language's template.  Anything the printer has no rule for raises
UnsupportedValue and the single test is dropped by the caller.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

from .languages import TargetLanguage

if TYPE_CHECKING:
    from .testgen import TestCase
from .values import (
    BoolV,
    DictT,
    DictV,
    FloatT,
    FloatV,
    FunctionType,
    IntV,
    ListT,
    ListV,
    NoneV,
    OptionalT,
    PType,
    PValue,
    StrV,
    TupleT,
    TupleV,
    UNKNOWN,
    UnsupportedValue,
)

_ESCAPES = {
    "\\": "\\\\",
    "\n": "\\n",
    "\t": "\\t",
    "\r": "\\r",
}


@dataclass(frozen=True, slots=True)
class CompiledSuite:
    assertions: tuple[str, ...]
    dropped: int


def emit_value(
    v: PValue,
    expected_type: PType,
    lang: TargetLanguage,
    _nested: bool = False,
) -> str:
    """Render a value as a target-language literal."""
    p = lang.value_printer
    t = expected_type

    if isinstance(t, OptionalT) and not isinstance(v, NoneV):
        inner = emit_value(v, t.inner, lang, _nested)
        some = p.get("some")
        return some.replace("{v}", inner) if some else inner

    if isinstance(v, NoneV):
        none = p.get("none")
        if none is None:
            raise UnsupportedValue(f"{lang.name} has no none literal")
        if _nested and not p.get("none_in_collections", True):
            raise UnsupportedValue(f"{lang.name}: none inside a collection")
        return none
    if isinstance(v, BoolV):
        return p["bool_true"] if v.v else p["bool_false"]
    if isinstance(v, IntV):
        if isinstance(t, FloatT):
            return _emit_float(float(v.v), lang)
        lo, hi = p.get("int_min"), p.get("int_max")
        if lo is not None and v.v < int(lo):
            raise UnsupportedValue(f"{lang.name}: integer below range: {v.v}")
        if hi is not None and v.v > int(hi):
            raise UnsupportedValue(f"{lang.name}: integer above range: {v.v}")
        text = p["int"].replace("{v}", str(v.v))
        if v.v < 0 and "int_negative" in p:
            text = p["int_negative"].replace("{v}", str(v.v))
        return text
    if isinstance(v, FloatV):
        return _emit_float(v.v, lang)
    if isinstance(v, StrV):
        return _emit_string(v.v, lang)
    if isinstance(v, ListV):
        elem_t = t.elem if isinstance(t, ListT) else UNKNOWN
        parts = [emit_value(e, elem_t, lang, True) for e in v.items]
        return p["list_open"] + p["list_sep"].join(parts) + p["list_close"]
    if isinstance(v, TupleV):
        if isinstance(t, TupleT):
            if len(t.elems) != len(v.items):
                raise UnsupportedValue("tuple arity differs from its type")
            elem_ts: list[PType] = list(t.elems)
        else:
            elem_ts = [UNKNOWN] * len(v.items)
        if not v.items and "tuple_empty" in p:
            return p["tuple_empty"]
        parts = [emit_value(e, et, lang, True) for e, et in zip(v.items, elem_ts)]
        text = p["tuple_open"] + p["tuple_sep"].join(parts) + p["tuple_close"]
        if len(parts) == 1 and "tuple_single_suffix" in p:
            text = p["tuple_open"] + parts[0] + p["tuple_single_suffix"] + p["tuple_close"]
        return text
    if isinstance(v, DictV):
        if isinstance(t, DictT):
            key_t, val_t = t.key, t.val
        else:
            key_t = val_t = UNKNOWN
        rendered = []
        for k, val in v.pairs:
            if isinstance(k, NoneV) and not p.get("none_in_collections", True):
                raise UnsupportedValue(f"{lang.name}: none as a dict key")
            pair = p["dict_pair"].replace("{k}", emit_value(k, key_t, lang, True))
            pair = pair.replace("{v}", emit_value(val, val_t, lang, True))
            rendered.append(pair)
        return p["dict_open"] + p["dict_sep"].join(rendered) + p["dict_close"]
    raise UnsupportedValue(f"no printing rule for {v!r}")


def _emit_float(x: float, lang: TargetLanguage) -> str:
    import math

    if not math.isfinite(x):
        raise UnsupportedValue(f"non-finite float: {x}")
    p = lang.value_printer
    text = f"{x:.17g}"
    if "." not in text and "e" not in text and "E" not in text:
        text += p.get("float_suffix_int", ".0")
    if x < 0 and "float_negative" in p:
        text = p["float_negative"].replace("{v}", text)
    return text


def _emit_string(s: str, lang: TargetLanguage) -> str:
    quote = lang.value_printer["string_quote"]
    out = []
    for ch in s:
        if ch == quote:
            out.append("\\" + quote)
        elif ch in _ESCAPES:
            out.append(_ESCAPES[ch])
        else:
            out.append(ch)
    return quote + "".join(out) + quote


def compile_call(
    args: tuple[PValue, ...],
    sig: FunctionType | None,
    fname: str,
    lang: TargetLanguage,
) -> str:
    """Render the call expression applying fname to literal arguments."""
    param_types: list[PType]
    if lang.typed and sig is not None:
        if len(sig.params) != len(args):
            raise UnsupportedValue("argument count differs from the signature")
        param_types = list(sig.params)
    else:
        param_types = [UNKNOWN] * len(args)
    if not args:
        return lang.call_template_empty.replace("{name}", fname)
    rendered = [
        lang.arg_template.replace("{arg}", emit_value(a, t, lang))
        for a, t in zip(args, param_types)
    ]
    call = lang.call_template.replace("{name}", fname)
    return call.replace("{args}", lang.arg_sep.join(rendered))


def compile_test(
    test: "TestCase",
    sig: FunctionType | None,
    fname: str,
    lang: TargetLanguage,
) -> str:
    """One assertion line for one test case."""
    call = compile_call(tuple(test.args), sig, fname, lang)
    ret_t = sig.ret if (lang.typed and sig is not None) else UNKNOWN
    expected = emit_value(test.expected, ret_t, lang)
    line = lang.assertion_template.replace("{call}", call)
    return line.replace("{expected}", expected)


def compile_suite(
    tests: list["TestCase"],
    sig: FunctionType | None,
    fname: str,
    lang: TargetLanguage,
) -> CompiledSuite | None:
    """Compile tests independently, dropping unsupported ones.

    Returns None (discard the function) when nothing compiles.
    """
    assertions = []
    dropped = 0
    for t in tests:
        try:
            assertions.append(compile_test(t, sig, fname, lang))
        except UnsupportedValue:
            dropped += 1
    if not assertions:
        return None
    return CompiledSuite(assertions=tuple(assertions), dropped=dropped)


def emit_harness(candidate: str, suite: CompiledSuite, lang: TargetLanguage) -> str:
    """Assemble the runnable program: prelude, candidate, assertions,
    success print (fixed layout, blank lines between sections)."""
    return (
        lang.harness_prelude
        + "\n\n"
        + candidate
        + "\n\n"
        + "\n".join(suite.assertions)
        + "\n"
        + lang.success_print
        + "\n"
    )
