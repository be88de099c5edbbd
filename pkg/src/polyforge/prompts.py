"""Translation prompt construction.

A prompt is the docstring rendered as a target-language comment (with
natural-language type phrases rewritten), optionally the original
source code inside a comment, then the translated signature line that
the model is asked to continue.
"""

from __future__ import annotations

import re

from .languages import TargetLanguage
from .source_filter import SourceFunction
from .values import (
    DictT,
    FloatT,
    FunctionType,
    IntT,
    BoolT,
    ListT,
    NoneT,
    OptionalT,
    PType,
    StrT,
    TupleT,
    UnionT,
    UnknownT,
)


class UntranslatableType(ValueError):
    def __init__(self, lang_name: str, offending: PType) -> None:
        self.lang_name = lang_name
        self.offending = offending
        super().__init__(f"no {lang_name} rendering for type {offending!r}")


def rewrite_phrases(text: str, lang: TargetLanguage) -> str:
    """Apply nl_rewrites longest-phrase-first, preserving the case of
    the first letter of each match."""
    for phrase, replacement in sorted(lang.nl_rewrites, key=lambda pr: -len(pr[0])):
        if not phrase:
            continue
        first = phrase[0]
        pattern = re.compile(
            r"\b[" + re.escape(first.lower()) + re.escape(first.upper()) + r"]"
            + re.escape(phrase[1:]) + r"\b"
        )

        def sub(m: re.Match) -> str:
            if m.group(0)[0].isupper() and replacement:
                return replacement[0].upper() + replacement[1:]
            return replacement

        text = pattern.sub(sub, text)
    return text


def as_comment(text: str, lang: TargetLanguage, style: str | None = None) -> str:
    """Wrap text in the language's comment syntax, one logical block."""
    if not text:
        return ""
    style = style or lang.docstring_style
    lines = text.splitlines()
    if style == "block" and lang.block_comment:
        open_tok, close_tok = lang.block_comment
        indent = " " * (len(open_tok) + 1)
        body = [open_tok + " " + lines[0]] + [indent + l for l in lines[1:]]
        return "\n".join(body) + " " + close_tok
    prefix = (lang.line_comment or "") + " "
    return "\n".join((prefix + l).rstrip() for l in lines)


def translate_docstring(doc: str, lang: TargetLanguage) -> str:
    return as_comment(rewrite_phrases(doc, lang), lang)


def render_type(t: PType, lang: TargetLanguage) -> str:
    """Render a PType with the descriptor's type map (typed targets)."""
    m = lang.type_map
    if isinstance(t, IntT):
        return m["int"]
    if isinstance(t, FloatT):
        return m["float"]
    if isinstance(t, BoolT):
        return m["bool"]
    if isinstance(t, StrT):
        return m["str"]
    if isinstance(t, ListT):
        return m["list"].replace("{elem}", render_type(t.elem, lang))
    if isinstance(t, TupleT):
        if not t.elems and "tuple_empty" in m:
            return m["tuple_empty"]
        inner = m["tuple_sep"].join(render_type(e, lang) for e in t.elems)
        return m["tuple_open"] + inner + m["tuple_close"]
    if isinstance(t, DictT):
        out = m["dict"].replace("{key}", render_type(t.key, lang))
        return out.replace("{val}", render_type(t.val, lang))
    if isinstance(t, OptionalT):
        return m["optional"].replace("{inner}", render_type(t.inner, lang))
    if isinstance(t, (UnionT, UnknownT, NoneT)):
        raise UntranslatableType(lang.name, t)
    raise UntranslatableType(lang.name, t)


def translate_signature(
    name: str,
    sig: FunctionType,
    lang: TargetLanguage,
    param_names: tuple[str, ...] | None = None,
) -> str:
    """Instantiate the signature template for the target language."""
    names = param_names or tuple(f"arg{i}" for i in range(len(sig.params)))
    if len(names) != len(sig.params):
        raise ValueError("parameter name count differs from the signature arity")
    if lang.typed:
        rendered = [
            lang.param_template.replace("{param}", n).replace(
                "{type}", render_type(t, lang)
            )
            for n, t in zip(names, sig.params)
        ]
        params = lang.param_sep.join(rendered) if rendered else "()"
        ret = render_type(sig.ret, lang)
    else:
        params = lang.param_sep.join(
            lang.param_template.replace("{param}", n) for n in names
        )
        ret = ""
    out = lang.signature_template.replace("{name}", name)
    out = out.replace("{params}", params)
    return out.replace("{ret}", ret)


def build_translation_prompt(
    f: SourceFunction,
    sig: FunctionType,
    lang: TargetLanguage,
    include_canonical: bool = True,
) -> str:
    """Docstring comment, optional commented source, translated signature."""
    signature = translate_signature(
        f.name, sig, lang, tuple(n for n, _ in f.params)
    )
    parts = []
    doc = translate_docstring(f.docstring, lang)
    if doc:
        parts.append(doc)
    if include_canonical:
        parts.append(as_comment(f.full_text, lang))
    parts.append(signature)
    return "\n".join(parts)
