"""Declarative target-language descriptors.

Everything language-specific lives in a JSON descriptor: comment and
string syntax, the type map for typed targets, literal printing rules,
the deep-equality harness prelude, and how to run a program.  Adding a
language means adding a data file, not code.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

log = logging.getLogger(__name__)

SHIPPED_LANGUAGES = ("lua", "racket", "ocaml", "r", "julia")

_REQUIRED_FIELDS = (
    "name",
    "file_extension",
    "typed",
    "signature_template",
    "value_printer",
    "harness_prelude",
    "assertion_template",
    "success_print",
    "run_command",
)


class DescriptorInvalid(ValueError):
    def __init__(self, field_name: str, message: str = "") -> None:
        self.field_name = field_name
        super().__init__(f"descriptor field {field_name!r}: {message or 'invalid'}")


class PreludeFailure(RuntimeError):
    def __init__(self, name: str, output: str) -> None:
        self.output = output
        super().__init__(f"prelude for {name!r} failed to run:\n{output}")


@dataclass(frozen=True, slots=True)
class TargetLanguage:
    name: str
    file_extension: str
    line_comment: str | None
    block_comment: tuple[str, str] | None
    block_comment_nested: bool
    docstring_style: str  # "line" | "block"
    string_delims: tuple[str, ...]
    typed: bool
    type_map: dict[str, Any]
    nl_rewrites: tuple[tuple[str, str], ...]
    signature_template: str
    param_template: str
    param_sep: str
    call_template: str
    call_template_empty: str
    arg_template: str
    arg_sep: str
    value_printer: dict[str, Any]
    harness_prelude: str
    assertion_template: str
    success_print: str
    run_command: tuple[str, ...]
    stop_tokens: tuple[str, ...]
    memory_limit_mib: int | None
    generation_n: int


def _join_lines(v: Any) -> str:
    return "\n".join(v) if isinstance(v, list) else str(v)


def parse_descriptor(raw: dict) -> TargetLanguage:
    """Build and statically validate a descriptor from parsed JSON."""
    for f in _REQUIRED_FIELDS:
        if f not in raw:
            raise DescriptorInvalid(f, "missing")
    run_command = tuple(raw["run_command"])
    if not any("{path}" in part for part in run_command):
        raise DescriptorInvalid("run_command", "no {path} hole")
    typed = bool(raw["typed"])
    type_map = raw.get("type_map", {})
    if typed:
        for key in ("int", "float", "bool", "str", "list", "tuple_sep", "dict", "optional"):
            if key not in type_map:
                raise DescriptorInvalid("type_map", f"typed target missing {key!r}")
    block = raw.get("block_comment")
    if raw.get("line_comment") is None and block is None:
        raise DescriptorInvalid("line_comment", "need a line or block comment syntax")
    printer = dict(raw["value_printer"])
    for key in ("bool_true", "bool_false", "string_quote", "list_open", "list_close"):
        if key not in printer:
            raise DescriptorInvalid("value_printer", f"missing {key!r}")
    return TargetLanguage(
        name=raw["name"],
        file_extension=raw["file_extension"],
        line_comment=raw.get("line_comment"),
        block_comment=tuple(block) if block else None,
        block_comment_nested=bool(raw.get("block_comment_nested", False)),
        docstring_style=raw.get("docstring_style", "line"),
        string_delims=tuple(raw.get("string_delims", ['"'])),
        typed=typed,
        type_map=type_map,
        nl_rewrites=tuple((p, r) for p, r in raw.get("nl_rewrites", [])),
        signature_template=raw["signature_template"],
        param_template=raw.get("param_template", "{param}"),
        param_sep=raw.get("param_sep", ", "),
        call_template=raw.get("call_template", "{name}({args})"),
        call_template_empty=raw.get("call_template_empty", raw.get("call_template", "{name}({args})").replace("{args}", "")),
        arg_template=raw.get("arg_template", "{arg}"),
        arg_sep=raw.get("arg_sep", ", "),
        value_printer=printer,
        harness_prelude=_join_lines(raw["harness_prelude"]),
        assertion_template=raw["assertion_template"],
        success_print=raw["success_print"],
        run_command=run_command,
        stop_tokens=tuple(raw.get("stop_tokens", [])),
        memory_limit_mib=raw.get("memory_limit_mib", 512),
        generation_n=int(raw.get("generation_n", 50)),
    )


def load_descriptor(path: str | Path, check_prelude: bool = True) -> TargetLanguage:
    """Load a descriptor file; optionally verify the prelude runs.

    A missing interpreter downgrades the prelude check to a warning so
    that descriptors remain loadable on machines without every runtime.
    """
    raw = json.loads(Path(path).read_text())
    lang = parse_descriptor(raw)
    if check_prelude:
        _check_prelude(lang)
    return lang


def load_shipped(name: str, check_prelude: bool = False) -> TargetLanguage:
    """Load one of the descriptors bundled with the package."""
    text = resources.files("polyforge.data").joinpath(f"{name}.json").read_text()
    lang = parse_descriptor(json.loads(text))
    if check_prelude:
        _check_prelude(lang)
    return lang


def _check_prelude(lang: TargetLanguage) -> None:
    from .executor import RunStatus, run_isolated

    program = lang.harness_prelude + "\n\n" + lang.success_print + "\n"
    result = run_isolated(program, lang, timeout=30.0)
    if result.status == RunStatus.SETUP_ERROR:
        log.warning(
            "interpreter for %s unavailable; prelude check skipped (%s)",
            lang.name, result.stderr_excerpt,
        )
        return
    if result.status != RunStatus.PASS:
        raise PreludeFailure(lang.name, result.stdout_excerpt + result.stderr_excerpt)


# ---------------------------------------------------------------------------
# Comment stripping


def strip_comments(code: str, lang: TargetLanguage) -> str:
    """Remove line and block comments; string literal bodies untouched.

    Unbalanced block comments strip to end of text (logged).  Idempotent.
    """
    out: list[str] = []
    i = 0
    n = len(code)
    line = lang.line_comment
    block_open, block_close = lang.block_comment or (None, None)
    while i < n:
        ch = code[i]
        if ch in lang.string_delims:
            j = _scan_string(code, i, ch)
            out.append(code[i:j])
            i = j
            continue
        if block_open and code.startswith(block_open, i):
            j = _scan_block(code, i + len(block_open), block_open, block_close,
                            lang.block_comment_nested)
            if j is None:
                log.warning("unbalanced block comment in %s code", lang.name)
                return "".join(out)
            i = j
            continue
        if line and code.startswith(line, i):
            j = code.find("\n", i)
            i = n if j < 0 else j
            continue
        out.append(ch)
        i += 1
    return "".join(out)


def _scan_string(code: str, start: int, quote: str) -> int:
    i = start + 1
    n = len(code)
    while i < n:
        if code[i] == "\\":
            i += 2
            continue
        if code[i] == quote:
            return i + 1
        i += 1
    return n  # unterminated: treat rest as string content


def _scan_block(code: str, i: int, open_tok: str, close_tok: str, nested: bool) -> int | None:
    depth = 1
    n = len(code)
    while i < n:
        if nested and code.startswith(open_tok, i):
            depth += 1
            i += len(open_tok)
        elif code.startswith(close_tok, i):
            depth -= 1
            i += len(close_tok)
            if depth == 0:
                return i
        else:
            i += 1
    return None
