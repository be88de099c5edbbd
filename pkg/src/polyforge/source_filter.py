"""Extract candidate functions from a Python corpus and filter them.

The funnel: keep only top-level functions that carry a docstring, are
pure ASCII, syntactically return a value, import nothing outside the
stdlib allow-list, carry no incompleteness markers, and do not match a
benchmark prompt or solution verbatim.
"""

from __future__ import annotations

import ast
import enum
import io
import logging
import tokenize
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Iterator

log = logging.getLogger(__name__)

DEFAULT_INCOMPLETE_MARKERS = ("TODO", "FIXME", "XXX")


class RejectKind(enum.Enum):
    NO_DOCSTRING = "NoDocstring"
    NON_ASCII = "NonAscii"
    NO_RETURN = "NoReturn"
    NON_STDLIB_IMPORT = "NonStdlibImport"
    PARSE_FAILURE = "ParseFailure"
    INCOMPLETE_MARKER = "IncompleteMarker"
    BENCHMARK_CONTAMINATED = "BenchmarkContaminated"


@dataclass(frozen=True, slots=True)
class RejectReason:
    kind: RejectKind
    detail: str = ""


@dataclass(frozen=True, slots=True)
class SourceFunction:
    id: str
    name: str
    params: tuple[tuple[str, str | None], ...]
    docstring: str
    signature_text: str
    body_text: str
    imports: frozenset[str]
    origin: tuple[str, int]

    @property
    def full_text(self) -> str:
        return self.signature_text + "\n" + self.body_text

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "name": self.name,
            "params": [[n, a] for n, a in self.params],
            "docstring": self.docstring,
            "signature_text": self.signature_text,
            "body_text": self.body_text,
            "imports": sorted(self.imports),
            "origin": [self.origin[0], self.origin[1]],
        }

    @classmethod
    def from_json(cls, d: dict) -> "SourceFunction":
        return cls(
            id=d["id"],
            name=d["name"],
            params=tuple((n, a) for n, a in d["params"]),
            docstring=d["docstring"],
            signature_text=d["signature_text"],
            body_text=d["body_text"],
            imports=frozenset(d["imports"]),
            origin=(d["origin"][0], d["origin"][1]),
        )


@dataclass(slots=True)
class ExtractionResult:
    functions: list[SourceFunction] = field(default_factory=list)
    rejects: list[tuple[str, RejectReason]] = field(default_factory=list)


def default_stdlib_allowlist() -> frozenset[str]:
    text = resources.files("polyforge.data").joinpath("stdlib_allowlist.txt").read_text()
    return frozenset(_parse_allowlist(text))


def load_stdlib_allowlist(path: str | Path) -> frozenset[str]:
    return frozenset(_parse_allowlist(Path(path).read_text()))


def _parse_allowlist(text: str) -> Iterator[str]:
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            yield line


# ---------------------------------------------------------------------------
# Extraction


def extract_functions(corpus: Iterable[tuple[str, str]]) -> ExtractionResult:
    """Extract top-level function definitions from (path, content) pairs.

    Only plain, undecorated, synchronous top-level ``def`` blocks with
    positional parameters are accepted; anything harder is conservatively
    rejected under ParseFailure.  Extraction order follows (file, offset).
    """
    result = ExtractionResult()
    for path, content in corpus:
        try:
            _extract_file(path, content, result)
        except Exception as exc:  # unreadable / undecodable content
            log.warning("skipping %s: %s", path, exc)
    return result


def _extract_file(path: str, content: str, result: ExtractionResult) -> None:
    try:
        tree = ast.parse(content)
    except (SyntaxError, ValueError) as exc:
        result.rejects.append(
            (f"{path}:<file>", RejectReason(RejectKind.PARSE_FAILURE, str(exc)))
        )
        return
    lines = content.splitlines()
    file_imports = _file_import_aliases(tree)
    for node in tree.body:
        if not isinstance(node, (ast.FunctionDef, ast.AsyncFunctionDef)):
            continue
        fn_id = f"{path}:{node.lineno}"
        reason = _restricted_parse(node)
        if reason is not None:
            result.rejects.append((fn_id, reason))
            continue
        assert isinstance(node, ast.FunctionDef)
        sig_text, body_text = _split_signature(node, lines)
        offset = sum(len(l) + 1 for l in lines[: node.lineno - 1])
        params = tuple(
            (a.arg, ast.unparse(a.annotation) if a.annotation else None)
            for a in node.args.args
        )
        result.functions.append(
            SourceFunction(
                id=fn_id,
                name=node.name,
                params=params,
                docstring=ast.get_docstring(node, clean=False) or "",
                signature_text=sig_text,
                body_text=body_text,
                imports=_function_imports(node, file_imports),
                origin=(path, offset),
            )
        )


def _restricted_parse(node: ast.stmt) -> RejectReason | None:
    """Reject constructs outside the restricted subset we handle."""
    if isinstance(node, ast.AsyncFunctionDef):
        return RejectReason(RejectKind.PARSE_FAILURE, "async function")
    assert isinstance(node, ast.FunctionDef)
    if node.decorator_list:
        return RejectReason(RejectKind.PARSE_FAILURE, "decorated function")
    a = node.args
    if a.vararg or a.kwarg or a.kwonlyargs or a.posonlyargs:
        return RejectReason(RejectKind.PARSE_FAILURE, "non-positional parameters")
    names = [arg.arg for arg in a.args]
    if len(names) != len(set(names)):
        return RejectReason(RejectKind.PARSE_FAILURE, "duplicate parameter names")
    return None


def _split_signature(node: ast.FunctionDef, lines: list[str]) -> tuple[str, str]:
    first_body_line = min(s.lineno for s in node.body)
    sig = "\n".join(lines[node.lineno - 1 : first_body_line - 1])
    end = node.end_lineno or first_body_line
    body = "\n".join(lines[first_body_line - 1 : end])
    return sig, body


def _file_import_aliases(tree: ast.Module) -> dict[str, str]:
    """Map local alias -> top-level module name for file-level imports."""
    aliases: dict[str, str] = {}
    for node in tree.body:
        if isinstance(node, ast.Import):
            for alias in node.names:
                top = alias.name.split(".")[0]
                aliases[alias.asname or alias.name.split(".")[0]] = top
        elif isinstance(node, ast.ImportFrom) and node.module and node.level == 0:
            top = node.module.split(".")[0]
            for alias in node.names:
                aliases[alias.asname or alias.name] = top
    return aliases


def _function_imports(node: ast.FunctionDef, file_imports: dict[str, str]) -> frozenset[str]:
    """Modules a function depends on: its own imports, plus file-level
    imports whose local name it references."""
    modules: set[str] = set()
    used_names: set[str] = set()
    for sub in ast.walk(node):
        if isinstance(sub, ast.Import):
            modules.update(a.name.split(".")[0] for a in sub.names)
        elif isinstance(sub, ast.ImportFrom):
            if sub.module and sub.level == 0:
                modules.add(sub.module.split(".")[0])
        elif isinstance(sub, ast.Name):
            used_names.add(sub.id)
    for name, module in file_imports.items():
        if name in used_names:
            modules.add(module)
    return frozenset(modules)


# ---------------------------------------------------------------------------
# Filtering


def filter_candidate(
    f: SourceFunction,
    allowlist: frozenset[str] | None = None,
    markers: tuple[str, ...] = DEFAULT_INCOMPLETE_MARKERS,
) -> RejectReason | None:
    """Return None to keep, or the single (first-failing) reject reason."""
    if allowlist is None:
        allowlist = default_stdlib_allowlist()
    if not f.docstring.strip():
        return RejectReason(RejectKind.NO_DOCSTRING)
    for text, label in ((f.docstring, "docstring"), (f.signature_text, "signature"),
                        (f.body_text, "body")):
        if not text.isascii():
            return RejectReason(RejectKind.NON_ASCII, label)
    if not _returns_value(f):
        return RejectReason(RejectKind.NO_RETURN)
    bad = sorted(f.imports - allowlist)
    if bad:
        return RejectReason(RejectKind.NON_STDLIB_IMPORT, ", ".join(bad))
    marker = _find_marker(f, markers)
    if marker is not None:
        return RejectReason(RejectKind.INCOMPLETE_MARKER, marker)
    return None


def _returns_value(f: SourceFunction) -> bool:
    """Syntactic check: some path contains ``return <expr>``."""
    try:
        tree = ast.parse(f.full_text)
    except SyntaxError:
        return False
    for node in ast.walk(tree):
        if isinstance(node, ast.Return) and node.value is not None:
            return True
    return False


def _find_marker(f: SourceFunction, markers: tuple[str, ...]) -> str | None:
    """Look for incompleteness markers in comments and the docstring."""
    for marker in markers:
        if marker in f.docstring:
            return marker
    comments = []
    try:
        tokens = tokenize.generate_tokens(io.StringIO(f.full_text).readline)
        comments = [t.string for t in tokens if t.type == tokenize.COMMENT]
    except tokenize.TokenizeError:
        pass
    for comment in comments:
        for marker in markers:
            if marker in comment:
                return marker
    return None


# ---------------------------------------------------------------------------
# Decontamination


def _normalize_block(text: str) -> str:
    return "\n".join(line.strip() for line in text.splitlines()).strip()


def decontaminate(
    fs: list[SourceFunction],
    benchmark_prompts: list[str],
    benchmark_solutions: list[str] | None = None,
) -> tuple[list[SourceFunction], list[tuple[str, RejectReason]]]:
    """Drop functions whose prompt or body exactly matches a benchmark
    entry (whitespace trimmed per line).  Preserves survivor order."""
    if not benchmark_prompts and not benchmark_solutions:
        return list(fs), []
    prompt_set = {_normalize_block(p) for p in benchmark_prompts}
    solution_set = {_normalize_block(s) for s in (benchmark_solutions or [])}
    kept: list[SourceFunction] = []
    rejects: list[tuple[str, RejectReason]] = []
    for f in fs:
        prompt = _normalize_block(f.signature_text + "\n" + f.docstring)
        if prompt in prompt_set:
            rejects.append((f.id, RejectReason(RejectKind.BENCHMARK_CONTAMINATED, "prompt")))
        elif solution_set and _normalize_block(f.body_text) in solution_set:
            rejects.append((f.id, RejectReason(RejectKind.BENCHMARK_CONTAMINATED, "solution")))
        else:
            kept.append(f)
    return kept, rejects


def read_corpus_dir(root: str | Path) -> Iterator[tuple[str, str]]:
    """Yield (path, content) for every .py file under a directory tree."""
    root = Path(root)
    for p in sorted(root.rglob("*.py")):
        try:
            yield str(p.relative_to(root)), p.read_text(encoding="utf-8")
        except (OSError, UnicodeDecodeError) as exc:
            log.warning("unreadable file %s: %s", p, exc)


def read_corpus_jsonl(path: str | Path) -> Iterator[tuple[str, str]]:
    """Yield (path, content) records from a JSONL corpus file."""
    import json

    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            yield rec["path"], rec["content"]
