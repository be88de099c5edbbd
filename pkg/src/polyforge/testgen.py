"""LLM-backed test generation, execution validation, and coverage gating.

Completions are scanned line-wise for assertions of the shape
``assert f(<literals>) == <literal>``; everything else is dropped.
Surviving assertions are executed one at a time in isolation, and a
function is kept only when the union of its passing tests covers enough
of its executable lines.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from . import executor
from .executor import CoverageReport, Job, RunStatus
from .source_filter import SourceFunction
from .values import PValue, UnsupportedValue, python_literal, value_from_node

import ast

log = logging.getLogger(__name__)

DEFAULT_TESTGEN_SCAFFOLD = (
    "# Unit tests for the function above.  Each test is a single line of\n"
    "# the form: assert candidate(<literal arguments>) == <literal result>\n"
)
DEFAULT_TEST_TIMEOUT = 15.0
DEFAULT_COVERAGE_THRESHOLD = 0.90
CANDIDATE_ALIAS = "candidate"


@dataclass(frozen=True, slots=True)
class TestCase:
    __test__ = False  # not a pytest class despite the name

    args: tuple[PValue, ...]
    expected: PValue
    raw_text: str = field(compare=False, default="")

    def to_json(self) -> dict:
        from .values import value_to_json

        return {
            "args": [value_to_json(a) for a in self.args],
            "expected": value_to_json(self.expected),
            "raw_text": self.raw_text,
        }

    @classmethod
    def from_json(cls, d: dict) -> "TestCase":
        from .values import value_from_json

        return cls(
            args=tuple(value_from_json(a) for a in d["args"]),
            expected=value_from_json(d["expected"]),
            raw_text=d.get("raw_text", ""),
        )


def build_testgen_prompt(f: SourceFunction, scaffold: str = DEFAULT_TESTGEN_SCAFFOLD) -> str:
    return f.full_text + "\n\n" + scaffold


def parse_test_suites(completions: list[str], fname: str) -> list[TestCase]:
    """Extract translatable assertions from raw completions.

    Duplicates collapse by structural equality on (args, expected);
    first occurrence wins, order preserved.
    """
    seen: set[TestCase] = set()
    out: list[TestCase] = []
    for completion in completions:
        for line in completion.splitlines():
            test = _parse_assertion_line(line, fname)
            if test is not None and test not in seen:
                seen.add(test)
                out.append(test)
    return out


def _parse_assertion_line(line: str, fname: str) -> TestCase | None:
    stripped = line.strip()
    if not stripped.startswith("assert"):
        return None
    try:
        tree = ast.parse(stripped)
    except SyntaxError:
        return None
    if len(tree.body) != 1 or not isinstance(tree.body[0], ast.Assert):
        return None
    test = tree.body[0].test
    if not (
        isinstance(test, ast.Compare)
        and len(test.ops) == 1
        and isinstance(test.ops[0], ast.Eq)
        and isinstance(test.left, ast.Call)
        and isinstance(test.left.func, ast.Name)
        and test.left.func.id in (fname, CANDIDATE_ALIAS)
        and not test.left.keywords
    ):
        return None
    try:
        args = tuple(value_from_node(a) for a in test.left.args)
        expected = value_from_node(test.comparators[0])
    except UnsupportedValue:
        return None
    return TestCase(args=args, expected=expected, raw_text=stripped)


def render_assertion(fname: str, test: TestCase) -> str:
    args = ", ".join(python_literal(a) for a in test.args)
    return f"assert {fname}({args}) == {python_literal(test.expected)}"


def _import_lines(f: SourceFunction) -> str:
    return "\n".join(f"import {m}" for m in sorted(f.imports))


def build_validation_program(f: SourceFunction, test: TestCase) -> str:
    """A standalone program running one test against the function."""
    parts = [_import_lines(f), f.full_text, render_assertion(f.name, test)]
    return "\n\n".join(p for p in parts if p) + "\n"


def validate_tests(
    f: SourceFunction,
    tests: list[TestCase],
    timeout: float = DEFAULT_TEST_TIMEOUT,
    max_workers: int = 4,
) -> list[TestCase]:
    """Keep exactly the tests whose isolated run passes (order kept).

    A timeout or crash counts as a failure.  Zero survivors means the
    caller must discard the function.
    """
    jobs = [
        Job(build_validation_program(f, t), executor.PYTHON, timeout=timeout)
        for t in tests
    ]
    results = executor.run_pool(jobs, max_workers=max_workers)
    return [t for t, r in zip(tests, results) if r.status == RunStatus.PASS]


_COVERAGE_RUNNER = """
import json as _json
import sys as _sys

_codes = set()
_stack = [{fname}.__code__]
while _stack:
    _c = _stack.pop()
    _codes.add(_c)
    for _k in _c.co_consts:
        if hasattr(_k, "co_lines"):
            _stack.append(_k)
_lines = set()
for _c in _codes:
    for _start, _end, _line in _c.co_lines():
        if _line is not None:
            _lines.add(_line)
_hit = set()

def _tracer(frame, event, arg):
    if event == "line" and frame.f_code in _codes:
        _hit.add(frame.f_lineno)
    return _tracer

_sys.settrace(_tracer)
try:
{assert_block}
finally:
    _sys.settrace(None)
print("{marker} " + _json.dumps(
    {{"total": len(_lines), "hit": len(_hit & _lines)}}))
"""


def build_coverage_program(f: SourceFunction, tests: list[TestCase]) -> str:
    asserts = "\n".join(
        "    " + render_assertion(f.name, t) for t in tests
    ) or "    pass"
    runner = _COVERAGE_RUNNER.format(
        fname=f.name, assert_block=asserts, marker=executor.COVERAGE_MARKER
    )
    parts = [_import_lines(f), f.full_text, runner]
    return "\n\n".join(p for p in parts if p)


def coverage_gate(
    f: SourceFunction,
    tests: list[TestCase],
    threshold: float = DEFAULT_COVERAGE_THRESHOLD,
    timeout: float = DEFAULT_TEST_TIMEOUT,
) -> tuple[bool, CoverageReport | None]:
    """Measure union line coverage of the passing tests.

    Keep iff hit/total >= threshold (the boundary is inclusive).
    Instrumentation failure drops the function with a diagnostic.
    """
    program = build_coverage_program(f, tests)
    result = executor.run_isolated(
        program, executor.PYTHON, timeout=timeout, instrument_coverage=True
    )
    if result.status != RunStatus.PASS or result.coverage is None:
        log.warning(
            "coverage instrumentation failed for %s: %s %s",
            f.id, result.status.value, result.stderr_excerpt[:200],
        )
        return False, result.coverage
    report = result.coverage
    return report.fraction >= threshold, report


def checkpoint_record(f: SourceFunction, tests: list[TestCase],
                      coverage: CoverageReport | None) -> dict:
    return {
        "function_id": f.id,
        "tests": [t.to_json() for t in tests],
        "coverage": None if coverage is None else {
            "hit": coverage.lines_hit, "total": coverage.lines_total,
        },
    }
