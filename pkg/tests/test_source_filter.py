from __future__ import annotations

import random

from polyforge.source_filter import (
    RejectKind,
    decontaminate,
    default_stdlib_allowlist,
    extract_functions,
    filter_candidate,
)

ALLOW = default_stdlib_allowlist()


def extract_one(src: str):
    result = extract_functions([("mod.py", src)])
    assert len(result.functions) == 1
    return result.functions[0]


SIMPLE = '''def add(a, b):
    """Add two numbers."""
    return a + b
'''


class TestExtract:
    def test_single_function(self):
        f = extract_one(SIMPLE)
        assert f.name == "add"
        assert f.docstring == "Add two numbers."
        assert [n for n, _ in f.params] == ["a", "b"]

    def test_class_methods_not_extracted(self):
        src = (
            "class C:\n"
            "    def m(self):\n"
            '        """Doc."""\n'
            "        return 1\n"
        )
        result = extract_functions([("mod.py", src)])
        assert result.functions == []

    def test_nested_function_outer_only(self):
        src = (
            "def outer(x):\n"
            '    """Doc."""\n'
            "    def inner(y):\n"
            "        return y\n"
            "    return inner(x)\n"
        )
        result = extract_functions([("mod.py", src)])
        assert [f.name for f in result.functions] == ["outer"]

    def test_syntax_error_is_parse_failure(self):
        result = extract_functions([("bad.py", "def broken(:\n")])
        assert result.functions == []
        assert result.rejects
        assert all(r.kind == RejectKind.PARSE_FAILURE for _, r in result.rejects)

    def test_starargs_rejected(self):
        src = 'def f(*args):\n    """Doc."""\n    return args\n'
        result = extract_functions([("mod.py", src)])
        assert result.functions == []
        assert result.rejects[0][1].kind == RejectKind.PARSE_FAILURE

    def test_decorated_rejected(self):
        src = '@cached\ndef f(x):\n    """Doc."""\n    return x\n'
        result = extract_functions([("mod.py", src)])
        assert result.functions == []

    def test_deterministic_and_order_preserving(self):
        src = SIMPLE + "\n\ndef sub(a, b):\n    \"\"\"Subtract.\"\"\"\n    return a - b\n"
        r1 = extract_functions([("mod.py", src)])
        r2 = extract_functions([("mod.py", src)])
        assert [f.name for f in r1.functions] == ["add", "sub"]
        assert [f.to_json() for f in r1.functions] == [f.to_json() for f in r2.functions]

    def test_full_text_reparses(self):
        f = extract_one(SIMPLE)
        import ast

        ast.parse(f.full_text)


class TestFilterCandidate:
    def test_keep(self):
        assert filter_candidate(extract_one(SIMPLE), ALLOW) is None

    def test_todo_comment_rejected(self):
        src = (
            "def f(x):\n"
            '    """Doc."""\n'
            "    # TODO: handle negatives\n"
            "    return x\n"
        )
        reason = filter_candidate(extract_one(src), ALLOW)
        assert reason is not None and reason.kind == RejectKind.INCOMPLETE_MARKER

    def test_todo_in_docstring_rejected(self):
        src = 'def f(x):\n    """TODO write me."""\n    return x\n'
        reason = filter_candidate(extract_one(src), ALLOW)
        assert reason is not None and reason.kind == RejectKind.INCOMPLETE_MARKER

    def test_marker_is_case_sensitive(self):
        src = 'def f(x):\n    """Doc."""\n    # todo lowercase is fine\n    return x\n'
        assert filter_candidate(extract_one(src), ALLOW) is None

    def test_no_docstring_rejected(self):
        src = "def f(x):\n    return x\n"
        reason = filter_candidate(extract_one(src), ALLOW)
        assert reason is not None and reason.kind == RejectKind.NO_DOCSTRING

    def test_non_ascii_rejected(self):
        src = 'def f(x):\n    """Café."""\n    return x\n'
        reason = filter_candidate(extract_one(src), ALLOW)
        assert reason is not None and reason.kind == RejectKind.NON_ASCII

    def test_no_return_rejected(self):
        src = 'def f(x):\n    """Doc."""\n    print(x)\n'
        reason = filter_candidate(extract_one(src), ALLOW)
        assert reason is not None and reason.kind == RejectKind.NO_RETURN

    def test_bare_return_rejected(self):
        src = 'def f(x):\n    """Doc."""\n    return\n'
        reason = filter_candidate(extract_one(src), ALLOW)
        assert reason is not None and reason.kind == RejectKind.NO_RETURN

    def test_third_party_import_rejected(self):
        src = 'def f(x):\n    """Doc."""\n    import numpy\n    return numpy.abs(x)\n'
        reason = filter_candidate(extract_one(src), ALLOW)
        assert reason is not None and reason.kind == RejectKind.NON_STDLIB_IMPORT

    def test_stdlib_import_kept(self):
        src = 'def f(x):\n    """Doc."""\n    import math\n    return math.floor(x)\n'
        assert filter_candidate(extract_one(src), ALLOW) is None

    def test_pure_and_deterministic(self):
        f = extract_one(SIMPLE)
        assert filter_candidate(f, ALLOW) == filter_candidate(f, ALLOW)


CONTAMINATED = '''def sum_list(xs):
    """Return the sum of a list of numbers."""
    return sum(xs)
'''


class TestDecontaminate:
    def test_exact_prompt_match_removed(self):
        f = extract_one(CONTAMINATED)
        prompt = f.signature_text + "\n" + f.docstring
        kept, rejects = decontaminate([f], [prompt], [])
        assert kept == [] and len(rejects) == 1

    def test_name_only_overlap_kept(self):
        f = extract_one(CONTAMINATED)
        prompt = 'def sum_list(xs):\n"""A different docstring."""'
        kept, rejects = decontaminate([f], [prompt], [])
        assert kept == [f] and rejects == []

    def test_empty_benchmarks_noop(self):
        f = extract_one(CONTAMINATED)
        kept, rejects = decontaminate([f], [], [])
        assert kept == [f] and rejects == []

    def test_solution_match_removed(self):
        f = extract_one(CONTAMINATED)
        kept, rejects = decontaminate([f], [], [f.body_text])
        assert kept == [] and len(rejects) == 1

    def test_whitespace_trim_per_line(self):
        f = extract_one(CONTAMINATED)
        prompt = "  " + f.signature_text + "  \n  " + f.docstring + "  "
        kept, _ = decontaminate([f], [prompt], [])
        assert kept == []

    def test_order_preserved(self):
        src = SIMPLE + '\ndef sub(a, b):\n    """Subtract."""\n    return a - b\n'
        fs = extract_functions([("mod.py", src)]).functions
        kept, _ = decontaminate(fs, ["nope"], [])
        assert [f.name for f in kept] == ["add", "sub"]


class TestFunnelInvariants:
    def _random_corpus(self, rng: random.Random) -> str:
        chunks = []
        for i in range(rng.randint(1, 6)):
            doc = '    """Doc."""\n' if rng.random() < 0.7 else ""
            body = "    return x\n" if rng.random() < 0.7 else "    pass\n"
            todo = "    # TODO fix\n" if rng.random() < 0.3 else ""
            chunks.append(f"def f{i}(x):\n{doc}{todo}{body}")
        return "\n".join(chunks)

    def test_monotone_and_counts_sum(self):
        rng = random.Random(7)
        for _ in range(25):
            src = self._random_corpus(rng)
            result = extract_functions([("mod.py", src)])
            extracted = result.functions
            kept = [f for f in extracted if filter_candidate(f, ALLOW) is None]
            rejected = [f for f in extracted if filter_candidate(f, ALLOW) is not None]
            assert len(kept) + len(rejected) == len(extracted)
            clean, _ = decontaminate(kept, ["def f0(x):\nDoc."], [])
            assert len(clean) <= len(kept) <= len(extracted)
