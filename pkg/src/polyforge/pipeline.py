"""End-to-end orchestration with resumable per-stage checkpoints.

Stage order: extract, filter, decontaminate, test generation, test
validation, coverage gate, type inference, then per target language
prompt construction, translation, test compilation, and harness
verification, followed by dedup and dataset emission.  Each stage
writes a JSONL checkpoint; a resumed run replays completed stages from
disk instead of recomputing them.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

from . import compiler, executor, prompts, testgen
from .dedup import DedupConfig, DedupItem, DedupReport, deduplicate
from .languages import TargetLanguage, load_descriptor, load_shipped, strip_comments
from .llm import LLMClient, testgen_params, translation_params
from .source_filter import (
    SourceFunction,
    decontaminate,
    default_stdlib_allowlist,
    extract_functions,
    filter_candidate,
    load_stdlib_allowlist,
    read_corpus_dir,
    read_corpus_jsonl,
)
from .testgen import TestCase
from .values import (
    ArityMismatch,
    infer_signature,
    signature_from_json,
    signature_to_json,
    translatable_for_typed,
)

log = logging.getLogger(__name__)

FUNNEL_STAGES = (
    "extracted",
    "filtered",
    "decontaminated",
    "tests_generated",
    "tests_validated",
    "coverage_passed",
    "types_inferred",
)


class ConfigError(ValueError):
    pass


class StageSetupError(RuntimeError):
    """An interpreter or harness could not start; the stage is aborted
    so a later run can resume it, nothing is silently dropped."""


def _sha256(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


@dataclass(frozen=True, slots=True)
class TrainingItem:
    function_id: str
    language: str
    prompt: str
    solution: str
    content: str
    compiled_tests: tuple[str, ...]
    source_text: str
    tests_passed: int

    def __post_init__(self) -> None:
        if not self.content.startswith(self.prompt):
            raise ValueError("content must begin with the prompt")

    @property
    def content_hash(self) -> str:
        return _sha256(self.content)

    def to_json(self) -> dict:
        return {
            "function_id": self.function_id,
            "language": self.language,
            "prompt": self.prompt,
            "solution": self.solution,
            "content": self.content,
            "compiled_tests": list(self.compiled_tests),
            "source_text": self.source_text,
            "stats": {"tests_passed": self.tests_passed},
        }

    @classmethod
    def from_json(cls, d: dict) -> "TrainingItem":
        return cls(
            function_id=d["function_id"],
            language=d["language"],
            prompt=d["prompt"],
            solution=d["solution"],
            content=d["content"],
            compiled_tests=tuple(d["compiled_tests"]),
            source_text=d["source_text"],
            tests_passed=d["stats"]["tests_passed"],
        )


@dataclass(frozen=True, slots=True)
class FunnelStats:
    stages: tuple[tuple[str, int], ...]

    @classmethod
    def from_counts(cls, counts: dict[str, int]) -> "FunnelStats":
        return cls(tuple((name, counts.get(name, 0)) for name in FUNNEL_STAGES))

    def count(self, stage: str) -> int:
        for name, n in self.stages:
            if name == stage:
                return n
        raise KeyError(stage)

    def check_monotone(self) -> None:
        prev = None
        for name, n in self.stages:
            if prev is not None and n > prev:
                raise ValueError(f"funnel count increased at stage {name!r}")
            prev = n

    def to_json(self) -> dict:
        return {"stages": [[name, n] for name, n in self.stages]}

    @classmethod
    def from_json(cls, d: dict) -> "FunnelStats":
        return cls(tuple((name, n) for name, n in d["stages"]))

    def render(self) -> str:
        width = max(len(name) for name, _ in self.stages)
        return "\n".join(f"{name:<{width}}  {n}" for name, n in self.stages)


@dataclass(slots=True)
class PipelineConfig:
    corpus_path: str
    out_dir: str
    languages: tuple[str, ...] = ("lua", "racket", "ocaml")
    seed: int = 0
    workers: int = 4
    coverage_threshold: float = testgen.DEFAULT_COVERAGE_THRESHOLD
    include_canonical: bool = True
    timeout: float = executor.DEFAULT_TIMEOUT
    dedup: DedupConfig = field(default_factory=DedupConfig)
    stdlib_allowlist_path: str | None = None
    benchmark_prompts_path: str | None = None
    benchmark_solutions_path: str | None = None
    generation_n_overrides: dict[str, int] = field(default_factory=dict)
    descriptor_paths: dict[str, str] = field(default_factory=dict)
    llm: dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_json(cls, d: dict) -> "PipelineConfig":
        try:
            corpus_path = d["corpus_path"]
            out_dir = d["out_dir"]
        except KeyError as exc:
            raise ConfigError(f"missing config key: {exc}") from exc
        dd = d.get("dedup", {})
        dedup_cfg = DedupConfig(
            t=dd.get("t", 0.6),
            group_size=dd.get("group_size", 200),
            rounds=dd.get("rounds"),
            seed=d.get("seed", 0),
        )
        return cls(
            corpus_path=corpus_path,
            out_dir=out_dir,
            languages=tuple(d.get("languages", ("lua", "racket", "ocaml"))),
            seed=d.get("seed", 0),
            workers=d.get("workers", 4),
            coverage_threshold=d.get(
                "coverage_threshold", testgen.DEFAULT_COVERAGE_THRESHOLD
            ),
            include_canonical=d.get("include_canonical", True),
            timeout=d.get("timeout", executor.DEFAULT_TIMEOUT),
            dedup=dedup_cfg,
            stdlib_allowlist_path=d.get("stdlib_allowlist_path"),
            benchmark_prompts_path=d.get("benchmark_prompts_path"),
            benchmark_solutions_path=d.get("benchmark_solutions_path"),
            generation_n_overrides=dict(d.get("generation_n_overrides", {})),
            descriptor_paths=dict(d.get("descriptor_paths", {})),
            llm=dict(d.get("llm", {})),
        )

    def load_language(self, name: str) -> TargetLanguage:
        if name in self.descriptor_paths:
            return load_descriptor(self.descriptor_paths[name], check_prelude=False)
        return load_shipped(name)

    def allowlist(self) -> frozenset[str]:
        if self.stdlib_allowlist_path:
            return load_stdlib_allowlist(self.stdlib_allowlist_path)
        return default_stdlib_allowlist()

    def benchmark_lines(self, path: str | None) -> list[str]:
        if not path:
            return []
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(data, list):
            raise ConfigError(f"{path}: expected a JSON list of strings")
        return [str(x) for x in data]


class Checkpoint:
    """One JSONL file per stage; presence of the file means the stage
    completed (writes go through a temp file and an atomic rename)."""

    def __init__(self, out_dir: str | Path, stage: str) -> None:
        self.path = Path(out_dir) / f"{stage}.jsonl"

    def exists(self) -> bool:
        return self.path.exists()

    def load(self) -> list[dict]:
        records = []
        with open(self.path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    records.append(json.loads(line))
        return records

    def store(self, records: list[dict]) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        tmp = self.path.with_suffix(".jsonl.tmp")
        with open(tmp, "w", encoding="utf-8") as fh:
            for rec in records:
                fh.write(json.dumps(rec, sort_keys=True) + "\n")
        os.replace(tmp, self.path)


def _stage(
    out_dir: str,
    name: str,
    resume: bool,
    compute: Callable[[], list[dict]],
) -> list[dict]:
    ckpt = Checkpoint(out_dir, name)
    if resume and ckpt.exists():
        log.info("stage %s: resumed from checkpoint", name)
        return ckpt.load()
    records = compute()
    ckpt.store(records)
    log.info("stage %s: %d records", name, len(records))
    return records


def verify_translations(
    candidates: list[str],
    suite: compiler.CompiledSuite,
    lang: TargetLanguage,
    timeout: float = executor.DEFAULT_TIMEOUT,
    max_workers: int = 4,
) -> list[str]:
    """Candidates whose harness passes every compiled test.

    Duplicate passing candidates are all retained; near-duplicate
    removal is the dedup stage's job.
    """
    if not suite.assertions:
        raise ValueError("cannot verify against an empty suite")
    jobs = [
        executor.Job(
            compiler.emit_harness(c, suite, lang), lang, timeout=timeout
        )
        for c in candidates
    ]
    results = executor.run_pool(jobs, max_workers=max_workers)
    for r in results:
        if r.status == executor.RunStatus.SETUP_ERROR:
            raise StageSetupError(
                f"{lang.name} harness could not start: {r.stderr_excerpt[:200]}"
            )
    return [c for c, r in zip(candidates, results) if r.passed]


def _read_corpus(path: str) -> list[tuple[str, str]]:
    p = Path(path)
    if p.is_dir():
        return list(read_corpus_dir(p))
    return list(read_corpus_jsonl(p))


def make_training_item(
    f_id: str,
    source_text: str,
    prompt: str,
    signature: str,
    completion: str,
    suite: compiler.CompiledSuite,
    lang_name: str,
) -> TrainingItem:
    return TrainingItem(
        function_id=f_id,
        language=lang_name,
        prompt=prompt,
        solution=signature + completion,
        content=prompt + completion,
        compiled_tests=suite.assertions,
        source_text=source_text,
        tests_passed=len(suite.assertions),
    )


STOP_POINTS = (
    "extract", "filter", "decontaminate", "gen-tests", "validate",
    "coverage", "infer-types", "translate", "verify", "dedup",
)


def run_all(
    cfg: PipelineConfig,
    client: LLMClient,
    resume: bool = False,
    stop_after: str | None = None,
) -> tuple[list[TrainingItem], FunnelStats]:
    """Run the pipeline, optionally stopping after a named stage.

    With ``stop_after`` set, later stages are skipped and the returned
    dataset is empty; checkpoints written so far stay on disk.
    """
    if stop_after is not None and stop_after not in STOP_POINTS:
        raise ConfigError(f"unknown stage: {stop_after!r}")
    out = cfg.out_dir
    Path(out).mkdir(parents=True, exist_ok=True)
    counts: dict[str, int] = {}

    def stopped(point: str) -> bool:
        return stop_after == point

    def extract_stage() -> list[dict]:
        result = extract_functions(_read_corpus(cfg.corpus_path))
        return [f.to_json() for f in result.functions]

    extracted = _stage(out, "01_extracted", resume, extract_stage)
    counts["extracted"] = len(extracted)
    if stopped("extract"):
        return [], FunnelStats.from_counts(counts)

    allowlist = cfg.allowlist()

    def filter_stage() -> list[dict]:
        kept = []
        for rec in extracted:
            f = SourceFunction.from_json(rec)
            if filter_candidate(f, allowlist) is None:
                kept.append(rec)
        return kept

    filtered = _stage(out, "02_filtered", resume, filter_stage)
    counts["filtered"] = len(filtered)
    if stopped("filter"):
        return [], FunnelStats.from_counts(counts)

    bench_prompts = cfg.benchmark_lines(cfg.benchmark_prompts_path)
    bench_solutions = cfg.benchmark_lines(cfg.benchmark_solutions_path)

    def decontaminate_stage() -> list[dict]:
        funcs = [SourceFunction.from_json(r) for r in filtered]
        clean, _rejects = decontaminate(funcs, bench_prompts, bench_solutions)
        return [f.to_json() for f in clean]

    decontaminated = _stage(out, "03_decontaminated", resume, decontaminate_stage)
    counts["decontaminated"] = len(decontaminated)
    if stopped("decontaminate"):
        return [], FunnelStats.from_counts(counts)

    def testgen_stage() -> list[dict]:
        records = []
        for rec in decontaminated:
            f = SourceFunction.from_json(rec)
            prompt = testgen.build_testgen_prompt(f)
            completions = client.complete(prompt, testgen_params())
            tests = testgen.parse_test_suites(completions, f.name)
            if tests:
                records.append({
                    "key": _sha256(f.full_text),
                    "function": rec,
                    "tests": [t.to_json() for t in tests],
                })
        return records

    generated = _stage(out, "04_tests_generated", resume, testgen_stage)
    counts["tests_generated"] = len(generated)
    if stopped("gen-tests"):
        return [], FunnelStats.from_counts(counts)

    def validate_stage() -> list[dict]:
        records = []
        for rec in generated:
            f = SourceFunction.from_json(rec["function"])
            tests = [TestCase.from_json(t) for t in rec["tests"]]
            passing = testgen.validate_tests(
                f, tests, timeout=cfg.timeout, max_workers=cfg.workers
            )
            if passing:
                records.append({
                    "key": rec["key"],
                    "function": rec["function"],
                    "tests": [t.to_json() for t in passing],
                })
        return records

    validated = _stage(out, "05_tests_validated", resume, validate_stage)
    counts["tests_validated"] = len(validated)
    if stopped("validate"):
        return [], FunnelStats.from_counts(counts)

    def coverage_stage() -> list[dict]:
        records = []
        for rec in validated:
            f = SourceFunction.from_json(rec["function"])
            tests = [TestCase.from_json(t) for t in rec["tests"]]
            keep, report = testgen.coverage_gate(
                f, tests, threshold=cfg.coverage_threshold, timeout=cfg.timeout
            )
            if keep:
                new = dict(rec)
                new["coverage"] = {
                    "hit": report.lines_hit, "total": report.lines_total,
                }
                records.append(new)
        return records

    covered = _stage(out, "06_coverage_passed", resume, coverage_stage)
    counts["coverage_passed"] = len(covered)
    if stopped("coverage"):
        return [], FunnelStats.from_counts(counts)

    def infer_stage() -> list[dict]:
        records = []
        for rec in covered:
            tests = [TestCase.from_json(t) for t in rec["tests"]]
            try:
                sig = infer_signature(tests)
            except ArityMismatch:
                continue
            new = dict(rec)
            new["signature"] = signature_to_json(sig)
            records.append(new)
        return records

    typed = _stage(out, "07_types_inferred", resume, infer_stage)
    counts["types_inferred"] = len(typed)
    if stopped("infer-types"):
        return [], FunnelStats.from_counts(counts)

    langs = {name: cfg.load_language(name) for name in cfg.languages}

    translated_by_lang: dict[str, list[dict]] = {}
    for lang_name, lang in langs.items():
        gen_n = cfg.generation_n_overrides.get(lang_name, lang.generation_n)

        def translate_stage(lang: TargetLanguage = lang, gen_n: int = gen_n) -> list[dict]:
            records = []
            for rec in typed:
                f = SourceFunction.from_json(rec["function"])
                sig = signature_from_json(rec["signature"])
                if lang.typed and not translatable_for_typed(sig):
                    continue
                try:
                    prompt = prompts.build_translation_prompt(
                        f, sig, lang, include_canonical=cfg.include_canonical
                    )
                except prompts.UntranslatableType:
                    continue
                signature_line = prompt.splitlines()[-1]
                params = translation_params(n=gen_n, stop=lang.stop_tokens)
                completions = client.complete(prompt, params)
                records.append({
                    "key": rec["key"],
                    "function": rec["function"],
                    "tests": rec["tests"],
                    "signature": rec["signature"],
                    "prompt": prompt,
                    "signature_line": signature_line,
                    "completions": completions,
                })
            return records

        translated_by_lang[lang_name] = _stage(
            out, f"08_translated_{lang_name}", resume, translate_stage
        )
    if stopped("translate"):
        return [], FunnelStats.from_counts(counts)

    verified_by_lang: dict[str, list[dict]] = {}
    for lang_name, lang in langs.items():
        translated = translated_by_lang[lang_name]

        def verify_stage(lang: TargetLanguage = lang,
                         translated: list[dict] = translated) -> list[dict]:
            records = []
            for rec in translated:
                f = SourceFunction.from_json(rec["function"])
                tests = [TestCase.from_json(t) for t in rec["tests"]]
                sig = signature_from_json(rec["signature"])
                suite = compiler.compile_suite(tests, sig, f.name, lang)
                if suite is None:
                    continue
                candidates = [
                    rec["signature_line"] + c for c in rec["completions"]
                ]
                passing = verify_translations(
                    candidates, suite, lang,
                    timeout=cfg.timeout, max_workers=cfg.workers,
                )
                for cand in passing:
                    completion = cand[len(rec["signature_line"]):]
                    item = make_training_item(
                        f.id, f.full_text, rec["prompt"],
                        rec["signature_line"], completion, suite, lang.name,
                    )
                    records.append(item.to_json())
            return records

        verified_by_lang[lang_name] = _stage(
            out, f"09_verified_{lang_name}", resume, verify_stage
        )
    if stopped("verify"):
        return [], FunnelStats.from_counts(counts)

    all_items: list[TrainingItem] = []
    for lang_name, lang in langs.items():
        verified = verified_by_lang[lang_name]

        def dedup_stage(lang: TargetLanguage = lang,
                        verified: list[dict] = verified) -> list[dict]:
            items = [TrainingItem.from_json(r) for r in verified]
            dedup_items = [
                DedupItem(
                    prompt_id=f"{it.function_id}::{it.language}",
                    code=it.solution,
                    payload=it,
                )
                for it in items
            ]
            report = DedupReport()
            survivors = deduplicate(
                dedup_items, cfg.dedup,
                strip=lambda code: strip_comments(code, lang),
                report=report,
            )
            log.info("dedup %s: %s", lang.name, report.to_json())
            return [it.payload.to_json() for it in survivors]

        deduped = _stage(out, f"10_deduplicated_{lang_name}", resume, dedup_stage)
        all_items.extend(TrainingItem.from_json(r) for r in deduped)

    if stopped("dedup"):
        return [], FunnelStats.from_counts(counts)

    stats = FunnelStats.from_counts(counts)
    stats.check_monotone()
    Path(out, "funnel.json").write_text(
        json.dumps(stats.to_json(), indent=2) + "\n", encoding="utf-8"
    )
    dataset = sort_items(all_items)
    emit_dataset(dataset, str(Path(out) / "dataset.jsonl"))
    return dataset, stats


def sort_items(items: list[TrainingItem]) -> list[TrainingItem]:
    return sorted(items, key=lambda it: (it.function_id, it.language, it.content_hash))


def emit_dataset(items: list[TrainingItem], path: str) -> None:
    """One JSON object per line, stable order, lossless round-trip."""
    try:
        with open(path, "w", encoding="utf-8") as fh:
            for item in sort_items(items):
                fh.write(json.dumps(item.to_json(), sort_keys=True) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write dataset to {path}: {exc}") from exc


def load_dataset(path: str) -> list[TrainingItem]:
    items = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                items.append(TrainingItem.from_json(json.loads(line)))
    return items
