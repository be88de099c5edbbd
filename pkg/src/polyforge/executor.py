"""Isolated subprocess execution with timeouts and resource limits.

Each program runs from a fresh temporary directory so concurrently
running harnesses can never interfere through the filesystem.  A missing
interpreter is reported as SetupError, distinct from a failing program.
"""

from __future__ import annotations

import dataclasses
import enum
import json
import os
import resource
import shutil
import signal
import subprocess
import sys
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Protocol, Sequence

OUTPUT_CAP = 64 * 1024
DEFAULT_TIMEOUT = 15.0
KILL_GRACE = 5.0
COVERAGE_MARKER = "##COVERAGE##"

ENV_DENYLIST = ("LLM_TOKEN",)


class RunStatus(enum.Enum):
    PASS = "Pass"
    FAIL = "Fail"
    TIMEOUT = "Timeout"
    CRASH_OR_SIGNAL = "CrashOrSignal"
    SETUP_ERROR = "SetupError"


@dataclass(frozen=True, slots=True)
class CoverageReport:
    lines_total: int
    lines_hit: int

    def __post_init__(self) -> None:
        if not (0 <= self.lines_hit <= self.lines_total) or self.lines_total < 1:
            raise ValueError(f"bad coverage: {self.lines_hit}/{self.lines_total}")

    @property
    def fraction(self) -> float:
        return self.lines_hit / self.lines_total


@dataclass(frozen=True, slots=True)
class RunResult:
    status: RunStatus
    stdout_excerpt: str
    stderr_excerpt: str
    duration: float
    coverage: CoverageReport | None = None

    @property
    def passed(self) -> bool:
        return self.status == RunStatus.PASS


class RunnableLang(Protocol):
    name: str
    file_extension: str
    run_command: tuple[str, ...]
    memory_limit_mib: int | None


@dataclass(frozen=True, slots=True)
class SourceLang:
    """The source-language interpreter (Python itself)."""

    name: str = "python"
    file_extension: str = "py"
    run_command: tuple[str, ...] = (sys.executable, "{path}")
    memory_limit_mib: int | None = 512


PYTHON = SourceLang()


def _make_limiter(memory_limit_mib: int | None):
    def apply_limits() -> None:
        os.setsid()
        if memory_limit_mib is not None:
            limit = memory_limit_mib * 1024 * 1024
            try:
                resource.setrlimit(resource.RLIMIT_AS, (limit, limit))
            except (ValueError, OSError):
                pass
    return apply_limits


def run_isolated(
    program_text: str,
    lang: RunnableLang,
    timeout: float = DEFAULT_TIMEOUT,
    instrument_coverage: bool = False,
    container_command: Sequence[str] | None = None,
) -> RunResult:
    """Write the program into a fresh directory and execute it.

    The process group is killed at the timeout.  ``container_command``
    optionally wraps the interpreter invocation (e.g. a container
    runner); it is prepended verbatim.
    """
    workdir = tempfile.mkdtemp(prefix="polyforge-run-")
    try:
        path = os.path.join(workdir, f"program.{lang.file_extension}")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(program_text)
        argv = [part.replace("{path}", path) for part in lang.run_command]
        if container_command:
            argv = list(container_command) + argv
        env = {k: v for k, v in os.environ.items() if k not in ENV_DENYLIST}
        start = time.monotonic()
        try:
            proc = subprocess.Popen(
                argv,
                cwd=workdir,
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
                env=env,
                preexec_fn=_make_limiter(lang.memory_limit_mib),
            )
        except FileNotFoundError as exc:
            return RunResult(RunStatus.SETUP_ERROR, "", str(exc), 0.0)
        timed_out = False
        try:
            stdout, stderr = proc.communicate(timeout=timeout)
        except subprocess.TimeoutExpired:
            timed_out = True
            _kill_group(proc)
            try:
                stdout, stderr = proc.communicate(timeout=KILL_GRACE)
            except subprocess.TimeoutExpired:
                proc.kill()
                stdout, stderr = b"", b""
        duration = time.monotonic() - start
        out = stdout.decode("utf-8", "replace")[:OUTPUT_CAP]
        err = stderr.decode("utf-8", "replace")[:OUTPUT_CAP]
        if timed_out:
            return RunResult(RunStatus.TIMEOUT, out, err, duration)
        if proc.returncode == 0:
            coverage = _parse_coverage(out) if instrument_coverage else None
            return RunResult(RunStatus.PASS, out, err, duration, coverage)
        if proc.returncode < 0:
            return RunResult(RunStatus.CRASH_OR_SIGNAL, out, err, duration)
        return RunResult(RunStatus.FAIL, out, err, duration)
    finally:
        shutil.rmtree(workdir, ignore_errors=True)


def _kill_group(proc: subprocess.Popen) -> None:
    try:
        os.killpg(proc.pid, signal.SIGKILL)
    except (ProcessLookupError, PermissionError):
        proc.kill()


def _parse_coverage(stdout: str) -> CoverageReport | None:
    for line in reversed(stdout.splitlines()):
        if line.startswith(COVERAGE_MARKER):
            try:
                d = json.loads(line[len(COVERAGE_MARKER):])
                return CoverageReport(lines_total=d["total"], lines_hit=d["hit"])
            except (ValueError, KeyError):
                return None
    return None


@dataclass(frozen=True, slots=True)
class Job:
    program_text: str
    lang: RunnableLang
    timeout: float = DEFAULT_TIMEOUT
    instrument_coverage: bool = False


def run_pool(
    jobs: Sequence[Job],
    max_workers: int = 4,
    container_command: Sequence[str] | None = None,
) -> list[RunResult]:
    """Run jobs with bounded parallelism; results align with inputs."""
    if max_workers < 1:
        raise ValueError("max_workers must be >= 1")
    if not jobs:
        return []
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        futures = [
            pool.submit(
                run_isolated, j.program_text, j.lang, j.timeout,
                j.instrument_coverage, container_command,
            )
            for j in jobs
        ]
        return [f.result() for f in futures]
