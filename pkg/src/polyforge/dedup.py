"""Near-duplicate removal with comment-stripped ROUGE-L.

Items are first deduplicated within each prompt's solution set, then
over several rounds of seeded random regrouping for global coverage.
Within a group the earlier item always wins: a later item is dropped
when its F-measure against any kept earlier item exceeds the threshold.
"""

from __future__ import annotations

import math
import random
import re
from dataclasses import dataclass
from typing import Any, Callable, Sequence

_TOKEN_RE = re.compile(
    r'''"(?:\\.|[^"\\])*"'''      # double-quoted string
    r"""|'(?:\\.|[^'\\])*'"""     # single-quoted string
    r"""|[A-Za-z0-9_]+"""         # identifier / number run
    r"""|\S"""                    # any other single non-space char
)


def tokenize(code: str) -> list[str]:
    return _TOKEN_RE.findall(code)


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    """Classic DP, O(min(m, n)) memory."""
    if len(b) > len(a):
        a, b = b, a
    if not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, 1):
            if x == y:
                cur.append(prev[j - 1] + 1)
            else:
                cur.append(max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_l(a: Sequence[str], b: Sequence[str]) -> float:
    """LCS-based F1 between two token sequences, in [0, 1]."""
    if not a or not b:
        return 0.0
    lcs = lcs_length(a, b)
    if lcs == 0:
        return 0.0
    precision = lcs / len(b)
    recall = lcs / len(a)
    return 2 * precision * recall / (precision + recall)


@dataclass(frozen=True, slots=True)
class DedupConfig:
    t: float = 0.6
    group_size: int = 200
    rounds: int | None = None  # None: ceil(n / (group_size * 10)), min 1
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.t <= 1.0:
            raise ValueError(f"threshold out of range: {self.t}")
        if self.group_size < 2:
            raise ValueError(f"group_size must be >= 2: {self.group_size}")

    def effective_rounds(self, n_items: int) -> int:
        if self.rounds is not None:
            return self.rounds
        return max(1, math.ceil(n_items / (self.group_size * 10)))


@dataclass(frozen=True, slots=True)
class DedupItem:
    prompt_id: str
    code: str
    payload: Any = None


@dataclass(slots=True)
class DedupReport:
    input_count: int = 0
    removed_per_prompt: int = 0
    removed_global: int = 0
    rounds: int = 0
    output_count: int = 0

    def to_json(self) -> dict:
        return {
            "input": self.input_count,
            "removed_per_prompt": self.removed_per_prompt,
            "removed_global": self.removed_global,
            "rounds": self.rounds,
            "output": self.output_count,
        }


def dedup_group(
    group: Sequence[str],
    t: float,
    strip: Callable[[str], str] | None = None,
) -> list[int]:
    """Indices kept after the in-group double loop.

    Order-preserving; ``strip`` removes comments before tokenizing.
    """
    stripped = [strip(g) if strip else g for g in group]
    tokens = [tokenize(s) for s in stripped]
    keep = [True] * len(group)
    for i in range(len(group)):
        if not keep[i]:
            continue
        for j in range(i + 1, len(group)):
            if not keep[j]:
                continue
            m, n = len(tokens[i]), len(tokens[j])
            # exactness-preserving prune: F <= 2*min/(m+n)
            if m + n == 0 or 2 * min(m, n) / (m + n) <= t:
                continue
            if rouge_l(tokens[i], tokens[j]) > t:
                keep[j] = False
    return [i for i, k in enumerate(keep) if k]


def deduplicate(
    items: Sequence[DedupItem],
    cfg: DedupConfig,
    strip: Callable[[str], str] | None = None,
    report: DedupReport | None = None,
) -> list[DedupItem]:
    """Per-prompt dedup followed by seeded random regrouping rounds.

    Deterministic for a fixed seed; survivors keep their input order.
    """
    if report is None:
        report = DedupReport()
    report.input_count = len(items)

    # phase 1: group by prompt
    by_prompt: dict[str, list[int]] = {}
    for idx, item in enumerate(items):
        by_prompt.setdefault(item.prompt_id, []).append(idx)
    alive: set[int] = set()
    for indices in by_prompt.values():
        kept_local = dedup_group([items[i].code for i in indices], cfg.t, strip)
        alive.update(indices[i] for i in kept_local)
    report.removed_per_prompt = len(items) - len(alive)

    # phase 2: random regrouping
    rounds = cfg.effective_rounds(len(items))
    report.rounds = rounds
    rng = random.Random(cfg.seed)
    for _ in range(rounds):
        order = sorted(alive)
        rng.shuffle(order)
        for start in range(0, len(order), cfg.group_size):
            chunk = order[start : start + cfg.group_size]
            kept_local = dedup_group([items[i].code for i in chunk], cfg.t, strip)
            kept_set = {chunk[i] for i in kept_local}
            alive -= set(chunk) - kept_set

    survivors = [items[i] for i in sorted(alive)]
    report.removed_global = report.input_count - report.removed_per_prompt - len(survivors)
    report.output_count = len(survivors)
    return survivors
