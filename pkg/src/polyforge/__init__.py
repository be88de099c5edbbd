"""polyforge: turn documented Python functions into validated,
deduplicated fine-tuning datasets for low-resource languages."""

from __future__ import annotations

__version__ = "0.1.0"

__all__ = [
    "values",
    "source_filter",
    "testgen",
    "languages",
    "prompts",
    "compiler",
    "executor",
    "llm",
    "dedup",
    "pipeline",
    "cli",
]
