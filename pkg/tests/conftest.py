from __future__ import annotations

import shutil

import pytest


def interpreter_available(executable: str) -> bool:
    return shutil.which(executable) is not None


def requires(executable: str):
    return pytest.mark.skipif(
        not interpreter_available(executable),
        reason=f"{executable} interpreter not installed",
    )


requires_lua = requires("lua")
requires_racket = requires("racket")
requires_ocaml = requires("ocaml")
