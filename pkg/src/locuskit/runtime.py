"""Process-level knobs: the LOCUSKIT_THREADS parallelism cap."""

from __future__ import annotations

import os

from .errors import InvalidParameter

__all__ = ["max_threads"]

_ENV_VAR = "LOCUSKIT_THREADS"


def max_threads() -> int:
    """Parallelism cap from the environment; 1 when unset."""
    raw = os.environ.get(_ENV_VAR)
    if raw is None or raw.strip() == "":
        return 1
    try:
        value = int(raw)
    except ValueError as exc:
        raise InvalidParameter(f"{_ENV_VAR} must be a positive integer, got {raw!r}") from exc
    if value < 1:
        raise InvalidParameter(f"{_ENV_VAR} must be >= 1, got {value}")
    return value
