"""Small shared helpers."""

from __future__ import annotations

import os


def fmt17(x: float) -> str:
    """Full-precision decimal float (17 significant digits, round-trips)."""
    return format(float(x), ".17g")


def max_threads() -> int:
    """Parallelism cap: EFFDIM_THREADS if set and positive, else cpu count."""
    raw = os.environ.get("EFFDIM_THREADS", "")
    try:
        n = int(raw)
    except ValueError:
        n = 0
    if n <= 0:
        n = os.cpu_count() or 1
    return n
