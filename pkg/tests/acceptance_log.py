"""Collects one verdict per acceptance criterion for the end-of-run summary."""
from __future__ import annotations

RESULTS: dict[int, tuple[bool, str]] = {}


def record(criterion: int, passed: bool, detail: str) -> bool:
    RESULTS[criterion] = (bool(passed), detail)
    print(f"criterion {criterion}: {'PASS' if passed else 'FAIL'} ({detail})")
    return bool(passed)
