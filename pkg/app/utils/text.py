from __future__ import annotations

import math
from collections.abc import Iterable


def parse_n_list(raw: str) -> list[int]:
    if not raw.strip():
        return []
    seen: set[int] = set()
    result: list[int] = []
    for item in raw.split(","):
        item = item.strip()
        if not item:
            continue
        value = int(item)
        if value < 1:
            raise ValueError(f"N must be >= 1, got {value}")
        if value in seen:
            continue
        seen.add(value)
        result.append(value)
    return result


def n_range(n_min: int, n_max: int, step: int) -> list[int]:
    if n_min < 1 or n_max < n_min or step < 1:
        raise ValueError("expected 1 <= n_min <= n_max and step >= 1")
    return list(range(n_min, n_max + 1, step))


def format_float(value: float, digits: int = 17) -> str:
    if math.isnan(value):
        return "NaN"
    return f"{value:.{digits}g}"


def format_row(values: Iterable[float], digits: int = 17) -> list[str]:
    return [format_float(float(value), digits) for value in values]
