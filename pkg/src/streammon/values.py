"""Runtime value helpers: the undefined sentinel and 64-bit integer clamping."""

from __future__ import annotations


class _Undefined:
    """Sentinel for stream accesses that have no value yet. Falsy on purpose so
    it can never be mistaken for a satisfied boolean condition."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "UNDEFINED"

    def __bool__(self) -> bool:
        return False


UNDEFINED = _Undefined()

INT64_MIN = -(2**63)
INT64_MAX = 2**63 - 1


def saturate_i64(value: int) -> tuple[int, bool]:
    """Clamp an integer into the signed 64-bit range. Returns (value, clamped)."""
    if value > INT64_MAX:
        return INT64_MAX, True
    if value < INT64_MIN:
        return INT64_MIN, True
    return value, False
