"""Pane-based incremental sliding-window aggregation.

The time axis is cut into panes of width z against a global zero origin.
Pane i covers the half-open span (i*z, (i+1)*z], mirroring the window
convention (ts - r, ts]: a value produced exactly at a pane boundary belongs
to the pane that *ends* there, so at pane-aligned evaluation times the
retained panes tile the window exactly and consecutive windows of width
equal to the evaluation period never double-count a boundary value.

Registering a value folds it into its pane's summary only; evaluating a
window combines the summaries of all retained panes and lowers the combined
summary to a value. At non-aligned evaluation times the oldest, partially
covered pane is included whole, an approximation of at most z.

Retained panes never exceed ceil(r / z) + 1: registration and evaluation both
evict panes whose entire span lies at or before ts - r.
"""

from __future__ import annotations

import math
import statistics
from fractions import Fraction
from typing import Optional

from .ast import AggFn, ValueType
from .diagnostics import Diagnostic, OutOfOrderError
from .values import UNDEFINED


def _ratio(ts) -> tuple[int, int]:
    if isinstance(ts, float):
        return ts.as_integer_ratio()
    if isinstance(ts, int):
        return ts, 1
    return ts.numerator, ts.denominator


def pane_index(ts, z: Fraction) -> int:
    """ceil(ts / z) - 1, exact: the pane whose span (i*z, (i+1)*z] holds ts.
    Float timestamps are converted losslessly; no Fraction is allocated."""
    n, d = _ratio(ts)
    return -((-n * z.denominator) // (d * z.numerator)) - 1


class Aggregator:
    """Combinable per-pane summary for one aggregation function.

    merge(a, b) requires that a summarizes a time range entirely before b's;
    adjacent-range merging is associative for all of these summaries.
    """

    #: value of an empty window, or None when an empty window is undefined
    empty_value: Optional[object] = None

    def new(self):
        raise NotImplementedError

    def add(self, summary, ts: float, value):
        raise NotImplementedError

    def merge(self, left, right):
        raise NotImplementedError

    def lower(self, summary):
        raise NotImplementedError

    def slots(self, summary) -> int:
        return 1


class _Count(Aggregator):
    empty_value = 0

    def new(self):
        return 0

    def add(self, summary, ts, value):
        return summary + 1

    def merge(self, left, right):
        return left + right

    def lower(self, summary):
        return summary


class _Sum(Aggregator):
    def __init__(self, out_ty: ValueType):
        self.empty_value = 0 if out_ty is ValueType.INT else 0.0

    def new(self):
        return self.empty_value

    def add(self, summary, ts, value):
        return summary + value

    def merge(self, left, right):
        return left + right

    def lower(self, summary):
        return summary


class _Avg(Aggregator):
    def __init__(self, out_ty: ValueType):
        self.int_result = out_ty is ValueType.INT

    def new(self):
        return (0, 0)

    def add(self, summary, ts, value):
        return (summary[0] + value, summary[1] + 1)

    def merge(self, left, right):
        return (left[0] + right[0], left[1] + right[1])

    def lower(self, summary):
        total, n = summary
        if self.int_result:
            return total // n
        return total / n


class _Extremum(Aggregator):
    def __init__(self, take_max: bool):
        self.pick = max if take_max else min

    def new(self):
        return None

    def add(self, summary, ts, value):
        return value if summary is None else self.pick(summary, value)

    def merge(self, left, right):
        if left is None:
            return right
        if right is None:
            return left
        return self.pick(left, right)

    def lower(self, summary):
        return summary


class _Integral(Aggregator):
    """Trapezoidal integral over the piecewise-linear interpolation of the
    samples; no extrapolation beyond the first and last sample in range.
    Summary: (t_first, v_first, t_last, v_last, area)."""

    def new(self):
        return None

    def add(self, summary, ts, value):
        ts = float(ts)
        value = float(value)
        if summary is None:
            return (ts, value, ts, value, 0.0)
        t0, v0, t1, v1, area = summary
        area += (ts - t1) * (v1 + value) / 2.0
        return (t0, v0, ts, value, area)

    def merge(self, left, right):
        if left is None:
            return right
        if right is None:
            return left
        t0, v0, t1, v1, la = left
        u0, w0, u1, w1, ra = right
        bridging = (u0 - t1) * (v1 + w0) / 2.0
        return (t0, v0, u1, w1, la + bridging + ra)

    def lower(self, summary):
        return summary[4]


class _Median(Aggregator):
    """Not pane-combinable: each pane keeps its raw values."""

    def __init__(self, out_ty: ValueType):
        self.int_result = out_ty is ValueType.INT

    def new(self):
        return []

    def add(self, summary, ts, value):
        summary.append(value)
        return summary

    def merge(self, left, right):
        return left + right

    def lower(self, summary):
        if self.int_result:
            return statistics.median_low(sorted(summary))
        return statistics.median(summary)

    def slots(self, summary) -> int:
        return len(summary)


def make_aggregator(agg: AggFn, target_ty: ValueType) -> Aggregator:
    match agg:
        case AggFn.COUNT:
            return _Count()
        case AggFn.SUM:
            return _Sum(target_ty)
        case AggFn.AVG:
            return _Avg(target_ty)
        case AggFn.MIN:
            return _Extremum(take_max=False)
        case AggFn.MAX:
            return _Extremum(take_max=True)
        case AggFn.INTEGRAL:
            return _Integral()
        case AggFn.MEDIAN:
            return _Median(target_ty)
    raise ValueError(f"unknown aggregation {agg!r}")


class PanedWindow:
    """Sliding-window state for one (window expression, target instance)."""

    __slots__ = ("duration", "pane_width", "agg", "panes", "last_ts", "_horizon")

    def __init__(self, duration: Fraction, pane_width: Fraction, agg: Aggregator):
        self.duration = duration
        self.pane_width = pane_width
        self.agg = agg
        self.panes: dict[int, object] = {}  # index -> summary, ascending
        self.last_ts = None
        # for evict: (ts - r) / z as integer ratio pieces, precomputed
        rn, rd = duration.numerator, duration.denominator
        zn, zd = pane_width.numerator, pane_width.denominator
        self._horizon = (rn, rd, zn, zd)

    def register(self, value, ts) -> None:
        """Fold a value into its pane; no window-level aggregation happens.
        Eviction runs only when a new pane opens: folding into an existing
        pane cannot raise the pane count."""
        if self.last_ts is not None and ts < self.last_ts:
            raise OutOfOrderError(
                [Diagnostic(f"window registration at {ts} after {self.last_ts}")]
            )
        self.last_ts = ts
        idx = pane_index(ts, self.pane_width)
        summary = self.panes.get(idx)
        if summary is None:
            self.panes[idx] = self.agg.add(self.agg.new(), ts, value)
            self.evict(ts)
        else:
            self.panes[idx] = self.agg.add(summary, ts, value)

    def evict(self, ts) -> None:
        """Drop every pane whose entire span lies at or before ts - r:
        (i+1)*z <= ts - r, i.e. i + 1 <= floor((ts - r) / z), exactly."""
        n, d = _ratio(ts)
        rn, rd, zn, zd = self._horizon
        kill = ((n * rd - rn * d) * zd) // (d * rd * zn)
        panes = self.panes
        while panes:
            first = next(iter(panes))  # insertion order = ascending index
            if first + 1 <= kill:
                del panes[first]
            else:
                break

    def evaluate(self, ts):
        """Combine the panes overlapping (ts - r, ts] and lower the result.

        Empty windows yield the aggregation's neutral element when it has one
        (count, sum) and UNDEFINED otherwise.
        """
        if self.last_ts is not None and ts < self.last_ts:
            raise OutOfOrderError(
                [Diagnostic(f"window evaluated at {ts} before {self.last_ts}")]
            )
        self.evict(ts)
        if not self.panes:
            empty = self.agg.empty_value
            return UNDEFINED if empty is None else empty
        combined = None
        for idx in self.panes:  # ascending
            summary = self.panes[idx]
            combined = summary if combined is None else self.agg.merge(combined, summary)
        return self.agg.lower(combined)

    @property
    def pane_count(self) -> int:
        return len(self.panes)

    @property
    def slot_count(self) -> int:
        return sum(self.agg.slots(s) for s in self.panes.values())

    def max_panes(self) -> int:
        return math.ceil(self.duration / self.pane_width) + 1
