"""Finite unions of closed intervals on the extended real line."""

from __future__ import annotations

import math
from typing import Iterable

import numpy as np

INF = math.inf


class IntervalSet:
    """Sorted, disjoint union of closed intervals ``[lo, hi]``.

    Endpoints may be infinite. Intervals whose gap is at most ``merge_tol``
    are merged on construction. Instances are immutable.
    """

    __slots__ = ("_iv",)

    def __init__(self, intervals: Iterable = (), merge_tol: float = 0.0):
        items = []
        for lo, hi in intervals:
            lo, hi = float(lo), float(hi)
            if math.isnan(lo) or math.isnan(hi):
                raise ValueError("interval endpoints must not be NaN")
            if lo <= hi:
                items.append((lo, hi))
        items.sort()
        merged: list[list[float]] = []
        for lo, hi in items:
            if merged and lo <= merged[-1][1] + merge_tol:
                merged[-1][1] = max(merged[-1][1], hi)
            else:
                merged.append([lo, hi])
        self._iv = tuple((lo, hi) for lo, hi in merged)

    @classmethod
    def real_line(cls) -> IntervalSet:
        return cls([(-INF, INF)])

    @classmethod
    def empty(cls) -> IntervalSet:
        return cls()

    @property
    def intervals(self) -> tuple[tuple[float, float], ...]:
        return self._iv

    def __iter__(self):
        return iter(self._iv)

    def __len__(self):
        return len(self._iv)

    def __bool__(self):
        return bool(self._iv)

    def __eq__(self, other):
        if not isinstance(other, IntervalSet):
            return NotImplemented
        return self._iv == other._iv

    def __hash__(self):
        return hash(self._iv)

    def __repr__(self):
        body = " U ".join(f"[{lo:g}, {hi:g}]" for lo, hi in self._iv) or "{}"
        return f"IntervalSet({body})"

    def __contains__(self, x: float) -> bool:
        return any(lo <= x <= hi for lo, hi in self._iv)

    def contains_array(self, xs) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        out = np.zeros(xs.shape, dtype=bool)
        for lo, hi in self._iv:
            out |= (xs >= lo) & (xs <= hi)
        return out

    def measure(self) -> float:
        return sum(hi - lo for lo, hi in self._iv)

    def component(self, x: float) -> tuple[float, float] | None:
        """The interval containing ``x``, if any."""
        for lo, hi in self._iv:
            if lo <= x <= hi:
                return lo, hi
        return None

    def union(self, other: IntervalSet, merge_tol: float = 0.0) -> IntervalSet:
        return IntervalSet(self._iv + other._iv, merge_tol)

    __or__ = union

    def intersect(self, other: IntervalSet) -> IntervalSet:
        a, b = self._iv, other._iv
        i = j = 0
        out = []
        while i < len(a) and j < len(b):
            lo = max(a[i][0], b[j][0])
            hi = min(a[i][1], b[j][1])
            if lo <= hi:
                out.append((lo, hi))
            if a[i][1] < b[j][1]:
                i += 1
            else:
                j += 1
        return IntervalSet(out)

    __and__ = intersect

    def complement(self) -> IntervalSet:
        """Closure of the complement (boundary points are kept on both sides)."""
        out = []
        prev = -INF
        for lo, hi in self._iv:
            if lo > prev:
                out.append((prev, lo))
            prev = hi
        if prev < INF:
            out.append((prev, INF))
        return IntervalSet(out)

    def clip(self, lo: float, hi: float) -> IntervalSet:
        return self.intersect(IntervalSet([(lo, hi)]))

    def scale(self, c: float) -> IntervalSet:
        if c <= 0:
            raise ValueError("scale factor must be positive")
        return IntervalSet((lo * c, hi * c) for lo, hi in self._iv)

    def to_list(self) -> list[list]:
        """JSON-friendly form; infinities become ``"inf"`` / ``"-inf"``."""
        return [[_encode(lo), _encode(hi)] for lo, hi in self._iv]

    @classmethod
    def from_list(cls, items) -> IntervalSet:
        return cls((float(lo), float(hi)) for lo, hi in items)


def _encode(x: float):
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x
