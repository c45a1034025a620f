"""Finite integer domains stored as sorted, disjoint closed intervals."""

from __future__ import annotations

from bisect import bisect_right
from typing import Iterable, Iterator

INT64_MIN = -(2**63)
INT64_MAX = 2**63 - 1


class FDDomain:
    """An immutable finite set of integers.

    Values are kept as a tuple of ``(lo, hi)`` pairs, sorted and separated by
    at least one missing value, so wide ranges with a few holes stay cheap.
    """

    __slots__ = ("ivs",)

    def __init__(self, ivs: tuple[tuple[int, int], ...] = ()):
        self.ivs = ivs

    @classmethod
    def range(cls, lo: int, hi: int) -> FDDomain:
        if lo > hi:
            return EMPTY
        return cls(((lo, hi),))

    @classmethod
    def single(cls, v: int) -> FDDomain:
        return cls(((v, v),))

    @classmethod
    def from_values(cls, values: Iterable[int]) -> FDDomain:
        vals = sorted(set(values))
        if not vals:
            return EMPTY
        ivs = []
        lo = hi = vals[0]
        for v in vals[1:]:
            if v == hi + 1:
                hi = v
            else:
                ivs.append((lo, hi))
                lo = hi = v
        ivs.append((lo, hi))
        return cls(tuple(ivs))

    @property
    def lo(self) -> int:
        return self.ivs[0][0]

    @property
    def hi(self) -> int:
        return self.ivs[-1][1]

    def is_empty(self) -> bool:
        return not self.ivs

    def is_singleton(self) -> bool:
        return len(self.ivs) == 1 and self.ivs[0][0] == self.ivs[0][1]

    @property
    def value(self) -> int | None:
        if len(self.ivs) == 1 and self.ivs[0][0] == self.ivs[0][1]:
            return self.ivs[0][0]
        return None

    def size(self) -> int:
        return sum(hi - lo + 1 for lo, hi in self.ivs)

    def __len__(self) -> int:
        return self.size()

    def __contains__(self, v: int) -> bool:
        ivs = self.ivs
        if not ivs or v < ivs[0][0] or v > ivs[-1][1]:
            return False
        if len(ivs) == 1:
            return True
        i = bisect_right(ivs, (v, INT64_MAX * 4)) - 1
        return i >= 0 and ivs[i][0] <= v <= ivs[i][1]

    def __iter__(self) -> Iterator[int]:
        for lo, hi in self.ivs:
            yield from range(lo, hi + 1)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, FDDomain) and self.ivs == other.ivs

    def __hash__(self) -> int:
        return hash(self.ivs)

    def __repr__(self) -> str:
        if not self.ivs:
            return "{}"
        parts = [str(lo) if lo == hi else f"{lo}..{hi}" for lo, hi in self.ivs]
        return "{" + ", ".join(parts) + "}"

    def restrict(self, lo: int, hi: int) -> FDDomain:
        """Intersect with the closed interval ``[lo, hi]``."""
        ivs = self.ivs
        if not ivs:
            return self
        if lo <= ivs[0][0] and hi >= ivs[-1][1]:
            return self
        out = []
        for a, b in ivs:
            if b < lo or a > hi:
                continue
            out.append((max(a, lo), min(b, hi)))
        return FDDomain(tuple(out))

    def remove(self, v: int) -> FDDomain:
        if v not in self:
            return self
        out = []
        for a, b in self.ivs:
            if a <= v <= b:
                if a < v:
                    out.append((a, v - 1))
                if v < b:
                    out.append((v + 1, b))
            else:
                out.append((a, b))
        return FDDomain(tuple(out))

    def intersect(self, other: FDDomain) -> FDDomain:
        if len(other.ivs) == 1:
            return self.restrict(*other.ivs[0])
        if len(self.ivs) == 1:
            return other.restrict(*self.ivs[0])
        out = []
        i = j = 0
        a, b = self.ivs, other.ivs
        while i < len(a) and j < len(b):
            lo = max(a[i][0], b[j][0])
            hi = min(a[i][1], b[j][1])
            if lo <= hi:
                out.append((lo, hi))
            if a[i][1] < b[j][1]:
                i += 1
            else:
                j += 1
        return FDDomain(tuple(out))

    def disjoint(self, other: FDDomain) -> bool:
        return self.intersect(other).is_empty()


EMPTY = FDDomain(())
BOOL = FDDomain.range(0, 1)
INT64 = FDDomain.range(INT64_MIN, INT64_MAX)
