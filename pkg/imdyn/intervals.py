"""
Helpers on top of ``portion`` for finite unions of intervals with rational endpoints.
"""
from typing import Iterable, Iterator, List, Tuple

import portion as P

from imdyn.scalar import Scalar

Segment = Tuple[Scalar, Scalar]


def union(parts: Iterable[P.Interval]) -> P.Interval:
    return P.Interval(*parts)


def atoms(interval: P.Interval) -> Iterator[P.Interval]:
    """Iterate over the non-empty atomic intervals of a union."""
    for atom in interval:
        if not atom.empty:
            yield atom


def length(interval: P.Interval):
    """
    :param interval: A bounded union of intervals
    :return: The total Lebesgue measure of the union
    """
    total = 0
    for atom in atoms(interval):
        total += atom.upper - atom.lower
    return total


def drop_points(interval: P.Interval) -> P.Interval:
    """Remove the single-point components of a union."""
    return union(atom for atom in atoms(interval) if atom.lower != atom.upper)


def segments(interval: P.Interval) -> List[Segment]:
    """
    :param interval: A union of intervals
    :return: The closures of its components as ``(lo, hi)`` pairs, left to right
    """
    return [(atom.lower, atom.upper) for atom in atoms(interval)]


def overlap_interiors(a: Segment, b: Segment) -> bool:
    """True when the open interiors of two closed segments intersect."""
    return max(a[0], b[0]) < min(a[1], b[1])


def touch(a: Segment, b: Segment) -> bool:
    """True when two closed segments share exactly one boundary point."""
    return max(a[0], b[0]) == min(a[1], b[1])


def contains(outer: Segment, inner: Segment) -> bool:
    return outer[0] <= inner[0] and inner[1] <= outer[1]

