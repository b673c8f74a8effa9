"""Mark-down schedules: counting, enumeration, and lookups.

A price trajectory assigns one price-ladder index to every sales period
0..k_max.  Three rules shape the feasible set: the start price holds in
every period before the success of the article is observable, prices
never go back up, and the final period always sells at the salvage
price.  A trajectory is encoded by the multiset of periods in which a
mark-down takes effect ("stars"); a mark-down postponed past the end of
the horizon is recorded at the sentinel period k_max.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations_with_replacement

from .errors import ValidationError

__all__ = [
    "PriceTrajectory",
    "ScenarioTrajectoryMap",
    "trajectory_count",
    "enumerate_trajectories",
    "price_at",
    "check_trajectory",
]


@dataclass(frozen=True)
class PriceTrajectory:
    """A non-increasing price schedule over periods 0..k_max.

    ``indices[k]`` is the index into the price ladder used in period k.
    ``stars`` records the mark-down periods of the underlying encoding
    (non-decreasing; the sentinel value k_max means "delayed past the
    end of the season").
    """

    indices: tuple[int, ...]
    stars: tuple[int, ...] = ()

    @property
    def k_max(self) -> int:
        return len(self.indices) - 1

    def price_at(self, k: int) -> int:
        if not 0 <= k <= self.k_max:
            raise ValidationError(f"period {k} outside 0..{self.k_max}")
        return self.indices[k]

    def markdown_flags(self) -> tuple[bool, ...]:
        """Per-period flag: did the price change relative to the previous period?"""
        return (False,) + tuple(
            self.indices[k] != self.indices[k - 1] for k in range(1, len(self.indices))
        )

    def markdown_count(self) -> int:
        return sum(self.markdown_flags())

    def text(self) -> str:
        """Comma-separated period prices, e.g. ``p0,p0,p1,p2``."""
        return ",".join(f"p{i}" for i in self.indices)

    def __str__(self) -> str:
        return self.text()


def _indices_from_stars(stars: tuple[int, ...], k_max: int, p_max: int) -> tuple[int, ...]:
    # p(k) = number of mark-downs that happened in period <= k; salvage pinned.
    idx = []
    for k in range(k_max):
        idx.append(sum(1 for s in stars if s <= k))
    idx.append(p_max)
    return tuple(idx)


def trajectory_count(k_max: int, p_max: int) -> int:
    """Number of feasible mark-down schedules for a horizon and price ladder.

    Counts the ways of inserting p_max - 1 mark-down symbols into the
    period sequence; the observation-period filter is deliberately not
    applied here (enumeration applies it).
    """
    if k_max < 2:
        raise ValidationError(f"k_max {k_max} < 2")
    if p_max < 1:
        raise ValidationError(f"p_max {p_max} < 1")
    return math.comb(k_max + p_max - 2, p_max - 1)


def enumerate_trajectories(k_max: int, p_max: int, k_observ: int) -> list[PriceTrajectory]:
    """All feasible trajectories, in lexicographic order of star positions.

    Mark-downs can only take effect from period k_observ on (earlier
    periods must keep the start price).  Distinct encodings map to
    distinct price schedules; the result is duplicate-free.
    """
    if k_max < 2:
        raise ValidationError(f"k_max {k_max} < 2")
    if p_max < 1:
        raise ValidationError(f"p_max {p_max} < 1")
    if not 1 <= k_observ < k_max:
        raise ValidationError(f"k_observ {k_observ} outside 1..{k_max - 1}")
    out: dict[tuple[int, ...], PriceTrajectory] = {}
    for stars in combinations_with_replacement(range(k_observ, k_max + 1), p_max - 1):
        t = PriceTrajectory(_indices_from_stars(stars, k_max, p_max), stars)
        # price vectors are searched deduplicated; encodings are bijective
        # with price vectors here, so this is a safety net, not a filter
        out.setdefault(t.indices, t)
    return list(out.values())


def price_at(t: PriceTrajectory, k: int) -> int:
    """Price index used in period k (total function on 0..k_max)."""
    return t.price_at(k)


def check_trajectory(t: PriceTrajectory, k_max: int, p_max: int, k_observ: int) -> None:
    """Raise ValidationError naming the first violated trajectory invariant."""
    if len(t.indices) != k_max + 1:
        raise ValidationError(
            f"trajectory has {len(t.indices)} periods, expected {k_max + 1}"
        )
    for k in range(k_observ):
        if t.indices[k] != 0:
            raise ValidationError(f"price index {t.indices[k]} before observation period {k_observ}")
    if t.indices[-1] != p_max:
        raise ValidationError(f"final price index {t.indices[-1]}, expected salvage {p_max}")
    for k in range(1, k_max + 1):
        if t.indices[k] < t.indices[k - 1]:
            raise ValidationError(f"price index increases are forbidden (period {k})")
        if t.indices[k] > p_max:
            raise ValidationError(f"price index {t.indices[k]} beyond ladder end {p_max}")


@dataclass(frozen=True)
class ScenarioTrajectoryMap:
    """One trajectory per success scenario; the search object of the exact solver."""

    trajectories: tuple[PriceTrajectory, ...]

    def __len__(self) -> int:
        return len(self.trajectories)

    def __getitem__(self, e: int) -> PriceTrajectory:
        return self.trajectories[e]

    def __iter__(self):
        return iter(self.trajectories)

    def key(self) -> tuple[tuple[int, ...], ...]:
        return tuple(t.indices for t in self.trajectories)
