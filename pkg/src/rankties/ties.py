"""Tie-group extraction from scored candidate lists.

Candidates are sorted by score descending; maximal runs of bit-identical
scores form one group (+0.0 and -0.0 compare equal and share a group).
The resulting profile carries, per group, the shared value, the group size
and the number of relevant members, plus the cumulative sizes every
closed-form metric consumes.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

__all__ = [
    "ScoredCandidate",
    "TieGroup",
    "TieProfile",
    "TieStats",
    "group_ties",
    "truncation_counts",
    "tie_stats",
]


@dataclass(frozen=True)
class ScoredCandidate:
    """One candidate of a query: identifier, score, binary relevance, and
    its position in the ingested candidate order."""

    doc_id: str
    score: float
    relevant: bool
    original_index: int


@dataclass(frozen=True)
class TieGroup:
    value: float
    size: int
    relevant_count: int

    @property
    def relevance_probability(self) -> float:
        return self.relevant_count / self.size


class TieProfile:
    """Ordered tie groups (descending by score) of one ranked list.

    Backed by parallel arrays so million-candidate lists stay cheap:
    `values[n]`, `sizes[n]` and `relevant_counts[n]` describe group n,
    `cumulative[n]` is the number of items in groups 0..n-1
    (`cumulative[0] == 0`, `cumulative[num_groups] == total_items`).
    """

    def __init__(self, values, sizes, relevant_counts):
        self.values = np.asarray(values, dtype=np.float64)
        self.sizes = np.asarray(sizes, dtype=np.int64)
        self.relevant_counts = np.asarray(relevant_counts, dtype=np.int64)
        if len(self.values) == 0:
            raise ValueError("a tie profile needs at least one group")
        if not (len(self.values) == len(self.sizes) == len(self.relevant_counts)):
            raise ValueError("group arrays must have equal length")
        if np.isnan(self.values).any():
            raise ValueError("scores must not be NaN")
        if (self.sizes < 1).any():
            raise ValueError("group sizes must be >= 1")
        if ((self.relevant_counts < 0) | (self.relevant_counts > self.sizes)).any():
            raise ValueError("relevant counts must lie in [0, size]")
        if not (self.values[:-1] > self.values[1:]).all():
            raise ValueError("group values must be strictly descending")
        self.cumulative = np.concatenate(([0], np.cumsum(self.sizes)))

    @classmethod
    def from_sorted_arrays(cls, scores, relevant, validate: bool = True) -> "TieProfile":
        """Build a profile from score/relevance arrays already in rank order."""
        scores = np.asarray(scores, dtype=np.float64)
        relevant = np.asarray(relevant).astype(np.int64)
        if scores.ndim != 1 or len(scores) == 0:
            raise ValueError("need a nonempty 1-d score array")
        if len(relevant) != len(scores):
            raise ValueError("scores and relevance labels must align")
        if np.isnan(scores).any():
            raise ValueError("scores must not be NaN")
        if validate and not (scores[:-1] >= scores[1:]).all():
            raise ValueError("scores are not sorted descending")
        # Run boundaries; ±0.0 compare equal, so they land in one group.
        starts = np.concatenate(([0], np.nonzero(scores[1:] != scores[:-1])[0] + 1))
        sizes = np.diff(np.concatenate((starts, [len(scores)])))
        rel_counts = np.add.reduceat(relevant, starts)
        return cls(scores[starts], sizes, rel_counts)

    @classmethod
    def from_scores(cls, scores, relevant) -> "TieProfile":
        """Build a profile from arrays in arbitrary (ingestion) order."""
        scores = np.asarray(scores, dtype=np.float64)
        relevant = np.asarray(relevant).astype(np.int64)
        if np.isnan(scores).any():
            raise ValueError("scores must not be NaN")
        order = np.argsort(-scores, kind="stable")
        return cls.from_sorted_arrays(scores[order], relevant[order], validate=False)

    @property
    def num_groups(self) -> int:
        return len(self.values)

    @property
    def total_items(self) -> int:
        return int(self.cumulative[-1])

    @cached_property
    def total_relevant(self) -> int:
        return int(self.relevant_counts.sum())

    @cached_property
    def relevance_probabilities(self) -> np.ndarray:
        """Per-group p_n = relevant_count / size."""
        return self.relevant_counts / self.sizes

    @cached_property
    def relevant_before(self) -> np.ndarray:
        """Per-group count of relevant items in strictly earlier groups."""
        return np.concatenate(([0], np.cumsum(self.relevant_counts)[:-1]))

    @property
    def groups(self) -> list[TieGroup]:
        return [
            TieGroup(float(v), int(s), int(r))
            for v, s, r in zip(self.values, self.sizes, self.relevant_counts)
        ]

    def straddling_group(self, k: int) -> int:
        """Index of the group containing rank min(k, L)."""
        if k < 1:
            raise ValueError("cutoff must be >= 1")
        kk = min(k, self.total_items)
        return int(np.searchsorted(self.cumulative[1:], kk, side="left"))

    def __repr__(self) -> str:
        return (f"TieProfile(num_groups={self.num_groups}, "
                f"total_items={self.total_items}, "
                f"total_relevant={self.total_relevant})")


def group_ties(candidates: Sequence[ScoredCandidate]) -> TieProfile:
    """Sort candidates by score descending and collapse bit-identical runs.

    The grouping is invariant to the input order; ties are broken on
    original_index only to make the sort deterministic.
    """
    if not candidates:
        raise ValueError("candidate list is empty")
    ranked = sorted(candidates, key=lambda c: (-c.score, c.original_index))
    scores = np.array([c.score for c in ranked], dtype=np.float64)
    relevant = np.array([c.relevant for c in ranked], dtype=np.int64)
    return TieProfile.from_sorted_arrays(scores, relevant, validate=False)


def truncation_counts(profile: TieProfile, k: int) -> np.ndarray:
    """Per-group number of items that make the top-k: max(0, min(size, k - c_prev))."""
    if k < 1:
        raise ValueError("cutoff must be >= 1")
    return np.clip(k - profile.cumulative[:-1], 0, profile.sizes)


@dataclass(frozen=True)
class TieStats:
    num_groups: int
    largest_group: int
    tied_fraction: float
    straddling_tie: bool


def tie_stats(profile: TieProfile, k: int) -> TieStats:
    """Summary of how tied a ranked list is at cutoff k.

    `straddling_tie` is set when the group containing rank min(k, L) has
    size >= 2, i.e. the cutoff falls into unresolved order.
    """
    sizes = profile.sizes
    tied_items = int(sizes[sizes >= 2].sum())
    idx = profile.straddling_group(k)
    return TieStats(
        num_groups=profile.num_groups,
        largest_group=int(sizes.max()),
        tied_fraction=tied_items / profile.total_items,
        straddling_tie=bool(sizes[idx] >= 2),
    )
