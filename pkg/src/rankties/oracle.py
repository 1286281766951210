"""Exhaustive reference for tie-aware metrics.

Enumerates every distinct placement of the relevant labels inside each tie
group (items within a group are exchangeable given binary labels, so label
placements rather than full permutations suffice), evaluates the
deterministic metric on each completed ranking, and reports the exact mean,
minimum and maximum.  This is the ground truth the closed forms are checked
against; it shares only the deterministic per-ranking evaluator with them,
never the closed-form math.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .metrics import ALL_METRICS, MetricKind, metric_curves, metric_from_labels, resolve_metric
from .ties import TieProfile

__all__ = [
    "DEFAULT_BUDGET",
    "EnumerationBudget",
    "BudgetExceededError",
    "OracleResult",
    "configuration_count",
    "iter_placements",
    "enumerate_metric",
    "enumerate_all",
]

DEFAULT_BUDGET = 1_000_000

_CHUNK = 8192


class BudgetExceededError(ValueError):
    """The instance has more placements than the enumeration budget allows."""


@dataclass(frozen=True)
class EnumerationBudget:
    max_configurations: int = DEFAULT_BUDGET

    def __post_init__(self):
        if self.max_configurations < 1:
            raise ValueError("budget must allow at least one configuration")


@dataclass(frozen=True)
class OracleResult:
    mean: float
    minimum: float
    maximum: float
    count: int


def configuration_count(profile: TieProfile) -> int:
    """Number of distinct within-group relevant placements: prod C(|G_n|, r_n)."""
    return math.prod(
        math.comb(int(g), int(r))
        for g, r in zip(profile.sizes, profile.relevant_counts)
    )


def iter_placements(profile: TieProfile):
    """Yield one rank-ordered binary label array per distinct placement."""
    per_group = []
    for g, r in zip(profile.sizes, profile.relevant_counts):
        g, r = int(g), int(r)
        options = []
        for positions in itertools.combinations(range(g), r):
            lab = np.zeros(g, dtype=np.float64)
            lab[list(positions)] = 1.0
            options.append(lab)
        per_group.append(options)
    for combo in itertools.product(*per_group):
        yield np.concatenate(combo)


def _config_values(labels, ks, kk_idx, beyond, n_pos) -> np.ndarray:
    """(metric, cutoff) value matrix for one completed ranking."""
    curves = metric_curves(labels, n_pos)
    mat = np.stack([curves[m][kk_idx] for m in ALL_METRICS])
    for j in beyond:  # cutoffs past the list length keep k in denominators
        for i, m in enumerate(ALL_METRICS):
            mat[i, j] = metric_from_labels(labels, m, ks[j], n_pos)
    return mat


def enumerate_all(profile: TieProfile, ks,
                  budget: EnumerationBudget | None = None,
                  n_pos: int | None = None) -> dict:
    """Oracle statistics for every metric at every cutoff in `ks`.

    Returns {(MetricKind, k): OracleResult}.  Refuses instances whose
    placement count exceeds the budget.
    """
    budget = budget or EnumerationBudget()
    count = configuration_count(profile)
    if count > budget.max_configurations:
        raise BudgetExceededError(
            f"{count} placements exceed the budget of {budget.max_configurations}")
    ks = [int(k) for k in ks]
    if not ks or min(ks) < 1:
        raise ValueError("cutoffs must be >= 1")
    if n_pos is None:
        n_pos = profile.total_relevant
    if n_pos < 1:
        raise ValueError("oracle needs at least one relevant document")
    L = profile.total_items
    kk_idx = np.array([min(k, L) - 1 for k in ks])
    beyond = [j for j, k in enumerate(ks) if k > L]

    partial_sums = []
    mins = maxs = None
    chunk = []
    for labels in iter_placements(profile):
        chunk.append(_config_values(labels, ks, kk_idx, beyond, n_pos))
        if len(chunk) == _CHUNK:
            block = np.stack(chunk)
            partial_sums.append(block.sum(axis=0))
            bmin, bmax = block.min(axis=0), block.max(axis=0)
            mins = bmin if mins is None else np.minimum(mins, bmin)
            maxs = bmax if maxs is None else np.maximum(maxs, bmax)
            chunk = []
    if chunk:
        block = np.stack(chunk)
        partial_sums.append(block.sum(axis=0))
        bmin, bmax = block.min(axis=0), block.max(axis=0)
        mins = bmin if mins is None else np.minimum(mins, bmin)
        maxs = bmax if maxs is None else np.maximum(maxs, bmax)
    totals = np.stack(partial_sums).sum(axis=0)

    out = {}
    for i, metric in enumerate(ALL_METRICS):
        for j, k in enumerate(ks):
            out[(metric, k)] = OracleResult(
                mean=float(totals[i, j]) / count,
                minimum=float(mins[i, j]),
                maximum=float(maxs[i, j]),
                count=count,
            )
    return out


def enumerate_metric(profile: TieProfile, metric, k: int,
                     budget: EnumerationBudget | None = None,
                     n_pos: int | None = None) -> OracleResult:
    """Exact mean/min/max of one metric at one cutoff by full enumeration."""
    metric = resolve_metric(metric)
    return enumerate_all(profile, [k], budget=budget, n_pos=n_pos)[(metric, int(k))]
