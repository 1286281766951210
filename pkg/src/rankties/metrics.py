"""Ranking metrics over tied lists: the tie-oblivious value, closed-form
expectations over all within-group orderings, best/worst-case extrema, and
the (oblivious, expected, min, max, range, bias) report tuple.

All metrics use binary gains.  Expectations are exact closed forms over the
tie profile; they cost one pass over the groups plus O(k) arithmetic, never
an enumeration.  The per-rank accumulation order of the closed forms matches
the deterministic evaluator's prefix sums, so on an all-singleton profile
the expectation reproduces the deterministic value bit-for-bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .ties import ScoredCandidate, TieProfile, group_ties, truncation_counts

__all__ = [
    "MetricKind",
    "ALL_METRICS",
    "resolve_metric",
    "MetricReport",
    "AggregateMetric",
    "AggregateReport",
    "discount_weights",
    "metric_curves",
    "metric_from_labels",
    "oblivious_metric",
    "expected_metric",
    "expected_count_metric",
    "expected_ndcg",
    "expected_rr",
    "expected_ap",
    "extrema",
    "report",
    "query_reports",
    "evaluate_ranked_query",
    "aggregate",
]


class MetricKind(str, Enum):
    HITS = "hits"
    PRECISION = "precision"
    RECALL = "recall"
    F1 = "f1"
    NDCG = "ndcg"
    RR = "rr"
    AP = "ap"

    def __str__(self) -> str:
        return self.value


ALL_METRICS = tuple(MetricKind)

_ALIASES = {"mrr": MetricKind.RR, "map": MetricKind.AP, "p": MetricKind.PRECISION,
            "r": MetricKind.RECALL}

_COUNT_METRICS = frozenset(
    {MetricKind.HITS, MetricKind.PRECISION, MetricKind.RECALL, MetricKind.F1})


def resolve_metric(name) -> MetricKind:
    if isinstance(name, MetricKind):
        return name
    key = str(name).strip().lower()
    if key in _ALIASES:
        return _ALIASES[key]
    try:
        return MetricKind(key)
    except ValueError:
        raise ValueError(f"unknown metric {name!r}") from None


def discount_weights(n: int) -> np.ndarray:
    """Gain discounts w_r = 1 / log2(r + 1) for ranks 1..n."""
    ranks = np.arange(1, n + 1, dtype=np.float64)
    return 1.0 / np.log2(ranks + 1.0)


def metric_curves(labels, n_pos: int) -> dict:
    """Deterministic metric@k for every k in 1..len(labels).

    `labels` are binary relevance labels in rank order; `n_pos` is the
    relevant count of the full list (denominator for recall, F1, AP and
    the ideal-DCG depth), which may exceed the labels' own total when
    relevant documents are missing from the candidate list.
    """
    lab = np.asarray(labels, dtype=np.float64)
    L = len(lab)
    if L == 0:
        raise ValueError("need at least one label")
    if n_pos < 1:
        raise ValueError("n_pos must be >= 1")
    ranks = np.arange(1, L + 1, dtype=np.float64)
    hits = np.cumsum(lab)
    w = discount_weights(L)
    dcg = np.cumsum(lab * w)
    ideal_depth = np.minimum(n_pos, np.arange(1, L + 1))
    wcum = np.cumsum(discount_weights(int(ideal_depth[-1])))
    ndcg = dcg / wcum[ideal_depth - 1]
    rr = np.zeros(L)
    first = np.nonzero(lab)[0]
    if first.size:
        rr[first[0]:] = 1.0 / (first[0] + 1)
    ap = np.cumsum(lab * (hits / ranks)) / n_pos
    return {
        MetricKind.HITS: hits,
        MetricKind.PRECISION: hits / ranks,
        MetricKind.RECALL: hits / n_pos,
        MetricKind.F1: 2.0 * hits / (ranks + n_pos),
        MetricKind.NDCG: ndcg,
        MetricKind.RR: rr,
        MetricKind.AP: ap,
    }


def metric_from_labels(labels, metric: MetricKind, k: int, n_pos: int) -> float:
    """Deterministic metric at cutoff k from rank-ordered binary labels.

    `labels` may be truncated to the first min(k, L) ranks provided `n_pos`
    still reflects the full list.  A cutoff beyond the list length keeps k
    in the denominators that use it (precision, F1, ideal-DCG depth).
    """
    if k < 1:
        raise ValueError("cutoff must be >= 1")
    lab = np.asarray(labels, dtype=np.float64)
    kk = min(k, len(lab))
    curves = metric_curves(lab[:kk], n_pos)
    if kk == k:
        return float(curves[metric][k - 1])
    hits = float(curves[MetricKind.HITS][kk - 1])
    if metric is MetricKind.PRECISION:
        return hits / k
    if metric is MetricKind.F1:
        return 2.0 * hits / (k + n_pos)
    if metric is MetricKind.NDCG:
        dcg = float(np.cumsum(lab[:kk] * discount_weights(kk))[-1])
        idcg = float(np.cumsum(discount_weights(min(n_pos, k)))[-1])
        return dcg / idcg
    return float(curves[metric][kk - 1])


def _ranked_labels(candidates: Sequence[ScoredCandidate]) -> np.ndarray:
    ranked = sorted(candidates, key=lambda c: (-c.score, c.original_index))
    return np.array([c.relevant for c in ranked], dtype=np.int64)


def oblivious_metric(candidates: Sequence[ScoredCandidate], metric, k: int,
                     n_pos: int | None = None) -> float:
    """Metric under the fixed tie-breaking the mainstream trunc-and-score
    evaluation applies: score descending, ingestion index ascending."""
    metric = resolve_metric(metric)
    if not candidates:
        raise ValueError("candidate list is empty")
    labels = _ranked_labels(candidates)
    if n_pos is None:
        n_pos = int(labels.sum())
    if n_pos < 1:
        raise ValueError("query has no relevant candidates")
    return metric_from_labels(labels, metric, k, n_pos)


def _effective_npos(profile: TieProfile, n_pos) -> int:
    if n_pos is None:
        return profile.total_relevant
    n_pos = int(n_pos)
    if n_pos < profile.total_relevant:
        raise ValueError("n_pos cannot be smaller than the in-list relevant count")
    return n_pos


def _included_groups(profile: TieProfile, k: int) -> int:
    """Number of leading groups with t_n > 0 (those with c_{n-1} < k)."""
    return int(np.searchsorted(profile.cumulative[:-1], k, side="left"))


def expected_count_metric(profile: TieProfile, k: int, kind,
                          n_pos: int | None = None) -> float:
    """Closed-form expectation of hits / precision / recall / F1 at k.

    Only groups intersecting the top-k contribute, and there are at most
    min(k, N) of them, so the sum of r_n * t_n / |G_n| is accumulated as an
    exact rational and rounded once.  Cutoffs touching very many groups fall
    back to a compensated float sum.
    """
    kind = resolve_metric(kind)
    if kind not in _COUNT_METRICS:
        raise ValueError(f"{kind} is not a count-based metric")
    if k < 1:
        raise ValueError("cutoff must be >= 1")
    head = _included_groups(profile, k)
    if head <= 4096:
        s = Fraction(0)
        for i in range(head):
            g = int(profile.sizes[i])
            t = min(g, k - int(profile.cumulative[i]))
            s += Fraction(int(profile.relevant_counts[i]) * t, g)
    else:
        t = truncation_counts(profile, k).astype(np.float64)
        s = float(np.dot(profile.relevance_probabilities, t))
    if kind is MetricKind.HITS:
        return float(s)
    if kind is MetricKind.PRECISION:
        return float(s / k)
    n = _effective_npos(profile, n_pos)
    if n < 1:
        raise ValueError("recall/F1 need at least one relevant document")
    if kind is MetricKind.RECALL:
        return float(s / n)
    return float(2 * s / (k + n))


def _per_rank_probabilities(profile: TieProfile, k: int) -> np.ndarray:
    head = _included_groups(profile, k)
    t = np.clip(k - profile.cumulative[:head], 0, profile.sizes[:head])
    return np.repeat(profile.relevance_probabilities[:head], t)


def expected_ndcg(profile: TieProfile, k: int, n_pos: int | None = None) -> float:
    """Closed-form E[nDCG@k]: per included rank, the group's relevance
    probability earns that rank's discount."""
    if k < 1:
        raise ValueError("cutoff must be >= 1")
    n = _effective_npos(profile, n_pos)
    if n < 1:
        raise ValueError("nDCG needs at least one relevant document")
    kk = min(k, profile.total_items)
    p_rank = _per_rank_probabilities(profile, k)
    e_dcg = float(np.cumsum(p_rank * discount_weights(kk))[-1])
    ideal = min(n, k)
    idcg = float(np.cumsum(discount_weights(ideal))[-1])
    return e_dcg / idcg


def expected_rr(profile: TieProfile, k: int) -> float:
    """Closed-form E[RR@k]; only the first group holding a relevant item
    contributes."""
    if k < 1:
        raise ValueError("cutoff must be >= 1")
    nz = np.nonzero(profile.relevant_counts)[0]
    if nz.size == 0:
        return 0.0
    i = int(nz[0])
    c = int(profile.cumulative[i])
    g = int(profile.sizes[i])
    r = int(profile.relevant_counts[i])
    if k <= c:
        return 0.0
    u = min(g - 1, k - c - 1)
    total = 0.0
    prob_all_misses = 1.0  # P(first t in-group slots all non-relevant)
    for t in range(u + 1):
        total += (1.0 / (c + t + 1)) * prob_all_misses * (r / (g - t))
        prob_all_misses *= (g - r - t) / (g - t)
    return total


def expected_ap(profile: TieProfile, k: int, n_pos: int | None = None) -> float:
    """Closed-form E[AP@k].

    Within group n the expected number of relevant items among the first t
    in-group slots grows linearly with slope (r_n - 1)/(|G_n| - 1); for
    singleton groups t is pinned to 0 and the slope term contributes nothing.
    """
    if k < 1:
        raise ValueError("cutoff must be >= 1")
    n = _effective_npos(profile, n_pos)
    if n < 1:
        raise ValueError("AP needs at least one relevant document")
    head = _included_groups(profile, k)
    total = 0.0
    for i in range(head):
        r = int(profile.relevant_counts[i])
        if r == 0:
            continue
        g = int(profile.sizes[i])
        c = int(profile.cumulative[i])
        t_n = min(g, k - c)
        p = r / g
        slope = (r - 1) / (g - 1) if g > 1 else 0.0
        before = int(profile.relevant_before[i])
        for t in range(t_n):
            expected_hits = before + 1 + t * slope
            total += p * (expected_hits / (c + t + 1))
    return total / n


_EXPECTED = {
    MetricKind.NDCG: expected_ndcg,
    MetricKind.AP: expected_ap,
}


def expected_metric(profile: TieProfile, metric, k: int,
                    n_pos: int | None = None) -> float:
    """Dispatch to the closed-form expectation for `metric`."""
    metric = resolve_metric(metric)
    if metric in _COUNT_METRICS:
        return expected_count_metric(profile, k, metric, n_pos)
    if metric is MetricKind.RR:
        return expected_rr(profile, k)
    return _EXPECTED[metric](profile, k, n_pos)


def _boundary_labels(profile: TieProfile, k: int, relevant_first: bool) -> np.ndarray:
    """Top-min(k, L) labels with every group reordered relevant-first
    (best case) or relevant-last (worst case)."""
    kk = min(k, profile.total_items)
    out = np.zeros(kk, dtype=np.int64)
    pos = 0
    for g, r in zip(profile.sizes, profile.relevant_counts):
        take = min(int(g), kk - pos)
        ones = min(int(r), take) if relevant_first else max(0, take - (int(g) - int(r)))
        if relevant_first:
            out[pos:pos + ones] = 1
        else:
            out[pos + take - ones:pos + take] = 1
        pos += take
        if pos == kk:
            break
    return out


def extrema(profile: TieProfile, metric, k: int,
            n_pos: int | None = None) -> tuple[float, float]:
    """(M_min, M_max): the metric under relevant-last and relevant-first
    reordering inside every tie group."""
    metric = resolve_metric(metric)
    n = _effective_npos(profile, n_pos)
    if n < 1:
        raise ValueError("extrema need at least one relevant document")
    worst = metric_from_labels(_boundary_labels(profile, k, False), metric, k, n)
    best = metric_from_labels(_boundary_labels(profile, k, True), metric, k, n)
    return worst, best


@dataclass(frozen=True)
class MetricReport:
    """All reported views of one metric at one cutoff for one query."""

    metric: MetricKind
    k: int
    oblivious: float
    expected: float
    minimum: float
    maximum: float

    @property
    def range(self) -> float:
        return self.maximum - self.minimum

    @property
    def bias(self) -> float:
        return self.oblivious - self.expected

    def as_dict(self) -> dict:
        return {
            "metric": self.metric.value,
            "k": self.k,
            "oblivious": self.oblivious,
            "expected": self.expected,
            "minimum": self.minimum,
            "maximum": self.maximum,
            "range": self.range,
            "bias": self.bias,
        }


def evaluate_ranked_query(scores, relevant, metrics, ks,
                          n_pos: int | None = None,
                          presorted: bool = False) -> list[MetricReport]:
    """Reports for each (metric, k) over one query given parallel arrays.

    With `presorted` the arrays are taken as already ranked (descending
    scores); otherwise a stable descending sort is applied, so equal scores
    keep their array order as the oblivious tie-break.
    """
    scores = np.asarray(scores, dtype=np.float64)
    relevant = np.asarray(relevant).astype(np.int64)
    if not presorted:
        order = np.argsort(-scores, kind="stable")
        scores, relevant = scores[order], relevant[order]
    profile = TieProfile.from_sorted_arrays(scores, relevant, validate=presorted)
    n = _effective_npos(profile, n_pos)
    if n < 1:
        raise ValueError("query has no relevant documents")
    metrics = [resolve_metric(m) for m in metrics]
    kmax = max(ks)
    head_labels = relevant[:min(kmax, len(relevant))]
    out = []
    for metric in metrics:
        for k in ks:
            obl = metric_from_labels(head_labels, metric, k, n)
            exp = expected_metric(profile, metric, k, n)
            lo, hi = extrema(profile, metric, k, n)
            out.append(MetricReport(metric, int(k), obl, exp, lo, hi))
    return out


def query_reports(candidates: Sequence[ScoredCandidate], metrics, ks,
                  n_pos: int | None = None) -> list[MetricReport]:
    """Reports for one query given candidate records in any order."""
    if not candidates:
        raise ValueError("candidate list is empty")
    in_order = sorted(candidates, key=lambda c: c.original_index)
    scores = np.array([c.score for c in in_order], dtype=np.float64)
    relevant = np.array([c.relevant for c in in_order], dtype=np.int64)
    return evaluate_ranked_query(scores, relevant, metrics, ks, n_pos=n_pos)


def report(candidates: Sequence[ScoredCandidate], metric, k: int,
           n_pos: int | None = None) -> MetricReport:
    """The full report tuple for one metric at one cutoff."""
    return query_reports(candidates, [metric], [k], n_pos=n_pos)[0]


@dataclass(frozen=True)
class AggregateMetric:
    """Per-(metric, k) means over queries.

    `mean_range` averages per-query ranges; `range_of_means` subtracts the
    mean minimum from the mean maximum.  The two coincide up to float
    associativity (the mean is linear) and both are reported.
    """

    metric: MetricKind
    k: int
    n_queries: int
    oblivious: float
    expected: float
    minimum: float
    maximum: float
    mean_range: float
    range_of_means: float
    bias: float

    def as_dict(self) -> dict:
        return {
            "metric": self.metric.value,
            "k": self.k,
            "n_queries": self.n_queries,
            "oblivious": self.oblivious,
            "expected": self.expected,
            "minimum": self.minimum,
            "maximum": self.maximum,
            "mean_range": self.mean_range,
            "range_of_means": self.range_of_means,
            "bias": self.bias,
        }


@dataclass(frozen=True)
class AggregateReport:
    aggregates: tuple[AggregateMetric, ...]
    per_query: dict


def aggregate(per_query: Mapping[str, Sequence[MetricReport]]) -> AggregateReport:
    """Mean every report field over queries, in canonical query order.

    All queries must carry the same (metric, k) grid.  Sums use `math.fsum`
    over sorted query ids, so the result is independent of input ordering
    and of any parallel evaluation schedule.
    """
    if not per_query:
        raise ValueError("no queries to aggregate")
    qids = sorted(per_query)
    grid = [(r.metric, r.k) for r in per_query[qids[0]]]
    for qid in qids:
        if [(r.metric, r.k) for r in per_query[qid]] != grid:
            raise ValueError(f"query {qid!r} reports a different (metric, k) grid")
    n = len(qids)
    aggregates = []
    for idx, (metric, k) in enumerate(grid):
        rows = [per_query[qid][idx] for qid in qids]

        def mean(field):
            return math.fsum(getattr(r, field) for r in rows) / n

        mean_min, mean_max = mean("minimum"), mean("maximum")
        aggregates.append(AggregateMetric(
            metric=metric, k=k, n_queries=n,
            oblivious=mean("oblivious"), expected=mean("expected"),
            minimum=mean_min, maximum=mean_max,
            mean_range=mean("range"),
            range_of_means=mean_max - mean_min,
            bias=mean("bias"),
        ))
    ordered = {qid: tuple(per_query[qid]) for qid in qids}
    return AggregateReport(aggregates=tuple(aggregates), per_query=ordered)
