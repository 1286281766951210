"""Tie-aware retrieval evaluation under emulated low-precision scoring.

Low-precision scoring collapses distinct relevance scores onto a coarse
float grid, creating spurious ties whose arbitrary resolution makes
truncation-based ranking metrics unstable.  This package emulates the
quantized scoring functions, detects the resulting tie groups, and reports
tie-oblivious values alongside exact expectations, extrema, range and bias
for the standard metrics at arbitrary cutoffs.
"""

from .floatsim import BF16, FP16, FP32, FORMATS, PrecisionFormat, quantize, ulp
from .metrics import (ALL_METRICS, AggregateReport, MetricKind, MetricReport,
                      aggregate, expected_metric, extrema, oblivious_metric, report)
from .oracle import EnumerationBudget, enumerate_metric
from .scoring import ScoringRegime, score, score_dot, score_hps, score_sigmoid, score_softmax
from .ties import ScoredCandidate, TieGroup, TieProfile, group_ties, tie_stats, truncation_counts

__version__ = "0.1.0"

__all__ = [
    "BF16", "FP16", "FP32", "FORMATS", "PrecisionFormat", "quantize", "ulp",
    "ALL_METRICS", "AggregateReport", "MetricKind", "MetricReport",
    "aggregate", "expected_metric", "extrema", "oblivious_metric", "report",
    "EnumerationBudget", "enumerate_metric",
    "ScoringRegime", "score", "score_dot", "score_hps", "score_sigmoid", "score_softmax",
    "ScoredCandidate", "TieGroup", "TieProfile", "group_ties", "tie_stats",
    "truncation_counts",
    "__version__",
]
