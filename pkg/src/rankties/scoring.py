"""Relevance scoring functions evaluated under a precision regime.

Supports the three standard heads: softmax over a (positive, negative)
logit pair, sigmoid over a single logit, and the (optionally normalized)
dot product of an embedding pair.  Every elementary operation runs through
the quantized arithmetic of `floatsim` in the regime's scoring format, so a
narrow scoring format reproduces the score collisions of genuinely
low-precision inference.  High-precision scoring keeps the logits in their
narrow format but evaluates the scoring function in a wider one (FP32 by
default), which is lossless on the logits because narrow grids embed
exactly into wider ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .floatsim import FP32, PrecisionFormat, qfunc, qop, quantize, quantize_array

__all__ = [
    "PHI_NAMES",
    "ScoringRegime",
    "score_softmax",
    "score_sigmoid",
    "score_dot",
    "score_hps",
    "score",
]

PHI_NAMES = ("softmax", "sigmoid", "dot")


@dataclass(frozen=True)
class ScoringRegime:
    """The pair (precision the model emitted logits in, precision the
    scoring function runs in)."""

    logit_format: PrecisionFormat
    scoring_format: PrecisionFormat

    @property
    def is_pure(self) -> bool:
        return self.scoring_format == self.logit_format

    @property
    def is_hps(self) -> bool:
        return self.scoring_format.mantissa_bits > self.logit_format.mantissa_bits

    @classmethod
    def pure(cls, fmt: PrecisionFormat) -> "ScoringRegime":
        return cls(fmt, fmt)

    @classmethod
    def hps(cls, logit_format: PrecisionFormat,
            scoring_format: PrecisionFormat = FP32) -> "ScoringRegime":
        regime = cls(logit_format, scoring_format)
        if not regime.is_hps:
            raise ValueError("high-precision scoring needs a strictly wider scoring format")
        return regime

    @property
    def label(self) -> str:
        if self.is_pure:
            return self.logit_format.name
        return f"{self.logit_format.name}->{self.scoring_format.name}"


def _ingest(z: float, regime: ScoringRegime) -> float:
    if math.isnan(z):
        raise ValueError("logits must not be NaN")
    return quantize(quantize(z, regime.logit_format), regime.scoring_format)


def score_softmax(z_pos: float, z_neg: float, regime: ScoringRegime) -> float:
    """Two-class softmax probability of the positive logit, computed with
    max-subtraction stabilization, step-by-step in the scoring format."""
    zp = _ingest(z_pos, regime)
    zn = _ingest(z_neg, regime)
    if math.isinf(zp) and math.isinf(zn):
        if zp == zn:
            raise ValueError("softmax undefined when both logits are infinite with equal sign")
        return 1.0 if zp > zn else 0.0
    if zp == math.inf:
        return 1.0
    if zn == math.inf:
        return 0.0
    sf = regime.scoring_format
    m = max(zp, zn)
    e_pos = qfunc(qop(zp, m, "sub", sf), "exp", sf)
    e_neg = qfunc(qop(zn, m, "sub", sf), "exp", sf)
    denom = qop(e_pos, e_neg, "add", sf)
    return qop(e_pos, denom, "div", sf)


def score_sigmoid(z: float, regime: ScoringRegime) -> float:
    """Logistic sigmoid 1 / (1 + exp(-z)), step-by-step in the scoring format."""
    zq = _ingest(z, regime)
    sf = regime.scoring_format
    e = qfunc(qfunc(zq, "negate", sf), "exp", sf)
    denom = qop(1.0, e, "add", sf)
    return qop(1.0, denom, "div", sf)


def _quantized_unit(v: np.ndarray, sf: PrecisionFormat) -> np.ndarray:
    acc = 0.0
    for x in v.tolist():
        acc = qop(acc, qop(x, x, "mul", sf), "add", sf)
    if acc == 0.0:
        raise ValueError("cannot normalize a zero vector")
    norm = qfunc(acc, "sqrt", sf)
    return np.array([qop(x, norm, "div", sf) for x in v.tolist()])


def score_dot(h_q, h_d, regime: ScoringRegime, normalize: bool = True) -> float:
    """Inner product of an embedding pair, accumulated strictly left to
    right in the scoring format; with `normalize`, each vector is first
    scaled to unit Euclidean norm in the same arithmetic."""
    q = np.asarray(h_q, dtype=np.float64)
    d = np.asarray(h_d, dtype=np.float64)
    if q.ndim != 1 or d.ndim != 1 or q.size == 0:
        raise ValueError("embeddings must be nonempty 1-d vectors")
    if q.shape != d.shape:
        raise ValueError("embedding dimensions do not match")
    if np.isnan(q).any() or np.isnan(d).any():
        raise ValueError("embeddings must not contain NaN")
    sf = regime.scoring_format
    q = quantize_array(quantize_array(q, regime.logit_format), sf)
    d = quantize_array(quantize_array(d, regime.logit_format), sf)
    if normalize:
        q = _quantized_unit(q, sf)
        d = _quantized_unit(d, sf)
    acc = 0.0
    for a, b in zip(q.tolist(), d.tolist()):
        acc = qop(acc, qop(a, b, "mul", sf), "add", sf)
    return acc


def score(phi: str, payload, regime: ScoringRegime, normalize: bool = True) -> float:
    """Dispatch on the scoring-function name.

    Payload shapes: softmax takes a (z_pos, z_neg) pair, sigmoid a single
    logit, dot a (query_embedding, doc_embedding) pair.
    """
    if phi == "softmax":
        z_pos, z_neg = payload
        return score_softmax(float(z_pos), float(z_neg), regime)
    if phi == "sigmoid":
        return score_sigmoid(float(payload), regime)
    if phi == "dot":
        h_q, h_d = payload
        return score_dot(h_q, h_d, regime, normalize=normalize)
    raise ValueError(f"unknown scoring function {phi!r}")


def score_hps(payload, phi: str, low_fmt: PrecisionFormat,
              high_fmt: PrecisionFormat = FP32) -> float:
    """Score with the logits kept in `low_fmt` but the scoring function
    evaluated in `high_fmt` (the upcast is exact)."""
    return score(phi, payload, ScoringRegime.hps(low_fmt, high_fmt))
