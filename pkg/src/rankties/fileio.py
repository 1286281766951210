"""Deterministic parsing and serialization.

Formats:

* run files: either the 6-column whitespace ranking format
  (``query_id tag doc_id rank score run_name``) or line-delimited JSON
  records (``{"query_id", "doc_id", "score", "rank"?}``), auto-detected
  from the first non-empty line.  Score text is preserved verbatim through
  round-trips.
* qrels: 4-column ``query_id iteration doc_id relevance`` or JSON lines
  with ``{"query_id", "doc_id", "relevance"}``; relevance is binarized at
  > 0 when consumed.
* logit files: JSON lines, led by a header declaring the scoring function
  and the precision the values were produced in; values are quantized to
  that grid on load.
* reports: a versioned JSON document or a flat CSV; identical inputs yield
  identical bytes, writers always end with a newline.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .floatsim import FORMATS, quantize, quantize_array
from .metrics import AggregateMetric, AggregateReport, MetricKind, MetricReport
from .scoring import PHI_NAMES

__all__ = [
    "ParseError",
    "RunRecord",
    "RunFile",
    "QrelRecord",
    "QrelsFile",
    "LogitsFile",
    "parse_run",
    "write_run",
    "parse_qrels",
    "write_qrels",
    "parse_logits",
    "write_logits",
    "write_report",
    "read_report",
    "REPORT_SCHEMA_VERSION",
]

REPORT_SCHEMA_VERSION = 1


class ParseError(ValueError):
    """Malformed input; carries the 1-based line number when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


def _decode(data) -> str:
    if isinstance(data, (bytes, bytearray)):
        return data.decode("utf-8")
    return data


def _lines(text: str):
    for number, raw in enumerate(text.split("\n"), start=1):
        line = raw.strip()
        if line:
            yield number, line


def _finite(token, number: int, what: str) -> float:
    try:
        value = float(token)
    except (TypeError, ValueError):
        raise ParseError(f"cannot parse {what} {token!r}", number) from None
    if value != value or value in (float("inf"), float("-inf")):
        raise ParseError(f"{what} must be finite, got {token!r}", number)
    return value


def _json_record(line: str, number: int) -> dict:
    def reject_constant(token):
        raise ParseError(f"non-finite number {token!r}", number)

    try:
        record = json.loads(line, parse_constant=reject_constant)
    except json.JSONDecodeError as err:
        raise ParseError(f"invalid JSON record ({err.msg})", number) from None
    if not isinstance(record, dict):
        raise ParseError("expected a JSON object", number)
    return record


def _require(record: dict, key: str, number: int):
    if key not in record:
        raise ParseError(f"missing field {key!r}", number)
    return record[key]


# ---------------------------------------------------------------------------
# run files


@dataclass(frozen=True)
class RunRecord:
    query_id: str
    doc_id: str
    score: float
    score_text: str
    rank: int | None = None
    tag: str = "Q0"
    run_name: str = "run"


@dataclass
class RunFile:
    records: list = field(default_factory=list)
    kind: str = "trec"  # trec | jsonl

    def by_query(self) -> dict:
        out: dict = {}
        for record in self.records:
            out.setdefault(record.query_id, []).append(record)
        return out


def parse_run(data) -> RunFile:
    """Parse a run file; raises ParseError with a line number on bad input."""
    text = _decode(data)
    records = []
    seen = set()
    kind = None
    for number, line in _lines(text):
        if kind is None:
            kind = "jsonl" if line.startswith("{") else "trec"
        if kind == "jsonl":
            record = _json_record(line, number)
            query_id = str(_require(record, "query_id", number))
            doc_id = str(_require(record, "doc_id", number))
            raw_score = _require(record, "score", number)
            score_text = raw_score if isinstance(raw_score, str) else repr(float(raw_score))
            score = _finite(score_text, number, "score")
            rank = record.get("rank")
            rank = int(rank) if rank is not None else None
            rec = RunRecord(query_id, doc_id, score, score_text, rank)
        else:
            parts = line.split()
            if len(parts) != 6:
                raise ParseError(f"expected 6 whitespace-separated columns, got {len(parts)}",
                                 number)
            query_id, tag, doc_id, rank_text, score_text, run_name = parts
            try:
                rank = int(rank_text)
            except ValueError:
                raise ParseError(f"cannot parse rank {rank_text!r}", number) from None
            score = _finite(score_text, number, "score")
            rec = RunRecord(query_id, doc_id, score, score_text, rank, tag, run_name)
        key = (rec.query_id, rec.doc_id)
        if key in seen:
            raise ParseError(f"duplicate (query_id, doc_id) pair {key!r}", number)
        seen.add(key)
        records.append(rec)
    if not records:
        raise ParseError("run file contains no records")
    return RunFile(records, kind)


def write_run(run: RunFile) -> bytes:
    """Serialize a run file; score text is emitted verbatim."""
    lines = []
    for i, r in enumerate(run.records):
        if run.kind == "jsonl":
            obj = {"query_id": r.query_id, "doc_id": r.doc_id, "score": r.score_text}
            if r.rank is not None:
                obj["rank"] = r.rank
            lines.append(json.dumps(obj, sort_keys=True))
        else:
            rank = r.rank if r.rank is not None else i
            lines.append(f"{r.query_id} {r.tag} {r.doc_id} {rank} {r.score_text} {r.run_name}")
    return ("\n".join(lines) + "\n").encode("utf-8")


# ---------------------------------------------------------------------------
# qrels


@dataclass(frozen=True)
class QrelRecord:
    query_id: str
    doc_id: str
    relevance: int


@dataclass
class QrelsFile:
    records: list = field(default_factory=list)

    def relevant_sets(self) -> dict:
        """query_id -> set of doc_ids judged relevant (relevance > 0)."""
        out: dict = {}
        for record in self.records:
            if record.relevance > 0:
                out.setdefault(record.query_id, set()).add(record.doc_id)
        return out


def parse_qrels(data) -> QrelsFile:
    text = _decode(data)
    records = []
    seen = set()
    kind = None
    for number, line in _lines(text):
        if kind is None:
            kind = "jsonl" if line.startswith("{") else "trec"
        if kind == "jsonl":
            record = _json_record(line, number)
            query_id = str(_require(record, "query_id", number))
            doc_id = str(_require(record, "doc_id", number))
            relevance = _require(record, "relevance", number)
        else:
            parts = line.split()
            if len(parts) != 4:
                raise ParseError(f"expected 4 whitespace-separated columns, got {len(parts)}",
                                 number)
            query_id, _, doc_id, relevance = parts
        try:
            relevance = int(relevance)
        except (TypeError, ValueError):
            raise ParseError(f"cannot parse relevance {relevance!r}", number) from None
        if relevance < 0:
            raise ParseError(f"relevance must be >= 0, got {relevance}", number)
        key = (query_id, doc_id)
        if key in seen:
            raise ParseError(f"duplicate (query_id, doc_id) pair {key!r}", number)
        seen.add(key)
        records.append(QrelRecord(query_id, doc_id, relevance))
    if not records:
        raise ParseError("qrels file contains no records")
    return QrelsFile(records)


def write_qrels(qrels: QrelsFile) -> bytes:
    lines = [f"{r.query_id} 0 {r.doc_id} {r.relevance}" for r in qrels.records]
    return ("\n".join(lines) + "\n").encode("utf-8")


# ---------------------------------------------------------------------------
# logits


@dataclass
class LogitsFile:
    """Raw model outputs per (query, document), plus the precision they were
    produced in.  Payloads are already quantized to that grid.

    Candidate payloads: a (z_pos, z_neg) tuple for softmax, a float for
    sigmoid, a document embedding vector for dot (query embeddings are kept
    separately).
    """

    phi: str
    format_name: str
    candidates: dict = field(default_factory=dict)  # qid -> [(doc_id, payload)]
    query_vectors: dict = field(default_factory=dict)  # qid -> ndarray (dot only)

    def payload_pairs(self, query_id: str):
        """(doc_id, scoring payload) pairs in file order for one query."""
        entries = self.candidates[query_id]
        if self.phi == "dot":
            q = self.query_vectors[query_id]
            return [(doc_id, (q, vec)) for doc_id, vec in entries]
        return list(entries)


def _vector(values, number: int) -> np.ndarray:
    if not isinstance(values, list) or not values:
        raise ParseError("embedding must be a nonempty array", number)
    try:
        vec = np.array([float(v) for v in values], dtype=np.float64)
    except (TypeError, ValueError):
        raise ParseError("embedding entries must be numbers", number) from None
    if not np.isfinite(vec).all():
        raise ParseError("embedding entries must be finite", number)
    return vec


def parse_logits(data) -> LogitsFile:
    """Parse a logits file: a header line then one JSON record per line."""
    text = _decode(data)
    lines = iter(_lines(text))
    try:
        number, line = next(lines)
    except StopIteration:
        raise ParseError("logits file is empty") from None
    header = _json_record(line, number)
    phi = _require(header, "phi", number)
    format_name = _require(header, "format", number)
    if phi not in PHI_NAMES:
        raise ParseError(f"unknown scoring function {phi!r}", number)
    if format_name not in FORMATS:
        raise ParseError(f"unknown precision format {format_name!r}", number)
    fmt = FORMATS[format_name]
    out = LogitsFile(phi, format_name)
    seen = set()
    dims: dict = {}
    for number, line in lines:
        record = _json_record(line, number)
        query_id = str(_require(record, "query_id", number))
        if phi == "dot" and "doc_id" not in record:
            if query_id in out.query_vectors:
                raise ParseError(f"duplicate query embedding for {query_id!r}", number)
            vec = _vector(_require(record, "embedding", number), number)
            out.query_vectors[query_id] = quantize_array(vec, fmt)
            dims.setdefault(query_id, len(vec))
            if dims[query_id] != len(vec):
                raise ParseError("embedding length mismatch", number)
            continue
        doc_id = str(_require(record, "doc_id", number))
        key = (query_id, doc_id)
        if key in seen:
            raise ParseError(f"duplicate (query_id, doc_id) pair {key!r}", number)
        seen.add(key)
        if phi == "softmax":
            logits = _require(record, "logits", number)
            if not isinstance(logits, list) or len(logits) != 2:
                raise ParseError("softmax requires a [z_pos, z_neg] logit pair", number)
            payload = (quantize(_finite(logits[0], number, "logit"), fmt),
                       quantize(_finite(logits[1], number, "logit"), fmt))
        elif phi == "sigmoid":
            if "logits" in record and "logit" not in record:
                raise ParseError("sigmoid requires a single scalar under 'logit'", number)
            payload = quantize(_finite(_require(record, "logit", number), number, "logit"), fmt)
        else:
            vec = _vector(_require(record, "embedding", number), number)
            dim = dims.get(query_id)
            if dim is not None and dim != len(vec):
                raise ParseError("embedding length mismatch", number)
            dims.setdefault(query_id, len(vec))
            payload = quantize_array(vec, fmt)
        out.candidates.setdefault(query_id, []).append((doc_id, payload))
    if not out.candidates:
        raise ParseError("logits file has a header but no candidate records")
    if phi == "dot":
        missing = sorted(set(out.candidates) - set(out.query_vectors))
        if missing:
            raise ParseError(f"missing query embeddings for {missing}")
    return out


def write_logits(logits: LogitsFile) -> bytes:
    rows = [json.dumps({"phi": logits.phi, "format": logits.format_name}, sort_keys=True)]
    for query_id in logits.candidates:
        if logits.phi == "dot":
            rows.append(json.dumps(
                {"query_id": query_id,
                 "embedding": [float(v) for v in logits.query_vectors[query_id]]},
                sort_keys=True))
        for doc_id, payload in logits.candidates[query_id]:
            obj = {"query_id": query_id, "doc_id": doc_id}
            if logits.phi == "softmax":
                obj["logits"] = [payload[0], payload[1]]
            elif logits.phi == "sigmoid":
                obj["logit"] = payload
            else:
                obj["embedding"] = [float(v) for v in payload]
            rows.append(json.dumps(obj, sort_keys=True))
    return ("\n".join(rows) + "\n").encode("utf-8")


# ---------------------------------------------------------------------------
# reports


def write_report(agg: AggregateReport, format: str = "structured",
                 meta: dict | None = None) -> bytes:
    """Serialize an aggregate report.

    `structured` is versioned JSON carrying aggregates, per-query reports
    and both range-aggregation conventions; `tabular` is a flat CSV of the
    aggregate rows.  Output bytes depend only on the inputs.
    """
    if format == "structured":
        doc = {
            "schema_version": REPORT_SCHEMA_VERSION,
            "meta": meta or {},
            "aggregates": [a.as_dict() for a in agg.aggregates],
            "per_query": {qid: [r.as_dict() for r in reports]
                          for qid, reports in agg.per_query.items()},
        }
        return (json.dumps(doc, sort_keys=True, indent=2, allow_nan=False) + "\n").encode("utf-8")
    if format == "tabular":
        header = ("metric,k,n_queries,oblivious,expected,minimum,maximum,"
                  "mean_range,range_of_means,bias")
        rows = [header]
        for a in agg.aggregates:
            rows.append(",".join([
                a.metric.value, str(a.k), str(a.n_queries),
                repr(a.oblivious), repr(a.expected), repr(a.minimum), repr(a.maximum),
                repr(a.mean_range), repr(a.range_of_means), repr(a.bias),
            ]))
        return ("\n".join(rows) + "\n").encode("utf-8")
    raise ValueError(f"unknown report format {format!r}")


def read_report(data) -> tuple:
    """Parse a structured report back into (AggregateReport, meta)."""
    try:
        doc = json.loads(_decode(data))
    except json.JSONDecodeError as err:
        raise ParseError(f"invalid report JSON ({err.msg})") from None
    if not isinstance(doc, dict) or doc.get("schema_version") != REPORT_SCHEMA_VERSION:
        raise ParseError("unsupported or missing report schema version")
    aggregates = tuple(
        AggregateMetric(
            metric=MetricKind(a["metric"]), k=int(a["k"]), n_queries=int(a["n_queries"]),
            oblivious=a["oblivious"], expected=a["expected"],
            minimum=a["minimum"], maximum=a["maximum"],
            mean_range=a["mean_range"], range_of_means=a["range_of_means"],
            bias=a["bias"],
        )
        for a in doc["aggregates"]
    )
    per_query = {
        qid: tuple(
            MetricReport(
                metric=MetricKind(r["metric"]), k=int(r["k"]),
                oblivious=r["oblivious"], expected=r["expected"],
                minimum=r["minimum"], maximum=r["maximum"],
            )
            for r in reports
        )
        for qid, reports in sorted(doc["per_query"].items())
    }
    return AggregateReport(aggregates=aggregates, per_query=per_query), doc.get("meta", {})
