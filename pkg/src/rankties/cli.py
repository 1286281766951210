"""Command-line front-end.

Subcommands:

* ``evaluate``: run or logits + qrels -> tie-aware metric report
* ``compare``: one logits file scored under several precision regimes
* ``curve``: per-cutoff CSV of oblivious/expected/min/max per regime
* ``grid``: representable values and spacing of a float format
* ``synth``: seeded synthetic logits + qrels corpora

Identical inputs, flags and seeds produce byte-identical outputs regardless
of the worker count.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import fileio
from .floatsim import FORMATS, FP32, grid_values, quantize, quantize_array, ulp
from .metrics import aggregate, evaluate_ranked_query, resolve_metric
from .oracle import (BudgetExceededError, EnumerationBudget, configuration_count,
                     enumerate_all)
from .scoring import PHI_NAMES, ScoringRegime, score
from .ties import TieProfile

EXIT_OK = 0
EXIT_CONSTRAINT = 2
EXIT_PARSE = 3
EXIT_ORACLE = 4

ORACLE_TOLERANCE = 1e-9
ORACLE_QUERY_BUDGET = 20_000


class OracleMismatchError(RuntimeError):
    """A closed-form report disagreed with the exhaustive oracle."""


# ---------------------------------------------------------------------------
# flag parsing helpers


def parse_cutoffs(text: str) -> list:
    """Cutoff list: "10", "1,3,10" or "1-10" (ranges inclusive)."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    if not out or any(k < 1 for k in out):
        raise ValueError("cutoffs must be >= 1")
    if any(b <= a for a, b in zip(out, out[1:])):
        raise ValueError("cutoffs must be strictly increasing")
    return out


def parse_metric_list(text: str) -> list:
    names = [t for t in (s.strip() for s in text.split(",")) if t]
    if not names:
        raise ValueError("metric list is empty")
    return [resolve_metric(n) for n in names]


def parse_regime(token: str) -> ScoringRegime:
    """"bf16" (pure) or "bf16:fp32" (logit format : scoring format)."""
    parts = token.lower().split(":")
    if len(parts) == 1:
        parts = parts * 2
    if len(parts) != 2 or parts[0] not in FORMATS or parts[1] not in FORMATS:
        raise ValueError(f"bad regime {token!r}; expected FORMAT or FORMAT:FORMAT "
                         f"with formats in {sorted(FORMATS)}")
    return ScoringRegime(FORMATS[parts[0]], FORMATS[parts[1]])


def _regime_from_flags(args, default_logit: str) -> ScoringRegime:
    logit = FORMATS[args.logit_format or default_logit]
    if args.hps:
        if args.scoring_format and args.scoring_format != "fp32":
            raise ValueError("--hps fixes the scoring format to fp32")
        if FP32.mantissa_bits <= logit.mantissa_bits:
            raise ValueError("--hps requires a logit format strictly narrower than fp32")
        return ScoringRegime(logit, FP32)
    scoring = FORMATS[args.scoring_format] if args.scoring_format else logit
    return ScoringRegime(logit, scoring)


# ---------------------------------------------------------------------------
# query assembly and evaluation


@dataclass(frozen=True)
class QueryData:
    query_id: str
    scores: np.ndarray    # ingestion order
    relevant: np.ndarray
    n_pos: int            # includes relevant docs absent from the candidates
    missing_relevant: int


def _attach_relevance(query_id, doc_ids, scores, relevant_set) -> QueryData:
    relevant = np.array([d in relevant_set for d in doc_ids], dtype=np.int64)
    missing = len(relevant_set.difference(doc_ids))
    return QueryData(query_id, np.asarray(scores, dtype=np.float64), relevant,
                     n_pos=len(relevant_set), missing_relevant=missing)


def queries_from_run(run: fileio.RunFile, qrels: fileio.QrelsFile):
    relevant_sets = qrels.relevant_sets()
    queries, skipped = [], 0
    for query_id, records in sorted(run.by_query().items()):
        relevant_set = relevant_sets.get(query_id, set())
        if not relevant_set:
            skipped += 1
            continue
        doc_ids = [r.doc_id for r in records]
        scores = [r.score for r in records]
        queries.append(_attach_relevance(query_id, doc_ids, scores, relevant_set))
    return queries, skipped


def queries_from_logits(logits: fileio.LogitsFile, qrels: fileio.QrelsFile,
                        regime: ScoringRegime, workers: int = 1,
                        normalize: bool = True):
    relevant_sets = qrels.relevant_sets()
    query_ids = sorted(logits.candidates)
    kept = [q for q in query_ids if relevant_sets.get(q)]
    skipped = len(query_ids) - len(kept)

    def build(query_id):
        pairs = logits.payload_pairs(query_id)
        doc_ids = [doc_id for doc_id, _ in pairs]
        scores = [score(logits.phi, payload, regime, normalize=normalize)
                  for _, payload in pairs]
        return _attach_relevance(query_id, doc_ids, scores, relevant_sets[query_id])

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            queries = list(pool.map(build, kept))
    else:
        queries = [build(q) for q in kept]
    return queries, skipped


def evaluate_queries(queries, metrics, ks, workers: int = 1) -> dict:
    """Per-query reports, keyed by query id in sorted order."""
    if workers < 1:
        raise ValueError("--workers must be >= 1")
    if not queries:
        raise ValueError("no queries with relevant judgments remain")

    def run_one(q: QueryData):
        return evaluate_ranked_query(q.scores, q.relevant, metrics, ks, n_pos=q.n_pos)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_one, queries))
    else:
        results = [run_one(q) for q in queries]
    return {q.query_id: reports for q, reports in zip(queries, results)}


def cross_check_oracle(queries, per_query, ks) -> dict:
    """Replay every small query through the exhaustive oracle; raise on any
    disagreement beyond ORACLE_TOLERANCE."""
    checked = skipped_large = 0
    budget = EnumerationBudget(ORACLE_QUERY_BUDGET)
    for q in queries:
        order = np.argsort(-q.scores, kind="stable")
        profile = TieProfile.from_sorted_arrays(q.scores[order], q.relevant[order],
                                                validate=False)
        if configuration_count(profile) > budget.max_configurations:
            skipped_large += 1
            continue
        truth = enumerate_all(profile, ks, budget=budget, n_pos=q.n_pos)
        for rep in per_query[q.query_id]:
            ref = truth[(rep.metric, rep.k)]
            for got, want, what in ((rep.expected, ref.mean, "expected"),
                                    (rep.minimum, ref.minimum, "minimum"),
                                    (rep.maximum, ref.maximum, "maximum")):
                if abs(got - want) > ORACLE_TOLERANCE:
                    raise OracleMismatchError(
                        f"query {q.query_id}: {rep.metric}@{rep.k} {what} "
                        f"{got!r} != oracle {want!r}")
        checked += 1
    return {"oracle_checked": checked, "oracle_skipped_large": skipped_large}


# ---------------------------------------------------------------------------
# rendering


def _pct(value: float) -> str:
    return f"{value * 100:.2f}"


def render_table(agg, title: str = "") -> bytes:
    lines = []
    if title:
        lines.append(title)
    header = f"{'metric':<10}{'k':>5}{'M_obl':>9}{'E[M]':>9}{'M_min':>9}{'M_max':>9}{'Range':>9}{'Bias':>9}"
    lines.append(header)
    lines.append("-" * len(header))
    for a in agg.aggregates:
        lines.append(f"{a.metric.value:<10}{a.k:>5}{_pct(a.oblivious):>9}{_pct(a.expected):>9}"
                     f"{_pct(a.minimum):>9}{_pct(a.maximum):>9}{_pct(a.mean_range):>9}"
                     f"{_pct(a.bias):>9}")
    return ("\n".join(lines) + "\n").encode("utf-8")


def render_compare_table(results) -> bytes:
    """results: list of (regime_label, AggregateReport)."""
    lines = []
    grid = [(a.metric, a.k) for a in results[0][1].aggregates]
    for idx, (metric, k) in enumerate(grid):
        lines.append(f"{metric.value}@{k}  (values are percentages)")
        header = f"{'regime':<14}{'M_obl':>9}{'E[M]':>9}{'Range':>9}{'Bias':>9}"
        lines.append(header)
        lines.append("-" * len(header))
        for label, agg in results:
            a = agg.aggregates[idx]
            lines.append(f"{label:<14}{_pct(a.oblivious):>9}{_pct(a.expected):>9}"
                         f"{_pct(a.mean_range):>9}{_pct(a.bias):>9}")
        lines.append("")
    return ("\n".join(lines).rstrip("\n") + "\n").encode("utf-8")


def _emit(payload: bytes, out_path) -> None:
    if out_path:
        Path(out_path).write_bytes(payload)
    else:
        sys.stdout.buffer.write(payload)


# ---------------------------------------------------------------------------
# subcommands


def _load_qrels(path) -> fileio.QrelsFile:
    return fileio.parse_qrels(Path(path).read_bytes())


def cmd_evaluate(args) -> int:
    metrics = parse_metric_list(args.metrics)
    ks = parse_cutoffs(args.k)
    qrels = _load_qrels(args.qrels)
    if args.run and args.logits:
        raise ValueError("pass either --run or --logits, not both")
    if args.run:
        run = fileio.parse_run(Path(args.run).read_bytes())
        queries, skipped = queries_from_run(run, qrels)
        source = {"source": "run"}
    elif args.logits:
        logits = fileio.parse_logits(Path(args.logits).read_bytes())
        if args.phi and args.phi != logits.phi:
            raise ValueError(f"--phi {args.phi} conflicts with the logits header "
                             f"({logits.phi})")
        regime = _regime_from_flags(args, default_logit=logits.format_name)
        queries, skipped = queries_from_logits(logits, qrels, regime, args.workers,
                                               normalize=not args.no_normalize)
        source = {"source": "logits", "phi": logits.phi, "regime": regime.label}
    else:
        raise ValueError("need --run or --logits")
    if skipped:
        print(f"warning: skipped {skipped} queries without relevant judgments",
              file=sys.stderr)
    per_query = evaluate_queries(queries, metrics, ks, args.workers)
    meta = {**source,
            "queries": len(queries),
            "skipped_no_relevant": skipped,
            "missing_relevant_docs": sum(q.missing_relevant for q in queries),
            "metrics": [m.value for m in metrics],
            "cutoffs": ks}
    if args.oracle:
        meta.update(cross_check_oracle(queries, per_query, ks))
    agg = aggregate(per_query)
    if args.format == "json":
        _emit(fileio.write_report(agg, "structured", meta), args.out)
    elif args.format == "csv":
        _emit(fileio.write_report(agg, "tabular"), args.out)
    else:
        _emit(render_table(agg), args.out)
    return EXIT_OK


def _compare_results(args, metrics, ks):
    qrels = _load_qrels(args.qrels)
    logits = fileio.parse_logits(Path(args.logits).read_bytes())
    regimes = [parse_regime(t) for t in (args.regime or [])]
    if not regimes:
        base = args.logit_format or "bf16"
        regimes = [parse_regime("fp32"), parse_regime(base),
                   parse_regime(f"{base}:fp32")]
    results = []
    total_skipped = 0
    for regime in regimes:
        queries, skipped = queries_from_logits(logits, qrels, regime, args.workers,
                                               normalize=not args.no_normalize)
        per_query = evaluate_queries(queries, metrics, ks, args.workers)
        results.append((regime.label, aggregate(per_query)))
        total_skipped = skipped
    return logits, regimes, results, total_skipped


def cmd_compare(args) -> int:
    metrics = parse_metric_list(args.metrics)
    ks = parse_cutoffs(args.k)
    logits, regimes, results, skipped = _compare_results(args, metrics, ks)
    if skipped:
        print(f"warning: skipped {skipped} queries without relevant judgments",
              file=sys.stderr)
    if args.format == "json":
        doc = {
            "schema_version": fileio.REPORT_SCHEMA_VERSION,
            "meta": {"phi": logits.phi, "skipped_no_relevant": skipped},
            "regimes": [
                {"regime": label, "aggregates": [a.as_dict() for a in agg.aggregates]}
                for label, agg in results
            ],
        }
        payload = (json.dumps(doc, sort_keys=True, indent=2) + "\n").encode("utf-8")
    elif args.format == "csv":
        rows = ["regime,metric,k,oblivious,expected,minimum,maximum,"
                "mean_range,range_of_means,bias"]
        for label, agg in results:
            for a in agg.aggregates:
                rows.append(",".join([
                    label, a.metric.value, str(a.k),
                    repr(a.oblivious), repr(a.expected), repr(a.minimum), repr(a.maximum),
                    repr(a.mean_range), repr(a.range_of_means), repr(a.bias)]))
        payload = ("\n".join(rows) + "\n").encode("utf-8")
    else:
        payload = render_compare_table(results)
    _emit(payload, args.out)
    return EXIT_OK


def cmd_curve(args) -> int:
    metrics = parse_metric_list(args.metrics)
    ks = parse_cutoffs(args.k)
    _, _, results, skipped = _compare_results(args, metrics, ks)
    if skipped:
        print(f"warning: skipped {skipped} queries without relevant judgments",
              file=sys.stderr)
    rows = ["regime,metric,k,oblivious,expected,minimum,maximum"]
    for label, agg in results:
        for a in agg.aggregates:
            rows.append(",".join([
                label, a.metric.value, str(a.k),
                repr(a.oblivious), repr(a.expected), repr(a.minimum), repr(a.maximum)]))
    _emit(("\n".join(rows) + "\n").encode("utf-8"), args.out)
    return EXIT_OK


def cmd_grid(args) -> int:
    fmt = FORMATS[args.fmt]
    if args.hi < args.lo:
        raise ValueError("--hi must be >= --lo")
    values = grid_values(fmt, args.lo, args.hi, max_count=args.max_count)
    rows = ["value,ulp"]
    for v in values:
        rows.append(f"{v!r},{ulp(v, fmt)!r}")
    _emit(("\n".join(rows) + "\n").encode("utf-8"), args.out)
    return EXIT_OK


PRESETS = {
    # queries, candidates per query, relevant rate
    "miracl": (717, 100, 0.029),
    "askubuntu": (375, 20, 0.30),
}


def cmd_synth(args) -> int:
    if args.preset:
        n_queries, n_candidates, rate = PRESETS[args.preset]
        if args.queries is not None:
            n_queries = args.queries
        if args.candidates is not None:
            n_candidates = args.candidates
        if args.relevant_rate is not None:
            rate = args.relevant_rate
    else:
        n_queries = args.queries if args.queries is not None else 100
        n_candidates = args.candidates if args.candidates is not None else 100
        rate = args.relevant_rate if args.relevant_rate is not None else 0.03
    if n_queries < 1 or n_candidates < 1:
        raise ValueError("need at least one query and one candidate")
    if not 0.0 <= rate <= 1.0:
        raise ValueError("--relevant-rate must be in [0, 1]")
    phi = args.phi or "softmax"
    rng = np.random.default_rng(args.seed)
    logits = fileio.LogitsFile(phi, "fp32")
    qrel_records = []
    qd = len(str(n_queries - 1))
    dd = len(str(n_candidates - 1))
    for qi in range(n_queries):
        query_id = f"q{qi:0{qd}d}"
        if phi == "dot":
            logits.query_vectors[query_id] = quantize_array(
                rng.standard_normal(args.dim), FP32)
        entries = []
        for di in range(n_candidates):
            doc_id = f"d{di:0{dd}d}"
            relevant = bool(rng.random() < rate)
            shift = args.shift if relevant else 0.0
            if phi == "softmax":
                payload = (quantize(rng.normal(shift, 1.0), FP32),
                           quantize(rng.normal(0.0, 1.0), FP32))
            elif phi == "sigmoid":
                payload = quantize(rng.normal(shift, 1.0), FP32)
            else:
                mix = rng.standard_normal(args.dim) + shift * logits.query_vectors[query_id]
                payload = quantize_array(mix, FP32)
            entries.append((doc_id, payload))
            # full judgments (0s included) keep the qrels parseable even when
            # no candidate is relevant
            qrel_records.append(fileio.QrelRecord(query_id, doc_id, int(relevant)))
        logits.candidates[query_id] = entries
    Path(args.logits_out).write_bytes(fileio.write_logits(logits))
    Path(args.qrels_out).write_bytes(fileio.write_qrels(fileio.QrelsFile(qrel_records)))
    if not any(r.relevance for r in qrel_records):
        print("warning: relevant rate produced no relevant documents", file=sys.stderr)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def _add_io_flags(sub, qrels_required=True):
    sub.add_argument("--qrels", required=qrels_required, help="relevance judgments file")
    sub.add_argument("--out", help="output path (default: stdout)")
    sub.add_argument("--workers", type=int, default=1,
                     help="worker threads for per-query evaluation")
    sub.add_argument("--no-normalize", action="store_true",
                     help="raw dot product instead of cosine (dot scoring only)")


def _add_metric_flags(sub, default_k="10"):
    sub.add_argument("--metrics", default="ndcg,rr,ap,recall",
                     help="comma-separated metric list "
                          "(hits, precision, recall, f1, ndcg, rr/mrr, ap/map)")
    sub.add_argument("--k", default=default_k,
                     help='cutoffs: "10", "1,5,10" or "1-10"')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rankties",
        description="Tie-aware retrieval evaluation under emulated low-precision scoring.")
    subs = parser.add_subparsers(dest="command", required=True)

    ev = subs.add_parser("evaluate", help="evaluate a run or logits file against qrels")
    ev.add_argument("--run", help="pre-scored ranking file")
    ev.add_argument("--logits", help="raw logits file to score")
    ev.add_argument("--phi", choices=PHI_NAMES, help="scoring function (logits input)")
    ev.add_argument("--logit-format", choices=sorted(FORMATS),
                    help="precision the logits are treated as (default: file header)")
    ev.add_argument("--scoring-format", choices=sorted(FORMATS),
                    help="precision the scoring function runs in (default: logit format)")
    ev.add_argument("--hps", action="store_true",
                    help="upcast only the scoring function to fp32")
    ev.add_argument("--oracle", action="store_true",
                    help="cross-check small queries against exhaustive enumeration")
    ev.add_argument("--format", choices=("json", "csv", "table"), default="json")
    _add_metric_flags(ev)
    _add_io_flags(ev)
    ev.set_defaults(func=cmd_evaluate)

    cp = subs.add_parser("compare", help="score one logits file under several regimes")
    cp.add_argument("--logits", required=True)
    cp.add_argument("--regime", action="append",
                    help="logit:scoring format pair, e.g. bf16:fp32 (repeatable); "
                         "default fp32, <logit-format>, <logit-format>:fp32")
    cp.add_argument("--logit-format", choices=sorted(FORMATS), default="bf16",
                    help="low-precision format for the default regime trio")
    cp.add_argument("--format", choices=("json", "csv", "table"), default="table")
    _add_metric_flags(cp)
    _add_io_flags(cp)
    cp.set_defaults(func=cmd_compare)

    cv = subs.add_parser("curve", help="cutoff sweep as CSV, one row per regime/metric/k")
    cv.add_argument("--logits", required=True)
    cv.add_argument("--regime", action="append")
    cv.add_argument("--logit-format", choices=sorted(FORMATS), default="bf16")
    _add_metric_flags(cv, default_k="1-10")
    _add_io_flags(cv)
    cv.set_defaults(func=cmd_curve)

    gr = subs.add_parser("grid", help="list representable values of a format")
    gr.add_argument("--fmt", choices=sorted(FORMATS), required=True)
    gr.add_argument("--lo", type=float, required=True)
    gr.add_argument("--hi", type=float, required=True)
    gr.add_argument("--max-count", type=int, default=100_000)
    gr.add_argument("--out")
    gr.set_defaults(func=cmd_grid)

    sy = subs.add_parser("synth", help="generate a seeded synthetic corpus")
    sy.add_argument("--seed", type=int, default=0)
    sy.add_argument("--phi", choices=PHI_NAMES, default="softmax")
    sy.add_argument("--preset", choices=sorted(PRESETS))
    sy.add_argument("--queries", type=int)
    sy.add_argument("--candidates", type=int)
    sy.add_argument("--relevant-rate", type=float)
    sy.add_argument("--shift", type=float, default=3.0,
                    help="mean shift of relevant-candidate logits")
    sy.add_argument("--dim", type=int, default=8, help="embedding dimension (dot)")
    sy.add_argument("--logits-out", required=True)
    sy.add_argument("--qrels-out", required=True)
    sy.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except fileio.ParseError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_PARSE
    except OracleMismatchError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_ORACLE
    except (ValueError, BudgetExceededError, OSError, KeyError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONSTRAINT


if __name__ == "__main__":
    sys.exit(main())
