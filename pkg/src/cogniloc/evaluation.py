"""Retrieval metrics (AP@K/MAP, RR/MRR, HIT@K), report classification, run evaluation."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from .errors import (
    EmptyGroundTruth,
    GranularityMismatch,
    IoFailure,
    MalformedFixture,
    MissingGroundTruth,
    NoQueries,
    CogniLocError,
)
from .front import BugReport, load_bug_reports
from .stats import cliffs_delta, cliffs_magnitude, wilcoxon_signed_rank

HIT_KS = (1, 5, 10)
REPORT_TYPES = ("ST", "PE", "NL")
SPREAD_BUCKETS = ("1", "2", "3", "4", "5+")
GRANULARITIES = ("method", "document")
PATTERNS_FILE = Path(__file__).with_name("report_patterns.json")


@dataclass(frozen=True)
class EvalQuery:
    bug_id: str
    ranked: tuple[str, ...]
    ground_truth: frozenset[str]
    k: int = 10

    def __post_init__(self) -> None:
        object.__setattr__(self, "ranked", tuple(self.ranked))
        object.__setattr__(self, "ground_truth", frozenset(self.ground_truth))
        if len(set(self.ranked)) != len(self.ranked):
            raise ValueError(f"{self.bug_id}: ranked list has duplicates")


def _require_gt(q: EvalQuery) -> None:
    if not q.ground_truth:
        raise EmptyGroundTruth(f"EmptyGroundTruth: {q.bug_id}")


def average_precision_at_k(q: EvalQuery) -> float:
    """(1/|D|) * sum_{i<=K} P_i * B_i, with |D| the full ground-truth size."""
    _require_gt(q)
    if q.k < 1:
        raise ValueError("k must be >= 1")
    hits = 0
    total = 0.0
    for i, item in enumerate(q.ranked[: q.k], start=1):
        if item in q.ground_truth:
            hits += 1
            total += hits / i
    return total / len(q.ground_truth)


def reciprocal_rank(q: EvalQuery) -> float:
    _require_gt(q)
    for i, item in enumerate(q.ranked[: q.k], start=1):
        if item in q.ground_truth:
            return 1.0 / i
    return 0.0


def first_relevant_rank(q: EvalQuery) -> int | None:
    for i, item in enumerate(q.ranked, start=1):
        if item in q.ground_truth:
            return i
    return None


def _mean(values: list[float]) -> float:
    if not values:
        raise NoQueries("NoQueries: no queries to average")
    return sum(values) / len(values)


def mean_average_precision(queries: Iterable[EvalQuery]) -> float:
    return _mean([average_precision_at_k(q) for q in queries])


def mean_reciprocal_rank(queries: Iterable[EvalQuery]) -> float:
    return _mean([reciprocal_rank(q) for q in queries])


def hit_at_k(queries: Iterable[EvalQuery], k: int) -> float:
    if k < 1:
        raise ValueError("K must be >= 1")
    queries = list(queries)
    for q in queries:
        _require_gt(q)
    return _mean([1.0 if any(item in q.ground_truth for item in q.ranked[:k]) else 0.0 for q in queries])


# --------------------------------------------------------------------------
# classification


@lru_cache(maxsize=None)
def _compiled(path: str) -> tuple[list[re.Pattern], int, list[re.Pattern]]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return (
        [re.compile(p) for p in doc["stack_trace"]],
        int(doc.get("stack_trace_min_at_lines", 2)),
        [re.compile(p) for p in doc["program_element"]],
    )


def _consecutive_at_lines(text: str) -> int:
    best = run = 0
    for line in text.splitlines():
        if line.lstrip().startswith("at "):
            run += 1
            best = max(best, run)
        else:
            run = 0
    return best


def classify_report(report: BugReport | str, patterns_file: str | Path = PATTERNS_FILE) -> str:
    """ST if a stack frame is present, else PE if code elements appear, else NL."""
    text = report if isinstance(report, str) else report.text
    st, min_lines, pe = _compiled(str(patterns_file))
    if any(p.search(text) for p in st) or _consecutive_at_lines(text) >= min_lines:
        return "ST"
    if any(p.search(text) for p in pe):
        return "PE"
    return "NL"


# --------------------------------------------------------------------------
# run evaluation


@dataclass
class MetricSummary:
    count: int
    map_score: float | None = None
    mrr_score: float | None = None
    hit: dict[int, float] = field(default_factory=dict)

    @classmethod
    def of(cls, queries: Sequence[EvalQuery]) -> "MetricSummary":
        if not queries:
            return cls(0)
        return cls(
            len(queries),
            mean_average_precision(queries),
            mean_reciprocal_rank(queries),
            {k: hit_at_k(queries, k) for k in HIT_KS},
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "count": self.count,
            "map": self.map_score,
            "mrr": self.mrr_score,
            "hit": {str(k): v for k, v in self.hit.items()},
        }


@dataclass
class EvalReport:
    granularity: str
    k: int
    overall: MetricSummary
    per_type: dict[str, MetricSummary]
    per_spread: dict[str, MetricSummary]

    @property
    def map_score(self) -> float:
        return self.overall.map_score

    @property
    def mrr_score(self) -> float:
        return self.overall.mrr_score

    @property
    def hit(self) -> dict[int, float]:
        return self.overall.hit

    def to_dict(self) -> dict[str, Any]:
        return {
            "granularity": self.granularity,
            "k": self.k,
            **self.overall.to_dict(),
            "per_type": {t: s.to_dict() for t, s in self.per_type.items()},
            "per_spread": {b: s.to_dict() for b, s in self.per_spread.items()},
        }

    def format_table(self) -> str:
        rows = [("overall", self.overall)]
        rows += [(f"type={t}", s) for t, s in self.per_type.items()]
        rows += [(f"spread={b}", s) for b, s in self.per_spread.items()]
        head = f"{'group':<12}{'n':>5}{'MAP':>8}{'MRR':>8}" + "".join(f"{'HIT@' + str(k):>8}" for k in HIT_KS)
        lines = [f"{self.granularity}-level, k={self.k}", head]
        for name, s in rows:
            if not s.count:
                lines.append(f"{name:<12}{0:>5}" + f"{'-':>8}" * (2 + len(HIT_KS)))
                continue
            lines.append(
                f"{name:<12}{s.count:>5}{s.map_score:>8.3f}{s.mrr_score:>8.3f}"
                + "".join(f"{s.hit[k]:>8.3f}" for k in HIT_KS)
            )
        return "\n".join(lines)


def spread_bucket(n: int) -> str:
    return "5+" if n >= 5 else str(n)


def load_results(path: str | Path) -> list[dict[str, Any]]:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise IoFailure(f"IoFailure: cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise MalformedFixture(f"{path}: not valid JSON ({exc})") from exc
    if isinstance(doc, Mapping):
        doc = doc.get("results")
    if not isinstance(doc, list):
        raise MalformedFixture(f"{path}: expected a results list")
    return doc


def _ranked_items(record: Mapping[str, Any], granularity: str) -> list[str]:
    key = "methods" if granularity == "method" else "documents"
    if key not in record:
        raise GranularityMismatch(
            f"GranularityMismatch: result for {record.get('bug_id')!r} has no {key!r} list"
        )
    items = record[key]
    return [m["segment_id"] if isinstance(m, Mapping) else m for m in items]


def build_queries(
    results: Sequence[Mapping[str, Any]],
    bugs: Mapping[str, BugReport],
    granularity: str,
    k: int,
) -> list[EvalQuery]:
    if granularity not in GRANULARITIES:
        raise GranularityMismatch(f"GranularityMismatch: unknown granularity {granularity!r}")
    queries = []
    for record in results:
        bug_id = str(record["bug_id"])
        bug = bugs.get(bug_id)
        if bug is None or bug.ground_truth is None:
            raise MissingGroundTruth(bug_id)
        truth = bug.ground_truth.methods if granularity == "method" else bug.ground_truth.documents
        if not truth:
            raise MissingGroundTruth(bug_id)
        queries.append(EvalQuery(bug_id, tuple(_ranked_items(record, granularity)), truth, k))
    return queries


def _as_results(results: str | Path | Sequence[Mapping[str, Any]]) -> list[Mapping[str, Any]]:
    return load_results(results) if isinstance(results, (str, Path)) else list(results)


def _as_bugs(bugs: str | Path | Iterable[BugReport]) -> dict[str, BugReport]:
    reports = load_bug_reports(bugs) if isinstance(bugs, (str, Path)) else list(bugs)
    return {b.id: b for b in reports}


def evaluate_run(
    results: str | Path | Sequence[Mapping[str, Any]],
    bugs: str | Path | Iterable[BugReport],
    granularity: str = "method",
    k: int = 10,
) -> EvalReport:
    bug_map = _as_bugs(bugs)
    queries = build_queries(_as_results(results), bug_map, granularity, k)
    if not queries:
        raise NoQueries("NoQueries: results file is empty")
    by_type: dict[str, list[EvalQuery]] = {t: [] for t in REPORT_TYPES}
    by_spread: dict[str, list[EvalQuery]] = {b: [] for b in SPREAD_BUCKETS}
    for q in queries:
        by_type[classify_report(bug_map[q.bug_id])].append(q)
        by_spread[spread_bucket(len(q.ground_truth))].append(q)
    return EvalReport(
        granularity,
        k,
        MetricSummary.of(queries),
        {t: MetricSummary.of(qs) for t, qs in by_type.items()},
        {b: MetricSummary.of(qs) for b, qs in by_spread.items()},
    )


def capped_first_ranks(queries: Sequence[EvalQuery], cap: int) -> dict[str, int]:
    """First relevant rank per bug; anything not found within ``cap`` gets cap + 1."""
    out = {}
    for q in queries:
        r = first_relevant_rank(q)
        out[q.bug_id] = r if r is not None and r <= cap else cap + 1
    return out


def compare_runs(
    results_a: str | Path | Sequence[Mapping[str, Any]],
    results_b: str | Path | Sequence[Mapping[str, Any]],
    bugs: str | Path | Iterable[BugReport],
    granularity: str = "method",
    k: int = 10,
    points: Sequence[int] = (1, 5),
) -> dict[str, Any]:
    """Paired Wilcoxon test and Cliff's delta on first-relevant ranks at each cut-off.

    Negative delta means run A tends to rank the first correct item higher
    (smaller rank) than run B.
    """
    bug_map = _as_bugs(bugs)
    qa = build_queries(_as_results(results_a), bug_map, granularity, k)
    qb = build_queries(_as_results(results_b), bug_map, granularity, k)
    shared = sorted({q.bug_id for q in qa} & {q.bug_id for q in qb})
    if not shared:
        raise NoQueries("NoQueries: the two runs share no bug ids")
    out: dict[str, Any] = {"pairs": len(shared), "points": {}}
    for cap in points:
        ra, rb = capped_first_ranks(qa, cap), capped_first_ranks(qb, cap)
        a = [ra[b] for b in shared]
        b = [rb[b] for b in shared]
        entry: dict[str, Any] = {}
        try:
            w = wilcoxon_signed_rank(a, b)
            entry.update(statistic=w.statistic, p_value=w.p_value, n=w.n, method=w.method)
        except CogniLocError as exc:
            entry.update(statistic=None, p_value=None, error=str(exc))
        delta = cliffs_delta(a, b)
        entry.update(cliffs_delta=delta, magnitude=cliffs_magnitude(delta))
        out["points"][f"top{cap}"] = entry
    return out
