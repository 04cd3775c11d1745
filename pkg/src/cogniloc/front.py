"""Front half of the pipeline: restructure, retrieve, filter, hypothesize, retain."""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, Sequence, TypeVar

from .agents import AgentRequest, AgentRole, Backend, HypothesisResponse, RelevanceResponse, RestructureResponse
from .code_graph import CodeGraph, get_segment, search
from .errors import BackendError, EmptyReport, IoFailure, MalformedFixture

logger = logging.getLogger(__name__)

HIGH_BAND = 0.7
MEDIUM_BAND = 0.4
DEFAULT_BODY_CAP = 8000
TRUNCATION_MARKER = "\n... [truncated]"

BUG_FIELDS = ("id", "title", "description", "system", "version", "ground_truth")

T = TypeVar("T")
R = TypeVar("R")


@dataclass(frozen=True)
class GroundTruth:
    methods: frozenset[str] = frozenset()
    documents: frozenset[str] = frozenset()


@dataclass(frozen=True)
class BugReport:
    id: str
    title: str
    description: str
    system: str
    version: str
    ground_truth: GroundTruth | None = None

    @property
    def text(self) -> str:
        return "\n".join(part for part in (self.title, self.description) if part)

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any]) -> "BugReport":
        if not isinstance(raw, Mapping):
            raise MalformedFixture("bug report must be an object")
        unknown = set(raw) - set(BUG_FIELDS)
        if unknown:
            raise MalformedFixture(f"bug report has unknown field(s) {sorted(unknown)}")
        missing = [f for f in BUG_FIELDS[:-1] if f not in raw]
        if missing:
            raise MalformedFixture(f"bug report is missing field(s) {missing}")
        gt = raw.get("ground_truth")
        if gt is not None:
            if not isinstance(gt, Mapping) or set(gt) - {"methods", "documents"}:
                raise MalformedFixture(f"bug {raw['id']!r}: ground_truth must hold methods/documents lists")
            gt = GroundTruth(frozenset(gt.get("methods", ())), frozenset(gt.get("documents", ())))
        return cls(
            id=str(raw["id"]),
            title=raw["title"] or "",
            description=raw["description"] or "",
            system=raw["system"],
            version=raw["version"],
            ground_truth=gt,
        )

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {f: getattr(self, f) for f in BUG_FIELDS[:-1]}
        if self.ground_truth is not None:
            out["ground_truth"] = {
                "methods": sorted(self.ground_truth.methods),
                "documents": sorted(self.ground_truth.documents),
            }
        return out


def load_bug_reports(path: str | Path) -> list[BugReport]:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise IoFailure(f"IoFailure: cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise MalformedFixture(f"{path}: not valid JSON ({exc})") from exc
    if isinstance(doc, Mapping):
        doc = doc.get("bugs")
    if not isinstance(doc, list):
        raise MalformedFixture(f"{path}: expected a list of bug reports")
    return [BugReport.from_dict(raw) for raw in doc]


@dataclass(frozen=True)
class CandidateSet:
    entries: tuple[tuple[str, float], ...]
    stage: str = "retrieved"

    def __post_init__(self) -> None:
        ids = [sid for sid, _ in self.entries]
        if len(set(ids)) != len(ids):
            raise ValueError("CandidateSet has duplicate segment ids")
        scores = [s for _, s in self.entries]
        if any(a < b for a, b in zip(scores, scores[1:])):
            raise ValueError("CandidateSet scores must be non-increasing")
        if self.stage not in ("retrieved", "filtered"):
            raise ValueError(f"unknown stage {self.stage!r}")

    @property
    def ids(self) -> list[str]:
        return [sid for sid, _ in self.entries]

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class Hypothesis:
    segment: str
    statement: str
    category: str
    score: float


def category_for(score: float) -> str:
    if score >= HIGH_BAND:
        return "high"
    if score >= MEDIUM_BAND:
        return "medium"
    return "low"


def repair_hypothesis(segment: str, response: HypothesisResponse) -> Hypothesis:
    """Score wins: the category is rewritten to match the score band."""
    category = category_for(response.score)
    if category != response.category:
        logger.info(
            "hypothesis for %s: category %s inconsistent with score %.3f, using %s",
            segment, response.category, response.score, category,
        )
    return Hypothesis(segment, response.statement, category, response.score)


def _map_ordered(fn: Callable[[T], R], items: Sequence[T], workers: int) -> list[R]:
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def truncate_body(body: str, cap: int = DEFAULT_BODY_CAP) -> str:
    if len(body) <= cap:
        return body
    return body[:cap] + TRUNCATION_MARKER


# --------------------------------------------------------------------------
# stages


def restructure_report(report: BugReport, backend: Backend, temperature: float = 0.5) -> str:
    if not report.title.strip() and not report.description.strip():
        raise EmptyReport(f"EmptyReport: bug {report.id!r} has no title or description")
    request = AgentRequest(
        AgentRole.RESTRUCTURER,
        report.id,
        context={"title": report.title, "description": report.description},
        temperature=temperature,
    )
    try:
        response = backend.complete(request)
        if not isinstance(response, RestructureResponse):
            raise BackendError(f"restructurer returned {type(response).__name__}")
        return response.text
    except BackendError as exc:
        logger.warning("restructuring failed for %s (%s); using title+description", report.id, exc)
        return report.text


def retrieve_candidates(query: str, graph: CodeGraph, k: int = 100) -> CandidateSet:
    hits = search(graph, query, k)
    return CandidateSet(tuple((h.segment, h.score) for h in hits), stage="retrieved")


def filter_candidates(
    report: BugReport,
    candidates: CandidateSet,
    graph: CodeGraph,
    backend: Backend,
    n: int = 10,
    *,
    body_cap: int = DEFAULT_BODY_CAP,
    temperature: float = 0.5,
    workers: int = 1,
) -> CandidateSet:
    """Score every retrieved candidate for relevance and keep the top ``n``."""
    if candidates.stage != "retrieved":
        raise ValueError("filter_candidates expects a retrieved CandidateSet")
    if n < 1:
        raise ValueError("n must be >= 1")

    def judge(sid: str) -> float:
        seg = get_segment(graph, sid)
        request = AgentRequest(
            AgentRole.FILTER,
            report.id,
            focus_segment=sid,
            context={
                "report": report.text,
                "segment_name": seg.qualified_name,
                "segment_body": truncate_body(seg.body, body_cap),
            },
            temperature=temperature,
        )
        try:
            response = backend.complete(request)
        except BackendError as exc:
            logger.warning("filter call failed for %s/%s: %s", report.id, sid, exc)
            return 0.0
        return response.score if isinstance(response, RelevanceResponse) else 0.0

    scores = _map_ordered(judge, candidates.ids, workers)
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))[:n]
    return CandidateSet(tuple((candidates.ids[i], scores[i]) for i in order), stage="filtered")


def passthrough_filter(candidates: CandidateSet, n: int = 10) -> CandidateSet:
    """Filtering disabled: keep the first ``n`` in retrieval order."""
    return CandidateSet(candidates.entries[:n], stage="filtered")


def generate_hypotheses(
    report: BugReport,
    filtered: CandidateSet,
    graph: CodeGraph,
    backend: Backend,
    *,
    body_cap: int = DEFAULT_BODY_CAP,
    temperature: float = 0.5,
    workers: int = 1,
) -> list[Hypothesis]:
    if filtered.stage != "filtered":
        raise ValueError("generate_hypotheses expects a filtered CandidateSet")
    names = [get_segment(graph, sid).qualified_name for sid in filtered.ids]

    def hypothesize(sid: str) -> Hypothesis:
        seg = get_segment(graph, sid)
        request = AgentRequest(
            AgentRole.HYPOTHESIS,
            report.id,
            focus_segment=sid,
            context={
                "report": report.text,
                "segment_name": seg.qualified_name,
                "segment_body": truncate_body(seg.body, body_cap),
                "candidate_names": ", ".join(names),
            },
            temperature=temperature,
        )
        try:
            response = backend.complete(request)
        except BackendError as exc:
            logger.warning("hypothesis call failed for %s/%s: %s", report.id, sid, exc)
            return Hypothesis(sid, "", "low", 0.0)
        if not isinstance(response, HypothesisResponse):
            return Hypothesis(sid, "", "low", 0.0)
        return repair_hypothesis(sid, response)

    return _map_ordered(hypothesize, filtered.ids, workers)


def neutral_hypotheses(filtered: CandidateSet) -> list[Hypothesis]:
    """Hypothesis stage disabled: every filtered candidate carries its filter score."""
    return [
        Hypothesis(sid, "", category_for(min(1.0, max(0.0, score))), min(1.0, max(0.0, score)))
        for sid, score in filtered.entries
    ]


def retain_for_investigation(hypotheses: Iterable[Hypothesis]) -> list[Hypothesis]:
    kept = [h for h in hypotheses if h.category in ("high", "medium")]
    return sorted(kept, key=lambda h: -h.score)
