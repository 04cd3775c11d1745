"""Observer validation, score fusion, final method ranking and document projection."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any, Iterable, Sequence

from .agents import AgentRequest, AgentRole, Backend, ValidationResponse
from .code_graph import CodeGraph, get_segment
from .errors import BackendError
from .front import CandidateSet, BugReport, Hypothesis
from .investigation import CallChain, InvestigationOutcome

logger = logging.getLogger(__name__)

INVESTIGATED = "investigated"
HYPOTHESIS_BACKFILL = "hypothesis_backfill"
FILTER_BACKFILL = "filter_backfill"
PROVENANCES = (INVESTIGATED, HYPOTHESIS_BACKFILL, FILTER_BACKFILL)


@dataclass(frozen=True)
class ScoredCandidate:
    chain: CallChain
    hypothesis: Hypothesis
    supervisor_conf: float
    observer_conf: float
    final_score: float
    accepted: bool = True


@dataclass(frozen=True)
class RankedResult:
    bug_id: str
    methods: tuple[tuple[str, str], ...]
    documents: tuple[str, ...]
    k: int = 10

    def to_dict(self) -> dict[str, Any]:
        return {
            "bug_id": self.bug_id,
            "methods": [{"segment_id": sid, "provenance": prov} for sid, prov in self.methods],
            "documents": list(self.documents),
        }


def fuse(supervisor_conf: float, observer_conf: float, supervisor_weight: float = 0.5) -> float:
    """Weighted mean; the default weight is the plain arithmetic mean."""
    return supervisor_weight * supervisor_conf + (1.0 - supervisor_weight) * observer_conf


def observe(
    report: BugReport,
    candidate: InvestigationOutcome,
    backend: Backend,
    *,
    temperature: float = 0.5,
) -> float:
    request = AgentRequest(
        AgentRole.OBSERVER,
        report.id,
        focus_segment=candidate.hypothesis.segment,
        context={
            "candidate_key": candidate.hypothesis.segment,
            "report": report.text,
            "hypothesis": candidate.hypothesis.statement or "(no hypothesis)",
            "chain": " -> ".join(candidate.chain.path),
            "traces": candidate.notes,
        },
        temperature=temperature,
    )
    try:
        response = backend.complete(request)
    except BackendError as exc:
        logger.warning("observer failed for %s/%s (%s); using supervisor confidence",
                       report.id, candidate.hypothesis.segment, exc)
        return candidate.supervisor_conf
    if not isinstance(response, ValidationResponse):
        return candidate.supervisor_conf
    return response.score


def score_candidate(
    outcome: InvestigationOutcome, observer_conf: float, supervisor_weight: float = 0.5
) -> ScoredCandidate:
    return ScoredCandidate(
        chain=outcome.chain,
        hypothesis=outcome.hypothesis,
        supervisor_conf=outcome.supervisor_conf,
        observer_conf=observer_conf,
        final_score=fuse(outcome.supervisor_conf, observer_conf, supervisor_weight),
        accepted=outcome.accepted,
    )


def split_investigated(
    candidates: Sequence[ScoredCandidate], hypotheses: Sequence[Hypothesis]
) -> tuple[list[ScoredCandidate], list[ScoredCandidate]]:
    """Partition candidates into the lead block and those demoted into backfill.

    Accepted candidates always lead. A rejected one leads only if its fused
    score beats every non-investigated hypothesis score; otherwise it is
    ranked among the backfill at its hypothesis score.
    """
    investigated = {c.hypothesis.segment for c in candidates}
    backfill_scores = [h.score for h in hypotheses if h.segment not in investigated]
    ceiling = max(backfill_scores, default=float("-inf"))
    lead = [c for c in candidates if c.accepted or c.final_score > ceiling]
    demoted = [c for c in candidates if not (c.accepted or c.final_score > ceiling)]
    lead.sort(key=lambda c: (-c.final_score, -c.hypothesis.score, c.hypothesis.segment))
    return lead, demoted


def rank_methods(
    candidates: Sequence[ScoredCandidate],
    hypotheses: Sequence[Hypothesis],
    filtered: CandidateSet | Iterable[str],
    k: int = 10,
) -> tuple[tuple[str, str], ...]:
    if k < 1:
        raise ValueError("k must be >= 1")
    out: list[tuple[str, str]] = []
    seen: set[str] = set()

    def add(sid: str, provenance: str) -> None:
        if sid not in seen and len(out) < k:
            seen.add(sid)
            out.append((sid, provenance))

    lead, demoted = split_investigated(candidates, hypotheses)
    for cand in lead:
        for sid in cand.chain.path:
            add(sid, INVESTIGATED)

    investigated = {c.hypothesis.segment for c in candidates}
    demoted_by_seg = {c.hypothesis.segment: c for c in demoted}
    # input order then stable sort keeps ties in hypothesis-generation order
    backfill: list[tuple[float, tuple[str, ...]]] = []
    for h in hypotheses:
        if h.segment in demoted_by_seg:
            backfill.append((h.score, demoted_by_seg.pop(h.segment).chain.path))
        elif h.segment not in investigated:
            backfill.append((h.score, (h.segment,)))
    for cand in demoted_by_seg.values():  # hypothesis missing from the list
        backfill.append((cand.hypothesis.score, cand.chain.path))
    backfill.sort(key=lambda item: -item[0])
    for _, path in backfill:
        for sid in path:
            add(sid, HYPOTHESIS_BACKFILL)

    ids = filtered.ids if isinstance(filtered, CandidateSet) else list(filtered)
    for sid in ids:
        add(sid, FILTER_BACKFILL)
    return tuple(out)


def rank_documents(methods: Sequence[tuple[str, str]] | Sequence[str], graph: CodeGraph, k: int = 10) -> tuple[str, ...]:
    docs: dict[str, None] = {}
    for item in methods:
        sid = item[0] if isinstance(item, tuple) else item
        path = get_segment(graph, sid).document_path
        if path not in docs:
            if len(docs) == k:
                break
            docs[path] = None
    return tuple(docs)
