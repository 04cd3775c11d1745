"""Hypothesis testing: a supervisor reviews a segment and delegates call-chain
exploration to a depth-first explorer with confidence pruning and early stop.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Iterable

from .agents import AgentRequest, AgentRole, Backend, ExplorationVerdict
from .code_graph import CodeGraph, callees_of, get_segment
from .errors import BackendError, PruneTargetAbsent, UnknownSegment
from .front import DEFAULT_BODY_CAP, BugReport, Hypothesis, truncate_body

logger = logging.getLogger(__name__)

DEFAULT_TAU = 0.9
DEFAULT_MAX_DEPTH_CAP = 5
DEFAULT_ACCEPTANCE = 0.6
DEFAULT_MAX_ROUNDS = 2
FAILURE_PENALTY = 0.5

TRACE_ACTIONS = ("expand", "prune", "early_stop", "skip_visited", "skip_depth")


@dataclass(frozen=True)
class CallChain:
    path: tuple[str, ...]
    confidence: float = 0.0

    def validate(self, graph: CodeGraph) -> None:
        if len(set(self.path)) != len(self.path):
            raise ValueError(f"chain repeats a segment: {self.path}")
        for a, b in zip(self.path, self.path[1:]):
            if b not in callees_of(graph, a, "invokes"):
                raise ValueError(f"chain step {a} -> {b} is not an invokes edge")


@dataclass(frozen=True)
class ExplorationParams:
    max_depth: int
    tau: float = DEFAULT_TAU
    c_parent: float = 0.0

    def __post_init__(self) -> None:
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if not 0.0 < self.tau <= 1.0:
            raise ValueError("tau must lie in (0, 1]")
        if not 0.0 <= self.c_parent <= 1.0:
            raise ValueError("c_parent must lie in [0, 1]")


@dataclass(frozen=True)
class TraceRecord:
    segment: str
    depth: int
    conf: float | None
    action: str

    def to_dict(self) -> dict[str, Any]:
        return {"segment": self.segment, "depth": self.depth, "conf": self.conf, "action": self.action}


class Scratchpad:
    """Exploration-local working memory of (segment, verdict) entries."""

    def __init__(self) -> None:
        self.entries: list[tuple[str, ExplorationVerdict]] = []

    def __contains__(self, seg: object) -> bool:
        return any(s == seg for s, _ in self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def segments(self) -> list[str]:
        return [s for s, _ in self.entries]

    def push(self, seg: str, verdict: ExplorationVerdict) -> "Scratchpad":
        if seg in self:
            raise ValueError(f"{seg} already on the scratchpad")
        self.entries.append((seg, verdict))
        return self

    def prune(self, from_seg: str) -> "Scratchpad":
        for i, (s, _) in enumerate(self.entries):
            if s == from_seg:
                del self.entries[i:]
                return self
        raise PruneTargetAbsent(f"PruneTargetAbsent: {from_seg!r} not on the scratchpad")

    def notes(self) -> list[str]:
        return [f"{s}: conf={v.conf:.2f} {v.rationale}".rstrip() for s, v in self.entries]


def scratchpad_push(pad: Scratchpad, seg: str, verdict: ExplorationVerdict) -> Scratchpad:
    return pad.push(seg, verdict)


def scratchpad_prune(pad: Scratchpad, from_seg: str) -> Scratchpad:
    return pad.prune(from_seg)


class ChainExplorer:
    """One exploration agent: depth-first walk over invokes edges.

    A segment whose confidence falls below its parent's is pruned (its callees
    are never queried); the first confidence reaching ``tau`` stops the whole
    run. The visited set is never shrunk on backtrack, so a pruned segment
    stays unreachable through other parents for the rest of the run.
    """

    def __init__(
        self,
        report: BugReport,
        graph: CodeGraph,
        backend: Backend,
        params: ExplorationParams,
        *,
        visited: set[str] | None = None,
        body_cap: int = DEFAULT_BODY_CAP,
        temperature: float = 0.5,
    ):
        self.report = report
        self.graph = graph
        self.backend = backend
        self.params = params
        self.visited: set[str] = visited if visited is not None else set()
        self.body_cap = body_cap
        self.temperature = temperature
        self.scratchpad = Scratchpad()
        self.trace: list[TraceRecord] = []
        self.queried: list[str] = []
        self.verdicts: dict[str, ExplorationVerdict] = {}
        self._stopped = False
        self._best = CallChain((), 0.0)

    def _reason(self, seg: str, path: list[str]) -> ExplorationVerdict | None:
        try:
            segment = get_segment(self.graph, seg)
        except UnknownSegment:
            logger.warning("explorer reached unknown segment %s; pruning", seg)
            return None
        callees = callees_of(self.graph, seg, "invokes")
        request = AgentRequest(
            AgentRole.EXPLORER,
            self.report.id,
            focus_segment=seg,
            context={
                "report": self.report.text,
                "path": " -> ".join(path),
                "segment_name": segment.qualified_name,
                "segment_body": truncate_body(segment.body, self.body_cap),
                "callees": callees,
                "scratchpad": self.scratchpad.notes(),
                "tau": self.params.tau,
            },
            temperature=self.temperature,
        )
        self.queried.append(seg)
        try:
            verdict = self.backend.complete(request)
        except BackendError as exc:
            logger.warning("explorer call failed on %s: %s; pruning", seg, exc)
            return None
        if not isinstance(verdict, ExplorationVerdict):
            return None
        allowed = set(callees)
        keep = tuple(dict.fromkeys(c for c in verdict.calls_to_explore if c in allowed))
        if len(keep) != len(verdict.calls_to_explore):
            logger.debug("dropped non-callee suggestions from %s: %s", seg, verdict.calls_to_explore)
            verdict = ExplorationVerdict(verdict.conf, keep, verdict.rationale, verdict.max_depth)
        return verdict

    def _dfs(self, seg: str, path: list[str], depth: int, c_parent: float) -> None:
        if seg in self.visited:
            self.trace.append(TraceRecord(seg, depth, None, "skip_visited"))
            return
        if depth > self.params.max_depth:
            self.trace.append(TraceRecord(seg, depth, None, "skip_depth"))
            return
        self.visited.add(seg)
        path = [*path, seg]
        verdict = self._reason(seg, path)
        if verdict is None:
            self.trace.append(TraceRecord(seg, depth, 0.0, "prune"))
            return
        self.verdicts[seg] = verdict
        self.scratchpad.push(seg, verdict)
        conf = verdict.conf
        if conf < c_parent:
            self.scratchpad.prune(seg)
            self.trace.append(TraceRecord(seg, depth, conf, "prune"))
            return
        if conf > self._best.confidence:
            self._best = CallChain(tuple(path), conf)
        if conf >= self.params.tau:
            self._stopped = True
            self.trace.append(TraceRecord(seg, depth, conf, "early_stop"))
            return
        self.trace.append(TraceRecord(seg, depth, conf, "expand"))
        for nxt in verdict.calls_to_explore:
            if self._stopped:
                return
            self._dfs(nxt, path, depth + 1, conf)

    def run(self, start_seg: str, calls_to_explore: Iterable[str]) -> CallChain:
        """Explore from ``start_seg`` through the given seed calls; return the best chain."""
        self.scratchpad = Scratchpad()
        self._stopped = False
        self._best = CallChain((), 0.0)
        self.visited.add(start_seg)
        for call in calls_to_explore:
            if self._stopped:
                break
            self._dfs(call, [start_seg], 1, self.params.c_parent)
        if not self._best.path:
            return CallChain((start_seg,), 0.0)
        return self._best

    @property
    def early_stopped(self) -> bool:
        return self._stopped


def click2cause(
    report: BugReport,
    start_seg: str,
    calls_to_explore: Iterable[str],
    params: ExplorationParams,
    graph: CodeGraph,
    backend: Backend,
    **kwargs: Any,
) -> CallChain:
    get_segment(graph, start_seg)
    return ChainExplorer(report, graph, backend, params, **kwargs).run(start_seg, calls_to_explore)


# --------------------------------------------------------------------------
# supervisor


@dataclass
class InvestigationOutcome:
    hypothesis: Hypothesis
    chain: CallChain
    supervisor_conf: float
    accepted: bool
    backend_calls: int = 0
    rounds: int = 0
    traces: list[list[TraceRecord]] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)
    degraded: bool = False

    def to_dict(self) -> dict[str, Any]:
        return {
            "segment": self.hypothesis.segment,
            "hypothesis": self.hypothesis.statement,
            "hypothesis_score": self.hypothesis.score,
            "chain": list(self.chain.path),
            "chain_confidence": self.chain.confidence,
            "supervisor_conf": self.supervisor_conf,
            "accepted": self.accepted,
            "backend_calls": self.backend_calls,
            "rounds": self.rounds,
            "degraded": self.degraded,
            "notes": self.notes,
            "traces": [[r.to_dict() for r in run] for run in self.traces],
        }


@dataclass(frozen=True)
class SupervisorSettings:
    tau: float = DEFAULT_TAU
    max_depth_cap: int = DEFAULT_MAX_DEPTH_CAP
    acceptance_threshold: float = DEFAULT_ACCEPTANCE
    max_rounds: int = DEFAULT_MAX_ROUNDS
    body_cap: int = DEFAULT_BODY_CAP
    temperature: float = 0.5


def investigate(
    report: BugReport,
    hypothesis: Hypothesis,
    graph: CodeGraph,
    backend: Backend,
    settings: SupervisorSettings = SupervisorSettings(),
) -> InvestigationOutcome:
    """Review, optionally explore, then accept or reject one hypothesis."""
    start = hypothesis.segment
    segment = get_segment(graph, start)
    callees = callees_of(graph, start, "invokes")
    calls = 0

    def ask(phase: str, **extra: Any) -> ExplorationVerdict:
        nonlocal calls
        calls += 1
        context = {
            "phase": phase,
            "report": report.text,
            "hypothesis": hypothesis.statement or "(no hypothesis)",
            "segment_name": segment.qualified_name,
            "segment_body": truncate_body(segment.body, settings.body_cap),
            "callees": callees,
            **extra,
        }
        verdict = backend.complete(
            AgentRequest(AgentRole.SUPERVISOR, report.id, start, context, settings.temperature)
        )
        if not isinstance(verdict, ExplorationVerdict):
            raise BackendError(f"supervisor returned {type(verdict).__name__}")
        return verdict

    def degraded(chain: CallChain, explorer_calls: int, traces, notes, rounds) -> InvestigationOutcome:
        logger.warning("supervisor failed on %s/%s; penalised fallback", report.id, start)
        return InvestigationOutcome(
            hypothesis, chain, hypothesis.score * FAILURE_PENALTY, False,
            calls + explorer_calls, rounds, traces, notes, degraded=True,
        )

    try:
        review = ask("review")
    except BackendError:
        return degraded(CallChain((start,), 0.0), 0, [], [], 0)

    allowed = set(callees)
    seeds = [c for c in dict.fromkeys(review.calls_to_explore) if c in allowed]
    if not seeds:
        return InvestigationOutcome(
            hypothesis, CallChain((start,), 0.0), review.conf,
            review.conf >= settings.acceptance_threshold, calls, 0,
            notes=[f"{start}: conf={review.conf:.2f} {review.rationale}".rstrip()],
        )

    depth = min(review.max_depth or settings.max_depth_cap, settings.max_depth_cap)
    params = ExplorationParams(depth, settings.tau, hypothesis.score)
    judged: set[str] = {start}
    traces: list[list[TraceRecord]] = []
    notes: list[str] = [f"{start}: conf={review.conf:.2f} {review.rationale}".rstrip()]
    explorer_calls = 0
    best: CallChain | None = None
    supervisor_conf = review.conf
    rounds = 0

    while seeds and rounds < settings.max_rounds:
        rounds += 1
        explorer = ChainExplorer(
            report, graph, backend, params,
            body_cap=settings.body_cap, temperature=settings.temperature,
        )
        chain = explorer.run(start, seeds)
        explorer_calls += len(explorer.queried)
        judged.update(explorer.queried)
        traces.append(explorer.trace)
        notes.extend(explorer.scratchpad.notes())
        if best is None or chain.confidence > best.confidence:
            best = chain
        try:
            verdict = ask(
                "assess",
                round=rounds,
                chain=" -> ".join(best.path),
                chain_confidence=best.confidence,
                scratchpad=explorer.scratchpad.notes(),
                evidence_conf=best.confidence if best.confidence > 0 else review.conf,
            )
        except BackendError:
            return degraded(best, explorer_calls, traces, notes, rounds)
        supervisor_conf = verdict.conf
        if supervisor_conf >= settings.acceptance_threshold:
            break
        seeds = [c for c in dict.fromkeys(verdict.calls_to_explore) if c in allowed and c not in judged]

    assert best is not None
    return InvestigationOutcome(
        hypothesis, best, supervisor_conf, supervisor_conf >= settings.acceptance_threshold,
        calls + explorer_calls, rounds, traces, notes,
    )
