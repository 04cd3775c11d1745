"""Run configuration, shared per-bug pipeline state, and the end-to-end driver."""

from __future__ import annotations

import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

from .agents import Backend, CountingBackend, RemoteBackend, RemoteConfig, ScriptedBackend
from .code_graph import CodeGraph, index_filename, load_graph
from .errors import CogniLocError, ConfigError, EmptyQuery, StageWriteError
from .front import (
    BugReport,
    CandidateSet,
    Hypothesis,
    filter_candidates,
    generate_hypotheses,
    neutral_hypotheses,
    passthrough_filter,
    restructure_report,
    retain_for_investigation,
    retrieve_candidates,
)
from .investigation import InvestigationOutcome, SupervisorSettings, investigate
from .ranking import FILTER_BACKFILL, RankedResult, ScoredCandidate, observe, rank_documents, rank_methods, score_candidate

logger = logging.getLogger(__name__)

CONFIG_ENV = "COGNILOC_CONFIG"
STAGES = ("restructuring", "filtering", "hypothesis", "investigation", "observer")


@dataclass
class RunConfig:
    backend: dict[str, Any] = field(default_factory=dict)
    top_retrieve: int = 100
    top_filter: int = 10
    tau: float = 0.9
    max_depth_cap: int = 5
    acceptance_threshold: float = 0.6
    k: int = 10
    temperature: float = 0.5
    parallelism: int = 1
    disable: list[str] = field(default_factory=list)
    supervisor_weight: float = 0.5
    body_char_cap: int = 8000
    max_rounds: int = 2
    audit: bool | None = None

    def __post_init__(self) -> None:
        for name in ("top_retrieve", "top_filter", "max_depth_cap", "k", "parallelism", "body_char_cap", "max_rounds"):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
        if not 0.0 < self.tau <= 1.0:
            raise ConfigError(f"tau must lie in (0, 1], got {self.tau}")
        for name in ("acceptance_threshold", "temperature", "supervisor_weight"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {getattr(self, name)}")
        unknown = set(self.disable) - set(STAGES)
        if unknown:
            raise ConfigError(f"disable: unknown stage(s) {sorted(unknown)}; choose from {STAGES}")

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any], base_dir: str | Path | None = None) -> "RunConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(raw) - names
        if unknown:
            raise ConfigError(f"unknown config field(s) {sorted(unknown)}")
        cfg = cls(**dict(raw))
        scripted = cfg.backend.get("scripted")
        if scripted and base_dir is not None and not Path(scripted).is_absolute():
            cfg.backend = {**cfg.backend, "scripted": str(Path(base_dir) / scripted)}
        return cfg

    @classmethod
    def load(cls, path: str | Path | None = None) -> "RunConfig":
        path = path or os.environ.get(CONFIG_ENV)
        if not path:
            raise ConfigError(f"no config given and {CONFIG_ENV} is unset")
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
        return cls.from_dict(raw, Path(path).parent)

    def enabled(self, stage: str) -> bool:
        return stage not in self.disable

    @property
    def is_scripted(self) -> bool:
        return "scripted" in self.backend

    def with_disabled(self, *stages: str) -> "RunConfig":
        return RunConfig(**{**asdict(self), "disable": sorted(set(self.disable) | set(stages))})

    def supervisor_settings(self) -> SupervisorSettings:
        return SupervisorSettings(
            tau=self.tau,
            max_depth_cap=self.max_depth_cap,
            acceptance_threshold=self.acceptance_threshold,
            max_rounds=self.max_rounds,
            body_cap=self.body_char_cap,
            temperature=self.temperature,
        )


def make_backend(config: RunConfig) -> Backend:
    if "scripted" in config.backend:
        return ScriptedBackend.from_file(config.backend["scripted"])
    if "remote" in config.backend:
        remote = dict(config.backend["remote"])
        try:
            return RemoteBackend(RemoteConfig(**remote))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad remote backend config: {exc}") from exc
    raise ConfigError("backend must be {'scripted': path} or {'remote': {...}}")


class PipelineState:
    """Shared per-bug state. Each stage field may be written exactly once."""

    STAGE_FIELDS = (
        "restructured", "retrieved", "filtered", "hypotheses", "retained", "outcomes", "scored", "result",
    )

    def __init__(self, bug: BugReport):
        object.__setattr__(self, "bug", bug)
        object.__setattr__(self, "call_counter", {})
        object.__setattr__(self, "_written", set())
        for name in self.STAGE_FIELDS:
            object.__setattr__(self, name, None)

    def __setattr__(self, name: str, value: Any) -> None:
        if name not in self.STAGE_FIELDS:
            raise StageWriteError(f"{name!r} is not a stage field")
        if name in self._written:
            raise StageWriteError(f"stage field {name!r} was already written")
        self._written.add(name)
        object.__setattr__(self, name, value)

    restructured: str
    retrieved: CandidateSet
    filtered: CandidateSet
    hypotheses: list[Hypothesis]
    retained: list[Hypothesis]
    outcomes: list[InvestigationOutcome]
    scored: list[ScoredCandidate]
    result: RankedResult

    def to_dict(self) -> dict[str, Any]:
        def cands(cs: CandidateSet | None) -> list | None:
            return None if cs is None else [{"segment_id": s, "score": v} for s, v in cs.entries]

        def hyps(hs: list[Hypothesis] | None) -> list | None:
            return None if hs is None else [asdict(h) for h in hs]

        return {
            "bug": self.bug.to_dict(),
            "restructured": self.restructured,
            "retrieved": cands(self.retrieved),
            "filtered": cands(self.filtered),
            "hypotheses": hyps(self.hypotheses),
            "retained": hyps(self.retained),
            "outcomes": None if self.outcomes is None else [o.to_dict() for o in self.outcomes],
            "scored": None if self.scored is None else [
                {
                    "segment": c.hypothesis.segment,
                    "chain": list(c.chain.path),
                    "supervisor_conf": c.supervisor_conf,
                    "observer_conf": c.observer_conf,
                    "final_score": c.final_score,
                    "accepted": c.accepted,
                }
                for c in self.scored
            ],
            "result": None if self.result is None else self.result.to_dict(),
            "call_counter": dict(sorted(self.call_counter.items())),
        }


def _finish_empty(state: PipelineState, k: int) -> PipelineState:
    for name in PipelineState.STAGE_FIELDS[1:-1]:
        if getattr(state, name) is None:
            setattr(state, name, CandidateSet((), "retrieved" if name == "retrieved" else "filtered")
                    if name in ("retrieved", "filtered") else [])
    state.result = RankedResult(state.bug.id, (), (), k)
    return state


def localize(bug: BugReport, graph: CodeGraph, backend: Backend, config: RunConfig) -> PipelineState:
    """Run every enabled stage for one bug against its own version's graph."""
    if (bug.system, bug.version) != (graph.system, graph.version):
        raise ConfigError(
            f"bug {bug.id} targets {bug.system}@{bug.version}, graph is {graph.system}@{graph.version}"
        )
    counter = CountingBackend(backend)
    state = PipelineState(bug)
    t = config.temperature
    try:
        if config.enabled("restructuring"):
            state.restructured = restructure_report(bug, counter, temperature=t)
        else:
            state.restructured = bug.text

        try:
            state.retrieved = retrieve_candidates(state.restructured, graph, config.top_retrieve)
        except EmptyQuery:
            logger.warning("bug %s: query has no indexable terms", bug.id)
            state.retrieved = CandidateSet((), "retrieved")
        if not state.retrieved.entries:
            return _finish_empty(state, config.k)

        if config.enabled("filtering"):
            state.filtered = filter_candidates(
                bug, state.retrieved, graph, counter, config.top_filter,
                body_cap=config.body_char_cap, temperature=t, workers=config.parallelism,
            )
        else:
            state.filtered = passthrough_filter(state.retrieved, config.top_filter)

        if config.enabled("hypothesis"):
            state.hypotheses = generate_hypotheses(
                bug, state.filtered, graph, counter,
                body_cap=config.body_char_cap, temperature=t, workers=config.parallelism,
            )
            state.retained = retain_for_investigation(state.hypotheses)
        else:
            state.hypotheses = neutral_hypotheses(state.filtered)
            state.retained = list(state.hypotheses)

        if config.enabled("investigation"):
            settings = config.supervisor_settings()
            state.outcomes = [investigate(bug, h, graph, counter, settings) for h in state.retained]
        else:
            state.outcomes = []

        scored = []
        for outcome in state.outcomes:
            if config.enabled("observer"):
                obs = observe(bug, outcome, counter, temperature=t)
            else:
                obs = outcome.supervisor_conf
            scored.append(score_candidate(outcome, obs, config.supervisor_weight))
        state.scored = scored

        methods = rank_methods(state.scored, state.hypotheses, state.filtered, config.k)
        state.result = RankedResult(bug.id, methods, rank_documents(methods, graph, config.k), config.k)
        return state
    finally:
        state.call_counter.update(counter.counts)


def bm25_only(bug: BugReport, graph: CodeGraph, k: int = 10, query: str | None = None) -> RankedResult:
    """Retrieval order as the final ranking (no agents)."""
    try:
        hits = retrieve_candidates(query if query is not None else bug.text, graph, k)
    except EmptyQuery:
        return RankedResult(bug.id, (), (), k)
    methods = tuple((sid, FILTER_BACKFILL) for sid in hits.ids)
    return RankedResult(bug.id, methods, rank_documents(methods, graph, k), k)


def call_ceiling(config: RunConfig, retained: int, n_segments: int) -> dict[str, int]:
    """Upper bounds on backend calls for one bug.

    Non-supervisor calls: 1 + top_retrieve + top_filter + retained*|V| + retained.
    Supervisor calls: one review plus one assessment per exploration round.
    """
    return {
        "non_supervisor": 1 + config.top_retrieve + config.top_filter + retained * n_segments + retained,
        "supervisor": retained * (1 + config.max_rounds),
    }


# --------------------------------------------------------------------------
# multi-bug driver


@dataclass
class BugOutcome:
    bug_id: str
    state: PipelineState | None = None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None

    def result_record(self) -> dict[str, Any]:
        if self.ok:
            return {**self.state.result.to_dict(), "status": "ok"}
        return {"bug_id": self.bug_id, "methods": [], "documents": [], "status": "failed", "error": self.error}


class GraphStore:
    """Lazily loads saved graphs from an index directory, keyed by (system, version)."""

    def __init__(self, index_dir: str | Path):
        self.index_dir = Path(index_dir)
        self._cache: dict[tuple[str, str], CodeGraph] = {}
        self._scanned: dict[tuple[str, str], Path] | None = None

    def _scan(self) -> dict[tuple[str, str], Path]:
        if self._scanned is None:
            self._scanned = {}
            for path in sorted(self.index_dir.glob("*.gz")):
                try:
                    g = load_graph(path)
                except CogniLocError:
                    continue
                self._scanned.setdefault((g.system, g.version), path)
                self._cache.setdefault((g.system, g.version), g)
        return self._scanned

    def get(self, system: str, version: str) -> CodeGraph:
        key = (system, version)
        if key in self._cache:
            return self._cache[key]
        path = self.index_dir / index_filename(system, version)
        if path.exists():
            self._cache[key] = load_graph(path)
            return self._cache[key]
        if key in self._scan():
            return self._cache[key]
        raise ConfigError(f"no saved index for {system}@{version} in {self.index_dir}")


def run_localization(
    bugs: Sequence[BugReport],
    graphs: GraphStore | Callable[[str, str], CodeGraph],
    backend: Backend,
    config: RunConfig,
) -> list[BugOutcome]:
    get = graphs.get if isinstance(graphs, GraphStore) else graphs
    # load graphs up front so worker threads only read
    resolved: dict[tuple[str, str], CodeGraph | str] = {}
    for bug in bugs:
        key = (bug.system, bug.version)
        if key not in resolved:
            try:
                resolved[key] = get(*key)
            except CogniLocError as exc:
                resolved[key] = str(exc)

    def one(bug: BugReport) -> BugOutcome:
        graph = resolved[(bug.system, bug.version)]
        if isinstance(graph, str):
            return BugOutcome(bug.id, error=graph)
        try:
            return BugOutcome(bug.id, state=localize(bug, graph, backend, config))
        except CogniLocError as exc:
            logger.error("bug %s failed: %s", bug.id, exc)
            return BugOutcome(bug.id, error=str(exc))

    if config.parallelism <= 1 or len(bugs) <= 1:
        return [one(b) for b in bugs]
    with ThreadPoolExecutor(max_workers=config.parallelism) as pool:
        return list(pool.map(one, bugs))
