"""Agent roles, request/response shapes, and the two completion backends.

Every agent in the pipeline talks to a model through ``Backend.complete``.
``ScriptedBackend`` answers from a canned table and is what the tests and the
synthetic scenarios use; ``RemoteBackend`` posts to a chat-completions style
endpoint and coerces the reply into the role's response shape.
"""

from __future__ import annotations

import json
import logging
import re
import threading
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Mapping, Protocol, Union

from ..errors import (
    BackendUnavailable,
    MalformedScript,
    MissingScriptEntry,
    SchemaViolation,
    ScoreOutOfRange,
)
from .prompts import render_prompt

logger = logging.getLogger(__name__)

DEFAULT_TEMPERATURE = 0.5
CATEGORIES = ("high", "medium", "low")


class AgentRole(str, Enum):
    RESTRUCTURER = "restructurer"
    FILTER = "filter"
    HYPOTHESIS = "hypothesis"
    SUPERVISOR = "supervisor"
    EXPLORER = "explorer"
    OBSERVER = "observer"


@dataclass(frozen=True)
class AgentRequest:
    role: AgentRole
    bug_id: str
    focus_segment: str | None = None
    context: Mapping[str, Any] = field(default_factory=dict)
    temperature: float = DEFAULT_TEMPERATURE

    def __post_init__(self) -> None:
        object.__setattr__(self, "role", AgentRole(self.role))
        if not 0.0 <= self.temperature <= 1.0:
            raise ValueError(f"temperature {self.temperature} outside [0, 1]")


# --------------------------------------------------------------------------
# response payloads


@dataclass(frozen=True)
class RestructureResponse:
    text: str


@dataclass(frozen=True)
class RelevanceResponse:
    score: float


@dataclass(frozen=True)
class HypothesisResponse:
    statement: str
    category: str
    score: float


@dataclass(frozen=True)
class ExplorationVerdict:
    """What the explorer (or supervisor) concluded about one segment.

    ``calls_to_explore`` is ordered by suspiciousness; ``max_depth`` is only
    meaningful for supervisor review verdicts.
    """

    conf: float
    calls_to_explore: tuple[str, ...] = ()
    rationale: str = ""
    max_depth: int | None = None


@dataclass(frozen=True)
class ValidationResponse:
    score: float


AgentResponse = Union[
    RestructureResponse, RelevanceResponse, HypothesisResponse, ExplorationVerdict, ValidationResponse
]

RESPONSE_TYPES: dict[AgentRole, type] = {
    AgentRole.RESTRUCTURER: RestructureResponse,
    AgentRole.FILTER: RelevanceResponse,
    AgentRole.HYPOTHESIS: HypothesisResponse,
    AgentRole.SUPERVISOR: ExplorationVerdict,
    AgentRole.EXPLORER: ExplorationVerdict,
    AgentRole.OBSERVER: ValidationResponse,
}


def _score(value: Any, what: str, clamp: bool) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaViolation(f"{what} must be a number, got {value!r}")
    value = float(value)
    if value != value:  # NaN
        raise SchemaViolation(f"{what} is NaN")
    if 0.0 <= value <= 1.0:
        return value
    if not clamp:
        raise ScoreOutOfRange(f"ScoreOutOfRange: {what}={value} not in [0, 1]")
    clamped = min(1.0, max(0.0, value))
    logger.warning("clamped %s from %s to %s", what, value, clamped)
    return clamped


def parse_payload(role: AgentRole, payload: Any, *, clamp: bool = False) -> AgentResponse:
    """Coerce a decoded structured payload into the response type for ``role``.

    Raises SchemaViolation on shape errors. Out-of-range scores are clamped
    (and logged) when ``clamp`` is set, otherwise ScoreOutOfRange is raised.
    """
    role = AgentRole(role)
    if role is AgentRole.RESTRUCTURER:
        text = payload.get("text") if isinstance(payload, Mapping) else payload
        if not isinstance(text, str):
            raise SchemaViolation("restructurer payload must be text")
        return RestructureResponse(text)
    if role in (AgentRole.FILTER, AgentRole.OBSERVER):
        value = payload.get("score") if isinstance(payload, Mapping) else payload
        cls = RelevanceResponse if role is AgentRole.FILTER else ValidationResponse
        return cls(_score(value, f"{role.value}.score", clamp))
    if not isinstance(payload, Mapping):
        raise SchemaViolation(f"{role.value} payload must be an object")
    if role is AgentRole.HYPOTHESIS:
        category = str(payload.get("category", "")).lower()
        if category not in CATEGORIES:
            raise SchemaViolation(f"hypothesis.category {payload.get('category')!r} not in {CATEGORIES}")
        statement = payload.get("statement", "")
        if not isinstance(statement, str):
            raise SchemaViolation("hypothesis.statement must be text")
        return HypothesisResponse(statement, category, _score(payload.get("score"), "hypothesis.score", clamp))
    # supervisor / explorer
    calls = payload.get("calls_to_explore", [])
    if not isinstance(calls, list) or not all(isinstance(c, str) for c in calls):
        raise SchemaViolation(f"{role.value}.calls_to_explore must be a list of segment ids")
    max_depth = payload.get("max_depth")
    if max_depth is not None and (isinstance(max_depth, bool) or not isinstance(max_depth, int) or max_depth < 1):
        raise SchemaViolation(f"{role.value}.max_depth must be a positive integer")
    rationale = payload.get("rationale", "")
    return ExplorationVerdict(
        conf=_score(payload.get("conf"), f"{role.value}.conf", clamp),
        calls_to_explore=tuple(calls),
        rationale=rationale if isinstance(rationale, str) else json.dumps(rationale),
        max_depth=max_depth,
    )


class Backend(Protocol):
    def complete(self, request: AgentRequest) -> AgentResponse: ...


class CountingBackend:
    """Wraps a backend and counts calls per role; one instance per bug run."""

    def __init__(self, inner: Backend):
        self.inner = inner
        self.counts: Counter[str] = Counter()
        self._lock = threading.Lock()

    def complete(self, request: AgentRequest) -> AgentResponse:
        with self._lock:
            self.counts[request.role.value] += 1
        return self.inner.complete(request)


# --------------------------------------------------------------------------
# scripted backend

_SECTION_ROLE = {
    "filter": AgentRole.FILTER,
    "hypothesis": AgentRole.HYPOTHESIS,
    "explore": AgentRole.EXPLORER,
    "supervise": AgentRole.SUPERVISOR,
    "observe": AgentRole.OBSERVER,
}
_BUG_SECTIONS = ("restructure", *_SECTION_ROLE)


@dataclass(frozen=True)
class SupervisorEntry:
    review: ExplorationVerdict
    assess: float | None = None
    reexplore: tuple[str, ...] = ()


@dataclass
class BugScript:
    restructure: RestructureResponse | None = None
    filter: dict[str, RelevanceResponse] = field(default_factory=dict)
    hypothesis: dict[str, HypothesisResponse] = field(default_factory=dict)
    explore: dict[str, ExplorationVerdict] = field(default_factory=dict)
    supervise: dict[str, SupervisorEntry] = field(default_factory=dict)
    observe: dict[str, ValidationResponse] = field(default_factory=dict)


@dataclass
class ScriptedScript:
    bugs: dict[str, BugScript] = field(default_factory=dict)
    defaults: dict[AgentRole, AgentResponse] = field(default_factory=dict)

    def counts(self, bug_id: str) -> dict[str, int]:
        bug = self.bugs[bug_id]
        return {
            "restructure": int(bug.restructure is not None),
            **{name: len(getattr(bug, name)) for name in _SECTION_ROLE},
        }


def _parse_supervisor_entry(raw: Any, where: str) -> SupervisorEntry:
    if not isinstance(raw, Mapping):
        raise MalformedScript(f"{where} must be an object")
    unknown = set(raw) - {"conf", "calls_to_explore", "rationale", "max_depth", "assess", "reexplore"}
    if unknown:
        raise MalformedScript(f"{where} has unknown field(s) {sorted(unknown)}")
    review = parse_payload(AgentRole.SUPERVISOR, {k: v for k, v in raw.items() if k not in ("assess", "reexplore")})
    assess = raw.get("assess")
    if assess is not None:
        assess = _score(assess, f"{where}.assess", clamp=False)
    reexplore = raw.get("reexplore", [])
    if not isinstance(reexplore, list) or not all(isinstance(c, str) for c in reexplore):
        raise MalformedScript(f"{where}.reexplore must be a list of segment ids")
    return SupervisorEntry(review, assess, tuple(reexplore))


def parse_script(doc: Any) -> ScriptedScript:
    """Validate a decoded script document (see README for the layout)."""
    if not isinstance(doc, Mapping):
        raise MalformedScript("script must be an object keyed by bug id")
    script = ScriptedScript()
    try:
        for role_name, raw in (doc.get("defaults") or {}).items():
            try:
                role = AgentRole(role_name)
            except ValueError:
                raise MalformedScript(f"defaults: unknown role {role_name!r}") from None
            if role is AgentRole.SUPERVISOR:
                script.defaults[role] = _parse_supervisor_entry(raw, "defaults.supervisor").review
            else:
                script.defaults[role] = parse_payload(role, raw)
        for bug_id, raw_bug in doc.items():
            if bug_id == "defaults":
                continue
            if not isinstance(raw_bug, Mapping):
                raise MalformedScript(f"{bug_id}: entry must be an object")
            unknown = set(raw_bug) - set(_BUG_SECTIONS)
            if unknown:
                raise MalformedScript(f"{bug_id}: unknown section(s) {sorted(unknown)}")
            bug = BugScript()
            if "restructure" in raw_bug:
                bug.restructure = parse_payload(AgentRole.RESTRUCTURER, raw_bug["restructure"])
            for section, role in _SECTION_ROLE.items():
                entries = raw_bug.get(section, {})
                if not isinstance(entries, Mapping):
                    raise MalformedScript(f"{bug_id}.{section} must be an object")
                target = getattr(bug, section)
                for key, raw in entries.items():
                    if role is AgentRole.SUPERVISOR:
                        target[key] = _parse_supervisor_entry(raw, f"{bug_id}.supervise.{key}")
                    else:
                        target[key] = parse_payload(role, raw)
            script.bugs[bug_id] = bug
    except ScoreOutOfRange:
        raise
    except SchemaViolation as exc:
        raise MalformedScript(str(exc)) from exc
    return script


def load_script(path: str | Path) -> ScriptedScript:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise MalformedScript(f"cannot read script {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise MalformedScript(f"{path}: not valid JSON ({exc})") from exc
    return parse_script(doc)


class ScriptedBackend:
    """Pure table lookup: the same request always yields the same response.

    Lookups are keyed by (bug, role, focus segment); the restructurer is keyed
    by bug only. Supervisor requests carry ``context["phase"]``: ``review``
    returns the scripted verdict, ``assess`` returns the scripted ``assess``
    score, falling back to the evidence confidence the caller supplies.
    """

    def __init__(self, script: ScriptedScript):
        self.script = script
        self.calls: Counter[str] = Counter()
        self._lock = threading.Lock()

    @classmethod
    def from_file(cls, path: str | Path) -> "ScriptedBackend":
        return cls(load_script(path))

    def _default(self, request: AgentRequest) -> AgentResponse:
        try:
            return self.script.defaults[request.role]
        except KeyError:
            raise MissingScriptEntry(
                f"MissingScriptEntry: no {request.role.value} entry for bug {request.bug_id!r}, "
                f"segment {request.focus_segment!r}, and no default"
            ) from None

    def complete(self, request: AgentRequest) -> AgentResponse:
        with self._lock:
            self.calls[request.role.value] += 1
        bug = self.script.bugs.get(request.bug_id)
        role = request.role
        if role is AgentRole.RESTRUCTURER:
            if bug is not None and bug.restructure is not None:
                return bug.restructure
            return self._default(request)
        if role is AgentRole.SUPERVISOR:
            entry = bug.supervise.get(request.focus_segment) if bug else None
            if request.context.get("phase") == "assess":
                if entry is not None and entry.assess is not None:
                    conf = entry.assess
                else:
                    conf = float(request.context.get("evidence_conf", 0.0))
                again = entry.reexplore if entry is not None and request.context.get("round", 1) == 1 else ()
                return ExplorationVerdict(conf=conf, calls_to_explore=again)
            return entry.review if entry is not None else self._default(request)
        section = {
            AgentRole.FILTER: "filter",
            AgentRole.HYPOTHESIS: "hypothesis",
            AgentRole.EXPLORER: "explore",
            AgentRole.OBSERVER: "observe",
        }[role]
        if bug is not None:
            hit = getattr(bug, section).get(request.focus_segment)
            if hit is not None:
                return hit
        return self._default(request)


# --------------------------------------------------------------------------
# remote backend

_FENCE_RE = re.compile(r"```(?:json)?\s*\n(.*?)```", re.DOTALL)

SYSTEM_PREAMBLE = (
    "You are one agent in a bug-localization pipeline. Answer with exactly one "
    "fenced ```json block that matches the requested schema."
)

_REPAIR_MESSAGE = (
    "Your previous reply could not be parsed. Reply again with only one fenced "
    "```json block matching the schema described above, and nothing else."
)


@dataclass
class RemoteConfig:
    endpoint: str
    models: dict[str, str]
    timeout: float = 60.0
    api_key_env: str | None = None
    # overrides the per-request temperature when set
    temperature: float | None = None

    def __post_init__(self) -> None:
        if self.temperature is not None and not 0.0 <= self.temperature <= 1.0:
            raise ValueError(f"temperature {self.temperature} outside [0, 1]")
        missing = [r.value for r in AgentRole if r.value not in self.models]
        if missing and "default" not in self.models:
            raise ValueError(f"models has no entry for {missing} and no 'default'")


def extract_structured_block(text: str) -> Any:
    """Decode the first fenced block in a model reply (bare JSON accepted too)."""
    match = _FENCE_RE.search(text)
    body = match.group(1) if match else text
    try:
        return json.loads(body)
    except json.JSONDecodeError as exc:
        raise SchemaViolation(f"SchemaViolation: reply is not a structured block ({exc})") from exc


class RemoteBackend:
    """Chat-completions client with per-role model routing.

    The reply must contain a fenced JSON block. One repair round-trip is made
    on a parse or shape failure before SchemaViolation is raised.
    """

    def __init__(self, config: RemoteConfig, client: Any = None):
        import httpx

        self.config = config
        self.calls: Counter[str] = Counter()
        self._lock = threading.Lock()
        self._client = client or httpx.Client(timeout=config.timeout)
        self._headers = {"Content-Type": "application/json"}
        if config.api_key_env:
            import os

            key = os.environ.get(config.api_key_env)
            if key:
                self._headers["Authorization"] = f"Bearer {key}"

    def _model_for(self, role: AgentRole) -> str:
        return self.config.models.get(role.value, self.config.models.get("default", ""))

    def _post(self, role: AgentRole, messages: list[dict[str, str]], temperature: float) -> str:
        import httpx

        body = {"model": self._model_for(role), "messages": messages, "temperature": temperature}
        try:
            resp = self._client.post(self.config.endpoint, json=body, headers=self._headers)
        except httpx.HTTPError as exc:
            raise BackendUnavailable(f"BackendUnavailable: {exc}") from exc
        if resp.status_code != 200:
            raise BackendUnavailable(f"BackendUnavailable: HTTP {resp.status_code} from {self.config.endpoint}")
        try:
            return resp.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise SchemaViolation(f"SchemaViolation: unexpected completion envelope ({exc})") from exc

    def complete(self, request: AgentRequest) -> AgentResponse:
        with self._lock:
            self.calls[request.role.value] += 1
        messages = [
            {"role": "system", "content": SYSTEM_PREAMBLE},
            {"role": "user", "content": render_prompt(request.role, request.context)},
        ]
        last_error: SchemaViolation | None = None
        for attempt in range(2):
            temperature = self.config.temperature if self.config.temperature is not None else request.temperature
            reply = self._post(request.role, messages, temperature)
            try:
                return parse_payload(request.role, extract_structured_block(reply), clamp=True)
            except SchemaViolation as exc:
                last_error = exc
                logger.info("%s reply unparseable (attempt %d): %s", request.role.value, attempt + 1, exc)
                messages = [*messages, {"role": "assistant", "content": reply}, {"role": "user", "content": _REPAIR_MESSAGE}]
        raise SchemaViolation(f"SchemaViolation: {request.role.value} output unusable after retry: {last_error}")
