from .backend import (
    AgentRequest,
    AgentResponse,
    AgentRole,
    Backend,
    CountingBackend,
    ExplorationVerdict,
    HypothesisResponse,
    RelevanceResponse,
    RemoteBackend,
    RemoteConfig,
    RestructureResponse,
    ScriptedBackend,
    ScriptedScript,
    ValidationResponse,
    load_script,
    parse_payload,
    parse_script,
)
from .prompts import render_prompt, required_fields

__all__ = [
    "AgentRequest",
    "AgentResponse",
    "AgentRole",
    "Backend",
    "CountingBackend",
    "ExplorationVerdict",
    "HypothesisResponse",
    "RelevanceResponse",
    "RemoteBackend",
    "RemoteConfig",
    "RestructureResponse",
    "ScriptedBackend",
    "ScriptedScript",
    "ValidationResponse",
    "load_script",
    "parse_payload",
    "parse_script",
    "render_prompt",
    "required_fields",
]
