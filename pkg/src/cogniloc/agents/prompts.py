"""Static prompt templates, one file per role under ``templates/``."""

from __future__ import annotations

import json
from functools import lru_cache
from pathlib import Path
from string import Template
from typing import Any, Mapping

from ..errors import MissingContextField

TEMPLATE_DIR = Path(__file__).with_name("templates")


def template_name(role: str, context: Mapping[str, Any]) -> str:
    role = getattr(role, "value", role)
    if role == "supervisor":
        return f"supervisor_{context.get('phase', 'review')}"
    return role


@lru_cache(maxsize=None)
def _load(name: str) -> tuple[Template, tuple[str, ...]]:
    path = TEMPLATE_DIR / f"{name}.txt"
    lines = path.read_text(encoding="utf-8").splitlines(keepends=True)
    text = "".join(line for line in lines if not line.startswith("# template:"))
    template = Template(text)
    fields = []
    for match in template.pattern.finditer(text):
        name_ = match.group("named") or match.group("braced")
        if name_ and name_ not in fields:
            fields.append(name_)
    return template, tuple(fields)


def required_fields(role: str, context: Mapping[str, Any] | None = None) -> tuple[str, ...]:
    return _load(template_name(role, context or {}))[1]


def _format(value: Any) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (list, tuple)):
        return "\n".join(f"- {_format(v)}" for v in value) if value else "(none)"
    if isinstance(value, Mapping):
        return json.dumps(value, sort_keys=True, ensure_ascii=False)
    return str(value)


def render_prompt(role: str, context: Mapping[str, Any]) -> str:
    """Fill the role's template from ``context``; extra keys are ignored."""
    template, fields = _load(template_name(role, context))
    for name in fields:
        if name not in context or context[name] is None:
            raise MissingContextField(name)
    return template.substitute({name: _format(context[name]) for name in fields})
