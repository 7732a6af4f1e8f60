"""``key = value`` text files: one pair per line, ``#`` starts a comment."""

from __future__ import annotations

import dataclasses
from collections.abc import Iterable, Mapping
from pathlib import Path

from rlcombo.agent import AgentConfig


def parse_key_values(text: str, repeatable: Iterable[str] = ()) -> dict:
    """Parse ``text`` into a dict; keys in ``repeatable`` collect a list."""
    repeatable = set(repeatable)
    out: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        if key in repeatable:
            out.setdefault(key, []).append(value)
        elif key in out:
            raise ValueError(f"line {lineno}: duplicate key {key!r}")
        else:
            out[key] = value
    return out


_AGENT_FIELDS = {f.name: f for f in dataclasses.fields(AgentConfig)}


def _coerce(name: str, value: str):
    if name in ("k_max", "warmup", "horizon"):
        return int(value)
    if name in ("fallback", "fallback_model"):
        return value or None
    return float(value)


def agent_overrides(pairs: Mapping[str, str]) -> dict:
    """Typed AgentConfig fields from string pairs; other keys are ignored."""
    return {k: _coerce(k, v) for k, v in pairs.items() if k in _AGENT_FIELDS}


def read_config(path: str | Path) -> dict:
    return parse_key_values(Path(path).read_text(encoding="utf-8"))


def format_config(values: Mapping[str, object]) -> str:
    lines = []
    for key, value in values.items():
        lines.append(f"{key} = {'' if value is None else value}")
    return "\n".join(lines) + "\n"
