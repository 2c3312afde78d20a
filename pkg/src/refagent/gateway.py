"""Uniform chat-completion access with scripted playback and record/replay.

Three backends share one contract: an HTTP backend speaking the
OpenAI-compatible chat-completions wire format, a scripted backend that
plays back a JSON playbook keyed by (agent, phase, attempt) for fully
deterministic tests, and a replay backend that serves recorded responses
by request digest. A recorder wraps any backend to produce cassettes.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import re
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .errors import (
    BackendError,
    NoCodeBlock,
    PlanParseError,
    PlaybookExhausted,
    ReplayMiss,
)

API_KEY_ENV = "REFAGENT_API_KEY"
CHAT_COMPLETIONS_PATH = "/v1/chat/completions"

REGION_KINDS = {"class", "method", "field", "variable"}


@dataclass
class ToolCall:
    id: str
    name: str
    arguments: str


@dataclass
class ChatMessage:
    role: str  # system | user | assistant | tool
    content: str
    tool_call: Optional[ToolCall] = None

    def to_wire(self) -> dict:
        return {"role": self.role, "content": self.content}


@dataclass
class ChatRequest:
    messages: list[ChatMessage]
    tools: list[dict] = field(default_factory=list)
    temperature: Optional[float] = None
    meta: dict = field(default_factory=dict)  # agent / phase / attempt keys


@dataclass
class ChatResponse:
    text: str
    tool_calls: list[ToolCall] = field(default_factory=list)


@dataclass
class BackendConfig:
    kind: str = "scripted"  # http_chat | scripted | replay
    endpoint: str = ""
    model: str = ""
    temperature: float = 0.7
    max_output_tokens: int = 4096
    playbook_path: str = ""

    def __post_init__(self) -> None:
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError(f"temperature {self.temperature} outside [0, 2]")


@dataclass
class Transcript:
    entries: list[dict] = field(default_factory=list)

    def record(self, request: ChatRequest, response: ChatResponse) -> None:
        self.entries.append(
            {
                "timestamp": time.time(),
                "request": {
                    "messages": [m.to_wire() for m in request.messages],
                    "meta": dict(request.meta),
                },
                "response": {"text": response.text},
                "prompt_tokens": sum(
                    estimate_tokens(m.content) for m in request.messages
                ),
            }
        )

    def to_json_dict(self) -> list[dict]:
        return self.entries


def estimate_tokens(text: str) -> int:
    """Documented heuristic: one token per four characters, rounded up."""
    return math.ceil(len(text) / 4)


def request_digest(messages: list[ChatMessage]) -> str:
    """Stable digest of the (role, content) sequence, whitespace normalized."""
    normalized = [
        (m.role, " ".join(m.content.split())) for m in messages
    ]
    payload = json.dumps(normalized, ensure_ascii=True)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class HttpChatBackend:
    def __init__(self, config: BackendConfig):
        self.config = config

    def complete(self, request: ChatRequest) -> ChatResponse:
        import requests  # deferred so offline use never needs it

        url = self.config.endpoint.rstrip("/") + CHAT_COMPLETIONS_PATH
        body: dict = {
            "model": self.config.model,
            "messages": [m.to_wire() for m in request.messages],
            "temperature": (
                request.temperature
                if request.temperature is not None
                else self.config.temperature
            ),
            "max_tokens": self.config.max_output_tokens,
        }
        if request.tools:
            body["tools"] = request.tools
        headers = {"Content-Type": "application/json"}
        api_key = os.environ.get(API_KEY_ENV)
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        try:
            resp = requests.post(url, json=body, headers=headers, timeout=120)
        except requests.RequestException as exc:
            raise BackendError(0, str(exc)) from exc
        if resp.status_code != 200:
            raise BackendError(resp.status_code, resp.text)
        try:
            payload = resp.json()
            choice = payload["choices"][0]["message"]
        except (ValueError, KeyError, IndexError) as exc:
            raise BackendError(resp.status_code, resp.text) from exc
        tool_calls = [
            ToolCall(
                id=tc.get("id", ""),
                name=tc.get("function", {}).get("name", ""),
                arguments=tc.get("function", {}).get("arguments", ""),
            )
            for tc in choice.get("tool_calls") or []
        ]
        return ChatResponse(text=choice.get("content") or "", tool_calls=tool_calls)


class ScriptedBackend:
    """Plays back responses keyed by (agent, phase, attempt).

    Playbook schema: {"entries": [{"agent": ..., "phase": ..., "attempt":
    optional int (omit to match any attempt and stay reusable), "response":
    text}]}. Entries with an explicit attempt are consumed once.
    """

    def __init__(self, playbook_path: str | Path):
        data = json.loads(Path(playbook_path).read_text(encoding="utf-8"))
        self.entries: list[dict] = data["entries"]
        self.consumed: set[int] = set()

    def complete(self, request: ChatRequest) -> ChatResponse:
        agent = request.meta.get("agent")
        phase = request.meta.get("phase")
        attempt = request.meta.get("attempt")
        for i, entry in enumerate(self.entries):
            if entry.get("agent") != agent or entry.get("phase") != phase:
                continue
            wanted = entry.get("attempt")
            if wanted is None:
                return ChatResponse(text=entry["response"])
            if i in self.consumed or wanted != attempt:
                continue
            self.consumed.add(i)
            return ChatResponse(text=entry["response"])
        raise PlaybookExhausted(
            f"no playbook entry for agent={agent} phase={phase} attempt={attempt}"
        )


class ReplayBackend:
    def __init__(self, cassette_path: str | Path):
        data = json.loads(Path(cassette_path).read_text(encoding="utf-8"))
        self.responses = {item["digest"]: item["response"] for item in data["exchanges"]}

    def complete(self, request: ChatRequest) -> ChatResponse:
        digest = request_digest(request.messages)
        if digest not in self.responses:
            raise ReplayMiss(digest)
        return ChatResponse(text=self.responses[digest])


class RecordingBackend:
    def __init__(self, inner, cassette_path: str | Path):
        self.inner = inner
        self.cassette_path = Path(cassette_path)
        self.exchanges: list[dict] = []

    def complete(self, request: ChatRequest) -> ChatResponse:
        response = self.inner.complete(request)
        self.exchanges.append(
            {"digest": request_digest(request.messages), "response": response.text}
        )
        self.flush()
        return response

    def flush(self) -> None:
        self.cassette_path.parent.mkdir(parents=True, exist_ok=True)
        self.cassette_path.write_text(
            json.dumps({"exchanges": self.exchanges}, indent=2), encoding="utf-8"
        )


def make_backend(config: BackendConfig):
    if config.kind == "http_chat":
        return HttpChatBackend(config)
    if config.kind == "scripted":
        return ScriptedBackend(config.playbook_path)
    if config.kind == "replay":
        return ReplayBackend(config.playbook_path)
    raise ValueError(f"unknown backend kind {config.kind!r}")


_FENCE_RE = re.compile(r"```([A-Za-z0-9_+-]*)[ \t]*\n(.*?)```", re.DOTALL)


def extract_code_block(response_text: str) -> str:
    """Last fenced block tagged java, else the last fence of any tag."""
    fences = _FENCE_RE.findall(response_text)
    if not fences:
        raise NoCodeBlock("response contains no fenced code block")
    java = [body for tag, body in fences if tag.lower() == "java"]
    body = java[-1] if java else fences[-1][1]
    return body.strip("\n").rstrip() + "\n"


@dataclass
class PlanEntry:
    region_kind: str  # class | method | field | variable
    identifier: str
    line_range: tuple[int, int]
    refactoring_type: str
    instruction: str

    def to_json_dict(self) -> dict:
        return {
            "region_kind": self.region_kind,
            "identifier": self.identifier,
            "line_range": list(self.line_range),
            "refactoring_type": self.refactoring_type,
            "instruction": self.instruction,
        }


@dataclass
class RefactoringPlan:
    target_fqn: str
    entries: list[PlanEntry]

    def to_json_dict(self) -> dict:
        return {
            "target_fqn": self.target_fqn,
            "entries": [e.to_json_dict() for e in self.entries],
        }


def extract_plan(response_text: str, target_fqn: str = "") -> RefactoringPlan:
    """Parse the last fenced JSON block into a refactoring plan."""
    fences = _FENCE_RE.findall(response_text)
    json_bodies = [body for tag, body in fences if tag.lower() in ("json", "")]
    if not json_bodies:
        raise PlanParseError("no fenced JSON block in response")
    try:
        data = json.loads(json_bodies[-1])
    except json.JSONDecodeError as exc:
        raise PlanParseError(f"invalid JSON in plan fence: {exc}") from exc
    if isinstance(data, dict):
        data = data.get("plan", data.get("entries"))
    if not isinstance(data, list):
        raise PlanParseError("plan fence must hold a list of entries")
    entries: list[PlanEntry] = []
    for i, raw in enumerate(data):
        if not isinstance(raw, dict):
            raise PlanParseError(f"entry {i} is not an object")
        try:
            region_kind = raw["region_kind"]
            identifier = raw["identifier"]
            line_range = raw["line_range"]
            refactoring_type = raw["refactoring_type"]
            instruction = raw["instruction"]
        except KeyError as exc:
            raise PlanParseError(f"entry {i} missing key {exc}") from exc
        if region_kind not in REGION_KINDS:
            raise PlanParseError(f"entry {i} has unknown region_kind {region_kind!r}")
        if (
            not isinstance(line_range, (list, tuple))
            or len(line_range) != 2
            or not all(isinstance(v, int) for v in line_range)
        ):
            raise PlanParseError(f"entry {i} line_range must be [start, end]")
        entries.append(
            PlanEntry(
                region_kind=region_kind,
                identifier=str(identifier),
                line_range=(line_range[0], line_range[1]),
                refactoring_type=str(refactoring_type),
                instruction=str(instruction),
            )
        )
    return RefactoringPlan(target_fqn=target_fqn, entries=entries)
