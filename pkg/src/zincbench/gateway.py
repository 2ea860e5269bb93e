"""Chat-completion access with templated prompts, budgets, and traces.

Prompts live as text assets and are rendered by slot substitution only;
nothing string-builds prompts inline.  Transports are pluggable: a live
HTTP endpoint, a replay-from-trace reader, and a scripted mock so the
whole pipeline runs deterministically offline.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import threading
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable, Iterable, Optional, Protocol

TEMPLATE_IDS = (
    "baseline",
    "cot",
    "kg_create",
    "kg_codegen",
    "code_validation",
    "grammar_validation",
    "agentic_params_vars",
    "agentic_constraints",
    "agentic_objective",
    "agentic_stitch",
)

_SLOT = re.compile(r"\{([a-z_]+)\}")


class UnknownTemplate(Exception):
    pass


class MissingSlot(Exception):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"slot {{{name}}} is required but was not provided")


class TransportError(Exception):
    def __init__(self, message: str, transient: bool = False):
        self.transient = transient
        super().__init__(message)


class RateLimited(TransportError):
    def __init__(self, message: str = "rate limited"):
        super().__init__(message, transient=True)


class AuthError(Exception):
    pass


class BudgetExceeded(Exception):
    def __init__(self, budget: int):
        self.budget = budget
        super().__init__(f"run-level call budget of {budget} exhausted")


@dataclass(frozen=True)
class PromptTemplate:
    id: str
    body: str

    @property
    def slots(self) -> frozenset[str]:
        return frozenset(_SLOT.findall(self.body))


def _load_asset(name: str) -> str:
    return resources.files("zincbench.assets").joinpath(name).read_text("utf-8")


def load_templates() -> dict[str, PromptTemplate]:
    return {
        tid: PromptTemplate(tid, _load_asset(f"prompts/{tid}.txt"))
        for tid in TEMPLATE_IDS
    }


_TEMPLATES: Optional[dict[str, PromptTemplate]] = None


def _templates() -> dict[str, PromptTemplate]:
    global _TEMPLATES
    if _TEMPLATES is None:
        _TEMPLATES = load_templates()
    return _TEMPLATES


def render_prompt(template_id: str, slots: dict[str, str]) -> str:
    """Single-pass slot substitution; unused extra slots are ignored."""
    template = _templates().get(template_id)
    if template is None:
        raise UnknownTemplate(template_id)
    needed = template.slots
    for name in sorted(needed):
        if name not in slots:
            raise MissingSlot(name)

    def fill(m: re.Match) -> str:
        name = m.group(1)
        return str(slots[name]) if name in needed else m.group(0)

    return _SLOT.sub(fill, template.body)


def empty_data_notes() -> tuple[str, str]:
    lines = [l for l in _load_asset("empty_data_notes.txt").splitlines() if l.strip()]
    return lines[0], lines[1]


def augment_for_empty_data(prompt: str) -> str:
    """Append the instance-has-no-data-file instructions; caller applies this
    only when data_text is empty."""
    embed_note, format_note = empty_data_notes()
    return prompt.rstrip("\n") + "\n" + embed_note + "\n" + format_note + "\n"


# --- transports ------------------------------------------------------------

@dataclass(frozen=True)
class TransportReply:
    text: str
    prompt_tokens: Optional[int] = None
    completion_tokens: Optional[int] = None


@dataclass(frozen=True)
class GatewayConfig:
    model: str = "default"
    temperature: float = 0.0
    max_tokens: Optional[int] = None
    timeout: float = 120.0
    max_attempts: int = 3
    backoff_seconds: float = 1.0


class Transport(Protocol):
    identity: str

    def complete(self, prompt: str, config: GatewayConfig) -> TransportReply: ...


class MockTransport:
    """Scripted transport: a responder callable or a fixed response list."""

    identity = "mock"

    def __init__(self, responder: Callable[[str], str]):
        self.responder = responder
        self.prompts: list[str] = []

    @classmethod
    def from_responses(cls, responses: Iterable[str]) -> "MockTransport":
        queue = list(responses)

        def pop(_prompt: str) -> str:
            if not queue:
                raise TransportError("mock response queue exhausted")
            return queue.pop(0)

        return cls(pop)

    @classmethod
    def echo(cls) -> "MockTransport":
        return cls(lambda prompt: prompt)

    def complete(self, prompt: str, config: GatewayConfig) -> TransportReply:
        self.prompts.append(prompt)
        return TransportReply(self.responder(prompt))


def prompt_digest(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


class ReplayTransport:
    """Replays a JSON-lines trace; verifies each prompt hash before answering."""

    identity = "replay"

    def __init__(self, trace_path: Path):
        self.entries = []
        with open(trace_path, "r", encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    self.entries.append(json.loads(line))
        self.cursor = 0

    def complete(self, prompt: str, config: GatewayConfig) -> TransportReply:
        if self.cursor >= len(self.entries):
            raise TransportError("replay trace exhausted")
        entry = self.entries[self.cursor]
        if entry.get("prompt_sha256") != prompt_digest(prompt):
            raise TransportError(
                f"replay mismatch at entry {self.cursor}: prompt differs from trace"
            )
        self.cursor += 1
        return TransportReply(
            entry["response"],
            entry.get("prompt_tokens"),
            entry.get("completion_tokens"),
        )


def write_trace(records: Iterable["CallRecord"], trace_path: Path) -> None:
    with open(trace_path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(
                json.dumps(
                    {
                        "template_id": r.template_id,
                        "prompt_sha256": prompt_digest(r.prompt),
                        "response": r.response,
                        "prompt_tokens": r.prompt_tokens,
                        "completion_tokens": r.completion_tokens,
                    }
                )
                + "\n"
            )


class LiveTransport:
    """Chat-completions JSON over HTTPS with bearer-token auth from the
    environment."""

    identity = "live"

    def __init__(
        self,
        endpoint: str,
        api_key_env: str = "ZINCBENCH_API_KEY",
        api_key: Optional[str] = None,
    ):
        self.endpoint = endpoint
        self.api_key_env = api_key_env
        # held in memory only; never written anywhere
        self._api_key = api_key

    def complete(self, prompt: str, config: GatewayConfig) -> TransportReply:
        key = self._api_key or os.environ.get(self.api_key_env)
        if not key:
            raise AuthError(
                f"no credential: set {self.api_key_env} before using the live transport"
            )
        import requests

        payload = {
            "model": config.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": config.temperature,
        }
        if config.max_tokens is not None:
            payload["max_tokens"] = config.max_tokens
        try:
            resp = requests.post(
                self.endpoint,
                json=payload,
                headers={"Authorization": f"Bearer {key}"},
                timeout=config.timeout,
            )
        except requests.RequestException as e:
            raise TransportError(str(e), transient=True) from e
        if resp.status_code == 401:
            raise AuthError("endpoint rejected the credential")
        if resp.status_code == 429:
            raise RateLimited()
        if resp.status_code >= 500:
            raise TransportError(f"server error {resp.status_code}", transient=True)
        if resp.status_code != 200:
            raise TransportError(f"unexpected status {resp.status_code}: {resp.text[:200]}")
        body = resp.json()
        try:
            text = body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as e:
            raise TransportError(f"malformed completion payload: {e}") from e
        usage = body.get("usage", {}) or {}
        return TransportReply(
            text, usage.get("prompt_tokens"), usage.get("completion_tokens")
        )


# --- call records and budgeted runs ----------------------------------------

@dataclass(frozen=True)
class CallRecord:
    template_id: str
    prompt: str
    response: str
    wall_seconds: float
    transport: str
    sequence_index: int
    prompt_tokens: Optional[int] = None
    completion_tokens: Optional[int] = None

    def to_json(self) -> dict:
        return {
            "template_id": self.template_id,
            "sequence_index": self.sequence_index,
            "transport": self.transport,
            "wall_seconds": round(self.wall_seconds, 6),
            "prompt_sha256": prompt_digest(self.prompt),
            "prompt_chars": len(self.prompt),
            "response": self.response,
            "prompt_tokens": self.prompt_tokens,
            "completion_tokens": self.completion_tokens,
        }


@dataclass
class AttemptLog:
    template_id: str
    attempt: int
    outcome: str  # ok | transient | fatal


class RunHandle:
    """One strategy run: contiguous sequence indices, hard call budget."""

    def __init__(self, gateway: "Gateway", budget: int):
        self.gateway = gateway
        self.budget = budget
        self.records: list[CallRecord] = []
        self.attempts: list[AttemptLog] = []
        self._lock = threading.Lock()

    @property
    def calls_made(self) -> int:
        return len(self.records)

    def complete(self, template_id: str, prompt: str) -> CallRecord:
        with self._lock:
            if len(self.records) >= self.budget:
                raise BudgetExceeded(self.budget)
            record = self.gateway._complete(
                template_id, prompt, len(self.records) + 1, self.attempts
            )
            self.records.append(record)
            return record

    def render_and_complete(self, template_id: str, slots: dict[str, str]) -> CallRecord:
        return self.complete(template_id, render_prompt(template_id, slots))


class Gateway:
    def __init__(self, transport: Transport, config: GatewayConfig = GatewayConfig()):
        self.transport = transport
        self.config = config

    def start_run(self, budget: int) -> RunHandle:
        if budget < 1:
            raise ValueError("budget must be at least 1")
        return RunHandle(self, budget)

    def _complete(
        self,
        template_id: str,
        prompt: str,
        sequence_index: int,
        attempts: list[AttemptLog],
    ) -> CallRecord:
        last_error: Optional[Exception] = None
        for attempt in range(1, self.config.max_attempts + 1):
            start = time.monotonic()
            try:
                reply = self.transport.complete(prompt, self.config)
            except AuthError:
                raise
            except TransportError as e:
                if not e.transient:
                    attempts.append(AttemptLog(template_id, attempt, "fatal"))
                    raise
                attempts.append(AttemptLog(template_id, attempt, "transient"))
                last_error = e
                if attempt < self.config.max_attempts and self.config.backoff_seconds:
                    time.sleep(self.config.backoff_seconds * attempt)
                continue
            attempts.append(AttemptLog(template_id, attempt, "ok"))
            return CallRecord(
                template_id=template_id,
                prompt=prompt,
                response=reply.text,
                wall_seconds=time.monotonic() - start,
                transport=getattr(self.transport, "identity", "unknown"),
                sequence_index=sequence_index,
                prompt_tokens=reply.prompt_tokens,
                completion_tokens=reply.completion_tokens,
            )
        assert last_error is not None
        raise last_error
