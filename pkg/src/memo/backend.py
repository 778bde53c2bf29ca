"""Model backends and message assembly.

Two kinds of backend share one interface: :class:`HttpBackend` speaks the common
chat-completions JSON schema, :class:`ScriptedBackend` wraps a pure Python policy
for tests and offline runs.
"""

from __future__ import annotations

import json
import logging
import os
import time
from collections.abc import Callable, Sequence
from dataclasses import dataclass

import requests

from memo.prompts import BASE_SYSTEM_PROMPT

log = logging.getLogger(__name__)

GAME_MAX_TOKENS = 1024
OPTIMIZER_MAX_TOKENS = 2048
GAME_TEMPERATURE = 1.0


class BackendError(RuntimeError):
    """Transport failure or non-2xx response after the retry budget is spent."""


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str

    def __post_init__(self) -> None:
        if self.role not in ("system", "user", "assistant"):
            raise ValueError(f"unknown role {self.role!r}")
        if self.role != "assistant" and not self.content:
            raise ValueError(f"{self.role} message must have content")

    def to_dict(self) -> dict:
        return {"role": self.role, "content": self.content}


Policy = Callable[[Sequence[ChatMessage], "frozenset[str] | None"], str]


class ModelBackend:
    name = "backend"

    def complete(
        self,
        messages: Sequence[ChatMessage],
        max_tokens: int = GAME_MAX_TOKENS,
        legal: frozenset[str] | None = None,
    ) -> str:
        raise NotImplementedError


def _check_messages(messages: Sequence[ChatMessage]) -> None:
    if not messages:
        raise ValueError("messages must be non-empty")
    if messages[0].role != "system":
        raise ValueError("first message must have the system role")


class ScriptedBackend(ModelBackend):
    """Deterministic backend driven by ``policy(messages, legal)``.

    ``legal`` is the legal-action set during game turns and None for optimizer
    calls; HTTP backends never see it.
    """

    def __init__(self, policy: Policy, name: str = "scripted") -> None:
        self.policy = policy
        self.name = name

    def complete(self, messages, max_tokens=GAME_MAX_TOKENS, legal=None) -> str:
        _check_messages(messages)
        return self.policy(list(messages), legal) or ""


class HttpBackend(ModelBackend):
    def __init__(
        self,
        endpoint: str,
        model: str,
        temperature: float = GAME_TEMPERATURE,
        timeout: float = 120.0,
        max_attempts: int = 3,
        backoff_base: float = 1.0,
        backoff_factor: float = 2.0,
        api_key_env: str = "OPENAI_API_KEY",
        session: requests.Session | None = None,
    ) -> None:
        self.endpoint = endpoint
        self.model = model
        self.name = model
        self.temperature = temperature
        self.timeout = timeout
        self.max_attempts = max_attempts
        self.backoff_base = backoff_base
        self.backoff_factor = backoff_factor
        self.api_key_env = api_key_env
        self.session = session or requests.Session()
        self.attempts_used = 0

    def request_body(self, messages: Sequence[ChatMessage], max_tokens: int) -> bytes:
        body = {
            "model": self.model,
            "messages": [m.to_dict() for m in messages],
            "temperature": self.temperature,
            "max_tokens": max_tokens,
        }
        return json.dumps(body, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode()

    def complete(self, messages, max_tokens=GAME_MAX_TOKENS, legal=None) -> str:
        _check_messages(messages)
        body = self.request_body(messages, max_tokens)
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        last_error: Exception | None = None
        for attempt in range(1, self.max_attempts + 1):
            self.attempts_used = attempt
            try:
                resp = self.session.post(
                    self.endpoint, data=body, headers=headers, timeout=self.timeout
                )
                if resp.status_code // 100 == 2:
                    content = resp.json()["choices"][0]["message"]["content"]
                    return content or ""
                last_error = BackendError(f"HTTP {resp.status_code}: {resp.text[:200]}")
            except (requests.RequestException, ValueError, KeyError, IndexError) as exc:
                last_error = exc
            log.warning("%s attempt %d/%d failed: %s", self.endpoint, attempt, self.max_attempts, last_error)
            if attempt < self.max_attempts:
                time.sleep(self.backoff_base * self.backoff_factor ** (attempt - 1))
        raise BackendError(
            f"{self.model} at {self.endpoint} failed after {self.max_attempts} attempts"
        ) from last_error


def assemble(
    prompt: str,
    memory_block: str,
    observation: str,
    system_base: str = BASE_SYSTEM_PROMPT,
) -> list[ChatMessage]:
    """System message = base prompt, context prompt, rendered memory; user = observation."""
    parts = [system_base, prompt]
    if memory_block:
        parts.append(memory_block)
    return [
        ChatMessage("system", "\n\n".join(p for p in parts if p)),
        ChatMessage("user", observation),
    ]


def optimizer_messages(prompt: str) -> list[ChatMessage]:
    return [
        ChatMessage("system", "You are a careful assistant that improves game-playing agents."),
        ChatMessage("user", prompt),
    ]
