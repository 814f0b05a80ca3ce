"""Pluggable client for the external LLM used as the dictionary-lookup fallback.

Two interchangeable implementations share one interface: ``HttpLlmClient``
talks to a chat-completion-style JSON endpoint, ``MockLlmClient`` answers
from a local table file (same record schema as ``LlmSuggestion``) and is
what the tests and the default service configuration use.

The prompt template sent by the real client is ``PROMPT_TEMPLATE`` below;
responses must be a JSON object with keys ``standard_forms`` (non-empty
list), ``definition`` and ``examples``.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import requests

API_KEY_ENV = "LEXFORGE_LLM_API_KEY"
ENDPOINT_ENV = "LEXFORGE_LLM_ENDPOINT"

PROMPT_TEMPLATE = (
    "The Vietnamese social-media token \"{word}\" may be a non-standard word. "
    "Reply with a JSON object with keys \"standard_forms\" (list of its "
    "standard Vietnamese written forms, most likely first), \"definition\" "
    "(one short Vietnamese sentence) and \"examples\" (at least one usage "
    "example). Reply with the JSON object only."
)


class LlmError(Exception):
    """Base class for LLM-fallback failures."""


class LlmRequestError(LlmError):
    """Network failure or timeout after all retries."""


class LlmResponseError(LlmError):
    """The response arrived but lacked the required structure."""


@dataclass(frozen=True)
class LlmSuggestion:
    nsw: str
    standard_forms: tuple[str, ...]
    definition: str = ""
    examples: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "standard_forms", tuple(self.standard_forms))
        object.__setattr__(self, "examples", tuple(self.examples))
        if not self.standard_forms:
            raise LlmResponseError(f"suggestion for {self.nsw!r} has no standard forms")


@dataclass(frozen=True)
class LlmConfig:
    endpoint_url: str = ""
    api_key: str = ""
    model_name: str = "gpt-4o"
    timeout: float = 10.0
    max_retries: int = 2

    def __post_init__(self):
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")

    @classmethod
    def from_env(cls, **overrides) -> "LlmConfig":
        overrides.setdefault("endpoint_url", os.environ.get(ENDPOINT_ENV, ""))
        overrides.setdefault("api_key", os.environ.get(API_KEY_ENV, ""))
        return cls(**overrides)


class LlmClient:
    """Shared retry/validation shell; subclasses implement ``_attempt``."""

    max_retries: int = 0

    def _attempt(self, word: str) -> LlmSuggestion:
        raise NotImplementedError

    def suggest(self, word: str) -> LlmSuggestion:
        word = word.strip().lower()
        if not word:
            raise ValueError("word is empty")
        last: LlmRequestError | None = None
        for _ in range(self.max_retries + 1):
            try:
                suggestion = self._attempt(word)
            except LlmRequestError as exc:
                last = exc
                continue
            if suggestion.nsw != word:
                suggestion = LlmSuggestion(word, suggestion.standard_forms,
                                           suggestion.definition, suggestion.examples)
            return suggestion
        raise LlmRequestError(
            f"request for {word!r} failed after {self.max_retries + 1} attempts: {last}"
        )


def suggest_normalization(client: LlmClient, word: str) -> LlmSuggestion:
    """Ask the client for a normalization of ``word`` (retried per its config)."""
    return client.suggest(word)


class HttpLlmClient(LlmClient):
    """Chat-completion-style JSON POST client."""

    def __init__(self, config: LlmConfig | None = None):
        self.config = config or LlmConfig.from_env()
        self.max_retries = self.config.max_retries
        if not self.config.endpoint_url:
            raise ValueError(f"no endpoint configured (set {ENDPOINT_ENV})")

    def _attempt(self, word: str) -> LlmSuggestion:
        payload = {
            "model": self.config.model_name,
            "messages": [
                {"role": "user", "content": PROMPT_TEMPLATE.format(word=word)}
            ],
            "response_format": {"type": "json_object"},
        }
        headers = {"Content-Type": "application/json"}
        if self.config.api_key:
            headers["Authorization"] = f"Bearer {self.config.api_key}"
        try:
            response = requests.post(self.config.endpoint_url, json=payload,
                                     headers=headers, timeout=self.config.timeout)
        except requests.RequestException as exc:
            raise LlmRequestError(str(exc)) from exc
        if response.status_code >= 500:
            raise LlmRequestError(f"server returned {response.status_code}")
        if response.status_code != 200:
            raise LlmResponseError(f"server returned {response.status_code}")
        return _parse_completion(word, response.text)


def _parse_completion(word: str, body: str) -> LlmSuggestion:
    try:
        data = json.loads(body)
        content = data["choices"][0]["message"]["content"]
        fields = json.loads(content)
        return LlmSuggestion(
            nsw=word,
            standard_forms=tuple(str(f) for f in fields["standard_forms"]),
            definition=str(fields.get("definition", "")),
            examples=tuple(str(e) for e in fields.get("examples", [])),
        )
    except LlmError:
        raise
    except (json.JSONDecodeError, KeyError, IndexError, TypeError) as exc:
        raise LlmResponseError(f"malformed completion for {word!r}: {exc}") from exc


class MockLlmClient(LlmClient):
    """Deterministic stand-in answering from a table, with a fail-N mode.

    ``calls`` records every attempt, so tests can count retries.
    """

    def __init__(self, table: dict[str, LlmSuggestion] | None = None,
                 fail_times: int = 0, max_retries: int = 0):
        self.table = dict(table or {})
        self.fail_times = fail_times
        self.max_retries = max_retries
        self.calls: list[str] = []

    @classmethod
    def from_file(cls, path: str, **kwargs) -> "MockLlmClient":
        table = {}
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                record = json.loads(line)
                suggestion = LlmSuggestion(
                    nsw=record["nsw"].lower(),
                    standard_forms=tuple(record["standard_forms"]),
                    definition=record.get("definition", ""),
                    examples=tuple(record.get("examples", [])),
                )
                table[suggestion.nsw] = suggestion
        return cls(table, **kwargs)

    def _attempt(self, word: str) -> LlmSuggestion:
        self.calls.append(word)
        if self.fail_times > 0:
            self.fail_times -= 1
            raise LlmRequestError("mock transient failure")
        if word not in self.table:
            raise LlmResponseError(f"mock table has no answer for {word!r}")
        return self.table[word]
