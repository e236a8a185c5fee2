"""Model providers and the bindings that attach them to roles.

A provider turns a list of role-tagged chat messages into text plus
optional token usage. Real models are reached through
:class:`HttpChatProvider`; tests and offline runs use
:class:`ScriptedProvider`, the rule-based
:class:`~bridgeaudit.orchestrator.heuristic.HeuristicProvider`, or a
:class:`ReplayCache` wrapped around either.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Protocol, Sequence, Union

from ..errors import ConfigError, ProviderUnavailable, TransportError
from ..fsutil import atomic_write_text

ROLES = ("generator", "aggregator", "evaluator")


@dataclass(frozen=True)
class Sampling:
    temperature: float = 0.7
    top_p: float = 1.0
    frequency_penalty: float = 0.0
    presence_penalty: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.temperature <= 2.0:
            raise ConfigError(f"temperature {self.temperature} outside [0, 2]")
        if not 0.0 < self.top_p <= 1.0:
            raise ConfigError(f"top_p {self.top_p} outside (0, 1]")
        for name in ("frequency_penalty", "presence_penalty"):
            if not -2.0 <= getattr(self, name) <= 2.0:
                raise ConfigError(f"{name} outside [-2, 2]")

    def to_document(self) -> dict:
        return {
            "temperature": self.temperature,
            "top_p": self.top_p,
            "frequency_penalty": self.frequency_penalty,
            "presence_penalty": self.presence_penalty,
        }


@dataclass(frozen=True)
class ProviderResponse:
    text: str
    input_tokens: Optional[int] = None
    output_tokens: Optional[int] = None


class Provider(Protocol):
    def complete(self, messages: list[dict], sampling: Sampling) -> ProviderResponse: ...


def estimate_tokens(text: str) -> int:
    """Rough token count used when a provider reports no usage."""
    return math.ceil(len(text) / 4)


def prompt_text(messages: Sequence[dict]) -> str:
    return "\n".join(m["content"] for m in messages)


@dataclass
class ModelBinding:
    name: str
    provider: Provider
    role: str = "generator"
    sampling: Sampling = field(default_factory=Sampling)
    max_attempts: int = 3
    system_prompt: str = ""

    def __post_init__(self):
        if self.role not in ROLES:
            raise ConfigError(f"unknown role {self.role!r} for binding {self.name}")
        if self.max_attempts < 1:
            raise ConfigError("max_attempts must be at least 1")

    def messages(self, prompt: str) -> list[dict]:
        msgs = [{"role": "system", "content": self.system_prompt}] if self.system_prompt else []
        msgs.append({"role": "user", "content": prompt})
        return msgs


# ---------------------------------------------------------------- HTTP


def api_key_env(name: str) -> str:
    return "GOATX_PROVIDER_" + "".join(c if c.isalnum() else "_" for c in name.upper()) + "_KEY"


class HttpChatProvider:
    """Chat-completions style endpoint: role-tagged messages in, text out."""

    def __init__(self, name: str, url: str, model: str, timeout: float = 120.0, client=None):
        self.name = name
        self.url = url
        self.model = model
        self.timeout = timeout
        self._client = client

    def _http(self):
        if self._client is None:
            import httpx

            self._client = httpx.Client(timeout=self.timeout)
        return self._client

    def complete(self, messages: list[dict], sampling: Sampling) -> ProviderResponse:
        key = os.environ.get(api_key_env(self.name))
        headers = {"Authorization": f"Bearer {key}"} if key else {}
        body = {"model": self.model, "messages": messages, **sampling.to_document()}
        try:
            resp = self._http().post(self.url, json=body, headers=headers)
        except Exception as exc:  # connection-level failures of any client
            raise TransportError(f"{self.name}: {exc}") from exc
        if resp.status_code >= 400:
            raise TransportError(f"{self.name}: HTTP {resp.status_code}")
        try:
            doc = resp.json()
            text = doc["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise TransportError(f"{self.name}: malformed response ({exc})") from exc
        usage = doc.get("usage") or {}
        return ProviderResponse(text, usage.get("prompt_tokens"), usage.get("completion_tokens"))


# ---------------------------------------------------------------- scripted


Script = Union[str, Exception, Callable[[str], Union[str, ProviderResponse]], ProviderResponse]


class ScriptedProvider:
    """Replays a fixed sequence of responses; the last one repeats forever.

    Entries may be text, a :class:`ProviderResponse`, an exception to raise,
    or a callable receiving the prompt text. Every prompt is recorded in
    :attr:`prompts`.
    """

    def __init__(self, script: Sequence[Script]):
        if not script:
            raise ValueError("script must not be empty")
        self.script = list(script)
        self.prompts: list[str] = []
        self._lock = threading.Lock()

    @property
    def calls(self) -> int:
        return len(self.prompts)

    def complete(self, messages: list[dict], sampling: Sampling) -> ProviderResponse:
        text = prompt_text(messages)
        with self._lock:
            step = self.script[min(len(self.prompts), len(self.script) - 1)]
            self.prompts.append(text)
        if isinstance(step, Exception):
            raise step
        if callable(step):
            step = step(text)
        return step if isinstance(step, ProviderResponse) else ProviderResponse(str(step))


# ---------------------------------------------------------------- replay cache


class ReplayCache:
    """Record/replay wrapper keyed by a hash of binding name and prompt.

    On a hit the stored response is returned without touching ``inner``.
    On a miss ``inner`` is called (if present) and the transcript stored.
    With ``inner=None`` a miss raises :class:`ProviderUnavailable`.
    """

    def __init__(self, directory: Union[str, Path], name: str, inner: Optional[Provider] = None):
        self.directory = Path(directory)
        self.name = name
        self.inner = inner
        self.hits = 0
        self.misses = 0

    def key(self, messages: list[dict], sampling: Sampling) -> str:
        blob = json.dumps(
            {"binding": self.name, "messages": messages, "sampling": sampling.to_document()}, sort_keys=True
        )
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    def complete(self, messages: list[dict], sampling: Sampling) -> ProviderResponse:
        key = self.key(messages, sampling)
        path = self.directory / key[:2] / f"{key}.json"
        if path.exists():
            self.hits += 1
            doc = json.loads(path.read_text(encoding="utf-8"))
            r = doc["response"]
            return ProviderResponse(r["text"], r.get("input_tokens"), r.get("output_tokens"))
        self.misses += 1
        if self.inner is None:
            raise ProviderUnavailable(f"no cached response for {self.name} ({key[:12]})")
        resp = self.inner.complete(messages, sampling)
        doc = {
            "binding": self.name,
            "messages": messages,
            "sampling": sampling.to_document(),
            "response": {"text": resp.text, "input_tokens": resp.input_tokens, "output_tokens": resp.output_tokens},
        }
        atomic_write_text(path, json.dumps(doc, indent=1, sort_keys=True) + "\n")
        return resp


def cache_entries(directory: Union[str, Path]) -> list[Path]:
    root = Path(directory)
    return sorted(root.glob("*/*.json")) if root.exists() else []
