"""Pipeline configuration: a flat, versioned JSON document.

Example::

    {
      "config_version": "1",
      "ensemble": [
        {"name": "gen-a", "provider": {"kind": "heuristic", "persona": 0}},
        {"name": "gen-b", "provider": {"kind": "http", "url": "https://...", "model": "m"}}
      ],
      "evaluator": {"name": "judge", "provider": {"kind": "heuristic"}},
      "k_G": 3,
      "confidence_threshold": 60,
      "prune_sim": 0.85,
      "kb_sim": 0.5,
      "price_table": {"gen-a": {"input_usd_per_mtok": 0.2, "output_usd_per_mtok": 0.8}}
    }

Every key except ``ensemble`` and ``evaluator`` has a default. API keys
never live in the file; HTTP providers read ``GOATX_PROVIDER_<NAME>_KEY``.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Union

import jsonschema

from .callgraph import EventPattern, default_event_patterns
from .errors import ConfigError
from .errors import InvalidPattern
from .frontend.emits import compile_patterns
from .metrics import Price
from .orchestrator.heuristic import HeuristicProvider
from .orchestrator.providers import HttpChatProvider, ModelBinding, ReplayCache, Sampling, ScriptedProvider

CONFIG_VERSION = "1"
CACHE_ENV = "GOATX_CACHE_DIR"

_SAMPLING = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "temperature": {"type": "number"},
        "top_p": {"type": "number"},
        "frequency_penalty": {"type": "number"},
        "presence_penalty": {"type": "number"},
    },
}

_PROVIDER = {
    "type": "object",
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["heuristic", "http", "scripted"]},
        "persona": {"type": "integer", "minimum": 0},
        "url": {"type": "string"},
        "model": {"type": "string"},
        "timeout": {"type": "number", "exclusiveMinimum": 0},
        "responses": {"type": "array", "items": {"type": "string"}, "minItems": 1},
    },
    "allOf": [
        {"if": {"properties": {"kind": {"const": "http"}}}, "then": {"required": ["url", "model"]}},
        {"if": {"properties": {"kind": {"const": "scripted"}}}, "then": {"required": ["responses"]}},
    ],
}

_BINDING = {
    "type": "object",
    "required": ["name", "provider"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string", "pattern": "^[A-Za-z0-9_.-]+$"},
        "provider": _PROVIDER,
        "sampling": _SAMPLING,
        "max_attempts": {"type": "integer", "minimum": 1},
        "system_prompt": {"type": "string"},
    },
}

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["config_version", "ensemble", "evaluator"],
    "additionalProperties": False,
    "properties": {
        "config_version": {"const": CONFIG_VERSION},
        "event_patterns": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["regex", "side"],
                "additionalProperties": False,
                "properties": {"regex": {"type": "string"}, "side": {"enum": ["source", "destination", "unknown"]}},
            },
        },
        "ensemble": {"type": "array", "items": _BINDING, "minItems": 1},
        "evaluator": _BINDING,
        "k_G": {"type": "integer", "minimum": 1},
        "confidence_threshold": {"type": "integer", "minimum": 0, "maximum": 100},
        "prune_sim": {"type": "number", "minimum": 0, "maximum": 1},
        "kb_sim": {"type": "number", "minimum": -1, "maximum": 1},
        "top_k": {"type": "integer", "minimum": 0},
        "max_attempts": {"type": "integer", "minimum": 1},
        "sampling": _SAMPLING,
        "in_flight_cap": {"type": "integer", "minimum": 1},
        "kb_path": {"type": ["string", "null"]},
        "cache_dir": {"type": ["string", "null"]},
        "price_table": {
            "type": "object",
            "additionalProperties": {
                "type": "object",
                "required": ["input_usd_per_mtok", "output_usd_per_mtok"],
                "additionalProperties": False,
                "properties": {
                    "input_usd_per_mtok": {"type": "number", "minimum": 0},
                    "output_usd_per_mtok": {"type": "number", "minimum": 0},
                },
            },
        },
    },
}


@dataclass
class PipelineConfig:
    ensemble: list
    evaluator: ModelBinding
    event_patterns: list = field(default_factory=default_event_patterns)
    k_G: int = 3
    confidence_threshold: int = 60
    prune_sim: float = 0.85
    kb_sim: float = 0.5
    top_k: int = 3
    in_flight_cap: int = 8
    kb_path: Optional[str] = None
    cache_dir: Optional[str] = None
    price_table: dict = field(default_factory=dict)
    document: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.check()

    def check(self) -> None:
        if self.k_G < 1:
            raise ConfigError("k_G must be at least 1")
        if self.k_G > len(self.ensemble):
            raise ConfigError(f"k_G = {self.k_G} exceeds ensemble size {len(self.ensemble)}")
        if not 0 <= self.confidence_threshold <= 100:
            raise ConfigError("confidence_threshold outside [0, 100]")
        if not 0.0 <= self.prune_sim <= 1.0:
            raise ConfigError("prune_sim outside [0, 1]")
        if not -1.0 <= self.kb_sim <= 1.0:
            raise ConfigError("kb_sim outside [-1, 1]")
        if self.in_flight_cap < 1:
            raise ConfigError("in_flight_cap must be at least 1")
        names = [b.name for b in self.ensemble] + [self.evaluator.name]
        if len(set(names)) != len(names):
            raise ConfigError("binding names must be unique")
        if self.evaluator.role != "evaluator":
            raise ConfigError("the evaluator binding must have role 'evaluator'")
        try:
            compile_patterns(p.regex for p in self.event_patterns)
        except InvalidPattern as exc:
            raise ConfigError(str(exc)) from exc

    def with_cache(self, directory: Union[str, Path]) -> "PipelineConfig":
        """Copy whose providers record to and replay from ``directory``."""
        def wrap(b: ModelBinding) -> ModelBinding:
            inner = b.provider.inner if isinstance(b.provider, ReplayCache) else b.provider
            return replace(b, provider=ReplayCache(directory, b.name, inner))

        return replace(
            self,
            ensemble=[wrap(b) for b in self.ensemble],
            evaluator=wrap(self.evaluator),
            cache_dir=str(directory),
        )

    @property
    def bindings(self) -> list:
        return list(self.ensemble) + [self.evaluator]


def _provider(doc: dict, name: str):
    kind = doc["kind"]
    if kind == "heuristic":
        return HeuristicProvider(name, doc.get("persona", 0))
    if kind == "scripted":
        return ScriptedProvider(doc["responses"])
    return HttpChatProvider(name, doc["url"], doc["model"], doc.get("timeout", 120.0))


def _binding(doc: dict, role: str, defaults: dict) -> ModelBinding:
    sampling = Sampling(**{**defaults.get("sampling", {}), **doc.get("sampling", {})})
    return ModelBinding(
        name=doc["name"],
        provider=_provider(doc["provider"], doc["name"]),
        role=role,
        sampling=sampling,
        max_attempts=doc.get("max_attempts", defaults.get("max_attempts", 3)),
        system_prompt=doc.get("system_prompt", ""),
    )


def config_from_document(doc: dict, cache_dir: Optional[str] = None) -> PipelineConfig:
    """Validate ``doc`` and build a config; raises :class:`ConfigError`."""
    errors = sorted(jsonschema.Draft7Validator(CONFIG_SCHEMA).iter_errors(doc), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        e = errors[0]
        path = "$" + "".join(f"[{p}]" if isinstance(p, int) else f".{p}" for p in e.absolute_path)
        raise ConfigError(f"{path}: {e.message}")
    cfg = PipelineConfig(
        ensemble=[_binding(b, "generator", doc) for b in doc["ensemble"]],
        evaluator=_binding(doc["evaluator"], "evaluator", doc),
        event_patterns=[EventPattern(p["regex"], p["side"]) for p in doc["event_patterns"]]
        if "event_patterns" in doc
        else default_event_patterns(),
        k_G=doc.get("k_G", 3),
        confidence_threshold=doc.get("confidence_threshold", 60),
        prune_sim=doc.get("prune_sim", 0.85),
        kb_sim=doc.get("kb_sim", 0.5),
        top_k=doc.get("top_k", 3),
        in_flight_cap=doc.get("in_flight_cap", 8),
        kb_path=doc.get("kb_path"),
        cache_dir=doc.get("cache_dir"),
        price_table={k: Price(v["input_usd_per_mtok"], v["output_usd_per_mtok"]) for k, v in doc.get("price_table", {}).items()},
        document=doc,
    )
    cache = cache_dir or cfg.cache_dir or os.environ.get(CACHE_ENV)
    return cfg.with_cache(cache) if cache else cfg


def load_config(path: Union[str, Path], cache_dir: Optional[str] = None) -> PipelineConfig:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return config_from_document(doc, cache_dir)


def offline_config_document(k: int = 3) -> dict:
    """Config using only the rule-based provider; needs no network or keys."""
    return {
        "config_version": CONFIG_VERSION,
        "ensemble": [{"name": f"heuristic-{i}", "provider": {"kind": "heuristic", "persona": i}} for i in range(k)],
        "evaluator": {"name": "heuristic-judge", "provider": {"kind": "heuristic"}},
        "k_G": k,
    }
