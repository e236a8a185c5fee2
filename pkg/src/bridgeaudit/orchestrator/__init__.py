"""Model providers and the generate, aggregate and evaluate operators."""

from .heuristic import HeuristicProvider
from .operators import (
    CORRECTION_TEMPLATE,
    DISCARDED,
    CallRecord,
    MergedFinding,
    MergedThought,
    Runtime,
    ThoughtCandidate,
    aggregate,
    correction_prompt,
    default_similarity,
    evaluate,
    generate,
    produce,
    self_correct,
)
from .providers import (
    HttpChatProvider,
    ModelBinding,
    ProviderResponse,
    ReplayCache,
    Sampling,
    ScriptedProvider,
    api_key_env,
    estimate_tokens,
)
from .schemas import BYPASS, LAYER_SCHEMAS, MAPPING, RULE, SCORE, ErrorReport, LayerSchema, Valid, validate_output

__all__ = [
    "BYPASS",
    "CORRECTION_TEMPLATE",
    "DISCARDED",
    "CallRecord",
    "ErrorReport",
    "HeuristicProvider",
    "HttpChatProvider",
    "LAYER_SCHEMAS",
    "LayerSchema",
    "MAPPING",
    "MergedFinding",
    "MergedThought",
    "ModelBinding",
    "ProviderResponse",
    "RULE",
    "ReplayCache",
    "Runtime",
    "SCORE",
    "Sampling",
    "ScriptedProvider",
    "ThoughtCandidate",
    "Valid",
    "aggregate",
    "api_key_env",
    "correction_prompt",
    "default_similarity",
    "estimate_tokens",
    "evaluate",
    "generate",
    "produce",
    "self_correct",
    "validate_output",
]
