"""Payload schemas for model output and the validator applied to every response.

Every layer answers with ``{"findings": [...]}``. Besides JSON-schema
conformance, quoted code (``code_location`` for mappings, ``snippet`` for
rule findings) must occur in the code the model was shown; whitespace runs
are collapsed before comparing.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Optional, Union

import jsonschema

from ..predicates import COMPOSITES, properties_for_side

_PROPERTY_NAMES = sorted({p.name for side in ("source", "destination") for p in properties_for_side(side)})
SEVERITIES = ("low", "medium", "high", "critical")


def _findings(item: dict) -> dict:
    return {
        "type": "object",
        "required": ["findings"],
        "properties": {"findings": {"type": "array", "items": item}},
    }


MAPPING_SCHEMA = _findings(
    {
        "type": "object",
        "required": ["property_name", "parameter_name", "code_location"],
        "additionalProperties": False,
        "properties": {
            "property_name": {"type": "string", "enum": _PROPERTY_NAMES},
            "parameter_name": {"type": ["string", "null"], "minLength": 1},
            "code_location": {"type": ["string", "null"], "minLength": 1},
        },
    }
)

RULE_SCHEMA = _findings(
    {
        "type": "object",
        "required": ["rule_id", "checklist_item", "status", "snippet"],
        "additionalProperties": False,
        "properties": {
            "rule_id": {"type": "string", "enum": [p.value for p in COMPOSITES]},
            "checklist_item": {"type": "string", "minLength": 1},
            "status": {"type": "string", "enum": ["implemented", "missing"]},
            "snippet": {"type": ["string", "null"], "minLength": 1},
        },
    }
)

BYPASS_SCHEMA = _findings(
    {
        "type": "object",
        "required": ["bypass_title", "preconditions", "steps", "poc_sketch", "severity"],
        "additionalProperties": False,
        "properties": {
            "bypass_title": {"type": "string", "minLength": 1},
            "preconditions": {"type": "array", "items": {"type": "string"}},
            "steps": {"type": "array", "items": {"type": "string"}, "minItems": 1},
            "poc_sketch": {"type": "string"},
            "severity": {"type": "string", "enum": list(SEVERITIES)},
        },
    }
)

SCORE_SCHEMA = {
    "type": "object",
    "required": ["score"],
    "properties": {
        "score": {"type": "integer", "minimum": 0, "maximum": 100},
        "rationale": {"type": "string"},
    },
}


@dataclass(frozen=True)
class LayerSchema:
    """Schema plus the field lists the operators need for one layer.

    ``merge_fields`` limit which findings may be merged as near-duplicates;
    ``select_fields`` define the groups inside which evaluation keeps only
    the best-scored finding (empty means the whole payload is one group).
    """

    name: str
    layer: int
    schema: dict
    grounded_fields: tuple = ()
    merge_fields: tuple = ()
    select_fields: tuple = ()
    list_key: str = "findings"


MAPPING = LayerSchema(
    "mapping", 2, MAPPING_SCHEMA, ("code_location",), ("property_name", "parameter_name"), ("property_name",)
)
RULE = LayerSchema(
    "rule", 4, RULE_SCHEMA, ("snippet",), ("rule_id", "checklist_item", "status"), ("rule_id", "checklist_item")
)
BYPASS = LayerSchema("bypass", 5, BYPASS_SCHEMA)
SCORE = LayerSchema("score", 0, SCORE_SCHEMA, list_key="")

LAYER_SCHEMAS = {2: MAPPING, 4: RULE, 5: BYPASS}


@dataclass(frozen=True)
class Violation:
    path: str
    message: str

    def __str__(self) -> str:
        return f"{self.path}: {self.message}"


@dataclass(frozen=True)
class ErrorReport:
    violations: tuple

    ok = False

    def message(self) -> str:
        return "; ".join(str(v) for v in self.violations)


@dataclass(frozen=True)
class Valid:
    payload: Union[dict, list]

    ok = True


_FENCE = re.compile(r"^```[A-Za-z]*\s*\n?(.*?)\n?```\s*$", re.S)
_WS = re.compile(r"\s+")


def normalize_ws(text: str) -> str:
    return _WS.sub(" ", text).strip()


def _json_path(parts) -> str:
    out = "$"
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else f".{p}"
    return out


def parse_json(raw: str):
    text = raw.strip()
    m = _FENCE.match(text)
    if m:
        text = m.group(1).strip()
    return json.loads(text)


def validate_output(raw: str, layer: LayerSchema, grounding: Optional[str] = None) -> Union[Valid, ErrorReport]:
    """Parse ``raw`` and check it against ``layer``; report every violation."""
    try:
        doc = parse_json(raw)
    except (json.JSONDecodeError, ValueError) as exc:
        return ErrorReport((Violation("$", f"output is not valid JSON ({exc.msg if hasattr(exc, 'msg') else exc})"),))
    validator = jsonschema.Draft7Validator(layer.schema)
    errors = sorted(validator.iter_errors(doc), key=lambda e: (list(map(str, e.absolute_path)), e.message))
    violations = [Violation(_json_path(e.absolute_path), e.message) for e in errors]
    if not violations and grounding is not None and layer.grounded_fields:
        haystack = normalize_ws(grounding)
        for i, finding in enumerate(doc[layer.list_key]):
            for fname in layer.grounded_fields:
                quoted = finding.get(fname)
                if isinstance(quoted, str) and normalize_ws(quoted) not in haystack:
                    violations.append(
                        Violation(f"$.{layer.list_key}[{i}].{fname}", "quoted code does not occur in the input")
                    )
    if violations:
        return ErrorReport(tuple(violations))
    return Valid(doc)
