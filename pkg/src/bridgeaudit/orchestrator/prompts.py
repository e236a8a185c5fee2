"""Prompt builders for the three model-driven layers and the evaluator.

Each prompt has three parts: instructions in prose, the code under review
in a fenced block, and a ``TASK`` block holding the structured inputs as
JSON. Models read all three; the offline heuristic provider only needs the
code and the task block.
"""

from __future__ import annotations

import json
import re
from typing import Optional

from .schemas import LayerSchema

TASK_OPEN = "<<<TASK"
TASK_CLOSE = "TASK>>>"
_TASK_RE = re.compile(re.escape(TASK_OPEN) + r"\n(.*?)\n" + re.escape(TASK_CLOSE), re.S)
_CODE_RE = re.compile(r"```solidity\n(.*?)```", re.S)


def _code_block(code: str) -> str:
    return "```solidity\n" + code.rstrip("\n") + "\n```"


def _task_block(task: dict) -> str:
    return f"{TASK_OPEN}\n{json.dumps(task, sort_keys=True)}\n{TASK_CLOSE}"


def _format_rules(schema: LayerSchema) -> str:
    return (
        "Answer with a single JSON object and nothing else. It must validate against this schema:\n"
        + json.dumps(schema.schema, sort_keys=True)
    )


def parse_task(prompt: str) -> Optional[dict]:
    m = _TASK_RE.search(prompt)
    return json.loads(m.group(1)) if m else None


def parse_code(prompt: str) -> str:
    m = _CODE_RE.search(prompt)
    return m.group(1) if m else ""


def mapping_prompt(schema: LayerSchema, side: str, entrypoint: str, entry_params: list, properties: list, code: str) -> str:
    prop_lines = "\n".join(f"- {p.name}: {p.description}" for p in properties)
    return "\n\n".join(
        [
            "You are auditing one cross-chain transaction flow of a bridge. "
            f"The flow starts at `{entrypoint}` and runs on the {side} side of the bridge.",
            "For each security property below, name the entry-function parameter that carries it, "
            "or null if no parameter does. Quote in `code_location` one line of the code below, copied "
            "exactly, where that parameter is used; use null when there is none.",
            "Properties:\n" + prop_lines,
            "Code:\n" + _code_block(code),
            _format_rules(schema),
            _task_block(
                {
                    "task": "map_properties",
                    "side": side,
                    "entrypoint": entrypoint,
                    "entry_params": entry_params,
                    "properties": [p.name for p in properties],
                }
            ),
        ]
    )


def rule_prompt(schema: LayerSchema, side: str, parameter: str, mapping: dict, rules: list, checks: dict, code: str) -> str:
    """``checks`` maps each rule id to the ordered check ids behind its checklist."""
    blocks = []
    for r in rules:
        items = "\n".join(f"  - {c}" for c in r.checklist)
        blocks.append(f"{r.rule_id} ({r.dimension}): {r.title}. {r.description}\n{items}")
    return "\n\n".join(
        [
            f"You are checking whether a bridge enforces its security rules for the parameter `{parameter}` "
            f"on the {side} side. The code below contains only the statements that depend on that parameter, "
            "together with the conditions that guard them.",
            "For every checklist item, report `implemented` and quote the enforcing line exactly in `snippet`, "
            "or report `missing` with a null snippet. Copy the checklist item text unchanged.",
            "Rules:\n" + "\n\n".join(blocks),
            "Code:\n" + _code_block(code),
            _format_rules(schema),
            _task_block(
                {
                    "task": "check_rules",
                    "side": side,
                    "parameter": parameter,
                    "mapping": mapping,
                    "rules": [
                        {"rule_id": r.rule_id, "checklist": list(r.checklist), "checks": list(checks[r.rule_id])}
                        for r in rules
                    ],
                }
            ),
        ]
    )


def bypass_prompt(
    schema: LayerSchema,
    side: str,
    parameter: str,
    rule_findings: list,
    patterns: list,
    state_vars: list,
    code: str,
    k: int,
) -> str:
    verdicts = "\n".join(f"- [{f['status']}] {f['rule_id']}: {f['checklist_item']}" for f in rule_findings) or "- none"
    refs = "\n".join(f"- {p['title']}: {p['bypass_principle']} (root cause: {p['root_cause']})" for p in patterns) or "- none"
    state = (
        "\n".join(
            f"- {v['owning_contract']}.{v['name']} : {v['declared_type']}"
            + (f" = {v['initializer_text']}" if v["initializer_text"] is not None else "")
            for v in state_vars
        )
        or "- none"
    )
    return "\n\n".join(
        [
            "Act as an attacker targeting this bridge. Your goal is to move funds or forge messages "
            f"by getting around the checks that guard the parameter `{parameter}` on the {side} side. "
            f"Other analysts are working independently; {k} separate analyses will be compared.",
            "Previous verdicts on the security checklist:\n" + verdicts,
            "Known bypass principles that may apply:\n" + refs,
            "State variables the flow reads or writes, with their initial values:\n" + state,
            "Code:\n" + _code_block(code),
            "Describe each concrete bypass with its preconditions, attack steps, a short proof-of-concept "
            "outline in prose, and a severity.",
            _format_rules(schema),
            _task_block(
                {
                    "task": "find_bypasses",
                    "side": side,
                    "parameter": parameter,
                    "rule_findings": rule_findings,
                    "patterns": [p["pattern_id"] for p in patterns],
                }
            ),
        ]
    )


def score_prompt(layer: int, finding: dict, code: str, context: Optional[dict] = None) -> str:
    return "\n\n".join(
        [
            "You are reviewing another analyst's finding about a cross-chain bridge. Judge how well the "
            "finding is supported by the code and how useful it is, on a scale from 0 (unsupported or wrong) "
            "to 100 (certainly correct).",
            "Finding:\n" + json.dumps(finding, sort_keys=True, indent=1),
            "Code:\n" + _code_block(code),
            'Answer with a JSON object of the form {"score": <integer 0-100>, "rationale": "<one sentence>"}.',
            _task_block({"task": "score", "layer": layer, "finding": finding, "context": context or {}}),
        ]
    )
