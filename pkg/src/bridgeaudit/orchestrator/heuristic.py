"""A deterministic, rule-based stand-in for a language model.

It answers the same prompts as a real model, using name matching for
property mapping and per-check regular expressions for rule verdicts, and
builds bypass scenarios from missing checks. Its purpose is to exercise
the full pipeline offline and reproducibly; it is not a substitute for an
actual model's judgement.

``persona`` varies which matching line a generator quotes and the order it
reports bypasses in, so an ensemble of heuristic providers disagrees a
little, as real ensembles do.
"""

from __future__ import annotations

import json
import re
from typing import Optional

from ..predicates import RULES, PredicateId, check_for_item
from .prompts import parse_code, parse_task
from .providers import ProviderResponse, Sampling, prompt_text

PARAM_ALIASES = {
    "source_chain": ("srcchainid", "sourcechainid", "fromchainid", "srcchain", "sourcechain", "originchain"),
    "sender": ("sender", "from", "depositor", "user"),
    "dest_chain": ("dstchainid", "destchainid", "tochainid", "destinationchainid", "dstchain", "destchain"),
    "receiver": ("receiver", "recipient", "to", "beneficiary"),
    "token": ("token", "asset", "tokenaddress"),
    "amount": ("amount", "value", "amt", "quantity"),
    "nonce": ("nonce", "sequence", "seq"),
    "ext_addr": ("calltarget", "target", "externalcontract", "callee"),
    "ext_func": ("calldata", "selector", "data", "payload"),
    "slippage": ("minout", "minamountout", "amountoutmin", "slippage"),
    "signature": ("signature", "signatures", "sig", "proof"),
}

_ANY = r"[A-Za-z_]\w*"

CUES = {
    "receiver_nonzero": r"\b{receiver}\s*!=\s*address\(0\)|address\(0\)\s*!=\s*{receiver}\b",
    "amount_positive": r"\b{amount}\s*(>|!=)\s*0\b|\b0\s*<\s*{amount}\b",
    "dest_not_current": r"\b{dest_chain}\s*!=\s*(block\.)?chainid\b|\b(block\.)?chainid\s*!=\s*{dest_chain}\b",
    "dest_is_current": r"\b{dest_chain}\s*==\s*(block\.)?chainid\b|\b(block\.)?chainid\s*==\s*{dest_chain}\b",
    "token_whitelisted": r"(whitelist|allowed|supportedtoken)\w*\[\s*{token}\s*\]",
    "nonce_expected": r"\bnonces?\w*\[\s*(msg\.sender|{sender})\s*\]",
    "dest_supported": r"supported\w*\[\s*{dest_chain}\s*\]",
    "nonce_unused": r"!\s*(used|processed|executed)\w*\[|(used|processed|executed)\w*\[.*\]\s*==\s*false",
    "source_supported": r"supported\w*\[\s*{source_chain}\s*\]",
    "proof_valid": r"\bverify\w*\(|\becrecover\(",
    "ext_addr_whitelisted": r"(whitelist|allowed)\w*\[\s*{ext_addr}\s*\]",
    "ext_func_whitelisted": r"(whitelist|allowed)\w*\[\s*(bytes4\()?{ext_func}",
    "locked_correct": r"\btransferfrom\(|\bburn\w*\(|\bbalanceof\(",
    "min_execution_bounded": r"\bmin\w*out\b|\bminamount\w*|\bamountoutmin\b",
    "reference_price_bounded": r"\bprice\w*|\boracle\w*|\btwap\b",
    "unlocked_correct": r"\.transfer\(|\bmint\w*\(|\bunlock\w*\(",
}

# bypass pattern preferred for each missing check, and the severity by dimension
CHECK_PATTERN = {
    "nonce_unused": "KP-01",
    "nonce_expected": "KP-01",
    "proof_valid": "KP-02",
    "ext_addr_whitelisted": "KP-03",
    "ext_func_whitelisted": "KP-03",
    "min_execution_bounded": "KP-04",
    "reference_price_bounded": "KP-04",
    "receiver_nonzero": "KP-05",
    "amount_positive": "KP-05",
    "source_supported": "KP-06",
    "dest_supported": "KP-06",
    "dest_is_current": "KP-06",
    "dest_not_current": "KP-06",
    "token_whitelisted": "KP-07",
    "locked_correct": "KP-10",
    "unlocked_correct": "KP-10",
}
DIMENSION_SEVERITY = {"authenticity": "critical", "safety": "high", "integrity": "medium"}
MAX_BYPASSES = 3

# per check: what the attacker gains and how
ATTACKS = {
    "receiver_nonzero": ("burn bridged funds irrecoverably", "route the transfer to address zero"),
    "amount_positive": ("emit spurious zero-value messages", "submit a transfer of amount zero"),
    "dest_not_current": ("loop a transfer back onto its origin chain", "name the current chain as destination"),
    "dest_is_current": ("replay a release meant for another chain", "deliver a message addressed to a different chain"),
    "token_whitelisted": ("mint wrapped value for a worthless token", "deposit a self-deployed fake token"),
    "nonce_expected": ("reorder or skip message sequence numbers", "choose an arbitrary nonce"),
    "dest_supported": ("strand funds on a chain without a counterpart", "target an unsupported chain id"),
    "nonce_unused": ("withdraw the same deposit twice", "resubmit an already processed message"),
    "source_supported": ("forge deposits from a chain the bridge never watches", "claim an unsupported origin chain id"),
    "proof_valid": ("release funds without any deposit", "attach a forged or empty signature"),
    "ext_addr_whitelisted": ("drain approvals held by the bridge", "point the external call at a token contract"),
    "ext_func_whitelisted": ("invoke privileged selectors on trusted contracts", "choose transferFrom as the external selector"),
    "locked_correct": ("obtain credit without locking funds", "use a token whose transfer moves nothing"),
    "min_execution_bounded": ("sandwich the swap for profit", "front-run with a pool trade that pushes output below minimum"),
    "reference_price_bounded": ("trade at a manipulated price", "skew the pool price before the bridge swaps"),
    "unlocked_correct": ("receive a different amount than bridged", "exploit a fee-on-transfer or wrong asset mapping"),
}
SEVERITY_SCORE = {"critical": 92, "high": 84, "medium": 72, "low": 55}

_HEADER = re.compile(r"^(function|modifier|contract|abstract|library|interface|constructor|fallback|receive)\b|^[{}]+$")


def code_lines(code: str) -> list[str]:
    return [ln.strip() for ln in code.splitlines() if ln.strip() and not _HEADER.match(ln.strip())]


def map_parameter(prop: str, params: list[str]) -> Optional[str]:
    lowered = {p.lower().lstrip("_"): p for p in params}
    for alias in PARAM_ALIASES.get(prop, ()):
        if alias in lowered:
            return lowered[alias]
    return None


def cue_regex(check_id: str, mapping: dict) -> re.Pattern:
    def fill(m):
        name = mapping.get(m.group(1))
        return re.escape(name) if name else _ANY

    return re.compile(re.sub(r"\{(\w+)\}", fill, CUES[check_id]), re.I)


def cue_lines(check_id: str, mapping: dict, lines: list[str]) -> list[str]:
    rx = cue_regex(check_id, mapping)
    return [ln for ln in lines if rx.search(ln)]


check_of = check_for_item


def _word_in(name: str, line: str) -> bool:
    return re.search(rf"(?<![\w$]){re.escape(name)}(?![\w$])", line) is not None


class HeuristicProvider:
    """Offline provider answering pipeline prompts by rules."""

    def __init__(self, name: str = "heuristic", persona: int = 0):
        self.name = name
        self.persona = persona

    def complete(self, messages: list[dict], sampling: Sampling) -> ProviderResponse:
        prompt = prompt_text(messages)
        task = parse_task(prompt)
        if task is None:
            return ProviderResponse('{"findings": []}')
        handler = getattr(self, "_" + task["task"], None)
        if handler is None:
            return ProviderResponse('{"findings": []}')
        doc = handler(task, parse_code(prompt))
        return ProviderResponse(json.dumps(doc, sort_keys=True))

    def _pick(self, options: list[str]) -> Optional[str]:
        return options[self.persona % len(options)] if options else None

    # -- layer 2
    def _map_properties(self, task: dict, code: str) -> dict:
        lines = code_lines(code)
        findings = []
        for prop in task["properties"]:
            param = map_parameter(prop, task["entry_params"])
            where = self._pick([ln for ln in lines if _word_in(param, ln)]) if param else None
            findings.append(
                {"property_name": prop, "parameter_name": param if where else None, "code_location": where}
            )
        return {"findings": findings}

    # -- layer 4
    def _check_rules(self, task: dict, code: str) -> dict:
        lines = code_lines(code)
        findings = []
        for rule in task["rules"]:
            for item, cid in zip(rule["checklist"], rule["checks"]):
                hits = cue_lines(cid, task["mapping"], lines)
                findings.append(
                    {
                        "rule_id": rule["rule_id"],
                        "checklist_item": item,
                        "status": "implemented" if hits else "missing",
                        "snippet": self._pick(hits),
                    }
                )
        return {"findings": findings}

    # -- layer 5
    def _find_bypasses(self, task: dict, code: str) -> dict:
        missing = [f for f in task["rule_findings"] if f["status"] == "missing"]
        if self.persona and missing:
            shift = self.persona % len(missing)
            missing = missing[shift:] + missing[:shift]
        findings = []
        for f in missing[:MAX_BYPASSES]:
            cid = check_of(f["rule_id"], f["checklist_item"])
            dimension = RULES[PredicateId(f["rule_id"])].dimension
            goal, move = ATTACKS.get(cid, ("break the rule", "send a request that the rule should reject"))
            pattern = CHECK_PATTERN.get(cid or "", "")
            steps = [move[0].upper() + move[1:] + "."]
            if pattern in task["patterns"]:
                steps.append(f"This follows known bypass {pattern}.")
            steps.append(f"Observe the flow completes, letting the attacker {goal}.")
            findings.append(
                {
                    "bypass_title": f"{f['rule_id']}/{cid}: attacker can {goal}",
                    "preconditions": [f"No check enforces: {f['checklist_item']}"],
                    "steps": steps,
                    "poc_sketch": f"{cid}: {move} via `{task['parameter']}`",
                    "severity": DIMENSION_SEVERITY[dimension],
                }
            )
        return {"findings": findings}

    # -- evaluator
    def _score(self, task: dict, code: str) -> dict:
        finding = task["finding"]
        ctx = task.get("context") or {}
        layer = task["layer"]
        if layer == 2:
            param, where = finding.get("parameter_name"), finding.get("code_location")
            if param is None:
                score = 70
            else:
                score = 90 if where and _word_in(param, where) else 40
        elif layer == 4:
            cid = check_of(finding["rule_id"], finding["checklist_item"])
            if cid is None:
                score = 20
            else:
                found = bool(cue_lines(cid, ctx.get("mapping", {}), code_lines(code)))
                agrees = found == (finding["status"] == "implemented")
                score = 86 if agrees else 30
        else:
            score = SEVERITY_SCORE.get(finding.get("severity"), 50)
        return {"score": score, "rationale": f"rule-based assessment for layer {layer}"}
