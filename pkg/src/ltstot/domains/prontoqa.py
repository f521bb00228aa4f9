"""PrOntoQA proof chains checked step by step against the gold chain."""

from __future__ import annotations

import json
import re
from typing import Any, Sequence

from .base import Domain, DomainInstance, SchemaError, Verdict
from .sort import _template

TERMINAL_PREFIX = "The answer is"
MAX_DEPTH = 10
REQUIRED = ("question", "query", "chain_of_thought", "answer")


def answer_thought(answer: str) -> str:
    return f"{TERMINAL_PREFIX} {str(answer).strip().lower()}."


def normalize(step: str) -> str:
    s = re.sub(r"\s+", " ", step).strip().casefold()
    return s.rstrip(".!?;, ")


def _records(doc: Any) -> list[tuple[str, dict]]:
    """Accept the published layout (``{"exampleN": {"test_example": {...}}}``) or a flat list."""
    if isinstance(doc, dict):
        out = []
        for key, entry in doc.items():
            if not isinstance(entry, dict):
                raise SchemaError(f"{key}: expected an object")
            out.append((key, entry.get("test_example", entry)))
        return out
    if isinstance(doc, list):
        return [(f"example{i + 1}", rec) for i, rec in enumerate(doc)]
    raise SchemaError("PrOntoQA file must be a JSON object or array")


def prontoqa_load(text: str) -> list[DomainInstance]:
    if not text.strip():
        return []
    out = []
    for key, rec in _records(json.loads(text)):
        for f in REQUIRED:
            if f not in rec:
                raise SchemaError(f"{key}: missing field {f!r}")
        chain = list(rec["chain_of_thought"])
        if not chain:
            raise SchemaError(f"{key}: empty chain_of_thought")
        out.append(
            DomainInstance(
                domain_id="prontoqa",
                instance_id=key,
                statement=f"{rec['question'].strip()}\n{rec['query'].strip()}",
                ground_truth=tuple(chain + [answer_thought(rec["answer"])]),
                max_depth=MAX_DEPTH,
                terminal_prefix=TERMINAL_PREFIX,
                payload=rec,
            )
        )
    return out


def prontoqa_evaluate(instance: DomainInstance, thoughts: Sequence[str], strict: bool = False) -> Verdict:
    """Whole-proof match: every step must equal the gold step, then the answer."""
    gold = list(instance.ground_truth)
    got = list(thoughts)
    if not strict:
        gold = [normalize(s) for s in gold]
        got = [normalize(s) for s in got]
    return Verdict.GOAL if got == gold else Verdict.NOT_GOAL


class ProntoQADomain(Domain):
    def __init__(self, strict: bool = False):
        super().__init__(
            domain_id="prontoqa",
            terminal_prefix=TERMINAL_PREFIX,
            instruction=_template("prontoqa_prompt.txt"),
            eval_instruction=_template("prontoqa_eval_prompt.txt"),
        )
        self.strict = strict

    def evaluate(self, instance: DomainInstance, thoughts: Sequence[str]) -> Verdict:
        return prontoqa_evaluate(instance, thoughts, self.strict)
