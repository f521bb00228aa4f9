"""Sorting a five-element array with pairwise swaps."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from importlib import resources
from typing import Sequence

import numpy as np

from .base import Domain, DomainInstance, SchemaError, Verdict

ARRAY_SIZE = 5
MAX_DEPTH = 10
TERMINAL_PREFIX = "Answer:"

_NUMBER = r"-?\d+(?:\.\d+)?"
_ARRAY = re.compile(r"\[\s*(" + _NUMBER + r"(?:\s*,\s*" + _NUMBER + r")*)?\s*\]")
_SWAP = re.compile(r"swap\s+(" + _NUMBER + r")\s+and\s+(" + _NUMBER + r")", re.IGNORECASE)


@dataclass(frozen=True)
class SortInstance:
    array: tuple[float, ...]
    seed: int

    def __post_init__(self):
        if not self.array:
            raise ValueError("sort instances need at least one element")

    @property
    def target(self) -> list[float]:
        return sorted(self.array)


def format_number(x: float) -> str:
    return f"{x:.1f}".rstrip("0").rstrip(".") if x != int(x) else str(int(x))


def format_array(xs: Sequence[float]) -> str:
    return "[" + ", ".join(format_number(x) for x in xs) + "]"


def sort_make_instances(seed: int, count: int) -> list[SortInstance]:
    """Values uniform over [-99.9, 99.9] on a 0.1 grid."""
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        tenths = rng.integers(-999, 1000, size=ARRAY_SIZE)
        out.append(SortInstance(tuple(float(t) / 10 for t in tenths), seed))
    return out


def parse_array(text: str) -> list[float] | None:
    m = _ARRAY.search(text)
    if m is None:
        return None
    body = m.group(1)
    if body is None:
        return []
    return [float(x) for x in body.split(",")]


def sort_evaluate(instance: SortInstance, thoughts: Sequence[str]) -> Verdict:
    """Goal iff the final ``Answer: [...]`` array is the input sorted ascending."""
    if not thoughts:
        return Verdict.NOT_GOAL
    last = thoughts[-1].strip()
    if not last.startswith(TERMINAL_PREFIX):
        return Verdict.NOT_GOAL
    arr = parse_array(last[len(TERMINAL_PREFIX):])
    if arr is None:
        return Verdict.UNPARSEABLE
    return Verdict.GOAL if arr == instance.target else Verdict.NOT_GOAL


def sort_gold_thoughts(instance: SortInstance) -> list[str]:
    """Selection-sort swaps followed by the answer line."""
    arr = list(instance.array)
    thoughts = []
    for i in range(len(arr)):
        j = min(range(i, len(arr)), key=lambda k: (arr[k], k))
        if arr[j] < arr[i]:
            a, b = arr[i], arr[j]
            arr[i], arr[j] = arr[j], arr[i]
            thoughts.append(f"Swap {format_number(a)} and {format_number(b)}: {format_array(arr)}")
    thoughts.append(f"{TERMINAL_PREFIX} {format_array(arr)}")
    return thoughts


def sort_swap_diagnostic(instance: SortInstance, thoughts: Sequence[str]) -> list[str]:
    """Replay ``Swap a and b`` steps; list inconsistencies. Diagnostic only, never a verdict."""
    arr = list(instance.array)
    issues = []
    for n, t in enumerate(thoughts):
        if t.strip().startswith(TERMINAL_PREFIX):
            final = parse_array(t)
            if final is not None and final != arr:
                issues.append(f"answer {format_array(final)} differs from replayed {format_array(arr)}")
            break
        m = _SWAP.search(t)
        if m is None:
            issues.append(f"step {n + 1}: not a swap")
            continue
        a, b = float(m.group(1)), float(m.group(2))
        if a not in arr or b not in arr:
            issues.append(f"step {n + 1}: swaps a value not in the array")
            continue
        shown = parse_array(t[m.end():])
        # with repeated values several swaps fit; prefer one matching the shown array
        options = []
        for i in (k for k, x in enumerate(arr) if x == a):
            for j in (k for k, x in enumerate(arr) if x == b and k != i):
                cand = arr.copy()
                cand[i], cand[j] = cand[j], cand[i]
                options.append(cand)
        if not options:
            options = [arr.copy()]
        arr = next((c for c in options if c == shown), options[0])
        if shown is not None and shown != arr:
            issues.append(f"step {n + 1}: shown array disagrees with the swap")
    return issues


def to_domain_instance(inst: SortInstance, index: int) -> DomainInstance:
    return DomainInstance(
        domain_id="sort",
        instance_id=f"sort-{inst.seed}-{index:04d}",
        statement=f"Input: {format_array(inst.array)}",
        ground_truth=inst.target,
        max_depth=MAX_DEPTH,
        terminal_prefix=TERMINAL_PREFIX,
        payload=inst,
    )


def dump_instances(instances: Sequence[SortInstance]) -> str:
    return json.dumps([list(i.array) for i in instances])


def load_instances(text: str, seed: int = 0) -> list[SortInstance]:
    data = json.loads(text)
    if not isinstance(data, list) or not all(isinstance(row, list) for row in data):
        raise SchemaError("sort instance file must be a JSON array of arrays")
    return [SortInstance(tuple(float(x) for x in row), seed) for row in data]


def _template(name: str) -> str:
    return resources.files("ltstot").joinpath("data", name).read_text(encoding="utf-8").rstrip("\n")


class SortDomain(Domain):
    def __init__(self):
        super().__init__(
            domain_id="sort",
            terminal_prefix=TERMINAL_PREFIX,
            instruction=_template("sort_prompt.txt"),
            eval_instruction=_template("sort_eval_prompt.txt"),
        )

    def evaluate(self, instance: DomainInstance, thoughts: Sequence[str]) -> Verdict:
        return sort_evaluate(instance.payload, thoughts)
