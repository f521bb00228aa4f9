from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Sequence


class Verdict(str, Enum):
    GOAL = "goal"
    NOT_GOAL = "not_goal"
    UNPARSEABLE = "unparseable"
    INVALID_PLAN = "invalid_plan"


class SchemaError(ValueError):
    pass


@dataclass(frozen=True)
class DomainInstance:
    domain_id: str
    instance_id: str
    statement: str
    ground_truth: Any
    max_depth: int
    terminal_prefix: str
    payload: Any = None


@dataclass
class Domain:
    """Prompt templates, terminal detection and the ground-truth check for one task family."""

    domain_id: str
    terminal_prefix: str
    instruction: str
    eval_instruction: str
    delimiter: str = "\n"
    step_header: str = "Steps:\n"
    extra: dict = field(default_factory=dict)

    def is_terminal(self, thought: str) -> bool:
        return thought.lstrip().startswith(self.terminal_prefix)

    def build_prompt(self, instance: DomainInstance, thoughts: Sequence[str]) -> str:
        steps = "".join(t + self.delimiter for t in thoughts)
        return f"{self.instruction}\n\n{instance.statement}\n\n{self.step_header}{steps}"

    def build_eval_prompt(self, instance: DomainInstance, thoughts: Sequence[str]) -> str:
        *prior, last = thoughts
        steps = "".join(t + self.delimiter for t in prior)
        return (
            f"{self.eval_instruction}\n\n{instance.statement}\n\n{self.step_header}{steps}"
            f"Candidate step: {last}\nIs the candidate step valid? Answer yes or no.\nAnswer:"
        )

    def evaluate(self, instance: DomainInstance, thoughts: Sequence[str]) -> Verdict:
        raise NotImplementedError
