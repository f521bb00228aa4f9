"""Tree nodes, expansion results, and the backend protocols the searches call."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Hashable, Protocol, runtime_checkable

from .budget import BudgetMeter


class PolicyError(RuntimeError):
    """A policy or evaluator backend failed (transport, timeout, malformed reply)."""


class ConfigurationError(PolicyError):
    """The backend cannot provide what the search needs, e.g. token logprobs."""


class EmptyExpansionError(PolicyError):
    """Every sampled thought was empty."""


@dataclass(frozen=True)
class Thought:
    """One generated edge: its text and the model probability of producing it."""

    text: str
    prob: float
    logprob: float | None = None
    token_count: int = 1
    terminal: bool = False
    key: Hashable | None = None
    truncated: bool = False

    def __post_init__(self):
        if not 0.0 <= self.prob <= 1.0:
            raise ValueError(f"thought probability {self.prob} outside [0, 1]")
        if self.logprob is None:
            object.__setattr__(self, "logprob", math.log(self.prob) if self.prob > 0 else -math.inf)


@dataclass
class Expansion:
    """Deduplicated children of one state.

    ``raw_count`` is the number of samples drawn (and charged) before
    deduplication; ``exhausted`` is set when the meter refused a sample.
    Probabilities are never renormalized over the sample.
    """

    thoughts: list[Thought] = field(default_factory=list)
    raw_count: int = 0
    exhausted: bool = False
    deduplicated: bool = True


@dataclass(eq=False)
class SearchNode:
    id: int
    parent: SearchNode | None
    thought: str
    depth: int
    log_prob: float
    terminal: bool = False
    depth_capped: bool = False
    eval_score: float | None = None
    insertion_seq: int = 0
    key: Hashable | None = None
    payload: Any = None

    @classmethod
    def root(cls, key: Hashable | None = None, terminal: bool = False, payload: Any = None) -> SearchNode:
        return cls(id=0, parent=None, thought="", depth=0, log_prob=0.0, terminal=terminal, key=key, payload=payload)

    @property
    def parent_id(self) -> int | None:
        return None if self.parent is None else self.parent.id

    @property
    def path_prob(self) -> float:
        return math.exp(self.log_prob)

    def lineage(self) -> list[SearchNode]:
        out = []
        node: SearchNode | None = self
        while node is not None:
            out.append(node)
            node = node.parent
        return out[::-1]

    def thoughts(self) -> list[str]:
        """Thought texts from the root to this node (root excluded)."""
        return [n.thought for n in self.lineage()[1:]]


@runtime_checkable
class Policy(Protocol):
    def expand(self, node: SearchNode, meter: BudgetMeter) -> Expansion:
        """Generate children of ``node``, charging ``meter`` once per sample drawn."""
        ...


@runtime_checkable
class StateEvaluator(Protocol):
    charges: bool

    def evaluate(self, node: SearchNode, meter: BudgetMeter) -> float | None:
        """Return a validity score in [0, 1], or None if the meter refused the query."""
        ...


class NullEvaluator:
    """Log-probability-only guidance: no evaluation queries, no charges."""

    charges = False

    def evaluate(self, node: SearchNode, meter: BudgetMeter) -> float | None:
        return None
