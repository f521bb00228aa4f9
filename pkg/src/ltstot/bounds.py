"""Expansion/thought bounds for LTS and the temperature-sensitivity bound.

Bounds use the exact stored probabilities, never the epsilon-stabilized cost.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .policy import SyntheticTree, softmax_temperature
from .search import SearchResult, Status


@dataclass(frozen=True)
class BoundReport:
    min_terminal_cost: float
    expansion_bound: float
    thought_bound: float
    observed_expansions: int
    observed_thoughts: int
    satisfied: tuple[bool, bool]

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def expansion_bound(tree: SyntheticTree, realized_terminals: Iterable[str]) -> float:
    """min over the given terminals of depth / path probability."""
    ids = list(realized_terminals)
    if not ids:
        raise ValueError("need at least one realized terminal")
    best = math.inf
    for nid in ids:
        if not tree.is_terminal(nid):
            raise ValueError(f"node {nid!r} is not terminal")
        best = min(best, tree.depth(nid) / tree.path_prob(nid))
    return best


def thought_bound(b_max: int, expansion_bound: float) -> float:
    if expansion_bound < 0:
        raise ValueError("expansion bound must be non-negative")
    return b_max * expansion_bound


def verify_search_against_bounds(result: SearchResult, tree: SyntheticTree, b_max: int) -> BoundReport:
    """Compare a solved synthetic LTS run with both bounds over the terminals it generated."""
    if result.status is not Status.SOLVED:
        raise ValueError(f"bounds apply to solved searches, got {result.status.value}")
    realized = sorted({n.key for n in result.nodes if n.key is not None and tree.is_terminal(n.key)})
    eb = expansion_bound(tree, realized)
    tb = thought_bound(b_max, eb)
    n, m = result.stats.expansions, result.stats.thoughts_generated
    return BoundReport(eb, eb, tb, n, m, (n <= eb, m <= tb))


# -- sensitivity to the generation temperature ---------------------------------


@dataclass(frozen=True)
class InsufficiencyReport:
    """Rows whose solution token has a negative expected logit advantage."""

    margins: tuple[float, ...]
    negative_rows: tuple[int, ...]

    @property
    def worst(self) -> float:
        return min(self.margins)


def solution_margin(logits: Sequence[float], index: int, tau: float) -> float:
    """sum_j p_tau(y_j) (l_index - l_j)."""
    ell = np.asarray(logits, dtype=float)
    if not 0 <= index < ell.size:
        raise IndexError(f"solution index {index} out of range for {ell.size} logits")
    p = softmax_temperature(ell, tau)
    return float(np.dot(p, ell[index] - ell))


def delta_plus(rows: Iterable[tuple[Sequence[float], int]], tau: float) -> float | InsufficiencyReport:
    """Smallest solution-token margin over the rows, or a report if any is negative."""
    margins = tuple(solution_margin(ell, i, tau) for ell, i in rows)
    if not margins:
        raise ValueError("need at least one row")
    negative = tuple(k for k, m in enumerate(margins) if m < 0)
    if negative:
        return InsufficiencyReport(margins, negative)
    return min(margins)


@dataclass(frozen=True)
class SensitivityInput:
    b_max: int
    g_goal: int
    pi_goal: float
    k: int
    delta_plus: float
    tau: float

    def __post_init__(self):
        if self.b_max < 1 or self.g_goal < 1 or self.k < 1:
            raise ValueError("b_max, g_goal and k must be positive")
        if not 0 < self.pi_goal <= 1:
            raise ValueError("pi_goal must lie in (0, 1]")
        if self.delta_plus < 0 or self.tau <= 0:
            raise ValueError("delta_plus must be >= 0 and tau > 0")


def sensitivity_bound(inp: SensitivityInput) -> float:
    """b_max * g^2 / pi^2 * k * delta_plus / tau^2."""
    return inp.b_max * inp.g_goal**2 / inp.pi_goal**2 * inp.k * inp.delta_plus / inp.tau**2


@dataclass
class LogitTree:
    """Tree whose edge probabilities come from per-node logits at a temperature.

    ``logits[nid]`` holds one logit per child of ``nid`` (in child order).
    Each edge is one token, so k = 1. ``goal`` is the single terminal state.
    """

    children: dict[str, list[str]]
    logits: dict[str, list[float]]
    goal: str
    root_id: str = "r"
    _parent: dict[str, str] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        for nid, kids in self.children.items():
            for c in kids:
                self._parent[c] = nid

    def solution_rows(self) -> list[tuple[list[float], int]]:
        rows = []
        nid = self.goal
        while nid != self.root_id:
            par = self._parent[nid]
            rows.append((self.logits[par], self.children[par].index(nid)))
            nid = par
        return rows[::-1]

    def goal_depth(self) -> int:
        return len(self.solution_rows())

    def goal_prob(self, tau: float) -> float:
        lp = 0.0
        for ell, i in self.solution_rows():
            lp += math.log(softmax_temperature(ell, tau)[i])
        return math.exp(lp)

    def thought_bound_at(self, tau: float, b_max: int) -> float:
        return b_max * self.goal_depth() / self.goal_prob(tau)

    def to_synthetic(self, tau: float) -> SyntheticTree:
        from .policy import SyntheticNode

        nodes = {}
        for nid, kids in self.children.items():
            probs = softmax_temperature(self.logits[nid], tau) if kids else []
            nodes[nid] = SyntheticNode(tuple((c, float(p)) for c, p in zip(kids, probs)))
        for nid in list(self._parent) + [self.root_id]:
            if nid not in nodes:
                nodes[nid] = SyntheticNode()
        nodes[self.goal] = SyntheticNode(nodes[self.goal].children, terminal=True, goal=True)
        return SyntheticTree(nodes, self.root_id)


@dataclass(frozen=True)
class SensitivityCheck:
    tau: float
    slope: float
    bound: float
    delta_plus: float

    @property
    def holds(self) -> bool:
        return self.slope <= self.bound + 1e-6


def check_sensitivity(tree: LogitTree, tau: float, b_max: int = 3, h: float = 1e-4) -> SensitivityCheck | InsufficiencyReport:
    """Forward-difference slope of the thought bound in tau against the closed-form bound."""
    dp = delta_plus(tree.solution_rows(), tau)
    if isinstance(dp, InsufficiencyReport):
        return dp
    slope = (tree.thought_bound_at(tau + h, b_max) - tree.thought_bound_at(tau, b_max)) / h
    bound = sensitivity_bound(SensitivityInput(b_max, tree.goal_depth(), tree.goal_prob(tau), 1, dp, tau))
    return SensitivityCheck(tau, slope, bound, dp)
