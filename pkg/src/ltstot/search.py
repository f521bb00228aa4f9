"""Levin tree search, guided depth-first search, and beam search over thought trees.

All three share one accounting model: the policy charges the meter for every
sampled thought, evaluators charge for every self-evaluation, and a refused
charge ends the search with ``budget_exhausted``.
"""

from __future__ import annotations

import heapq
import itertools
import json
import math
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Hashable, Iterable

from .budget import BudgetMeter
from .nodes import (
    Expansion,
    NullEvaluator,
    Policy,
    PolicyError,
    SearchNode,
    StateEvaluator,
    Thought,
)

EPSILON = 1e-14
MIN_COST_TEMPERATURE = 1e-3


class Status(str, Enum):
    SOLVED = "solved_terminal"
    BUDGET_EXHAUSTED = "budget_exhausted"
    FRONTIER_EMPTY = "frontier_empty"
    DEPTH_CAPPED = "depth_capped"


def cost(depth: int, path_prob: float, cost_temperature: float = 1.0, epsilon: float = EPSILON) -> float:
    """LTS priority ``depth / (path_prob ** (1/T) + epsilon)``; T=1 gives g/pi."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if cost_temperature <= 0:
        raise ValueError("cost_temperature must be positive")
    t = max(cost_temperature, MIN_COST_TEMPERATURE)
    if depth == 0:
        return 0.0
    return depth / (path_prob ** (1.0 / t) + epsilon)


def node_cost(node: SearchNode, cost_temperature: float = 1.0, epsilon: float = EPSILON) -> float:
    # exp(log pi / T) avoids forming pi itself when it would underflow
    t = max(cost_temperature, MIN_COST_TEMPERATURE)
    if node.depth == 0:
        return 0.0
    return node.depth / (math.exp(node.log_prob / t) + epsilon)


class Frontier:
    """Min-cost queue; ties go to the deeper node, then to the earlier insertion."""

    def __init__(self):
        self._heap: list[tuple[float, int, int, SearchNode]] = []

    def push(self, node: SearchNode, priority: float) -> None:
        heapq.heappush(self._heap, (priority, -node.depth, node.insertion_seq, node))

    def pop(self) -> tuple[SearchNode, float]:
        priority, _, _, node = heapq.heappop(self._heap)
        return node, priority

    def __len__(self) -> int:
        return len(self._heap)

    def __bool__(self) -> bool:
        return bool(self._heap)


@dataclass(frozen=True)
class TraceRecord:
    node_id: int
    parent_id: int | None
    depth: int
    path_prob: float
    cost: float
    terminal: bool
    key: Hashable | None = None

    def to_json(self) -> str:
        return json.dumps(
            {
                "node_id": self.node_id,
                "parent_id": self.parent_id,
                "depth": self.depth,
                "path_prob": self.path_prob,
                "cost": self.cost,
                "terminal": self.terminal,
                "key": self.key,
            },
            sort_keys=True,
        )


@dataclass(frozen=True)
class SearchStats:
    expansions: int = 0
    thoughts_generated: int = 0
    evaluations: int = 0
    queries_consumed: int = 0
    wall_time: float = 0.0
    expansion_trace: tuple[TraceRecord, ...] = ()


@dataclass(frozen=True)
class SearchResult:
    status: Status
    path: tuple[str, ...]
    stats: SearchStats
    final: SearchNode | None = None
    nodes: tuple[SearchNode, ...] = ()

    @property
    def solved(self) -> bool:
        return self.status is Status.SOLVED

    def trace_keys(self) -> list[Hashable]:
        return [r.key for r in self.stats.expansion_trace]

    def trace_lines(self) -> str:
        return "".join(r.to_json() + "\n" for r in self.stats.expansion_trace)


class SearchAborted(RuntimeError):
    """A policy backend failed mid-search; ``stats`` holds what was done so far."""

    def __init__(self, message: str, stats: SearchStats):
        super().__init__(message)
        self.stats = stats


def parse_trace(text: str) -> list[TraceRecord]:
    records = []
    for line in text.splitlines():
        if line.strip():
            records.append(TraceRecord(**json.loads(line)))
    return records


@dataclass
class RewardWeights:
    """Guided DFS / beam reward: ``logprob * log p(thought) + self_eval * log p(yes)``."""

    logprob: float = 1.0
    self_eval: float = 1.0


def reward(thought_logprob: float, eval_score: float | None, weights: RewardWeights) -> float:
    r = weights.logprob * thought_logprob
    if eval_score is not None:
        r += weights.self_eval * math.log(max(eval_score, 1e-300))
    return r


class _Run:
    """Per-search bookkeeping: node ids, counters, trace, generated nodes."""

    def __init__(self, policy: Policy, meter: BudgetMeter, max_depth: int, root: SearchNode):
        if max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        self.policy = policy
        self.meter = meter
        self.max_depth = max_depth
        self.ids = itertools.count(1)
        self.expansions = 0
        self.thoughts_generated = 0
        self.evaluations = 0
        self.trace: list[TraceRecord] = []
        self.nodes: list[SearchNode] = [root]
        self.consumed0 = meter.consumed
        self.t0 = time.monotonic()

    def record(self, node: SearchNode, priority: float) -> None:
        self.trace.append(
            TraceRecord(node.id, node.parent_id, node.depth, node.path_prob, priority, node.terminal, node.key)
        )

    def stats(self) -> SearchStats:
        return SearchStats(
            expansions=self.expansions,
            thoughts_generated=self.thoughts_generated,
            evaluations=self.evaluations,
            queries_consumed=self.meter.consumed - self.consumed0,
            wall_time=time.monotonic() - self.t0,
            expansion_trace=tuple(self.trace),
        )

    def finish(self, status: Status, final: SearchNode | None = None) -> SearchResult:
        path = tuple(final.thoughts()) if final is not None else ()
        return SearchResult(status, path, self.stats(), final, tuple(self.nodes))

    def expand(self, node: SearchNode) -> tuple[list[SearchNode], bool]:
        try:
            expansion: Expansion = self.policy.expand(node, self.meter)
        except PolicyError as err:
            raise SearchAborted(f"policy failed while expanding node {node.id}: {err}", self.stats()) from err
        self.expansions += 1
        self.thoughts_generated += expansion.raw_count
        children = [self._child(node, t) for t in expansion.thoughts]
        self.nodes.extend(children)
        return children, expansion.exhausted

    def _child(self, parent: SearchNode, thought: Thought) -> SearchNode:
        nid = next(self.ids)
        depth = parent.depth + 1
        return SearchNode(
            id=nid,
            parent=parent,
            thought=thought.text,
            depth=depth,
            log_prob=parent.log_prob + thought.logprob,
            terminal=thought.terminal,
            depth_capped=not thought.terminal and depth >= self.max_depth,
            insertion_seq=nid,
            key=thought.key,
        )

    def score(self, children: list[SearchNode], evaluator: StateEvaluator, weights: RewardWeights):
        """Attach rewards; returns (scored children, exhausted)."""
        scored = []
        for child in children:
            score = None
            if evaluator.charges:
                try:
                    score = evaluator.evaluate(child, self.meter)
                except PolicyError as err:
                    raise SearchAborted(f"evaluator failed on node {child.id}: {err}", self.stats()) from err
                if score is None:
                    return scored, True
                self.evaluations += 1
                child.eval_score = score
            thought_lp = child.log_prob - child.parent.log_prob
            scored.append((reward(thought_lp, score, weights), child))
        return scored, False


def _by_prob(children: Iterable[SearchNode]) -> list[SearchNode]:
    return sorted(children, key=lambda n: -(n.log_prob - n.parent.log_prob))


def lts_search(
    policy: Policy,
    root: SearchNode,
    meter: BudgetMeter,
    cost_temperature: float = 1.0,
    max_depth: int = 10,
    epsilon: float = EPSILON,
) -> SearchResult:
    """Levin tree search: repeatedly expand the frontier node with the lowest cost.

    Terminal (or depth-capped) nodes are returned when popped, never expanded.
    Children are pushed in non-increasing probability order so that equal-cost
    siblings resolve toward the likelier thought.
    """
    run = _Run(policy, meter, max_depth, root)
    frontier = Frontier()
    frontier.push(root, node_cost(root, cost_temperature, epsilon))
    while frontier:
        node, priority = frontier.pop()
        run.record(node, priority)
        if node.terminal:
            return run.finish(Status.SOLVED, node)
        if node.depth_capped or node.depth >= max_depth:
            return run.finish(Status.DEPTH_CAPPED, node)
        if not meter.can_afford("generation"):
            return run.finish(Status.BUDGET_EXHAUSTED)
        children, exhausted = run.expand(node)
        for child in _by_prob(children):
            frontier.push(child, node_cost(child, cost_temperature, epsilon))
        if exhausted:
            return run.finish(Status.BUDGET_EXHAUSTED)
    return run.finish(Status.FRONTIER_EMPTY)


def guided_dfs_search(
    policy: Policy,
    evaluator: StateEvaluator | None,
    root: SearchNode,
    meter: BudgetMeter,
    max_depth: int = 10,
    weights: RewardWeights | None = None,
) -> SearchResult:
    """Depth-first search visiting children in non-increasing reward order."""
    evaluator = evaluator or NullEvaluator()
    weights = weights or RewardWeights()
    run = _Run(policy, meter, max_depth, root)
    stack = [root]
    while stack:
        node = stack.pop()
        run.record(node, node_cost(node))
        if node.terminal:
            return run.finish(Status.SOLVED, node)
        if node.depth_capped or node.depth >= max_depth:
            return run.finish(Status.DEPTH_CAPPED, node)
        if not meter.can_afford("generation"):
            return run.finish(Status.BUDGET_EXHAUSTED)
        children, exhausted = run.expand(node)
        if exhausted:
            return run.finish(Status.BUDGET_EXHAUSTED)
        scored, exhausted = run.score(children, evaluator, weights)
        if exhausted:
            return run.finish(Status.BUDGET_EXHAUSTED)
        ranked = [c for _, c in sorted(scored, key=lambda rc: -rc[0])]
        stack.extend(reversed(ranked))
    return run.finish(Status.FRONTIER_EMPTY)


def beam_search(
    policy: Policy,
    evaluator: StateEvaluator | None,
    root: SearchNode,
    meter: BudgetMeter,
    beam_width: int = 3,
    max_depth: int = 10,
    weights: RewardWeights | None = None,
) -> SearchResult:
    """Level-synchronous search keeping the ``beam_width`` best-rewarded children per depth."""
    if beam_width < 1:
        raise ValueError("beam_width must be >= 1")
    evaluator = evaluator or NullEvaluator()
    weights = weights or RewardWeights()
    run = _Run(policy, meter, max_depth, root)
    if root.terminal:
        run.record(root, 0.0)
        return run.finish(Status.SOLVED, root)
    beam = [root]
    while beam:
        pool = []
        for node in beam:
            run.record(node, node_cost(node))
            if not meter.can_afford("generation"):
                return run.finish(Status.BUDGET_EXHAUSTED)
            children, exhausted = run.expand(node)
            if exhausted:
                return run.finish(Status.BUDGET_EXHAUSTED)
            scored, exhausted = run.score(children, evaluator, weights)
            if exhausted:
                return run.finish(Status.BUDGET_EXHAUSTED)
            pool.extend(scored)
        if not pool:
            return run.finish(Status.FRONTIER_EMPTY)
        beam = [c for _, c in sorted(pool, key=lambda rc: -rc[0])[:beam_width]]
        for node in beam:
            if node.terminal:
                run.record(node, node_cost(node))
                return run.finish(Status.SOLVED, node)
        capped = [n for n in beam if n.depth_capped or n.depth >= max_depth]
        if capped:
            run.record(capped[0], node_cost(capped[0]))
            return run.finish(Status.DEPTH_CAPPED, capped[0])
    return run.finish(Status.FRONTIER_EMPTY)
