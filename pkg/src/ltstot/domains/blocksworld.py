"""Four-operator Blocksworld: action parser, simulator, optimal-plan oracle, instances."""

from __future__ import annotations

import json
import re
from collections import deque
from dataclasses import dataclass
from typing import Iterator, Literal, Sequence

import numpy as np

from .base import Domain, DomainInstance, SchemaError, Verdict
from .sort import _template

TABLE = "table"
TERMINAL_PREFIX = "[PLAN END]"
STEPS = (2, 4, 6, 8, 10, 12)
COLORS = ("red", "blue", "orange", "yellow", "white", "magenta", "black", "cyan")
FORMAT_VERSION = 1


class ActionParseError(ValueError):
    pass


class PreconditionError(ValueError):
    pass


class GenerationTimeout(RuntimeError):
    pass


@dataclass(frozen=True)
class Action:
    kind: Literal["pickup", "putdown", "stack", "unstack"]
    block: str
    target: str | None = None

    def text(self) -> str:
        if self.kind == "pickup":
            return f"pick up the {self.block} block"
        if self.kind == "putdown":
            return f"put down the {self.block} block"
        if self.kind == "stack":
            return f"stack the {self.block} block on top of the {self.target} block"
        return f"unstack the {self.block} block from on top of the {self.target} block"


_PATTERNS = [
    (re.compile(r"^pick up (\w+)$"), "pickup"),
    (re.compile(r"^put down (\w+)$"), "putdown"),
    (re.compile(r"^stack (\w+) on (?:top of )?(\w+)$"), "stack"),
    (re.compile(r"^unstack (\w+) from (?:on )?(?:top of )?(\w+)$"), "unstack"),
]


def bw_parse_action(thought: str) -> Action:
    words = [w for w in thought.strip().rstrip(".").lower().split() if w not in ("the", "block")]
    text = " ".join(words)
    for pattern, kind in _PATTERNS:
        m = pattern.match(text)
        if m:
            return Action(kind, *m.groups())
    raise ActionParseError(f"not a Blocksworld action: {thought!r}")


@dataclass(frozen=True)
class BlocksState:
    """``on`` maps every block not in hand to the block (or table) beneath it."""

    on: tuple[tuple[str, str], ...]
    holding: str | None = None

    @classmethod
    def make(cls, on: dict[str, str], holding: str | None = None) -> BlocksState:
        return cls(tuple(sorted(on.items())), holding)

    @property
    def support(self) -> dict[str, str]:
        return dict(self.on)

    @property
    def blocks(self) -> set[str]:
        out = {b for b, _ in self.on}
        if self.holding is not None:
            out.add(self.holding)
        return out

    @property
    def clear(self) -> set[str]:
        covered = {s for _, s in self.on}
        return {b for b, _ in self.on if b not in covered}

    def check(self) -> None:
        sup = self.support
        if self.holding is not None and self.holding in sup:
            raise AssertionError(f"{self.holding} is both held and placed")
        for b, s in sup.items():
            if s != TABLE and s not in sup:
                raise AssertionError(f"{b} rests on {s}, which is not placed")
        below = [s for s in sup.values() if s != TABLE]
        if len(below) != len(set(below)):
            raise AssertionError("two blocks rest on the same block")
        for b in sup:
            seen = set()
            while b != TABLE:
                if b in seen:
                    raise AssertionError("cyclic on-relation")
                seen.add(b)
                b = sup[b]

    def satisfies(self, goal: Sequence[tuple[str, str]]) -> bool:
        sup = self.support
        return all(sup.get(b) == s for b, s in goal)


def bw_apply(state: BlocksState, action: Action) -> BlocksState:
    sup = state.support
    b = action.block
    if b not in state.blocks:
        raise PreconditionError(f"unknown block {b}")
    if action.kind in ("pickup", "unstack"):
        if state.holding is not None:
            raise PreconditionError(f"hand is not empty (holding {state.holding})")
        if b not in state.clear:
            raise PreconditionError(f"{b} is not clear")
        if action.kind == "pickup" and sup[b] != TABLE:
            raise PreconditionError(f"{b} is not on the table")
        if action.kind == "unstack":
            if action.target not in state.blocks:
                raise PreconditionError(f"unknown block {action.target}")
            if sup[b] != action.target:
                raise PreconditionError(f"{b} is not on {action.target}")
        del sup[b]
        return BlocksState.make(sup, holding=b)
    if state.holding != b:
        raise PreconditionError(f"not holding {b}")
    if action.kind == "putdown":
        sup[b] = TABLE
        return BlocksState.make(sup)
    c = action.target
    if c not in state.blocks:
        raise PreconditionError(f"unknown block {c}")
    if c not in state.clear:
        raise PreconditionError(f"{c} is not clear")
    sup[b] = c
    return BlocksState.make(sup)


def inverse(action: Action) -> Action:
    return {
        "pickup": Action("putdown", action.block),
        "putdown": Action("pickup", action.block),
        "stack": Action("unstack", action.block, action.target),
        "unstack": Action("stack", action.block, action.target),
    }[action.kind]


def applicable_actions(state: BlocksState) -> Iterator[Action]:
    sup = state.support
    if state.holding is None:
        for b in sorted(state.clear):
            if sup[b] == TABLE:
                yield Action("pickup", b)
            else:
                yield Action("unstack", b, sup[b])
    else:
        b = state.holding
        yield Action("putdown", b)
        for c in sorted(state.clear):
            yield Action("stack", b, c)


def bfs(init: BlocksState) -> tuple[dict[BlocksState, int], dict[BlocksState, tuple[BlocksState, Action]], list[BlocksState]]:
    dist = {init: 0}
    parent: dict[BlocksState, tuple[BlocksState, Action]] = {}
    order = [init]
    queue = deque([init])
    while queue:
        s = queue.popleft()
        for a in applicable_actions(s):
            t = bw_apply(s, a)
            if t not in dist:
                dist[t] = dist[s] + 1
                parent[t] = (s, a)
                order.append(t)
                queue.append(t)
    return dist, parent, order


def optimal_plan(init: BlocksState, goal: Sequence[tuple[str, str]]) -> list[Action] | None:
    dist, parent, order = bfs(init)
    for s in order:
        if s.satisfies(goal):
            plan = []
            while s != init:
                s, a = parent[s]
                plan.append(a)
            return plan[::-1]
    return None


@dataclass(frozen=True)
class BWProblem:
    init: BlocksState
    goal: tuple[tuple[str, str], ...]
    step: int
    seed: int
    gold_plan: tuple[str, ...]


def describe(problem: BWProblem) -> str:
    sup = problem.init.support
    facts = [f"the {b} block is clear" for b in sorted(problem.init.clear)]
    facts.append("the hand is empty")
    for b, s in sorted(sup.items()):
        facts.append(f"the {b} block is on the table" if s == TABLE else f"the {b} block is on top of the {s} block")
    goal = " and ".join(f"the {b} block is on top of the {s} block" for b, s in problem.goal)
    return f"[STATEMENT]\nAs initial conditions I have that, {', '.join(facts)}.\nMy goal is to have that {goal}."


def _random_state(rng: np.random.Generator, blocks: list[str]) -> BlocksState:
    order = [str(b) for b in rng.permutation(blocks)]
    stacks: list[list[str]] = []
    sup = {}
    for b in order:
        if not stacks or rng.random() < 1.0 / (len(stacks) + 1):
            stacks.append([b])
            sup[b] = TABLE
        else:
            st = stacks[int(rng.integers(0, len(stacks)))]
            sup[b] = st[-1]
            st.append(b)
    return BlocksState.make(sup)


def bw_make_problems(seed: int, step: int, count: int, max_trials: int = 5000) -> list[BWProblem]:
    if step not in STEPS:
        raise ValueError(f"step must be one of {STEPS}")
    rng = np.random.default_rng([seed, step])
    lo, hi = (3, 4) if step <= 4 else (4, 5) if step <= 8 else (5, 6)
    out = []
    trials = 0
    while len(out) < count:
        trials += 1
        if trials > max_trials:
            raise GenerationTimeout(f"no step-{step} instance found in {max_trials} trials")
        n = int(rng.integers(lo, hi + 1))
        init = _random_state(rng, list(COLORS[:n]))
        dist, _, order = bfs(init)
        targets = [s for s in order if dist[s] == step and s.holding is None]
        if not targets:
            continue
        target = targets[int(rng.integers(0, len(targets)))]
        goal = tuple((b, s) for b, s in target.on if s != TABLE)
        if not goal:
            continue
        plan = optimal_plan(init, goal)
        if plan is None or len(plan) != step:
            continue
        out.append(BWProblem(init, goal, step, seed, tuple(a.text() for a in plan)))
    return out


def bw_evaluate(problem: BWProblem, thoughts: Sequence[str]) -> Verdict:
    """Simulate every action before the plan-end marker from the initial state."""
    state = problem.init
    for t in thoughts:
        if t.strip().startswith(TERMINAL_PREFIX):
            break
        try:
            state = bw_apply(state, bw_parse_action(t))
        except (ActionParseError, PreconditionError):
            return Verdict.INVALID_PLAN
    return Verdict.GOAL if state.satisfies(problem.goal) else Verdict.NOT_GOAL


def gold_thoughts(problem: BWProblem) -> list[str]:
    return list(problem.gold_plan) + [TERMINAL_PREFIX]


def to_domain_instance(problem: BWProblem, index: int, max_depth: int | None = None) -> DomainInstance:
    return DomainInstance(
        domain_id="blocksworld",
        instance_id=f"bw-s{problem.step}-{problem.seed}-{index:04d}",
        statement=describe(problem),
        ground_truth=problem.goal,
        max_depth=max_depth if max_depth is not None else problem.step + 2,
        terminal_prefix=TERMINAL_PREFIX,
        payload=problem,
    )


def bw_make_instances(seed: int, step: int, count: int, max_depth: int | None = None) -> list[DomainInstance]:
    return [to_domain_instance(p, i, max_depth) for i, p in enumerate(bw_make_problems(seed, step, count))]


def dump_problems(problems: Sequence[BWProblem]) -> str:
    return json.dumps(
        {
            "format": "ltstot-blocksworld",
            "version": FORMAT_VERSION,
            "instances": [
                {
                    "init": dict(p.init.on),
                    "goal": [list(g) for g in p.goal],
                    "step": p.step,
                    "seed": p.seed,
                    "gold_plan": list(p.gold_plan),
                }
                for p in problems
            ],
        },
        indent=1,
        sort_keys=True,
    )


def load_problems(text: str) -> list[BWProblem]:
    doc = json.loads(text)
    if doc.get("version") != FORMAT_VERSION:
        raise SchemaError(f"unsupported blocksworld file version {doc.get('version')!r}")
    out = []
    for k, rec in enumerate(doc.get("instances", [])):
        for f in ("init", "goal", "step", "seed"):
            if f not in rec:
                raise SchemaError(f"instance {k}: missing field {f!r}")
        init = BlocksState.make(rec["init"])
        init.check()
        out.append(
            BWProblem(init, tuple(tuple(g) for g in rec["goal"]), rec["step"], rec["seed"], tuple(rec.get("gold_plan", ())))
        )
    return out


class BlocksworldDomain(Domain):
    def __init__(self):
        super().__init__(
            domain_id="blocksworld",
            terminal_prefix=TERMINAL_PREFIX,
            instruction=_template("bw_prompt.txt"),
            eval_instruction=_template("bw_eval_prompt.txt"),
            step_header="[PLAN]\n",
        )

    def evaluate(self, instance: DomainInstance, thoughts: Sequence[str]) -> Verdict:
        return bw_evaluate(instance.payload, thoughts)
