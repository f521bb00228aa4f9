"""Policies over thought trees: softmax utilities and the synthetic-tree backend.

The synthetic backend replays a stored tree as if it were an LM: expanding a
node returns its stored children with their edge probabilities. When a node has
more children than ``b_max`` a seeded sample without replacement is drawn, so
the realized subtree is a pure function of (tree, node, seed, b_max).
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .budget import BudgetMeter
from .nodes import Expansion, SearchNode, Thought

PROB_TOLERANCE = 1e-9


# -- softmax with temperature ------------------------------------------------


def softmax_temperature(logits: Sequence[float], tau: float) -> np.ndarray:
    """``exp(l_i / tau) / sum_j exp(l_j / tau)`` with a max shift."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    z = np.asarray(logits, dtype=float) / tau
    if z.ndim != 1 or z.size < 2:
        raise ValueError("need a 1-D logit vector with at least two entries")
    if not np.all(np.isfinite(z)):
        raise ValueError("logits must be finite")
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def softmax_temperature_derivative(logits: Sequence[float], tau: float, i: int) -> float:
    """d p_tau(y_i) / d tau = p_i / tau**2 * sum_j p_j (l_j - l_i)."""
    ell = np.asarray(logits, dtype=float)
    p = softmax_temperature(ell, tau)
    return float(p[i] / tau**2 * np.dot(p, ell - ell[i]))


class ThoughtProb(NamedTuple):
    prob: float
    logprob: float


def thought_probability(token_probs: Sequence[float]) -> ThoughtProb:
    """Product of per-token probabilities, accumulated in log space."""
    lp = 0.0
    for q in token_probs:
        if not 0.0 < q <= 1.0:
            raise ValueError(f"token probability {q} outside (0, 1]")
        lp += math.log(q)
    return ThoughtProb(math.exp(lp), lp)


# -- synthetic trees -----------------------------------------------------------


class TreeFormatError(ValueError):
    """A tree document could not be parsed; carries the 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class TreeValidationError(ValueError):
    pass


@dataclass(frozen=True)
class SyntheticNode:
    children: tuple[tuple[str, float], ...] = ()
    terminal: bool = False
    goal: bool = False


@dataclass
class SyntheticTree:
    nodes: dict[str, SyntheticNode]
    root_id: str
    _parent: dict[str, str] = field(default_factory=dict, repr=False)
    _depth: dict[str, int] = field(default_factory=dict, repr=False)
    _logp: dict[str, float] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.root_id not in self.nodes:
            raise TreeValidationError(f"root {self.root_id!r} is not a node")
        parent: dict[str, str] = {}
        for nid, node in self.nodes.items():
            if node.goal and not node.terminal:
                raise TreeValidationError(f"goal node {nid!r} must be terminal")
            total = 0.0
            for cid, p in node.children:
                if cid not in self.nodes:
                    raise TreeValidationError(f"edge {nid!r} -> {cid!r} targets an undeclared node")
                if not 0.0 < p <= 1.0:
                    raise TreeValidationError(f"edge {nid!r} -> {cid!r} has probability {p} outside (0, 1]")
                if cid in parent:
                    raise TreeValidationError(f"node {cid!r} has more than one parent")
                if cid == self.root_id:
                    raise TreeValidationError("the root cannot have a parent (cycle)")
                parent[cid] = nid
                total += p
            if total > 1.0 + PROB_TOLERANCE:
                raise TreeValidationError(f"probability mass exceeds 1 at node {nid!r} ({total:.12g})")
        depth = {self.root_id: 0}
        logp = {self.root_id: 0.0}
        stack = [self.root_id]
        while stack:
            nid = stack.pop()
            for cid, p in self.nodes[nid].children:
                depth[cid] = depth[nid] + 1
                logp[cid] = logp[nid] + math.log(p)
                stack.append(cid)
        unreachable = sorted(set(self.nodes) - set(depth))
        if unreachable:
            raise TreeValidationError(f"orphan or cyclic nodes not reachable from root: {unreachable[:5]}")
        self._parent, self._depth, self._logp = parent, depth, logp

    def __len__(self) -> int:
        return len(self.nodes)

    def depth(self, nid: str) -> int:
        return self._depth[nid]

    def path_prob(self, nid: str) -> float:
        return math.exp(self._logp[nid])

    def log_path_prob(self, nid: str) -> float:
        return self._logp[nid]

    def parent(self, nid: str) -> str | None:
        return self._parent.get(nid)

    def is_terminal(self, nid: str) -> bool:
        return self.nodes[nid].terminal

    def terminals(self) -> list[str]:
        return [nid for nid, n in self.nodes.items() if n.terminal]

    def goals(self) -> list[str]:
        return [nid for nid, n in self.nodes.items() if n.goal]

    def root_node(self) -> SearchNode:
        return SearchNode.root(key=self.root_id, terminal=self.nodes[self.root_id].terminal)

    def max_depth(self) -> int:
        return max(self._depth.values())


def load_synthetic_tree(text: str) -> SyntheticTree:
    """Parse the line-oriented tree document.

    ``node <id> [terminal] [goal]`` declares a node, ``edge <parent> <child> <prob>``
    an edge; lines may appear in any order and ``#`` starts a comment. Child order
    follows edge-line order. The root is the unique node without a parent.
    """
    flags: dict[str, set[str]] = {}
    order: list[str] = []
    edges: list[tuple[str, str, float]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        kind = parts[0]
        if kind == "node":
            if len(parts) < 2:
                raise TreeFormatError("node line needs an id", lineno)
            nid = parts[1]
            if nid in flags:
                raise TreeFormatError(f"node {nid!r} declared twice", lineno)
            extra = set(parts[2:])
            bad = extra - {"terminal", "goal"}
            if bad:
                raise TreeFormatError(f"unknown node flag(s) {sorted(bad)}", lineno)
            flags[nid] = extra
            order.append(nid)
        elif kind == "edge":
            if len(parts) != 4:
                raise TreeFormatError("edge line must be 'edge <parent> <child> <prob>'", lineno)
            try:
                prob = float(parts[3])
            except ValueError:
                raise TreeFormatError(f"bad probability {parts[3]!r}", lineno) from None
            edges.append((parts[1], parts[2], prob))
        else:
            raise TreeFormatError(f"unknown record {kind!r}", lineno)
    if not flags:
        raise TreeFormatError("document declares no nodes")
    children: dict[str, list[tuple[str, float]]] = {nid: [] for nid in order}
    has_parent = set()
    for parent, child, prob in edges:
        if parent not in children:
            raise TreeValidationError(f"edge from undeclared node {parent!r}")
        children[parent].append((child, prob))
        has_parent.add(child)
    roots = [nid for nid in order if nid not in has_parent]
    if len(roots) != 1:
        raise TreeValidationError(
            "cyclic document: no parentless node" if not roots else f"orphan nodes: {roots[1:]} (root {roots[0]!r})"
        )
    nodes = {
        nid: SyntheticNode(
            children=tuple(children[nid]),
            terminal="terminal" in flags[nid] or "goal" in flags[nid],
            goal="goal" in flags[nid],
        )
        for nid in order
    }
    return SyntheticTree(nodes, roots[0])


def dump_synthetic_tree(tree: SyntheticTree) -> str:
    lines = []
    for nid, node in tree.nodes.items():
        tags = (" terminal" if node.terminal else "") + (" goal" if node.goal else "")
        lines.append(f"node {nid}{tags}")
    for nid, node in tree.nodes.items():
        for cid, p in node.children:
            lines.append(f"edge {nid} {cid} {p!r}")
    return "\n".join(lines) + "\n"


def random_synthetic_tree(
    seed: int,
    depth: int,
    branching: int,
    terminal_rate: float = 0.2,
    concentration: float = 1.0,
    goal_rate: float = 0.3,
) -> SyntheticTree:
    """Random tree with Dirichlet edge probabilities.

    Leaves at ``depth`` are terminal; internal non-root nodes become terminal
    leaves with probability ``terminal_rate``. Each terminal is a goal with
    probability ``goal_rate``; if no goal results, goal flags are redrawn.
    """
    if depth < 1 or branching < 1:
        raise ValueError("depth and branching must be positive")
    rng = np.random.default_rng(seed)
    children: dict[str, list[tuple[str, float]]] = {"r": []}
    terminal: dict[str, bool] = {"r": False}
    level = ["r"]
    for d in range(1, depth + 1):
        nxt = []
        for nid in level:
            probs = rng.dirichlet([concentration] * branching) if branching > 1 else np.ones(1)
            for j, p in enumerate(probs):
                cid = f"{nid}.{j}"
                # Dirichlet draws can underflow to exactly 0 for tiny concentrations
                children[nid].append((cid, float(max(p, 1e-300))))
                children[cid] = []
                is_term = d == depth or rng.random() < terminal_rate
                terminal[cid] = is_term
                if not is_term:
                    nxt.append(cid)
        level = nxt
        if not level:
            break
    terms = [nid for nid, t in terminal.items() if t]
    while True:
        goal = {nid: bool(rng.random() < goal_rate) for nid in terms}
        if any(goal.values()):
            break
    nodes = {
        nid: SyntheticNode(tuple(children[nid]), terminal[nid], goal.get(nid, False)) for nid in children
    }
    return SyntheticTree(nodes, "r")


def _stable_seed(*parts: object) -> int:
    digest = hashlib.blake2b("\x1f".join(map(str, parts)).encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


class SyntheticPolicy:
    """Policy that enumerates (or samples from) a stored tree's children."""

    def __init__(self, tree: SyntheticTree, b_max: int = 3, seed: int = 0):
        if b_max < 1:
            raise ValueError("b_max must be >= 1")
        self.tree = tree
        self.b_max = b_max
        self.seed = seed

    def sample_children(self, nid: str) -> list[tuple[str, float]]:
        kids = list(self.tree.nodes[nid].children)
        if len(kids) <= self.b_max:
            return kids
        p = np.array([q for _, q in kids])
        rng = np.random.default_rng(_stable_seed(self.seed, nid))
        picked = rng.choice(len(kids), size=self.b_max, replace=False, p=p / p.sum())
        return [kids[i] for i in sorted(picked)]

    def expand(self, node: SearchNode, meter: BudgetMeter) -> Expansion:
        out = Expansion()
        for cid, p in self.sample_children(node.key):
            if not meter.charge("generation"):
                out.exhausted = True
                break
            out.raw_count += 1
            out.thoughts.append(Thought(text=cid, prob=p, terminal=self.tree.is_terminal(cid), key=cid))
        return out


class SyntheticEvaluator:
    """Noisy stand-in for LM self-evaluation on synthetic trees.

    With probability ``accuracy`` (drawn per node from a seeded stream) it
    reports 0.9 for nodes whose subtree holds a goal and 0.1 otherwise; else it
    returns a uniform random score. Each call charges one evaluation.
    """

    charges = True

    def __init__(self, tree: SyntheticTree, accuracy: float = 0.5, seed: int = 0):
        self.tree = tree
        self.accuracy = accuracy
        self.seed = seed
        self._has_goal: dict[str, bool] = {}
        for nid in sorted(tree.nodes, key=tree.depth, reverse=True):
            n = tree.nodes[nid]
            self._has_goal[nid] = n.goal or any(self._has_goal[c] for c, _ in n.children)

    def evaluate(self, node: SearchNode, meter: BudgetMeter) -> float | None:
        if not meter.charge("evaluation"):
            return None
        rng = np.random.default_rng(_stable_seed("eval", self.seed, node.key))
        if rng.random() < self.accuracy:
            return 0.9 if self._has_goal[node.key] else 0.1
        return float(rng.uniform(0.01, 0.99))
