"""Seeded synthetic tree suites used by the tests, the acceptance gate and the CLI."""

from __future__ import annotations

from importlib import resources

import numpy as np

from .bounds import LogitTree
from .policy import SyntheticNode, SyntheticTree, load_synthetic_tree, random_synthetic_tree


def fixture_text(name: str) -> str:
    return resources.files("ltstot").joinpath("data", name).read_text(encoding="utf-8")


def fig2_tree(all_leaves_terminal: bool = False) -> SyntheticTree:
    return load_synthetic_tree(fixture_text("fig2_all_terminal.tree" if all_leaves_terminal else "fig2.tree"))


def random_suite(
    count: int = 1000, seed: int = 0, max_depth: int = 5, max_branching: int = 4, goal_rate: float = 0.3
) -> list[SyntheticTree]:
    """Tree i uses seed ``seed + i``; depth in [1, max_depth], branching in [2, max_branching].

    ``goal_rate=1`` makes every terminal a goal, so any solved run is correct.
    """
    trees = []
    for i in range(count):
        rng = np.random.default_rng([seed, i])
        depth = int(rng.integers(1, max_depth + 1))
        branching = int(rng.integers(2, max_branching + 1))
        conc = float(rng.choice([0.3, 1.0, 3.0]))
        trees.append(random_synthetic_tree(seed + i, depth, branching, terminal_rate=0.15, concentration=conc, goal_rate=goal_rate))
    return trees


def uniform_tree(depth: int, branching: int, goal_leaf: int = -1) -> SyntheticTree:
    """Complete tree with equal edge probabilities; all leaves terminal, one goal."""
    nodes: dict[str, SyntheticNode] = {}
    level = ["r"]
    kids: dict[str, list[str]] = {"r": []}
    for _ in range(depth):
        nxt = []
        for nid in level:
            for j in range(branching):
                cid = f"{nid}.{j}"
                kids[nid].append(cid)
                kids[cid] = []
                nxt.append(cid)
        level = nxt
    goal = level[goal_leaf]
    for nid, cs in kids.items():
        leaf = not cs
        nodes[nid] = SyntheticNode(tuple((c, 1.0 / branching) for c in cs), terminal=leaf, goal=nid == goal)
    return SyntheticTree(nodes, "r")


def uniform_suite(count: int = 50, seed: int = 0) -> list[SyntheticTree]:
    rng = np.random.default_rng(seed)
    trees = []
    for _ in range(count):
        depth = int(rng.integers(2, 5))
        branching = int(rng.integers(2, 4))
        goal = int(rng.integers(0, branching**depth))
        trees.append(uniform_tree(depth, branching, goal))
    return trees


def deep_trap_tree(seed: int, depth: int = 5, branching: int = 3, dominant: tuple[float, float] = (0.95, 0.995)) -> SyntheticTree:
    """Tree where one confident thought per node leads into a goal-free dead end.

    At every internal node the first child carries a dominant probability drawn
    from ``dominant``; the rest share the remainder. The all-dominant path ends
    in a non-terminal leaf (the trap); every other leaf at full depth is
    terminal and one of them, off the trap path, is the goal.

    The default dominant range keeps the trap path's pi above 0.95**5 ~ 0.77,
    so pi**(1/0.01) stays above the 1e-14 cost floor down to depth 5 and a
    tau=0.01 LTS can still tell those nodes apart from the floored siblings.
    """
    rng = np.random.default_rng(seed)
    kids: dict[str, list[tuple[str, float]]] = {"r": []}
    level = ["r"]
    for _ in range(depth):
        nxt = []
        for nid in level:
            top = float(rng.uniform(*dominant))
            rest = rng.dirichlet([1.0] * (branching - 1)) * (1.0 - top)
            probs = [top] + [float(max(p, 1e-12)) for p in rest]
            for j, p in enumerate(probs):
                cid = f"{nid}.{j}"
                kids[nid].append((cid, p))
                kids[cid] = []
                nxt.append(cid)
        level = nxt
    trap = "r" + ".0" * depth
    candidates = [nid for nid in level if nid != trap]
    goal = candidates[int(rng.integers(0, len(candidates)))]
    nodes = {
        nid: SyntheticNode(tuple(cs), terminal=(not cs and nid != trap), goal=nid == goal) for nid, cs in kids.items()
    }
    return SyntheticTree(nodes, "r")


def deep_trap_suite(count: int = 100, seed: int = 0, dominant: tuple[float, float] = (0.95, 0.995)) -> list[SyntheticTree]:
    rng = np.random.default_rng(seed)
    return [deep_trap_tree(int(rng.integers(0, 2**31)), int(rng.integers(3, 6)), dominant=dominant) for _ in range(count)]


def adversarial_tree(seed: int) -> SyntheticTree:
    """Randomized initial-commitment trap in the shape of the fig2 tree.

    The root's favoured child opens a goal-free subtree whose leaves are all
    terminal; the goal is a depth-2 child of the other root child and has the
    lowest g/pi among terminals.
    """
    rng = np.random.default_rng(seed)
    a = float(rng.uniform(0.5, 0.6))
    b = 1.0 - a
    g = float(rng.uniform(0.55, 0.7))
    goal_cost = 2.0 / (b * g)
    # left grandchildren must cost more than the goal: a * q < b * g
    q = float(rng.uniform(0.6, 0.95)) * b * g / a
    q = min(q, 0.5)
    depth = int(rng.integers(3, 5))
    nodes: dict[str, SyntheticNode] = {}
    kids: dict[str, list[tuple[str, float]]] = {"s": [("L", a), ("R", b)], "R": [("G", g), ("RR", 1.0 - g)]}
    level = ["L"]
    for d in range(2, depth + 1):
        nxt = []
        for nid in level:
            p = q if d == 2 else 0.5
            kids[nid] = [(nid + "a", p), (nid + "b", p)]
            nxt += [nid + "a", nid + "b"]
        level = nxt
    for nid in level + ["G", "RR"]:
        kids.setdefault(nid, [])
    for nid, cs in kids.items():
        nodes[nid] = SyntheticNode(tuple(cs), terminal=not cs, goal=nid == "G")
    tree = SyntheticTree(nodes, "s")
    assert 2.0 / (a * q) > goal_cost
    return tree


def adversarial_suite(count: int = 30, seed: int = 0) -> list[SyntheticTree]:
    return [adversarial_tree(seed * 100003 + i) for i in range(count)]


def logit_tree(seed: int, depth: int, branching: int, scale: float = 2.0) -> LogitTree:
    """Tree whose edges are softmax(logits / tau) over each node's children.

    Along the solution path the goal's ancestor is always an argmax-logit
    child, so every solution margin is non-negative at any tau.
    """
    rng = np.random.default_rng(seed)
    children: dict[str, list[str]] = {}
    logits: dict[str, list[float]] = {}
    nid = "r"
    frontier = ["r"]
    path = ["r"]
    for d in range(depth):
        nxt = []
        for node in frontier:
            cs = [f"{node}.{j}" for j in range(branching)]
            children[node] = cs
            logits[node] = [float(x) for x in rng.normal(0.0, scale, size=branching)]
            nxt += cs
        on_path = path[-1]
        best = int(np.argmax(logits[on_path]))
        path.append(children[on_path][best])
        frontier = nxt
    for node in frontier:
        children[node] = []
        logits[node] = []
    return LogitTree(children, logits, goal=path[-1])


def logit_suite(count: int = 200, seed: int = 0) -> list[LogitTree]:
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        out.append(logit_tree(int(rng.integers(0, 2**31)), int(rng.integers(1, 5)), int(rng.integers(2, 5))))
    return out
