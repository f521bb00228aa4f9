"""Test oracles: brute-force reference computations that share no code with the engine."""

from __future__ import annotations

import math

from hypothesis import strategies as st

from ltstot.policy import SyntheticNode, SyntheticTree


def oracle_lts_order(tree: SyntheticTree, max_depth: int = 99) -> tuple[list[str], str | None]:
    """Plain-list LTS: pop the minimum of (g/pi, -g, seq) until a terminal is popped."""
    seq = 0
    frontier = [(0.0, 0, seq, tree.root_id, 0, 1.0)]
    popped = []
    while frontier:
        best = min(frontier)
        frontier.remove(best)
        _, _, _, nid, g, pi = best
        popped.append(nid)
        if tree.nodes[nid].terminal or g >= max_depth:
            return popped, nid
        for cid, p in sorted(tree.nodes[nid].children, key=lambda cp: -cp[1]):
            seq += 1
            frontier.append(((g + 1) / (pi * p), -(g + 1), seq, cid, g + 1, pi * p))
    return popped, None


def brute_force_min_cost(tree: SyntheticTree) -> float:
    """min g/pi over every terminal, by walking the whole tree."""
    best = math.inf
    stack = [(tree.root_id, 0, 1.0)]
    while stack:
        nid, g, pi = stack.pop()
        if tree.nodes[nid].terminal:
            best = min(best, g / pi)
        for cid, p in tree.nodes[nid].children:
            stack.append((cid, g + 1, pi * p))
    return best


def central_difference(f, x: float, h: float = 1e-6) -> float:
    return (f(x + h) - f(x - h)) / (2 * h)


@st.composite
def synthetic_trees(draw, max_depth: int = 4, max_branching: int = 3):
    """Small random trees with distinct-ish positive edge probabilities."""
    nodes: dict[str, SyntheticNode] = {}
    counter = [0]

    def build(nid: str, depth: int) -> None:
        leaf = depth >= max_depth or (depth > 0 and draw(st.booleans()))
        if leaf:
            nodes[nid] = SyntheticNode((), terminal=draw(st.booleans()) or depth >= max_depth, goal=False)
            return
        k = draw(st.integers(1, max_branching))
        weights = draw(st.lists(st.floats(0.05, 1.0), min_size=k, max_size=k))
        total = sum(weights) * draw(st.floats(1.0, 1.5))
        kids = []
        for w in weights:
            counter[0] += 1
            cid = f"n{counter[0]}"
            kids.append((cid, w / total))
            build(cid, depth + 1)
        nodes[nid] = SyntheticNode(tuple(kids), terminal=False)

    build("root", 0)
    return SyntheticTree(nodes, "root")


class ScriptedSortLM:
    """In-process stand-in for a completions server that knows how to sort.

    For each prompt the k-th request returns: the next selection-sort step
    (k = 0 and 1, so duplicates occur) or an unsorted answer (k = 2).
    Self-evaluation says yes to consistent steps.
    """

    def __init__(self):
        self.calls: dict[str, int] = {}
        self.requests: list[dict] = []

    @staticmethod
    def _state(prompt: str):
        from ltstot.domains.sort import parse_array

        head, _, steps = prompt.rpartition("Steps:\n")
        arr = parse_array(head.rsplit("Input:", 1)[1])
        for line in steps.splitlines():
            shown = parse_array(line.split(":", 1)[-1])
            if shown is not None:
                arr = shown
        return arr

    @staticmethod
    def _next(arr):
        from ltstot.domains.sort import SortInstance, sort_gold_thoughts

        return sort_gold_thoughts(SortInstance(tuple(arr), 0))[0]

    def post(self, path: str, payload: dict) -> dict:
        self.requests.append(payload)
        prompt = payload["prompt"]
        if payload["max_tokens"] == 1:
            cand = prompt.rsplit("Candidate step: ", 1)[1].split("\n", 1)[0]
            good = cand == self._next(self._state(prompt.rsplit("Candidate step: ", 1)[0]))
            table = {" yes": -0.2, " no": -1.8} if good else {" yes": -1.8, " no": -0.2}
            return {"choices": [{"text": " yes", "logprobs": {"tokens": [" yes"], "token_logprobs": [-0.2], "top_logprobs": [table]}}]}
        k = self.calls.get(prompt, 0)
        self.calls[prompt] = k + 1
        arr = self._state(prompt)
        if k % 3 < 2:
            text, lp = self._next(arr), -0.05
        else:
            text, lp = "Answer: " + str(list(reversed(sorted(arr)))), -0.7
        words = text.split(" ")
        tokens = [w if i == 0 else " " + w for i, w in enumerate(words)] + ["\n"]
        return {
            "choices": [
                {
                    "text": text + "\n",
                    "finish_reason": "stop",
                    "logprobs": {"tokens": tokens, "token_logprobs": [lp] * len(words) + [-0.01]},
                }
            ]
        }
