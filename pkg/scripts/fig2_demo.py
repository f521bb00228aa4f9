"""Initial-commitment demo: LTS vs guided DFS on the fig2 tree and its all-terminal variant."""

from ltstot.budget import BudgetMeter
from ltstot.policy import SyntheticPolicy
from ltstot.search import guided_dfs_search, lts_search
from ltstot.suites import fig2_tree


def show(name, res):
    print(f"{name:5s} status={res.status.value:16s} expansions={res.stats.expansions:2d} path={list(res.path)}")
    for r in res.stats.expansion_trace:
        print(f"      pop {r.key:4s} depth={r.depth} pi={r.path_prob:.4f} cost={r.cost:.4f}")


for variant in (False, True):
    tree = fig2_tree(all_leaves_terminal=variant)
    print(f"== fig2{' (all leaves terminal)' if variant else ''}")
    show("LTS", lts_search(SyntheticPolicy(tree), tree.root_node(), BudgetMeter(), 1.0, 6))
    show("DFS", guided_dfs_search(SyntheticPolicy(tree), None, tree.root_node(), BudgetMeter(), 6))
