import json

import pytest
from hypothesis import given, strategies as st

from ltstot.domains import get_domain
from ltstot.domains.base import SchemaError, Verdict
from ltstot.domains import blocksworld as bw
from ltstot.domains import sort
from ltstot.domains.prontoqa import normalize, prontoqa_evaluate, prontoqa_load
from ltstot.suites import fixture_text


# -- sort -----------------------------------------------------------------------------------


def small(arr):
    return sort.SortInstance(tuple(float(x) for x in arr), 0)


def test_sort_instances():
    a = sort.sort_make_instances(0, 100)
    assert len(a) == 100 and all(len(i.array) == 5 for i in a)
    assert a == sort.sort_make_instances(0, 100)
    assert a != sort.sort_make_instances(1, 100)


@pytest.mark.parametrize(
    "answer, verdict",
    [("Answer: [1, 2, 3]", Verdict.GOAL), ("Answer: [1, 3, 2]", Verdict.NOT_GOAL), ("Answer: [1, 2, 4]", Verdict.NOT_GOAL),
     ("Answer: nothing", Verdict.UNPARSEABLE), ("Swap 3 and 1", Verdict.NOT_GOAL)],
)
def test_sort_evaluate_examples(answer, verdict):
    assert sort.sort_evaluate(small([3, 1, 2]), [answer]) is verdict


def test_sort_evaluate_empty():
    assert sort.sort_evaluate(small([3, 1, 2]), []) is Verdict.NOT_GOAL


@given(st.lists(st.integers(-999, 999), min_size=1, max_size=7))
def test_sort_gold_thoughts_accepted_and_consistent(tenths):
    inst = small([t / 10 for t in tenths])
    gold = sort.sort_gold_thoughts(inst)
    assert sort.sort_evaluate(inst, gold) is Verdict.GOAL
    assert sort.sort_swap_diagnostic(inst, gold) == []


def test_sort_swap_diagnostic_flags_bad_step():
    inst = small([3, 1, 2])
    issues = sort.sort_swap_diagnostic(inst, ["Swap 3 and 1: [3, 1, 2]", "Answer: [1, 2, 3]"])
    assert issues and "disagrees" in issues[0]


def test_sort_dump_load_round_trip():
    a = sort.sort_make_instances(3, 10)
    assert sort.load_instances(sort.dump_instances(a), 3) == a
    with pytest.raises(SchemaError):
        sort.load_instances('{"a": 1}')


def test_sort_prompt():
    dom = get_domain("sort")
    inst = sort.to_domain_instance(small([3, 1, 2]), 0)
    p0 = dom.build_prompt(inst, [])
    assert p0.endswith("Input: [3, 1, 2]\n\nSteps:\n")
    assert p0 == dom.build_prompt(inst, [])
    p2 = dom.build_prompt(inst, ["Swap 3 and 1: [1, 3, 2]", "Swap 3 and 2: [1, 2, 3]"])
    assert p2.endswith("Steps:\nSwap 3 and 1: [1, 3, 2]\nSwap 3 and 2: [1, 2, 3]\n")
    assert dom.is_terminal("Answer: [1, 2, 3]") and not dom.is_terminal("Swap 1 and 2")
    ev = dom.build_eval_prompt(inst, ["Swap 3 and 1: [1, 3, 2]"])
    assert ev.rstrip().endswith("Answer:") and "Candidate step: Swap 3 and 1" in ev


# -- blocksworld ------------------------------------------------------------------------


@pytest.mark.parametrize(
    "text, action",
    [
        ("unstack the red block from on top of the blue block", bw.Action("unstack", "red", "blue")),
        ("pick up the orange block", bw.Action("pickup", "orange")),
        ("Put down the red block.", bw.Action("putdown", "red")),
        ("stack the red block on top of the blue block", bw.Action("stack", "red", "blue")),
    ],
)
def test_parse_action(text, action):
    assert bw.bw_parse_action(text) == action
    assert bw.bw_parse_action(action.text()) == action


def test_parse_unknown_verb():
    with pytest.raises(bw.ActionParseError):
        bw.bw_parse_action("fly the red block")


def test_apply_examples():
    s = bw.BlocksState.make({"blue": "table"}, holding="red")
    t = bw.bw_apply(s, bw.bw_parse_action("put down red"))
    assert t.support["red"] == "table" and t.holding is None and "red" in t.clear
    s = bw.BlocksState.make({"red": "table", "blue": "red"})
    with pytest.raises(bw.PreconditionError):
        bw.bw_apply(s, bw.Action("pickup", "red"))
    s = bw.BlocksState.make({"a": "table", "b": "table"})
    s = bw.bw_apply(bw.bw_apply(s, bw.Action("pickup", "a")), bw.Action("stack", "a", "b"))
    assert s.support == {"a": "b", "b": "table"} and s.holding is None and "b" not in s.clear


@st.composite
def states(draw):
    n = draw(st.integers(2, 5))
    blocks = list(bw.COLORS[:n])
    order = draw(st.permutations(blocks))
    sup, stacks = {}, []
    for b in order:
        if not stacks or draw(st.booleans()):
            stacks.append([b])
            sup[b] = bw.TABLE
        else:
            st_ = stacks[draw(st.integers(0, len(stacks) - 1))]
            sup[b] = st_[-1]
            st_.append(b)
    return bw.BlocksState.make(sup)


@given(states(), st.data())
def test_apply_then_inverse_restores(state, data):
    for _ in range(4):
        acts = list(bw.applicable_actions(state))
        a = data.draw(st.sampled_from(acts))
        nxt = bw.bw_apply(state, a)
        nxt.check()
        assert bw.bw_apply(nxt, bw.inverse(a)) == state
        state = nxt


@pytest.mark.parametrize("step", [2, 4])
def test_bw_instances_and_gold_plans(step):
    probs = bw.bw_make_problems(1, step, 5)
    assert len(probs) == 5 and probs == bw.bw_make_problems(1, step, 5)
    for p in probs:
        assert len(p.gold_plan) == step
        assert len(bw.optimal_plan(p.init, p.goal)) == step
        gold = bw.gold_thoughts(p)
        assert bw.bw_evaluate(p, gold) is Verdict.GOAL
        assert bw.bw_evaluate(p, gold[:-2] + gold[-1:]) is Verdict.NOT_GOAL


def test_bw_invalid_plan():
    p = bw.bw_make_problems(0, 2, 1)[0]
    covered = [b for b, s in p.init.on if s != bw.TABLE]
    sup = p.init.support
    under = sup[covered[0]] if covered else None
    bad = f"pick up the {under} block" if under else "fly"
    assert bw.bw_evaluate(p, [bad, bw.TERMINAL_PREFIX]) is Verdict.INVALID_PLAN


def test_bw_round_trip_and_schema():
    probs = bw.bw_make_problems(2, 4, 3)
    text = bw.dump_problems(probs)
    assert bw.load_problems(text) == probs
    doc = json.loads(text)
    doc["version"] = 99
    with pytest.raises(SchemaError):
        bw.load_problems(json.dumps(doc))
    doc["version"] = 1
    del doc["instances"][0]["goal"]
    with pytest.raises(SchemaError):
        bw.load_problems(json.dumps(doc))


def test_bw_domain_prompt_and_terminal():
    dom = get_domain("blocksworld")
    inst = bw.to_domain_instance(bw.bw_make_problems(0, 2, 1)[0], 0)
    assert inst.max_depth == 4
    assert "[STATEMENT]" in dom.build_prompt(inst, [])
    assert dom.is_terminal("[PLAN END]")
    assert dom.evaluate(inst, bw.gold_thoughts(inst.payload)) is Verdict.GOAL


# -- prontoqa -----------------------------------------------------------------------------


@pytest.fixture(scope="module")
def pqa():
    return prontoqa_load(fixture_text("prontoqa_sample.json"))


def test_prontoqa_load(pqa):
    assert len(pqa) == 5 and all(len(i.ground_truth) > 1 for i in pqa)
    assert prontoqa_load("") == []
    with pytest.raises(SchemaError, match="chain_of_thought"):
        prontoqa_load(json.dumps([{"question": "q", "query": "q", "answer": "True"}]))


def test_prontoqa_evaluate(pqa):
    inst = pqa[0]
    gold = list(inst.ground_truth)
    assert prontoqa_evaluate(inst, gold) is Verdict.GOAL
    bad = gold.copy()
    bad[1] = "Rex is a zumpus."
    assert prontoqa_evaluate(inst, bad) is Verdict.NOT_GOAL
    spaced = [s.replace(" ", "  ") for s in gold]
    assert prontoqa_evaluate(inst, spaced) is Verdict.GOAL
    assert prontoqa_evaluate(inst, spaced, strict=True) is Verdict.NOT_GOAL
    assert normalize("  Rex  is a Cat. ") == "rex is a cat"


def test_unknown_domain():
    with pytest.raises(ValueError):
        get_domain("crosswords")
