import threading
import time

import pytest
from hypothesis import given, strategies as st

from ltstot.budget import BudgetMeter


def test_charge_to_limit():
    m = BudgetMeter(limit=10, consumed=9)
    assert m.charge("generation") and m.consumed == 10
    assert not m.charge("generation") and m.consumed == 10
    assert m.remaining == 0


def test_generation_then_evaluation_costs_two():
    m = BudgetMeter()
    m.charge("generation")
    m.charge("evaluation")
    assert m.consumed == 2 and m.generations == 1 and m.evaluations == 1
    assert m.remaining is None


def test_custom_prices():
    m = BudgetMeter(limit=5, evaluation_charge=3)
    assert m.charge("evaluation") and m.consumed == 3
    assert not m.can_afford("evaluation")
    assert m.can_afford("generation")


@pytest.mark.parametrize("kw", [{"limit": -1}, {"generation_charge": 0}])
def test_rejects_bad_config(kw):
    with pytest.raises(ValueError):
        BudgetMeter(**kw)


def test_unknown_kind():
    with pytest.raises(ValueError):
        BudgetMeter().charge("tokens")


def test_wall_clock_counts_query_time_only():
    m = BudgetMeter(wall_clock_limit=0.02)
    time.sleep(0.03)
    assert m.can_afford()
    with m.timing():
        time.sleep(0.03)
    assert m.deadline_passed() and not m.charge()


@given(st.integers(0, 50), st.lists(st.sampled_from(["generation", "evaluation"]), max_size=80))
def test_never_exceeds_limit(limit, kinds):
    m = BudgetMeter(limit)
    ok = sum(m.charge(k) for k in kinds)
    assert m.consumed == ok <= limit
    assert m.generations + m.evaluations == ok


def test_thread_safe_charging():
    m = BudgetMeter(limit=1000)

    def worker():
        for _ in range(400):
            m.charge()

    threads = [threading.Thread(target=worker) for _ in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert m.consumed == 1000
