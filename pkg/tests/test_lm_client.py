import json
import math
from pathlib import Path

import httpx
import pytest

from ltstot.budget import BudgetMeter
from ltstot.domains import get_domain
from ltstot.domains.sort import SortInstance, to_domain_instance
from ltstot.lm_client import (
    GenerationParams,
    HttpTransport,
    LMClient,
    LMEvaluator,
    LMPolicy,
    RecordingTransport,
    ReplayTransport,
    parse_choice,
    request_key,
    yes_probability,
)
from ltstot.nodes import ConfigurationError, PolicyError, SearchNode
from ltstot.search import SearchAborted, Status, guided_dfs_search, lts_search

from helpers import ScriptedSortLM

FIXTURES = Path(__file__).parent / "fixtures"


def fixture(name):
    return json.loads((FIXTURES / name).read_text())["response"]


class Canned:
    """Transport returning a fixed list of responses in order."""

    def __init__(self, *responses):
        self.responses = list(responses)
        self.payloads = []

    def post(self, path, payload):
        self.payloads.append(payload)
        return self.responses[len(self.payloads) - 1]


def choice(text, lps=(-0.1,), finish="stop"):
    return {"choices": [{"text": text, "finish_reason": finish, "logprobs": {"tokens": [text] * len(lps), "token_logprobs": list(lps)}}]}


def sort_instance():
    return to_domain_instance(SortInstance((3.0, 1.0, 2.0), 0), 0)


# -- parsing -------------------------------------------------------------------------------


def test_fixture_thought_probability():
    s = parse_choice(fixture("completion_two_tokens.json")["choices"][0], ["\n"])
    # the echoed stop token carries -0.2 and is dropped from the thought
    assert s.text == "pick up the red block"
    assert s.logprob == pytest.approx(-0.1)
    both = parse_choice({"text": "x", "logprobs": {"tokens": ["a", "b"], "token_logprobs": [-0.1, -0.2]}}, ["\n"])
    assert both.prob == pytest.approx(math.exp(-0.3)) == pytest.approx(0.7408, abs=1e-4)


def test_missing_logprobs_is_configuration_error():
    with pytest.raises(ConfigurationError):
        parse_choice({"text": "x"}, ["\n"])


def test_truncated_flag():
    assert parse_choice(choice("abc", finish="length")["choices"][0], ["\n"]).truncated


def test_yes_probability_examples():
    table = fixture("self_eval.json")["choices"][0]["logprobs"]["top_logprobs"][0]
    assert yes_probability(table) == pytest.approx(0.8320, abs=1e-3)
    assert yes_probability({"Yes": -1.0, "No": -1.0}) == pytest.approx(0.5)
    assert yes_probability({" yes": -0.5, " maybe": -3.0}) > 0.9
    with pytest.raises(ConfigurationError):
        yes_probability({" maybe": -0.1})


def test_generation_params_validation():
    with pytest.raises(ValueError):
        GenerationParams(samples=0)
    with pytest.raises(ValueError):
        GenerationParams(temperature=0)


def test_request_key_is_order_insensitive():
    assert request_key("completions", {"a": 1, "b": 2}) == request_key("completions", {"b": 2, "a": 1})


# -- client ------------------------------------------------------------------------------------


def test_generate_charges_per_sample_and_drops_empty():
    t = Canned(choice("a"), choice("   "), choice("b"))
    client = LMClient(t, GenerationParams(samples=3))
    meter = BudgetMeter()
    gen = client.generate_thoughts("p", meter)
    assert [s.text for s in gen.samples] == ["a", "b"]
    assert gen.issued == 3 and gen.empty_dropped == 1 and meter.consumed == 3
    assert client.empty_dropped == 1
    assert all(p["logprobs"] == 1 and p["max_tokens"] == 64 and p["stop"] == ["\n"] for p in t.payloads)


def test_generate_stops_when_meter_refuses():
    t = Canned(choice("a"), choice("b"))
    gen = LMClient(t, GenerationParams(samples=3)).generate_thoughts("p", BudgetMeter(2))
    assert gen.issued == 2 and gen.exhausted and len(t.payloads) == 2


def test_batch_mode_single_request():
    resp = {"choices": choice("a")["choices"] + choice("b")["choices"]}
    t = Canned(resp)
    meter = BudgetMeter(2)
    gen = LMClient(t, GenerationParams(samples=3, batch=True)).generate_thoughts("p", meter)
    assert t.payloads[0]["n"] == 2 and gen.issued == 2 and gen.exhausted and meter.consumed == 2


def test_self_evaluate_charges_one():
    t = Canned(fixture("self_eval.json"))
    meter = BudgetMeter(1)
    client = LMClient(t)
    assert client.self_evaluate("p", meter) == pytest.approx(0.8320, abs=1e-3)
    assert meter.consumed == 1 and t.payloads[0]["max_tokens"] == 1
    assert client.self_evaluate("p", meter) is None


def test_policy_dedups_and_counts_charges():
    same = choice("pick up the red block\n")
    t = Canned(same, same, choice("unstack the red block from on top of the blue block\n"))
    meter = BudgetMeter()
    dom = get_domain("blocksworld")
    inst = sort_instance()
    exp = LMPolicy(LMClient(t, GenerationParams(samples=3)), dom, inst).expand(SearchNode.root(), meter)
    assert len(exp.thoughts) == 2 and exp.raw_count == 3 and meter.consumed == 3


def test_policy_three_identical_texts():
    same = choice("Swap 3 and 1: [1, 3, 2]\n")
    meter = BudgetMeter()
    exp = LMPolicy(LMClient(Canned(same, same, same)), get_domain("sort"), sort_instance()).expand(SearchNode.root(), meter)
    assert len(exp.thoughts) == 1 and meter.consumed == 3
    assert not exp.thoughts[0].terminal


# -- transports ------------------------------------------------------------------------------


def test_record_then_replay(tmp_path):
    lm = ScriptedSortLM()
    params = GenerationParams(samples=3, model="m")
    dom = get_domain("sort")
    inst = sort_instance()

    def run(transport):
        client = LMClient(transport, params)
        return lts_search(LMPolicy(client, dom, inst, params), SearchNode.root(), BudgetMeter(30), 1.0, inst.max_depth)

    live = run(RecordingTransport(lm, tmp_path))
    again = run(ReplayTransport(tmp_path))
    assert live.status is Status.SOLVED
    assert dom.evaluate(inst, list(live.path)).value == "goal"
    assert again.path == live.path and again.trace_keys() == live.trace_keys()
    assert again.stats.queries_consumed == live.stats.queries_consumed


def test_replay_missing_fixture(tmp_path):
    with pytest.raises(PolicyError):
        ReplayTransport(tmp_path).post("completions", {"prompt": "x"})


def test_dfs_with_self_evaluation_double_charges():
    lm = ScriptedSortLM()
    params = GenerationParams(samples=3)
    dom, inst = get_domain("sort"), sort_instance()
    client = LMClient(lm, params)
    res = guided_dfs_search(LMPolicy(client, dom, inst), LMEvaluator(client, dom, inst), SearchNode.root(), BudgetMeter(), inst.max_depth)
    assert res.solved
    assert res.stats.queries_consumed == res.stats.thoughts_generated + res.stats.evaluations
    assert res.path[-1] == "Answer: [1, 2, 3]"


def mock_http(handler, **kw):
    t = HttpTransport("http://lm.test/v1", retries=2, backoff=0.0, **kw)
    t.client = httpx.Client(base_url="http://lm.test/v1/", transport=httpx.MockTransport(handler))
    return t


def test_http_transport_retries_server_errors():
    calls = []

    def handler(request):
        calls.append(request)
        if len(calls) < 3:
            return httpx.Response(503)
        return httpx.Response(200, json=choice("ok"))

    assert mock_http(handler).post("completions", {"prompt": "p"})["choices"][0]["text"] == "ok"
    assert len(calls) == 3 and calls[0].url.path == "/v1/completions"


def test_http_transport_gives_up():
    t = mock_http(lambda r: httpx.Response(500))
    with pytest.raises(PolicyError):
        t.post("completions", {})
    t = mock_http(lambda r: httpx.Response(400))
    with pytest.raises(PolicyError):
        t.post("completions", {})


def test_unreachable_endpoint_aborts_search():
    def handler(request):
        raise httpx.ConnectError("refused")

    client = LMClient(mock_http(handler), GenerationParams(samples=2))
    meter = BudgetMeter()
    with pytest.raises(SearchAborted) as info:
        lts_search(LMPolicy(client, get_domain("sort"), sort_instance()), SearchNode.root(), meter, 1.0, 5)
    # the sample was charged before the request failed
    assert info.value.stats.queries_consumed == meter.consumed == 1


def test_api_key_header(monkeypatch):
    monkeypatch.setenv("LTSTOT_API_KEY", "k123")
    t = HttpTransport("http://lm.test/v1")
    assert t.client.headers["Authorization"] == "Bearer k123"
