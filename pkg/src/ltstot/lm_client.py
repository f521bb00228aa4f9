"""Policy and self-evaluation backends over an OpenAI-compatible ``/v1/completions`` API.

Every request is preceded by a successful meter charge. Transports are
pluggable: :class:`HttpTransport` talks to a live server, :class:`ReplayTransport`
serves recorded fixtures (one JSON file per request/response pair, named by a
hash of the request), and :class:`RecordingTransport` writes such fixtures.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
import threading
import time
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, Sequence

import httpx

from .budget import BudgetMeter
from .domains.base import Domain, DomainInstance
from .nodes import ConfigurationError, Expansion, PolicyError, SearchNode, Thought

log = logging.getLogger(__name__)

ENDPOINT_ENV = "LTSTOT_ENDPOINT"
API_KEY_ENV = "LTSTOT_API_KEY"
MODEL_ENV = "LTSTOT_MODEL"


@dataclass
class GenerationParams:
    model: str = field(default_factory=lambda: os.environ.get(MODEL_ENV, "default"))
    endpoint: str = field(default_factory=lambda: os.environ.get(ENDPOINT_ENV, "http://localhost:8000/v1"))
    temperature: float = 0.8
    top_k: int = 50
    max_tokens_per_thought: int = 64
    stop_sequences: list[str] = field(default_factory=lambda: ["\n"])
    samples: int = 3
    timeout: float = 60.0
    retries: int = 2
    batch: bool = False
    eval_top_logprobs: int = 20
    seed: int | None = None

    def __post_init__(self):
        if not 1 <= self.samples <= 16:
            raise ValueError("samples must be in [1, 16]")
        if not 0 < self.temperature <= 4:
            raise ValueError("temperature must be in (0, 4]")
        if self.top_k < 1 or self.max_tokens_per_thought < 1:
            raise ValueError("top_k and max_tokens_per_thought must be positive")


@dataclass(frozen=True)
class ThoughtSample:
    text: str
    token_logprobs: tuple[float, ...]
    finish_reason: str
    raw_token_count: int

    @property
    def logprob(self) -> float:
        return math.fsum(self.token_logprobs)

    @property
    def prob(self) -> float:
        return math.exp(self.logprob)

    @property
    def truncated(self) -> bool:
        return self.finish_reason == "length"


@dataclass
class Generation:
    samples: list[ThoughtSample]
    issued: int
    exhausted: bool
    empty_dropped: int = 0


class Transport(Protocol):
    def post(self, path: str, payload: dict) -> dict: ...


def request_key(path: str, payload: dict) -> str:
    blob = json.dumps({"path": path, "payload": payload}, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:24]


class HttpTransport:
    def __init__(self, endpoint: str, timeout: float = 60.0, retries: int = 2, api_key: str | None = None, backoff: float = 0.5):
        api_key = api_key or os.environ.get(API_KEY_ENV) or os.environ.get("OPENAI_API_KEY")
        headers = {"Authorization": f"Bearer {api_key}"} if api_key else {}
        self.client = httpx.Client(base_url=endpoint.rstrip("/") + "/", timeout=timeout, headers=headers)
        self.retries = retries
        self.backoff = backoff

    def post(self, path: str, payload: dict) -> dict:
        last: Exception | None = None
        for attempt in range(self.retries + 1):
            try:
                resp = self.client.post(path.lstrip("/"), json=payload)
                if resp.status_code >= 500:
                    raise httpx.HTTPStatusError(f"server error {resp.status_code}", request=resp.request, response=resp)
                resp.raise_for_status()
                return resp.json()
            except (httpx.TransportError, httpx.HTTPStatusError) as err:
                last = err
                status = getattr(getattr(err, "response", None), "status_code", 500)
                if status < 500:
                    break
                if attempt < self.retries:
                    time.sleep(self.backoff * 2**attempt)
        raise PolicyError(f"request to {path} failed: {last}") from last


class ReplayTransport:
    """Serve responses from ``<dir>/<request-hash>-<occurrence>.json``."""

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self._seen: dict[str, int] = defaultdict(int)
        self._lock = threading.Lock()

    def post(self, path: str, payload: dict) -> dict:
        key = request_key(path, payload)
        with self._lock:
            n = self._seen[key]
            self._seen[key] += 1
        f = self.directory / f"{key}-{n}.json"
        if not f.exists():
            raise PolicyError(f"no recorded fixture {f.name} for request to {path}")
        return json.loads(f.read_text())["response"]


class RecordingTransport:
    def __init__(self, inner: Transport, directory: str | Path):
        self.inner = inner
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self._seen: dict[str, int] = defaultdict(int)
        self._lock = threading.Lock()

    def post(self, path: str, payload: dict) -> dict:
        response = self.inner.post(path, payload)
        key = request_key(path, payload)
        with self._lock:
            n = self._seen[key]
            self._seen[key] += 1
        doc = {"request": {"path": path, "payload": payload}, "response": response}
        (self.directory / f"{key}-{n}.json").write_text(json.dumps(doc, indent=1, sort_keys=True))
        return response


def _cut_at_stop(text: str, stops: Sequence[str]) -> str:
    cut = len(text)
    for s in stops:
        i = text.find(s)
        if i != -1:
            cut = min(cut, i)
    return text[:cut]


def parse_choice(choice: dict, stops: Sequence[str]) -> ThoughtSample:
    lp = choice.get("logprobs")
    if not lp or lp.get("token_logprobs") is None:
        raise ConfigurationError("completion response carries no token logprobs; LTS needs thought probabilities")
    tokens = list(lp.get("tokens") or [])
    values = [float(x) for x in lp["token_logprobs"] if x is not None]
    finish = choice.get("finish_reason") or "stop"
    raw = len(values)
    # some servers echo the stop token; its probability is not part of the thought
    if finish == "stop" and tokens and values and any(s and s in tokens[-1] for s in stops):
        values = values[:-1]
    text = _cut_at_stop(choice.get("text", ""), stops).strip()
    return ThoughtSample(text, tuple(values), "length" if finish == "length" else "stop", max(raw, 1))


def _logsumexp(xs: Sequence[float]) -> float:
    m = max(xs)
    return m + math.log(sum(math.exp(x - m) for x in xs))


def yes_probability(top_logprobs: dict[str, float]) -> float:
    """Normalized p(yes) from one position's top-logprob table."""
    yes = [v for k, v in top_logprobs.items() if k.strip().lower() == "yes"]
    no = [v for k, v in top_logprobs.items() if k.strip().lower() == "no"]
    if not yes and not no:
        raise ConfigurationError("neither 'yes' nor 'no' appears among the returned top logprobs")
    floor = min(top_logprobs.values())
    lp_yes = _logsumexp(yes) if yes else floor
    lp_no = _logsumexp(no) if no else floor
    return 1.0 / (1.0 + math.exp(lp_no - lp_yes))


class LMClient:
    def __init__(self, transport: Transport, params: GenerationParams | None = None, max_in_flight: int = 4):
        self.transport = transport
        self.params = params or GenerationParams()
        self._slots = threading.Semaphore(max_in_flight)
        self.empty_dropped = 0

    @classmethod
    def http(cls, params: GenerationParams | None = None, **kw) -> LMClient:
        params = params or GenerationParams()
        return cls(HttpTransport(params.endpoint, params.timeout, params.retries), params, **kw)

    def _post(self, payload: dict, meter: BudgetMeter) -> dict:
        with self._slots, meter.timing():
            return self.transport.post("completions", payload)

    def _payload(self, prompt: str, params: GenerationParams, n: int, index: int) -> dict:
        payload = {
            "model": params.model,
            "prompt": prompt,
            "temperature": params.temperature,
            "top_k": params.top_k,
            "max_tokens": params.max_tokens_per_thought,
            "stop": list(params.stop_sequences),
            "n": n,
            "logprobs": 1,
        }
        if params.seed is not None:
            payload["seed"] = params.seed + index
        return payload

    def generate_thoughts(self, prompt: str, meter: BudgetMeter, params: GenerationParams | None = None) -> Generation:
        """Sample up to ``params.samples`` thoughts, charging one generation per sample requested."""
        params = params or self.params
        choices: list[dict] = []
        issued = 0
        exhausted = False
        if params.batch:
            while issued < params.samples and meter.charge("generation"):
                issued += 1
            exhausted = issued < params.samples
            if issued:
                choices = self._post(self._payload(prompt, params, issued, 0), meter).get("choices", [])
        else:
            for i in range(params.samples):
                if not meter.charge("generation"):
                    exhausted = True
                    break
                issued += 1
                choices += self._post(self._payload(prompt, params, 1, i), meter).get("choices", [])[:1]
        samples, dropped = [], 0
        for ch in choices:
            s = parse_choice(ch, params.stop_sequences)
            if s.text:
                samples.append(s)
            else:
                dropped += 1
        if dropped:
            self.empty_dropped += dropped
            log.warning("dropped %d empty completion(s)", dropped)
        return Generation(samples, issued, exhausted, dropped)

    def self_evaluate(self, prompt: str, meter: BudgetMeter, params: GenerationParams | None = None) -> float | None:
        """One charged scoring request; returns p(yes) normalized over {yes, no}, or None if refused."""
        params = params or self.params
        if not meter.charge("evaluation"):
            return None
        payload = {
            "model": params.model,
            "prompt": prompt,
            "temperature": 0.0,
            "max_tokens": 1,
            "n": 1,
            "logprobs": params.eval_top_logprobs,
        }
        resp = self._post(payload, meter)
        try:
            table = resp["choices"][0]["logprobs"]["top_logprobs"][0]
        except (KeyError, IndexError, TypeError):
            raise ConfigurationError("self-evaluation response carries no top logprobs") from None
        if not table:
            raise ConfigurationError("self-evaluation response carries no top logprobs")
        return yes_probability(table)


def build_prompt(domain: Domain, instance: DomainInstance, thoughts_so_far: Sequence[str]) -> str:
    return domain.build_prompt(instance, thoughts_so_far)


class LMPolicy:
    """Expand a state by sampling thoughts from the LM and removing duplicates."""

    def __init__(self, client: LMClient, domain: Domain, instance: DomainInstance, params: GenerationParams | None = None):
        self.client = client
        self.domain = domain
        self.instance = instance
        self.params = params
        self.empty_expansions = 0

    def expand(self, node: SearchNode, meter: BudgetMeter) -> Expansion:
        prompt = build_prompt(self.domain, self.instance, node.thoughts())
        gen = self.client.generate_thoughts(prompt, meter, self.params)
        seen = set()
        thoughts = []
        for s in gen.samples:
            if s.text in seen:
                continue
            seen.add(s.text)
            thoughts.append(
                Thought(
                    text=s.text,
                    prob=s.prob,
                    logprob=s.logprob,
                    token_count=s.raw_token_count,
                    terminal=self.domain.is_terminal(s.text),
                    truncated=s.truncated,
                )
            )
        if gen.issued and not thoughts and not gen.exhausted:
            self.empty_expansions += 1
            log.warning("empty expansion at depth %d: every sample was empty", node.depth)
        return Expansion(thoughts, raw_count=gen.issued, exhausted=gen.exhausted)


class LMEvaluator:
    charges = True

    def __init__(self, client: LMClient, domain: Domain, instance: DomainInstance, params: GenerationParams | None = None):
        self.client = client
        self.domain = domain
        self.instance = instance
        self.params = params

    def evaluate(self, node: SearchNode, meter: BudgetMeter) -> float | None:
        prompt = self.domain.build_eval_prompt(self.instance, node.thoughts())
        return self.client.self_evaluate(prompt, meter, self.params)
