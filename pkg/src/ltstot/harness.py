"""Experiment runner: algorithm x domain x budget sweeps producing run records and accuracy curves."""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence

import yaml

from .budget import BudgetMeter
from .domains import get_domain
from .domains.base import Domain, DomainInstance, Verdict
from .nodes import NullEvaluator, Policy, PolicyError, SearchNode, StateEvaluator
from .policy import SyntheticEvaluator, SyntheticPolicy, SyntheticTree
from .search import RewardWeights, SearchAborted, SearchResult, Status, beam_search, guided_dfs_search, lts_search
from . import suites

ABORTED = "search_aborted"
ALGORITHMS = ("lts", "dfs", "beam")
SYNTHETIC_SUITES = ("random", "solvable", "uniform", "deep_trap", "adversarial", "fig2", "fig2_all_terminal")


class ConfigError(ValueError):
    pass


class BackendFailure(RuntimeError):
    pass


@dataclass
class DomainConfig:
    name: str = "synthetic"
    suite: str = "random"
    count: int = 20
    seed: int = 0
    step: int = 2
    dataset: str | None = None
    max_depth: int | None = None
    tree_depth: int = 5
    tree_branching: int = 4


@dataclass
class AlgorithmConfig:
    name: str = "lts"
    cost_temperature: float = 1.0
    beam_width: int | None = None
    reward_logprob: float = 1.0
    reward_self_eval: float = 1.0
    evaluator: str = "auto"


@dataclass
class BudgetConfig:
    mode: str = "queries"
    values: list[float] = field(default_factory=lambda: [50])


@dataclass
class BackendConfig:
    kind: str = "synthetic"
    b_max: int = 3
    seed: int = 0
    eval_accuracy: float = 0.5
    lm: dict = field(default_factory=dict)
    fixtures: str | None = None
    record: str | None = None


@dataclass
class OutputConfig:
    path: str | None = None
    format: str = "csv"


@dataclass
class ExperimentConfig:
    domain: DomainConfig = field(default_factory=DomainConfig)
    algorithm: AlgorithmConfig = field(default_factory=AlgorithmConfig)
    budget: BudgetConfig = field(default_factory=BudgetConfig)
    backend: BackendConfig = field(default_factory=BackendConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    parallelism: int = 1
    live: bool = False

    def validate(self) -> ExperimentConfig:
        a, d, b = self.algorithm, self.domain, self.budget
        if a.name not in ALGORITHMS:
            raise ConfigError(f"algorithm.name must be one of {ALGORITHMS}")
        if (a.beam_width is not None) != (a.name == "beam"):
            raise ConfigError("algorithm.beam_width must be set exactly when algorithm.name is 'beam'")
        if a.beam_width is not None and a.beam_width < 1:
            raise ConfigError("algorithm.beam_width must be >= 1")
        if a.cost_temperature <= 0:
            raise ConfigError("algorithm.cost_temperature must be positive")
        if a.evaluator not in ("auto", "self", "null"):
            raise ConfigError("algorithm.evaluator must be auto, self or null")
        if not b.values:
            raise ConfigError("budget.values needs at least one value")
        if b.mode not in ("queries", "wallclock"):
            raise ConfigError("budget.mode must be queries or wallclock")
        if any(v < 0 for v in b.values):
            raise ConfigError("budget values must be non-negative")
        if d.name == "synthetic":
            if self.backend.kind != "synthetic":
                raise ConfigError("the synthetic domain needs the synthetic backend")
            if d.suite not in SYNTHETIC_SUITES:
                raise ConfigError(f"domain.suite must be one of {SYNTHETIC_SUITES}")
        elif d.name in ("sort", "blocksworld", "prontoqa"):
            if self.backend.kind != "lm":
                raise ConfigError(f"domain {d.name!r} needs backend.kind = lm")
            if d.name == "prontoqa" and not d.dataset:
                raise ConfigError("prontoqa needs domain.dataset")
        else:
            raise ConfigError(f"unknown domain {d.name!r}")
        if self.output.format not in ("csv", "json"):
            raise ConfigError("output.format must be csv or json")
        return self

    def config_hash(self) -> str:
        """Hash of every field that can change results (output and parallelism excluded)."""
        doc = asdict(self)
        doc.pop("output")
        doc.pop("parallelism")
        blob = json.dumps(doc, sort_keys=True, separators=(",", ":"), default=str)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _build(cls, data: Any, where: str):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a mapping")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"{where}: unknown field(s) {sorted(unknown)}")
    return cls(**data)


def config_from_dict(data: dict) -> ExperimentConfig:
    data = dict(data or {})
    sections = {"domain": DomainConfig, "algorithm": AlgorithmConfig, "budget": BudgetConfig, "backend": BackendConfig, "output": OutputConfig}
    unknown = set(data) - set(sections) - {"parallelism", "live"}
    if unknown:
        raise ConfigError(f"unknown top-level field(s) {sorted(unknown)}")
    kw = {k: _build(cls, data.get(k), k) for k, cls in sections.items()}
    budget = kw["budget"]
    try:
        budget.values = [math.inf if str(v).lower() in ("inf", "infinity") else float(v) for v in budget.values]
    except (TypeError, ValueError) as err:
        raise ConfigError(f"budget.values: {err}") from None
    try:
        cfg = ExperimentConfig(**kw, parallelism=int(data.get("parallelism", 1)), live=bool(data.get("live", False)))
    except TypeError as err:
        raise ConfigError(str(err)) from None
    return cfg.validate()


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        data = yaml.safe_load(Path(path).read_text())
    except (OSError, yaml.YAMLError) as err:
        raise ConfigError(f"cannot read config {path}: {err}") from None
    return config_from_dict(data or {})


@dataclass(frozen=True)
class RunRecord:
    instance_id: str
    algorithm: str
    budget_value: float
    status: str
    goal: bool
    queries_consumed: int
    thoughts_generated: int
    expansions: int
    wall_time: float
    cost_temperature: float = 1.0


@dataclass(frozen=True)
class CurveRow:
    algorithm: str
    cost_temperature: float
    budget_value: float
    instances: int
    solved: int
    accuracy: float


@dataclass
class Task:
    """One problem instance bound to its backend."""

    instance_id: str
    max_depth: int
    make_policy: Callable[[], Policy]
    make_evaluator: Callable[[], StateEvaluator]
    root: Callable[[], SearchNode]
    judge: Callable[[SearchResult], bool]


def _synthetic_trees(d: DomainConfig) -> list[SyntheticTree]:
    if d.suite == "random":
        return suites.random_suite(d.count, d.seed, d.tree_depth, d.tree_branching)
    if d.suite == "solvable":
        return suites.random_suite(d.count, d.seed, d.tree_depth, d.tree_branching, goal_rate=1.0)
    if d.suite == "uniform":
        return suites.uniform_suite(d.count, d.seed)
    if d.suite == "deep_trap":
        return suites.deep_trap_suite(d.count, d.seed)
    if d.suite == "adversarial":
        return suites.adversarial_suite(d.count, d.seed)
    return [suites.fig2_tree(d.suite == "fig2_all_terminal")]


def synthetic_tasks(cfg: ExperimentConfig) -> list[Task]:
    be = cfg.backend
    use_eval = cfg.algorithm.evaluator == "self" or (cfg.algorithm.evaluator == "auto" and cfg.algorithm.name != "lts")
    tasks = []
    for i, tree in enumerate(_synthetic_trees(cfg.domain)):
        def judge(res: SearchResult, tree=tree) -> bool:
            return res.solved and tree.nodes[res.final.key].goal

        tasks.append(
            Task(
                instance_id=f"{cfg.domain.suite}-{cfg.domain.seed}-{i:04d}",
                max_depth=cfg.domain.max_depth or tree.max_depth() + 1,
                make_policy=lambda tree=tree: SyntheticPolicy(tree, be.b_max, be.seed),
                make_evaluator=(lambda tree=tree: SyntheticEvaluator(tree, be.eval_accuracy, be.seed)) if use_eval else NullEvaluator,
                root=tree.root_node,
                judge=judge,
            )
        )
    return tasks


def domain_instances(d: DomainConfig) -> list[DomainInstance]:
    if d.name == "sort":
        from .domains import sort

        if d.dataset:
            raw = sort.load_instances(Path(d.dataset).read_text(), d.seed)
        else:
            raw = sort.sort_make_instances(d.seed, d.count)
        return [sort.to_domain_instance(x, i) for i, x in enumerate(raw[: d.count])]
    if d.name == "blocksworld":
        from .domains import blocksworld as bw

        if d.dataset:
            probs = bw.load_problems(Path(d.dataset).read_text())
        else:
            probs = bw.bw_make_problems(d.seed, d.step, d.count)
        return [bw.to_domain_instance(p, i, d.max_depth) for i, p in enumerate(probs[: d.count])]
    from .domains.prontoqa import prontoqa_load

    return prontoqa_load(Path(d.dataset).read_text())[: d.count]


def lm_tasks(cfg: ExperimentConfig) -> list[Task]:
    from .lm_client import GenerationParams, HttpTransport, LMClient, LMEvaluator, LMPolicy, RecordingTransport, ReplayTransport

    try:
        params = GenerationParams(**cfg.backend.lm)
    except (TypeError, ValueError) as err:
        raise ConfigError(f"backend.lm: {err}") from None
    if cfg.backend.fixtures:
        transport = ReplayTransport(cfg.backend.fixtures)
    else:
        transport = HttpTransport(params.endpoint, params.timeout, params.retries)
        if cfg.backend.record:
            transport = RecordingTransport(transport, cfg.backend.record)
    client = LMClient(transport, params, max_in_flight=max(cfg.parallelism, 1) * params.samples)
    domain: Domain = get_domain(cfg.domain.name)
    use_eval = cfg.algorithm.evaluator == "self" or (
        cfg.algorithm.evaluator == "auto" and cfg.algorithm.name != "lts" and cfg.domain.name != "sort"
    )
    tasks = []
    for inst in domain_instances(cfg.domain):
        def judge(res: SearchResult, inst=inst) -> bool:
            return res.solved and domain.evaluate(inst, list(res.path)) is Verdict.GOAL

        tasks.append(
            Task(
                instance_id=inst.instance_id,
                max_depth=cfg.domain.max_depth or inst.max_depth,
                make_policy=lambda inst=inst: LMPolicy(client, domain, inst, params),
                make_evaluator=(lambda inst=inst: LMEvaluator(client, domain, inst, params)) if use_eval else NullEvaluator,
                root=SearchNode.root,
                judge=judge,
            )
        )
    return tasks


def make_tasks(cfg: ExperimentConfig) -> list[Task]:
    return synthetic_tasks(cfg) if cfg.domain.name == "synthetic" else lm_tasks(cfg)


def make_meter(cfg: ExperimentConfig, budget_value: float) -> BudgetMeter:
    if cfg.budget.mode == "wallclock":
        return BudgetMeter(limit=None, wall_clock_limit=budget_value)
    return BudgetMeter(limit=None if math.isinf(budget_value) else int(budget_value))


def run_search(cfg: ExperimentConfig, task: Task, meter: BudgetMeter) -> SearchResult:
    a = cfg.algorithm
    weights = RewardWeights(a.reward_logprob, a.reward_self_eval)
    policy = task.make_policy()
    if a.name == "lts":
        return lts_search(policy, task.root(), meter, a.cost_temperature, task.max_depth)
    if a.name == "dfs":
        return guided_dfs_search(policy, task.make_evaluator(), task.root(), meter, task.max_depth, weights)
    return beam_search(policy, task.make_evaluator(), task.root(), meter, a.beam_width, task.max_depth, weights)


def run_one(cfg: ExperimentConfig, task: Task, budget_value: float) -> RunRecord:
    meter = make_meter(cfg, budget_value)
    tau = cfg.algorithm.cost_temperature
    try:
        res = run_search(cfg, task, meter)
    except SearchAborted as err:
        s = err.stats
        return RunRecord(task.instance_id, cfg.algorithm.name, budget_value, ABORTED, False,
                         s.queries_consumed, s.thoughts_generated, s.expansions, round(s.wall_time, 4), tau)
    s = res.stats
    return RunRecord(task.instance_id, cfg.algorithm.name, budget_value, res.status.value, bool(task.judge(res)),
                     s.queries_consumed, s.thoughts_generated, s.expansions, round(s.wall_time, 4), tau)


def run_batch(cfg: ExperimentConfig, tasks: Sequence[Task] | None = None) -> list[RunRecord]:
    """One record per instance per budget value, each with a fresh meter."""
    cfg.validate()
    tasks = list(tasks) if tasks is not None else make_tasks(cfg)
    jobs = [(t, b) for b in cfg.budget.values for t in tasks]
    if cfg.parallelism > 1:
        with ThreadPoolExecutor(cfg.parallelism) as pool:
            records = list(pool.map(lambda tb: run_one(cfg, *tb), jobs))
    else:
        records = [run_one(cfg, t, b) for t, b in jobs]
    records.sort(key=lambda r: (r.budget_value, r.instance_id))
    if records and all(r.status == ABORTED for r in records):
        raise BackendFailure("every run aborted on a backend failure")
    return records


def accuracy_table(records: Iterable[RunRecord]) -> list[CurveRow]:
    groups: dict[tuple[str, float, float], list[RunRecord]] = {}
    for r in records:
        groups.setdefault((r.algorithm, r.cost_temperature, r.budget_value), []).append(r)
    rows = []
    for (alg, tau, b), rs in sorted(groups.items()):
        solved = sum(r.goal for r in rs)
        rows.append(CurveRow(alg, tau, b, len(rs), solved, round(solved / len(rs), 4)))
    return rows


def sweep_budget(cfg: ExperimentConfig, tasks: Sequence[Task] | None = None) -> list[CurveRow]:
    if len(cfg.budget.values) < 2:
        raise ConfigError("a budget sweep needs at least two budget values")
    return accuracy_table(run_batch(cfg, tasks))


def sweep_cost_temperature(cfg: ExperimentConfig, taus: Sequence[float], tasks: Sequence[Task] | None = None) -> list[CurveRow]:
    if cfg.algorithm.name != "lts":
        raise ConfigError("cost-temperature sweeps apply to lts only")
    tasks = list(tasks) if tasks is not None else make_tasks(cfg)
    rows = []
    for tau in taus:
        sub = dataclasses.replace(cfg, algorithm=dataclasses.replace(cfg.algorithm, cost_temperature=float(tau)))
        rows += accuracy_table(run_batch(sub, tasks))
    return rows


def calibrate_budget(cfg: ExperimentConfig, candidates: Sequence[float], tasks: Sequence[Task] | None = None) -> float | None:
    """Smallest candidate budget at which every instance reaches a terminal state."""
    tasks = list(tasks) if tasks is not None else make_tasks(cfg)
    for b in sorted(candidates):
        if all(run_one(cfg, t, b).status == Status.SOLVED.value for t in tasks):
            return b
    return None


# -- emission ------------------------------------------------------------------------


def _fmt(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        if math.isinf(v):
            return "inf"
        if v == int(v):
            return str(int(v))
        return f"{v:.4f}"
    return str(v)


def _jsonable(v: Any) -> Any:
    if isinstance(v, float):
        return "inf" if math.isinf(v) else round(v, 4)
    return v


def emit_results(rows: Sequence[RunRecord] | Sequence[CurveRow], path: str | Path | None, fmt: str = "csv",
                 config_hash: str = "", kind: type | None = None) -> str:
    """Write records or curve rows; returns the text. Column order follows the dataclass fields."""
    kind = kind or (type(rows[0]) if rows else RunRecord)
    cols = [f.name for f in dataclasses.fields(kind)]
    if fmt == "csv":
        buf = io.StringIO()
        buf.write(f"# config_hash={config_hash} kind={kind.__name__}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            w.writerow([_fmt(getattr(r, c)) for c in cols])
        text = buf.getvalue()
    elif fmt == "json":
        doc = {"config_hash": config_hash, "kind": kind.__name__, "columns": cols,
               "rows": [{c: _jsonable(getattr(r, c)) for c in cols} for r in rows]}
        text = json.dumps(doc, indent=1) + "\n"
    else:
        raise ValueError(f"unknown format {fmt!r}")
    if path is not None:
        Path(path).write_text(text)
    return text


_KINDS = {"RunRecord": RunRecord, "CurveRow": CurveRow}


def _coerce(kind: type, raw: dict) -> Any:
    out = {}
    for f in dataclasses.fields(kind):
        v = raw[f.name]
        t = f.type if isinstance(f.type, str) else f.type.__name__
        if t == "bool":
            out[f.name] = v if isinstance(v, bool) else str(v).lower() == "true"
        elif t == "int":
            out[f.name] = int(v)
        elif t == "float":
            out[f.name] = float(v)
        else:
            out[f.name] = str(v)
    return kind(**out)


def read_results(text: str) -> tuple[str, list]:
    """Parse emitted CSV or JSON back into (config_hash, rows)."""
    if text.lstrip().startswith("{"):
        doc = json.loads(text)
        kind = _KINDS[doc["kind"]]
        return doc["config_hash"], [_coerce(kind, r) for r in doc["rows"]]
    first, _, rest = text.partition("\n")
    meta = dict(part.split("=", 1) for part in first.lstrip("# ").split())
    kind = _KINDS[meta["kind"]]
    return meta["config_hash"], [_coerce(kind, r) for r in csv.DictReader(io.StringIO(rest))]
