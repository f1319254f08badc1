"""Orchestration shared by the CLI and the HTTP service.

One entry point, ``execute_run``, takes fully-parsed inputs, runs propagation,
and assembles the final report dict. Exit semantics: 0 = plans found,
2 = no plan within the depth bound; input problems raise before any run
starts and map to exit 1 at the boundary.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .core import ChangeAction, CostConfig, Metamodel, Model, ModelError
from .dsl import Constraint
from .harness import check_postulates, report_to_dict
from .proximity import EffectConflictError, GraphError, effect_scenarios
from .report import canonical_json, no_plan_report, propagation_report
from .search import NoPlanWithinBound, PropagationResult, SearchConfig, propagate

METRICS = ("structural", "semantic", "none")


@dataclass(frozen=True)
class RunConfig:
    search: SearchConfig = field(default_factory=SearchConfig)
    metric: str = "structural"
    check_postulates: bool = False
    oracle_bound: int = 3
    seed: int = 0
    threads: int = 1  # reserved; plans never depend on it

    def __post_init__(self) -> None:
        if self.metric not in METRICS:
            raise ModelError(f"unknown metric {self.metric!r}")
        if self.threads < 1:
            raise ModelError("threads must be >= 1")
        if self.oracle_bound < 0:
            raise ModelError("oracle bound must be >= 0")


@dataclass(frozen=True)
class RunOutcome:
    exit_code: int  # 0 = plans found, 2 = no plan within bound
    report: dict
    result: PropagationResult | None


def process_view(model: Model):
    """Effect-scenario set of a model that encodes an annotated process graph.

    Convention: classes named after node types (start/end/activity/decision/
    merge/fork/join, case-insensitive) are process nodes; every link between
    two such entities is an edge; a string attribute ``effects`` holds
    space-separated signed literals like ``+p -q``. Returns None when the
    model does not follow the convention or the graph is invalid.
    """
    from .proximity import NODE_TYPES, ProcessGraph, ProcessNode, parse_literal

    node_classes = {cd.name: cd.name.lower() for cd in model.metamodel.classes if cd.name.lower() in NODE_TYPES}
    if not node_classes:
        return None
    nodes = []
    ids = set()
    for eid in sorted(model.entities):
        ent = model.entities[eid]
        if ent.cls not in node_classes:
            return None  # mixed models are not process graphs
        raw = ent.attrs.get("effects", "")
        try:
            effects = tuple(parse_literal(tok) for tok in str(raw).split())
        except GraphError:
            return None
        nodes.append(ProcessNode(id=eid, type=node_classes[ent.cls], effects=effects))
        ids.add(eid)
    edges = []
    for eid in sorted(model.entities):
        for ref in sorted(model.entities[eid].links):
            for target in model.entities[eid].links[ref]:
                edges.append((eid, target))
    try:
        graph = ProcessGraph(tuple(nodes), tuple(edges))
        return effect_scenarios(graph)
    except (GraphError, EffectConflictError):
        return None


def execute_run(
    metamodel: Metamodel,
    model: Model,
    constraints: list[Constraint] | tuple[Constraint, ...],
    script: list[ChangeAction] | tuple[ChangeAction, ...],
    cfg: RunConfig | None = None,
) -> RunOutcome:
    cfg = cfg or RunConfig()
    try:
        result = propagate(model, list(script), constraints, metamodel, cfg.search)
    except NoPlanWithinBound as missing:
        report = no_plan_report(missing, cfg.search)
        report["config"].update(_echo_extras(cfg))
        return RunOutcome(exit_code=2, report=report, result=None)

    semantic_view = process_view if cfg.metric == "semantic" else None
    report = propagation_report(result, metric=cfg.metric, semantic_view=semantic_view)
    report["config"].update(_echo_extras(cfg))
    if cfg.check_postulates:
        postulates = check_postulates(
            model, list(script), result, constraints, metamodel, oracle_bound=cfg.oracle_bound
        )
        report["postulates"] = report_to_dict(postulates)
    return RunOutcome(exit_code=0, report=report, result=result)


def _echo_extras(cfg: RunConfig) -> dict:
    return {
        "metric": cfg.metric,
        "seed": cfg.seed,
        "threads": cfg.threads,
        "oracle_bound": cfg.oracle_bound,
        "check_postulates": cfg.check_postulates,
    }


def report_bytes(report: dict) -> bytes:
    return canonical_json(report).encode("utf-8")
