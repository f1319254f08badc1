"""HTTP front end wrapping the propagation engine."""

from __future__ import annotations

from fastapi import FastAPI, HTTPException
from fractions import Fraction

from ..checker import violations_of
from ..core import (
    CostConfig,
    Metamodel,
    Model,
    ModelError,
    check_wellformed,
    metamodel_from_dict,
    model_from_dict,
    script_from_list,
)
from ..dsl import Constraint, ParseError, ResolutionError, parse_constraint_file
from ..proximity import (
    EffectConflictError,
    GraphError,
    effect_scenarios,
    process_graph_from_dict,
    render_literal,
    semantic_proximity,
    structural_proximity,
)
from ..run import RunConfig, execute_run
from ..search import SearchConfig
from . import schemas

app = FastAPI(title="modelmend", version="0.1.0")


def _bad_request(exc: Exception) -> HTTPException:
    return HTTPException(status_code=400, detail=str(exc))


def _load_inputs(
    metamodel_doc: schemas.MetamodelDoc, model_doc: schemas.ModelDoc, constraints_text: str
) -> tuple[Metamodel, Model, list[Constraint]]:
    try:
        mm = metamodel_from_dict(metamodel_doc.model_dump(by_alias=True))
        model = model_from_dict(model_doc.model_dump(by_alias=True), mm)
        constraints = parse_constraint_file(constraints_text, mm)
    except (ModelError, ParseError, ResolutionError) as exc:
        raise _bad_request(exc) from exc
    return mm, model, constraints


def _run_config(doc: schemas.ConfigDoc) -> RunConfig:
    base = CostConfig()
    overrides = {}
    for kind, raw in doc.costs.items():
        overrides[kind] = float("inf") if raw in ("inf", float("inf")) else Fraction(str(raw))
    costs = CostConfig(**{k: overrides.get(k, base.of_kind(k)) for k in ("create", "delete", "addlink", "removelink", "setattr")})
    return RunConfig(
        search=SearchConfig(
            strategy=doc.strategy,
            costs=costs,
            max_depth=doc.max_depth,
            k=doc.k,
            heuristic=doc.heuristic,
        ),
        metric=doc.metric,
        check_postulates=doc.check_postulates,
        oracle_bound=doc.oracle_bound,
        seed=doc.seed,
        threads=doc.threads,
    )


@app.get("/health")
def health() -> dict:
    return {"status": "ok"}


@app.post("/propagate", response_model=schemas.RunReportDoc, response_model_exclude_none=True)
def propagate_endpoint(request: schemas.PropagateRequest) -> schemas.RunReportDoc:
    mm, model, constraints = _load_inputs(request.metamodel, request.model, request.constraints)
    try:
        script = script_from_list([a.model_dump(by_alias=True, exclude_none=True) for a in request.changes])
        cfg = _run_config(request.config)
        outcome = execute_run(mm, model, constraints, script, cfg)
    except ModelError as exc:
        raise _bad_request(exc) from exc
    return schemas.RunReportDoc.model_validate(outcome.report)


@app.post("/check", response_model=schemas.CheckResponse)
def check_endpoint(request: schemas.CheckRequest) -> schemas.CheckResponse:
    _, model, constraints = _load_inputs(request.metamodel, request.model, request.constraints)
    violations = violations_of(model, constraints)
    multiplicity = check_wellformed(model)
    return schemas.CheckResponse(
        consistent=not violations and not multiplicity,
        violations=[schemas.ViolationDoc(constraint=v.constraint, entity=v.entity) for v in violations],
        multiplicity_violations=[
            schemas.MultiplicityDoc(
                entity=w.entity, reference=w.reference, count=w.count, lower=w.lower, upper=w.upper
            )
            for w in multiplicity
        ],
    )


@app.post("/proximity/structural", response_model=schemas.StructuralProximityResponse)
def structural_endpoint(request: schemas.StructuralProximityRequest) -> schemas.StructuralProximityResponse:
    try:
        mm = metamodel_from_dict(request.metamodel.model_dump(by_alias=True))
        model_a = model_from_dict(request.model_a.model_dump(by_alias=True), mm)
        model_b = model_from_dict(request.model_b.model_dump(by_alias=True), mm)
        prox = structural_proximity(model_a, model_b)
    except ModelError as exc:
        raise _bad_request(exc) from exc
    return schemas.StructuralProximityResponse(
        node_jaccard=str(prox.node_jaccard),
        attr_jaccard=str(prox.attr_jaccard),
        link_jaccard=str(prox.link_jaccard),
        combined=str(prox.combined),
        inclusion_ab=str(prox.inclusion_ab),
        inclusion_ba=str(prox.inclusion_ba),
    )


def _scenarios(doc: schemas.ProcessGraphDoc):
    graph = process_graph_from_dict(doc.model_dump())
    return effect_scenarios(graph)


@app.post("/process/scenarios", response_model=schemas.ScenariosResponse)
def scenarios_endpoint(request: schemas.ScenariosRequest) -> schemas.ScenariosResponse:
    try:
        scenarios = _scenarios(request.graph)
    except (GraphError, EffectConflictError) as exc:
        raise _bad_request(exc) from exc
    rendered = sorted(sorted(render_literal(lit) for lit in scenario) for scenario in scenarios)
    return schemas.ScenariosResponse(scenarios=rendered)


@app.post("/proximity/semantic", response_model=schemas.SemanticProximityResponse)
def semantic_endpoint(request: schemas.SemanticProximityRequest) -> schemas.SemanticProximityResponse:
    try:
        a = _scenarios(request.graph_a)
        b = _scenarios(request.graph_b)
    except (GraphError, EffectConflictError) as exc:
        raise _bad_request(exc) from exc
    return schemas.SemanticProximityResponse(similarity=str(semantic_proximity(a, b)))
