"""Pydantic wire models. These mirror the on-disk JSON schemas exactly."""

from __future__ import annotations

from typing import Annotated, Literal, Union

from pydantic import BaseModel, ConfigDict, Field

AttrValue = Union[bool, int, str]


class RefDoc(BaseModel):
    model_config = ConfigDict(extra="forbid")
    target: str
    lower: int = 0
    upper: int | None = None


class ClassDoc(BaseModel):
    model_config = ConfigDict(extra="forbid")
    name: str
    attributes: dict[str, Literal["string", "int", "bool"]] = Field(default_factory=dict)
    references: dict[str, RefDoc] = Field(default_factory=dict)


class MetamodelDoc(BaseModel):
    model_config = ConfigDict(extra="forbid")
    classes: list[ClassDoc]


class EntityDoc(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)
    id: str
    cls: str = Field(alias="class")
    attrs: dict[str, AttrValue] = Field(default_factory=dict)
    links: dict[str, list[str]] = Field(default_factory=dict)


class ModelDoc(BaseModel):
    model_config = ConfigDict(extra="forbid")
    entities: list[EntityDoc]
    created: list[str] = Field(default_factory=list)


class CreateDoc(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)
    kind: Literal["create"]
    cls: str = Field(alias="class")
    id: str


class DeleteDoc(BaseModel):
    model_config = ConfigDict(extra="forbid")
    kind: Literal["delete"]
    entity: str


class AddLinkDoc(BaseModel):
    model_config = ConfigDict(extra="forbid")
    kind: Literal["addlink"]
    source: str
    reference: str
    target: str
    position: int | None = None


class RemoveLinkDoc(BaseModel):
    model_config = ConfigDict(extra="forbid")
    kind: Literal["removelink"]
    source: str
    reference: str
    target: str


class SetAttrDoc(BaseModel):
    model_config = ConfigDict(extra="forbid")
    kind: Literal["setattr"]
    entity: str
    attribute: str
    value: AttrValue


ActionDoc = Annotated[
    Union[CreateDoc, DeleteDoc, AddLinkDoc, RemoveLinkDoc, SetAttrDoc], Field(discriminator="kind")
]


class ConfigDoc(BaseModel):
    model_config = ConfigDict(extra="forbid")
    strategy: Literal["ucs", "astar", "greedy", "exhaustive"] = "astar"
    costs: dict[Literal["create", "delete", "addlink", "removelink", "setattr"], Union[int, float, str]] = Field(
        default_factory=dict
    )
    max_depth: int = Field(default=8, ge=0)
    k: int = Field(default=1, ge=1)
    heuristic: Literal["admissible", "weighted"] = "admissible"
    metric: Literal["structural", "semantic", "none"] = "structural"
    check_postulates: bool = False
    oracle_bound: int = Field(default=3, ge=0)
    seed: int = 0
    threads: int = Field(default=1, ge=1)


class PropagateRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")
    metamodel: MetamodelDoc
    model: ModelDoc
    constraints: str  # constraint-file text
    changes: list[ActionDoc]
    config: ConfigDoc = Field(default_factory=ConfigDoc)


class ViolationDoc(BaseModel):
    constraint: str
    entity: str


class MultiplicityDoc(BaseModel):
    entity: str
    reference: str
    count: int
    lower: int
    upper: int | None


class InitialDoc(BaseModel):
    consistent: bool
    violations: list[ViolationDoc]
    multiplicity_violations: list[MultiplicityDoc]


class ProximityDoc(BaseModel):
    cost_distance: str
    structural: dict[str, str]
    semantic: str | None = None


class PlanDoc(BaseModel):
    actions: list[ActionDoc]
    cost: str
    result_model: ModelDoc
    proximity: ProximityDoc | None = None


class StatsDoc(BaseModel):
    nodes_expanded: int
    states_deduped: int


class RunReportDoc(BaseModel):
    status: Literal["ok", "no_plan"]
    config: dict
    initial: InitialDoc
    protected: dict | None = None
    plans: list[PlanDoc]
    stats: StatsDoc
    postulates: dict | None = None
    error: str | None = None


class CheckRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")
    metamodel: MetamodelDoc
    model: ModelDoc
    constraints: str


class CheckResponse(BaseModel):
    consistent: bool
    violations: list[ViolationDoc]
    multiplicity_violations: list[MultiplicityDoc]


class StructuralProximityRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")
    metamodel: MetamodelDoc
    model_a: ModelDoc
    model_b: ModelDoc


class StructuralProximityResponse(BaseModel):
    node_jaccard: str
    attr_jaccard: str
    link_jaccard: str
    combined: str
    inclusion_ab: str
    inclusion_ba: str


class ProcessNodeDoc(BaseModel):
    model_config = ConfigDict(extra="forbid")
    id: str
    type: Literal["start", "end", "activity", "decision", "merge", "fork", "join"]
    effects: list[str] = Field(default_factory=list)


class ProcessGraphDoc(BaseModel):
    model_config = ConfigDict(extra="forbid")
    nodes: list[ProcessNodeDoc]
    edges: list[tuple[str, str]]


class ScenariosRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")
    graph: ProcessGraphDoc


class ScenariosResponse(BaseModel):
    scenarios: list[list[str]]  # each scenario: sorted signed literals


class SemanticProximityRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")
    graph_a: ProcessGraphDoc
    graph_b: ProcessGraphDoc


class SemanticProximityResponse(BaseModel):
    similarity: str
