"""Typed-graph models, their metamodels, and the primitive edit actions.

A ``Metamodel`` declares classes with typed attributes and multiplicity-bounded
references. A ``Model`` is an immutable snapshot conforming to a metamodel:
entities with attribute values and ordered links. Five primitive actions
(create, delete, add-link, remove-link, set-attribute) transform snapshots;
``apply_action`` is pure and always returns a new snapshot.

Multiplicity bounds are deliberately NOT a snapshot invariant: intermediate
states of a repair search may violate them. ``check_wellformed`` reports the
violations; the search only requires emptiness at goal states.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Mapping, Union

Value = Union[str, int, bool]

ATTR_TYPES = ("string", "int", "bool")
DEFAULT_VALUES: dict[str, Value] = {"string": "", "int": 0, "bool": False}


class ModelError(Exception):
    """Base error for metamodel/model/action problems."""


class MetamodelError(ModelError):
    """A metamodel violates its own invariants."""


class ConformanceError(ModelError):
    """A model does not conform to its metamodel."""


class ActionError(ModelError):
    """A primitive action cannot be applied to the given snapshot."""


def value_matches(value: Value, attr_type: str) -> bool:
    # bool is a subclass of int in Python; check it first so int attrs reject True.
    if attr_type == "bool":
        return isinstance(value, bool)
    if attr_type == "int":
        return isinstance(value, int) and not isinstance(value, bool)
    if attr_type == "string":
        return isinstance(value, str)
    raise MetamodelError(f"unknown attribute type {attr_type!r}")


# ---------------------------------------------------------------------------
# Metamodel
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RefDef:
    """A reference declaration: target class plus multiplicity bounds."""

    target: str
    lower: int = 0
    upper: int | None = None  # None = unbounded


@dataclass(frozen=True, eq=True)
class ClassDef:
    name: str
    attributes: Mapping[str, str] = field(default_factory=dict)
    references: Mapping[str, RefDef] = field(default_factory=dict)


@dataclass(frozen=True, eq=True)
class Metamodel:
    classes: tuple[ClassDef, ...]

    def __post_init__(self) -> None:
        index: dict[str, ClassDef] = {}
        for cd in self.classes:
            if cd.name in index:
                raise MetamodelError(f"duplicate class name {cd.name!r}")
            index[cd.name] = cd
        for cd in self.classes:
            overlap = set(cd.attributes) & set(cd.references)
            if overlap:
                raise MetamodelError(
                    f"class {cd.name!r}: names used as both attribute and reference: {sorted(overlap)}"
                )
            for attr, atype in cd.attributes.items():
                if atype not in ATTR_TYPES:
                    raise MetamodelError(f"class {cd.name!r}: attribute {attr!r} has unknown type {atype!r}")
            for ref, rd in cd.references.items():
                if rd.target not in index:
                    raise MetamodelError(f"class {cd.name!r}: reference {ref!r} targets undeclared class {rd.target!r}")
                if rd.lower < 0:
                    raise MetamodelError(f"class {cd.name!r}: reference {ref!r} has negative lower bound")
                if rd.upper is not None and rd.lower > rd.upper:
                    raise MetamodelError(f"class {cd.name!r}: reference {ref!r} has lower > upper")
        object.__setattr__(self, "_index", index)

    def class_def(self, name: str) -> ClassDef:
        try:
            return self._index[name]  # type: ignore[attr-defined]
        except KeyError:
            raise MetamodelError(f"unknown class {name!r}") from None

    def has_class(self, name: str) -> bool:
        return name in self._index  # type: ignore[attr-defined]

    def class_names(self) -> tuple[str, ...]:
        return tuple(cd.name for cd in self.classes)


# ---------------------------------------------------------------------------
# Model snapshots
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Entity:
    id: str
    cls: str
    attrs: Mapping[str, Value]
    links: Mapping[str, tuple[str, ...]]  # reference name -> ordered targets


@dataclass(frozen=True)
class Model:
    """An immutable snapshot. Treat ``entities`` and nested maps as frozen."""

    metamodel: Metamodel
    entities: Mapping[str, Entity]
    created: tuple[str, ...] = ()  # creation order of entities minted by actions

    def entity(self, entity_id: str) -> Entity:
        ent = self.entities.get(entity_id)
        if ent is None:
            raise ActionError(f"no entity {entity_id!r} in model")
        return ent

    def instances_of(self, class_name: str) -> tuple[str, ...]:
        return tuple(eid for eid, e in sorted(self.entities.items()) if e.cls == class_name)


def validate_model(model: Model) -> None:
    """Check snapshot invariants (everything except multiplicity bounds)."""
    mm = model.metamodel
    for eid, ent in model.entities.items():
        if eid != ent.id:
            raise ConformanceError(f"entity key {eid!r} does not match entity id {ent.id!r}")
        if not mm.has_class(ent.cls):
            raise ConformanceError(f"entity {eid!r}: unknown class {ent.cls!r}")
        cd = mm.class_def(ent.cls)
        for attr, value in ent.attrs.items():
            if attr not in cd.attributes:
                raise ConformanceError(f"entity {eid!r}: undeclared attribute {attr!r}")
            if not value_matches(value, cd.attributes[attr]):
                raise ConformanceError(
                    f"entity {eid!r}: attribute {attr!r} value {value!r} is not a {cd.attributes[attr]}"
                )
        missing = set(cd.attributes) - set(ent.attrs)
        if missing:
            raise ConformanceError(f"entity {eid!r}: missing attributes {sorted(missing)}")
        for ref, targets in ent.links.items():
            if ref not in cd.references:
                raise ConformanceError(f"entity {eid!r}: undeclared reference {ref!r}")
            rd = cd.references[ref]
            seen: set[str] = set()
            for tid in targets:
                if tid in seen:
                    raise ConformanceError(f"entity {eid!r}: duplicate link {ref!r} -> {tid!r}")
                seen.add(tid)
                tgt = model.entities.get(tid)
                if tgt is None:
                    raise ConformanceError(f"entity {eid!r}: link {ref!r} targets missing entity {tid!r}")
                if tgt.cls != rd.target:
                    raise ConformanceError(
                        f"entity {eid!r}: link {ref!r} targets {tid!r} of class {tgt.cls!r}, expected {rd.target!r}"
                    )


# ---------------------------------------------------------------------------
# Facts and diffs
# ---------------------------------------------------------------------------

NodeFact = tuple[str, str]  # (id, class)
AttrFact = tuple[str, str, Value]  # (id, attribute, value)
LinkFact = tuple[str, str, str]  # (source, reference, target)


@dataclass(frozen=True)
class FactSet:
    """Order-free view of a snapshot: node, attribute, and link facts."""

    nodes: frozenset[NodeFact]
    attrs: frozenset[AttrFact]
    links: frozenset[LinkFact]

    def __len__(self) -> int:
        return len(self.nodes) + len(self.attrs) + len(self.links)

    def combined(self) -> frozenset[tuple]:
        return frozenset(
            [("node", *f) for f in self.nodes]
            + [("attr", *f) for f in self.attrs]
            + [("link", *f) for f in self.links]
        )

    def restricted(self, entity_ids: frozenset[str] | set[str]) -> FactSet:
        """Facts touching any of the given entities (links count both ends)."""
        return FactSet(
            nodes=frozenset(f for f in self.nodes if f[0] in entity_ids),
            attrs=frozenset(f for f in self.attrs if f[0] in entity_ids),
            links=frozenset(f for f in self.links if f[0] in entity_ids or f[2] in entity_ids),
        )

    @staticmethod
    def of(model: Model) -> FactSet:
        nodes: list[NodeFact] = []
        attrs: list[AttrFact] = []
        links: list[LinkFact] = []
        for ent in model.entities.values():
            nodes.append((ent.id, ent.cls))
            for a, v in ent.attrs.items():
                attrs.append((ent.id, a, v))
            for r, targets in ent.links.items():
                for t in targets:
                    links.append((ent.id, r, t))
        return FactSet(frozenset(nodes), frozenset(attrs), frozenset(links))


@dataclass(frozen=True)
class ModelDiff:
    added: FactSet
    removed: FactSet

    def is_empty(self) -> bool:
        return len(self.added) == 0 and len(self.removed) == 0


def model_diff(a: Model, b: Model) -> ModelDiff:
    if a.metamodel != b.metamodel:
        raise ModelError("cannot diff models over different metamodels")
    fa, fb = FactSet.of(a), FactSet.of(b)
    return ModelDiff(
        added=FactSet(fb.nodes - fa.nodes, fb.attrs - fa.attrs, fb.links - fa.links),
        removed=FactSet(fa.nodes - fb.nodes, fa.attrs - fb.attrs, fa.links - fb.links),
    )


def _rename_map(model: Model, created_order: tuple[str, ...] | None) -> dict[str, str]:
    # Created entities are renumbered per class by creation step, so two search
    # branches that mint "the same" entity under different fresh ids collide.
    order = created_order if created_order is not None else model.created
    rename: dict[str, str] = {}
    per_class: dict[str, int] = {}
    for eid in order:
        ent = model.entities.get(eid)
        if ent is None:
            continue  # created then deleted
        k = per_class.get(ent.cls, 0)
        per_class[ent.cls] = k + 1
        rename[eid] = f"~{ent.cls}:{k}"
    return rename


def canonical_facts(model: Model, created_order: tuple[str, ...] | None = None) -> frozenset[tuple]:
    """Fresh-id-independent fact set; the fast, opaque canonical key."""
    rename = _rename_map(model, created_order)
    facts: list[tuple] = []
    if rename:
        r = rename.get
        for ent in model.entities.values():
            eid = r(ent.id, ent.id)
            facts.append(("n", eid, ent.cls))
            for a, v in ent.attrs.items():
                facts.append(("a", eid, a, v))
            for ref, targets in ent.links.items():
                for t in targets:
                    facts.append(("l", eid, ref, r(t, t)))
    else:
        for ent in model.entities.values():
            facts.append(("n", ent.id, ent.cls))
            for a, v in ent.attrs.items():
                facts.append(("a", ent.id, a, v))
            for ref, targets in ent.links.items():
                for t in targets:
                    facts.append(("l", ent.id, ref, t))
    return frozenset(facts)


def canonical_key(model: Model, created_order: tuple[str, ...] | None = None) -> str:
    """Stable printable fingerprint of ``canonical_facts`` (sha256 hex)."""
    lines = sorted("|".join(json.dumps(part) for part in fact) for fact in canonical_facts(model, created_order))
    return hashlib.sha256("\n".join(lines).encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# Multiplicity checking
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MultiplicityViolation:
    entity: str
    reference: str
    count: int
    lower: int
    upper: int | None

    def __str__(self) -> str:
        upper = "*" if self.upper is None else str(self.upper)
        return f"({self.entity}, {self.reference}): count {self.count} outside [{self.lower}, {upper}]"


def check_wellformed(model: Model, metamodel: Metamodel | None = None) -> list[MultiplicityViolation]:
    """Every (entity, reference) whose link count is outside its declared bounds."""
    mm = metamodel if metamodel is not None else model.metamodel
    out: list[MultiplicityViolation] = []
    for eid in sorted(model.entities):
        ent = model.entities[eid]
        cd = mm.class_def(ent.cls)
        for ref in sorted(cd.references):
            rd = cd.references[ref]
            n = len(ent.links.get(ref, ()))
            if n < rd.lower or (rd.upper is not None and n > rd.upper):
                out.append(MultiplicityViolation(eid, ref, n, rd.lower, rd.upper))
    return out


# ---------------------------------------------------------------------------
# Change actions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Create:
    cls: str
    placeholder: str  # must start with "$"; bound to the fresh id on apply

    kind = "create"


@dataclass(frozen=True)
class Delete:
    entity: str

    kind = "delete"


@dataclass(frozen=True)
class AddLink:
    source: str
    reference: str
    target: str
    position: int | None = None  # None = append

    kind = "addlink"


@dataclass(frozen=True)
class RemoveLink:
    source: str
    reference: str
    target: str

    kind = "removelink"


@dataclass(frozen=True)
class SetAttr:
    entity: str
    attribute: str
    value: Value

    kind = "setattr"


ChangeAction = Union[Create, Delete, AddLink, RemoveLink, SetAttr]

ACTION_KINDS = ("create", "delete", "addlink", "removelink", "setattr")


def _resolve(entity_id: str, binding: Mapping[str, str] | None) -> str:
    if entity_id.startswith("$"):
        if binding is None or entity_id not in binding:
            raise ActionError(f"unresolved placeholder {entity_id!r}")
        return binding[entity_id]
    return entity_id


def _fresh_id(model: Model) -> str:
    n = len(model.created) + 1
    while f"_c{n}" in model.entities:
        n += 1
    return f"_c{n}"


def apply_action(model: Model, action: ChangeAction, binding: dict[str, str] | None = None) -> Model:
    """Apply one primitive action, returning a new snapshot.

    ``binding`` maps ``$placeholders`` to concrete ids; Create records its
    fresh id there so later actions in the same script can refer to it.
    """
    mm = model.metamodel
    if isinstance(action, Create):
        if not action.placeholder.startswith("$"):
            raise ActionError(f"create id {action.placeholder!r} must be a $-placeholder")
        cd = mm.class_def(action.cls)
        fid = _fresh_id(model)
        ent = Entity(
            id=fid,
            cls=action.cls,
            attrs={a: DEFAULT_VALUES[t] for a, t in cd.attributes.items()},
            links={},
        )
        entities = dict(model.entities)
        entities[fid] = ent
        if binding is not None:
            binding[action.placeholder] = fid
        return Model(mm, entities, model.created + (fid,))

    if isinstance(action, Delete):
        eid = _resolve(action.entity, binding)
        ent = model.entity(eid)
        if ent.links and any(ent.links.values()):
            raise ActionError(f"cannot delete {eid!r}: outgoing incident links")
        for other in model.entities.values():
            for ref, targets in other.links.items():
                if eid in targets:
                    raise ActionError(f"cannot delete {eid!r}: incident link from {other.id!r}.{ref}")
        entities = dict(model.entities)
        del entities[eid]
        return Model(mm, entities, model.created)

    if isinstance(action, AddLink):
        sid = _resolve(action.source, binding)
        tid = _resolve(action.target, binding)
        src = model.entity(sid)
        tgt = model.entity(tid)
        rd = mm.class_def(src.cls).references.get(action.reference)
        if rd is None:
            raise ActionError(f"class {src.cls!r} declares no reference {action.reference!r}")
        if tgt.cls != rd.target:
            raise ActionError(
                f"link {action.reference!r} expects target class {rd.target!r}, got {tgt.cls!r} ({tid!r})"
            )
        current = src.links.get(action.reference, ())
        if tid in current:
            raise ActionError(f"duplicate link ({sid!r}, {action.reference!r}, {tid!r})")
        new_targets = list(current)
        new_targets.insert(len(new_targets) if action.position is None else action.position, tid)
        links = dict(src.links)
        links[action.reference] = tuple(new_targets)
        entities = dict(model.entities)
        entities[sid] = Entity(src.id, src.cls, src.attrs, links)
        return Model(mm, entities, model.created)

    if isinstance(action, RemoveLink):
        sid = _resolve(action.source, binding)
        tid = _resolve(action.target, binding)
        src = model.entity(sid)
        current = src.links.get(action.reference, ())
        if tid not in current:
            raise ActionError(f"no link ({sid!r}, {action.reference!r}, {tid!r}) to remove")
        links = dict(src.links)
        remaining = tuple(t for t in current if t != tid)
        if remaining:
            links[action.reference] = remaining
        else:
            del links[action.reference]
        entities = dict(model.entities)
        entities[sid] = Entity(src.id, src.cls, src.attrs, links)
        return Model(mm, entities, model.created)

    if isinstance(action, SetAttr):
        eid = _resolve(action.entity, binding)
        ent = model.entity(eid)
        cd = mm.class_def(ent.cls)
        atype = cd.attributes.get(action.attribute)
        if atype is None:
            raise ActionError(f"class {ent.cls!r} declares no attribute {action.attribute!r}")
        if not value_matches(action.value, atype):
            raise ActionError(f"attribute {action.attribute!r} expects {atype}, got {action.value!r}")
        attrs = dict(ent.attrs)
        attrs[action.attribute] = action.value
        entities = dict(model.entities)
        entities[eid] = Entity(ent.id, ent.cls, attrs, ent.links)
        return Model(mm, entities, model.created)

    raise ActionError(f"unknown action {action!r}")


def apply_script(
    model: Model, actions: list[ChangeAction] | tuple[ChangeAction, ...], binding: dict[str, str] | None = None
) -> tuple[Model, dict[str, str]]:
    """Apply a whole script, threading the placeholder binding through."""
    b = {} if binding is None else binding
    current = model
    for action in actions:
        current = apply_action(current, action, b)
    return current, b


def touched_entities(action: ChangeAction, binding: Mapping[str, str] | None = None) -> frozenset[str]:
    """Entities whose facts an action changes (dirty set for re-checking)."""
    if isinstance(action, Create):
        if binding is not None and action.placeholder in binding:
            return frozenset({binding[action.placeholder]})
        return frozenset()
    if isinstance(action, Delete):
        return frozenset({_resolve(action.entity, binding)})
    if isinstance(action, (AddLink, RemoveLink)):
        return frozenset({_resolve(action.source, binding), _resolve(action.target, binding)})
    return frozenset({_resolve(action.entity, binding)})


# ---------------------------------------------------------------------------
# Costs and plans
# ---------------------------------------------------------------------------

Cost = Union[Fraction, float]  # float only for math.inf (= action kind disabled)


@dataclass(frozen=True)
class CostConfig:
    """Per-action-kind exchange rates. All strictly positive; inf disables a kind."""

    create: Cost = Fraction(1)
    delete: Cost = Fraction(3)
    addlink: Cost = Fraction(1)
    removelink: Cost = Fraction(1)
    setattr: Cost = Fraction(1)

    def __post_init__(self) -> None:
        for kind in ACTION_KINDS:
            if self.of_kind(kind) <= 0:
                raise ModelError(f"cost for {kind!r} must be strictly positive")

    def of_kind(self, kind: str) -> Cost:
        return getattr(self, kind)

    def of(self, action: ChangeAction) -> Cost:
        return self.of_kind(action.kind)

    def min_cost(self) -> Cost:
        finite = [self.of_kind(k) for k in ACTION_KINDS if self.of_kind(k) != float("inf")]
        return min(finite) if finite else Fraction(1)


def parse_costs(spec: str, base: CostConfig | None = None) -> CostConfig:
    """Parse ``create=1,delete=3,...`` (values rational or ``inf``)."""
    values: dict[str, Cost] = {k: (base or CostConfig()).of_kind(k) for k in ACTION_KINDS}
    seen: set[str] = set()
    if spec.strip():
        for part in spec.split(","):
            if "=" not in part:
                raise ModelError(f"bad cost entry {part!r}, expected kind=value")
            kind, _, raw = part.partition("=")
            kind = kind.strip()
            if kind not in ACTION_KINDS:
                raise ModelError(f"unknown action kind {kind!r} in cost spec")
            if kind in seen:
                raise ModelError(f"conflicting cost spec: {kind!r} given twice")
            seen.add(kind)
            raw = raw.strip()
            values[kind] = float("inf") if raw == "inf" else Fraction(raw)
    return CostConfig(**values)


@dataclass(frozen=True)
class Plan:
    actions: tuple[ChangeAction, ...]
    total_cost: Cost

    @staticmethod
    def of(actions: tuple[ChangeAction, ...] | list[ChangeAction], costs: CostConfig) -> Plan:
        total: Cost = Fraction(0)
        for a in actions:
            total = total + costs.of(a)
        return Plan(tuple(actions), total)


# ---------------------------------------------------------------------------
# JSON (de)serialization -- the on-disk and on-wire schemas
# ---------------------------------------------------------------------------


def metamodel_from_dict(doc: dict) -> Metamodel:
    try:
        classes = []
        for c in doc["classes"]:
            refs = {
                name: RefDef(target=r["target"], lower=int(r.get("lower", 0)), upper=r.get("upper"))
                for name, r in c.get("references", {}).items()
            }
            classes.append(ClassDef(name=c["name"], attributes=dict(c.get("attributes", {})), references=refs))
    except (KeyError, TypeError) as exc:
        raise MetamodelError(f"malformed metamodel document: {exc}") from exc
    return Metamodel(tuple(classes))


def metamodel_to_dict(mm: Metamodel) -> dict:
    return {
        "classes": [
            {
                "name": cd.name,
                "attributes": dict(sorted(cd.attributes.items())),
                "references": {
                    ref: {"target": rd.target, "lower": rd.lower, "upper": rd.upper}
                    for ref, rd in sorted(cd.references.items())
                },
            }
            for cd in mm.classes
        ]
    }


def model_from_dict(doc: dict, mm: Metamodel) -> Model:
    entities: dict[str, Entity] = {}
    try:
        records = doc["entities"]
    except (KeyError, TypeError) as exc:
        raise ConformanceError(f"malformed model document: {exc}") from exc
    for rec in records:
        try:
            eid = rec["id"]
            cls = rec["class"]
        except (KeyError, TypeError) as exc:
            raise ConformanceError(f"malformed entity record {rec!r}: {exc}") from exc
        if eid in entities:
            raise ConformanceError(f"duplicate entity id {eid!r}")
        if not mm.has_class(cls):
            raise ConformanceError(f"entity {eid!r}: unknown class {cls!r}")
        cd = mm.class_def(cls)
        attrs = {a: DEFAULT_VALUES[t] for a, t in cd.attributes.items()}
        attrs.update(rec.get("attrs", {}))
        links = {ref: tuple(targets) for ref, targets in rec.get("links", {}).items() if targets}
        entities[eid] = Entity(id=eid, cls=cls, attrs=attrs, links=links)
    model = Model(mm, entities, created=tuple(doc.get("created", ())))
    validate_model(model)
    return model


def model_to_dict(model: Model) -> dict:
    doc: dict = {
        "entities": [
            {
                "id": ent.id,
                "class": ent.cls,
                "attrs": dict(sorted(ent.attrs.items())),
                "links": {ref: list(targets) for ref, targets in sorted(ent.links.items())},
            }
            for _, ent in sorted(model.entities.items())
        ]
    }
    if model.created:
        doc["created"] = list(model.created)
    return doc


def action_from_dict(rec: dict) -> ChangeAction:
    try:
        kind = rec["kind"]
        if kind == "create":
            return Create(cls=rec["class"], placeholder=rec["id"])
        if kind == "delete":
            return Delete(entity=rec["entity"])
        if kind == "addlink":
            return AddLink(
                source=rec["source"], reference=rec["reference"], target=rec["target"], position=rec.get("position")
            )
        if kind == "removelink":
            return RemoveLink(source=rec["source"], reference=rec["reference"], target=rec["target"])
        if kind == "setattr":
            return SetAttr(entity=rec["entity"], attribute=rec["attribute"], value=rec["value"])
    except (KeyError, TypeError) as exc:
        raise ActionError(f"malformed action record {rec!r}: {exc}") from exc
    raise ActionError(f"unknown action kind {kind!r}")


def action_to_dict(action: ChangeAction) -> dict:
    if isinstance(action, Create):
        return {"kind": "create", "class": action.cls, "id": action.placeholder}
    if isinstance(action, Delete):
        return {"kind": "delete", "entity": action.entity}
    if isinstance(action, AddLink):
        rec = {"kind": "addlink", "source": action.source, "reference": action.reference, "target": action.target}
        if action.position is not None:
            rec["position"] = action.position
        return rec
    if isinstance(action, RemoveLink):
        return {"kind": "removelink", "source": action.source, "reference": action.reference, "target": action.target}
    return {"kind": "setattr", "entity": action.entity, "attribute": action.attribute, "value": action.value}


def script_from_list(records: list[dict]) -> list[ChangeAction]:
    actions = [action_from_dict(rec) for rec in records]
    bound: set[str] = set()
    for a in actions:
        if isinstance(a, Create):
            bound.add(a.placeholder)
        else:
            for eid in _referenced_ids(a):
                if eid.startswith("$") and eid not in bound:
                    raise ActionError(f"placeholder {eid!r} used before its create action")
    return actions


def _referenced_ids(action: ChangeAction) -> Iterator[str]:
    if isinstance(action, Delete):
        yield action.entity
    elif isinstance(action, (AddLink, RemoveLink)):
        yield action.source
        yield action.target
    elif isinstance(action, SetAttr):
        yield action.entity
