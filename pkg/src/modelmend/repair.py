"""Derives candidate primitive edits for a single constraint violation.

Candidates come from the failing constraint's AST, evaluated on the violating
entity:

* set-attribute candidates take their values from the evaluated other side of
  each failing comparison (under each quantifier binding), boundary values
  k-1/k/k+1 for integer orderings, and string values observed in the read
  scope for ``<>``; arbitrary values are never synthesized
* add-link / remove-link candidates for every reference navigated by the
  constraint
* create candidates for the element class of failing exists/size/notEmpty
  subexpressions
* delete of the violating context entity itself, when it has no incident links

Candidates that would rewrite a slot owned by the primary change are filtered
out. The result list is duplicate-free and deterministically ordered.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .checker import UNDEFINED, Collection, EntityRef, EvalValue, Violation, _eval
from .core import (
    AddLink,
    ChangeAction,
    Create,
    Delete,
    Model,
    MultiplicityViolation,
    RemoveLink,
    SetAttr,
    value_matches,
)
from .dsl import (
    BoolOp,
    Compare,
    Constraint,
    EmptyCheck,
    Expr,
    Includes,
    Literal,
    Not,
    Path,
    Quantifier,
    Size,
    pretty_expr,
)

# ---------------------------------------------------------------------------
# Protected slots (what the primary change owns)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProtectedSlots:
    """Locations written by the primary change; secondary edits must not undo them."""

    attr_slots: frozenset[tuple[str, str]] = frozenset()  # (entity, attribute)
    created: frozenset[str] = frozenset()  # entity ids minted by the primary script
    links_added: frozenset[tuple[str, str, str]] = frozenset()
    links_removed: frozenset[tuple[str, str, str]] = frozenset()


def protected_slots_of(script: list[ChangeAction] | tuple[ChangeAction, ...], binding: dict[str, str]) -> ProtectedSlots:
    """Derive the protected slots from an already-applied primary script."""

    def concrete(eid: str) -> str:
        return binding[eid] if eid.startswith("$") else eid

    attr_slots: set[tuple[str, str]] = set()
    created: set[str] = set()
    links_added: set[tuple[str, str, str]] = set()
    links_removed: set[tuple[str, str, str]] = set()
    for action in script:
        if isinstance(action, SetAttr):
            attr_slots.add((concrete(action.entity), action.attribute))
        elif isinstance(action, Create):
            created.add(binding[action.placeholder])
        elif isinstance(action, AddLink):
            triple = (concrete(action.source), action.reference, concrete(action.target))
            links_added.add(triple)
            links_removed.discard(triple)
        elif isinstance(action, RemoveLink):
            triple = (concrete(action.source), action.reference, concrete(action.target))
            links_removed.add(triple)
            links_added.discard(triple)
        elif isinstance(action, Delete):
            created.discard(concrete(action.entity))
    return ProtectedSlots(
        attr_slots=frozenset(attr_slots),
        created=frozenset(created),
        links_added=frozenset(links_added),
        links_removed=frozenset(links_removed),
    )


def is_reverting(action: ChangeAction, protected: ProtectedSlots) -> bool:
    """True iff the action would undo part of the primary change."""
    if isinstance(action, SetAttr):
        return (action.entity, action.attribute) in protected.attr_slots
    if isinstance(action, Delete):
        # Deleting the carrier of a protected attribute slot erases the
        # primary change just as surely as overwriting it.
        return action.entity in protected.created or any(
            entity == action.entity for entity, _ in protected.attr_slots
        )
    if isinstance(action, RemoveLink):
        return (action.source, action.reference, action.target) in protected.links_added
    if isinstance(action, AddLink):
        return (action.source, action.reference, action.target) in protected.links_removed
    return False


# ---------------------------------------------------------------------------
# Candidate generation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RepairCandidate:
    action: ChangeAction
    rationale: str


@dataclass
class _Collector:
    model: Model
    setattrs: dict[tuple[str, str, object], str] = field(default_factory=dict)
    nav_refs: dict[tuple[str, str], str] = field(default_factory=dict)  # (source, reference)
    create_classes: dict[str, str] = field(default_factory=dict)  # class -> rationale
    string_pool: set[str] = field(default_factory=set)

    def note_setattr(self, entity: str, attribute: str, value: object, why: str) -> None:
        key = (entity, attribute, value)
        self.setattrs.setdefault(key, why)

    def note_ref(self, source: str, reference: str, why: str) -> None:
        self.nav_refs.setdefault((source, reference), why)

    def note_create(self, cls: str, why: str) -> None:
        self.create_classes.setdefault(cls, why)


def _walk_path(path: Path, env: dict[str, str], col: _Collector) -> tuple[EvalValue, tuple[str, str] | None, str | None]:
    """Evaluate a path, recording navigated references.

    Returns (value, attr slot or None, element class of a final reference or None).
    """
    model = col.model
    current: EvalValue = EntityRef(env[path.base])
    slot: tuple[str, str] | None = None
    final_ref_class: str | None = None
    for step in path.steps:
        slot = None
        final_ref_class = None
        if current is UNDEFINED:
            return UNDEFINED, None, None
        if isinstance(current, Collection):
            if len(current.ids) != 1:
                return UNDEFINED, None, None
            current = EntityRef(current.ids[0])
        assert isinstance(current, EntityRef)
        ent = model.entities.get(current.id)
        if ent is None:
            return UNDEFINED, None, None
        cd = model.metamodel.class_def(ent.cls)
        if step in cd.attributes:
            value = ent.attrs[step]
            if isinstance(value, str):
                col.string_pool.add(value)
            slot = (ent.id, step)
            current = value
        else:
            col.note_ref(ent.id, step, f"navigates {ent.id}.{step}")
            final_ref_class = cd.references[step].target
            current = Collection(ent.links.get(step, ()))
    return current, slot, final_ref_class


def _comparison_values(op: str, other_value: EvalValue, current: EvalValue, col: _Collector) -> list[object]:
    """Concrete values that could flip a failing comparison on an attribute slot."""
    if other_value is UNDEFINED or isinstance(other_value, (EntityRef, Collection)):
        return []
    values: list[object] = []
    if op == "=":
        values.append(other_value)
    elif op == "<>":
        if isinstance(other_value, bool):
            values.append(not other_value)
        elif isinstance(other_value, int):
            values.extend([other_value - 1, other_value + 1])
        else:
            values.extend(sorted(w for w in col.string_pool if w != other_value))
    elif isinstance(other_value, int) and not isinstance(other_value, bool):
        values.extend([other_value - 1, other_value, other_value + 1])
    return [v for v in values if v != current]


def _walk(expr: Expr, env: dict[str, str], want: bool, col: _Collector) -> None:
    """Visit subexpressions that must change value, collecting repair material."""
    model = col.model
    if isinstance(expr, Literal):
        return
    if isinstance(expr, Path):
        _walk_path(expr, env, col)
        return
    if isinstance(expr, Not):
        _walk(expr.operand, env, not want, col)
        return
    if isinstance(expr, BoolOp):
        if expr.op == "implies":
            _walk(expr.lhs, env, False, col)
            _walk(expr.rhs, env, True, col)
        else:
            _walk(expr.lhs, env, want, col)
            _walk(expr.rhs, env, want, col)
        return
    if isinstance(expr, Size):
        _walk_path(expr.target, env, col)
        return
    if isinstance(expr, EmptyCheck):
        _, _, ref_class = _walk_path(expr.target, env, col)
        wants_nonempty = want == expr.negated  # want isEmpty false / notEmpty true
        if wants_nonempty and ref_class is not None:
            col.note_create(ref_class, f"needs elements: {pretty_expr(expr)}")
        return
    if isinstance(expr, Includes):
        _walk_path(expr.target, env, col)
        _walk_path(expr.member, env, col)
        return
    if isinstance(expr, Compare):
        scope: set[str] = set()
        actual = _eval(expr, env, model, scope)
        if actual is want:
            return
        for side, other in ((expr.lhs, expr.rhs), (expr.rhs, expr.lhs)):
            if isinstance(side, Size):
                _, _, ref_class = _walk_path(side.target, env, col)
                if ref_class is not None:
                    col.note_create(ref_class, f"size comparison: {pretty_expr(expr)}")
                continue
            if not isinstance(side, Path):
                if not isinstance(side, Literal):
                    _walk(side, env, want, col)
                continue
            value, slot, _ = _walk_path(side, env, col)
            other_value: EvalValue
            if isinstance(other, Path):
                other_value, _, _ = _walk_path(other, env, col)
            elif isinstance(other, Literal):
                other_value = other.value
            elif isinstance(other, Size):
                other_value, _, _ = (UNDEFINED, None, None)
            else:
                other_value = UNDEFINED
            if slot is not None:
                op = expr.op if want else _negate_op(expr.op)
                for v in _comparison_values(op, other_value, value, col):
                    col.note_setattr(slot[0], slot[1], v, f"comparison {pretty_expr(expr)}")
        return
    if isinstance(expr, Quantifier):
        coll_value, _, ref_class = _walk_path(expr.target, env, col)
        effective_exists = expr.kind == "exists"
        needs_elements = want == effective_exists
        if needs_elements and ref_class is not None:
            col.note_create(ref_class, f"quantifier needs witnesses: {pretty_expr(expr)}")
        if isinstance(coll_value, Collection):
            ids = coll_value.ids
        elif isinstance(coll_value, EntityRef):
            ids = (coll_value.id,)
        else:
            ids = ()
        for eid in ids:
            inner = dict(env)
            inner[expr.var] = eid
            scope: set[str] = set()
            actual = _eval(expr.body, inner, model, scope) is True
            if actual != want:  # only bindings whose body verdict must flip
                _walk(expr.body, inner, want, col)
        return
    raise TypeError(f"unknown AST node {expr!r}")


def _negate_op(op: str) -> str:
    return {"=": "<>", "<>": "=", "<": ">=", "<=": ">", ">": "<=", ">=": "<"}[op]


_KIND_ORDER = {"setattr": 0, "addlink": 1, "removelink": 2, "create": 3, "delete": 4}


def _order_key(action: ChangeAction) -> tuple:
    rank = _KIND_ORDER[action.kind]
    if isinstance(action, SetAttr):
        return (rank, action.entity, action.attribute, repr(action.value))
    if isinstance(action, AddLink):
        return (rank, action.source, action.reference, action.target)
    if isinstance(action, RemoveLink):
        return (rank, action.source, action.reference, action.target)
    if isinstance(action, Create):
        return (rank, action.cls, "")
    return (rank, action.entity, "")  # Delete


def _has_incident_links(model: Model, eid: str) -> bool:
    ent = model.entities[eid]
    if any(ent.links.values()):
        return True
    return any(eid in targets for other in model.entities.values() for targets in other.links.values())


def generate_repairs(
    violation: Violation,
    model: Model,
    constraints: list[Constraint] | tuple[Constraint, ...],
    protected: ProtectedSlots | None = None,
) -> list[RepairCandidate]:
    """Candidate single-action repairs for one failing (constraint, entity) pair."""
    constraint = next(c for c in constraints if c.name == violation.constraint)
    protected = protected or ProtectedSlots()
    col = _Collector(model=model)
    env = {"self": violation.entity}
    _walk(constraint.expr, env, True, col)

    mm = model.metamodel
    out: dict[ChangeAction, str] = {}

    def add(action: ChangeAction, why: str) -> None:
        if not is_reverting(action, protected) and action not in out:
            out[action] = why

    for (entity, attribute, value), why in col.setattrs.items():
        ent = model.entities.get(entity)
        if ent is None:
            continue
        atype = mm.class_def(ent.cls).attributes.get(attribute)
        if atype is None or not value_matches(value, atype):  # type: ignore[arg-type]
            continue
        current = ent.attrs[attribute]
        if current == value and type(current) is type(value):
            continue  # no-op, never relevant
        add(SetAttr(entity, attribute, value), why)  # type: ignore[arg-type]

    for (source, reference), why in col.nav_refs.items():
        src = model.entities.get(source)
        if src is None:
            continue
        rd = mm.class_def(src.cls).references[reference]
        existing = src.links.get(reference, ())
        for target in model.instances_of(rd.target):
            if target not in existing:
                add(AddLink(source, reference, target), why)
        for target in existing:
            add(RemoveLink(source, reference, target), why)

    creates = sorted(col.create_classes.items())
    for i, (cls, why) in enumerate(creates):
        add(Create(cls, f"$n{i + 1}"), why)

    if not _has_incident_links(model, violation.entity):
        add(Delete(violation.entity), "removes the violating context instance")

    actions = sorted(out, key=_order_key)
    return [RepairCandidate(a, out[a]) for a in actions]


def multiplicity_repairs(
    violation: MultiplicityViolation,
    model: Model,
    protected: ProtectedSlots | None = None,
) -> list[RepairCandidate]:
    """Candidate single-action repairs for a reference-count violation."""
    protected = protected or ProtectedSlots()
    mm = model.metamodel
    ent = model.entities[violation.entity]
    rd = mm.class_def(ent.cls).references[violation.reference]
    existing = ent.links.get(violation.reference, ())
    out: dict[ChangeAction, str] = {}

    def add(action: ChangeAction, why: str) -> None:
        if not is_reverting(action, protected) and action not in out:
            out[action] = why

    if violation.count < violation.lower:
        why = f"below lower bound on {violation.entity}.{violation.reference}"
        for target in model.instances_of(rd.target):
            if target not in existing:
                add(AddLink(violation.entity, violation.reference, target), why)
        add(Create(rd.target, "$n1"), why)
    if violation.upper is not None and violation.count > violation.upper:
        why = f"above upper bound on {violation.entity}.{violation.reference}"
        for target in existing:
            add(RemoveLink(violation.entity, violation.reference, target), why)

    actions = sorted(out, key=_order_key)
    return [RepairCandidate(a, out[a]) for a in actions]


__all__ = [
    "ProtectedSlots",
    "RepairCandidate",
    "generate_repairs",
    "is_reverting",
    "multiplicity_repairs",
    "protected_slots_of",
]
