"""Constraint evaluation over model snapshots, with read-scope tracking.

Evaluation is pure. Every evaluation records the set of entities whose
attributes or links were read (the scope); if none of those entities changed
between two snapshots, the verdict cannot change either. ``violations_of``
exploits this for incremental re-checking: given the entities dirtied by an
edit and the previous evaluation cache, only affected (constraint, entity)
pairs are re-evaluated.

Undefined handling: navigating through a missing or non-singleton target
yields the undefined value; any comparison or collection operation on
undefined evaluates to false. This is a deliberate two-valued collapse of
OCL's three-valued logic.
"""

from __future__ import annotations

from dataclasses import dataclass

from .core import Model, Value
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
)


class _UndefinedType:
    __slots__ = ()

    def __repr__(self) -> str:
        return "undefined"


UNDEFINED = _UndefinedType()


@dataclass(frozen=True)
class EntityRef:
    id: str


@dataclass(frozen=True)
class Collection:
    ids: tuple[str, ...]


EvalValue = object  # Value | EntityRef | Collection | UNDEFINED


@dataclass(frozen=True)
class Violation:
    constraint: str
    entity: str


@dataclass(frozen=True)
class EvalResult:
    holds: bool
    scope: frozenset[str]


def _navigate(path: Path, env: dict[str, str], model: Model, scope: set[str]) -> EvalValue:
    current: EvalValue = EntityRef(env[path.base])
    for step in path.steps:
        if current is UNDEFINED:
            return UNDEFINED
        if isinstance(current, Collection):
            if len(current.ids) != 1:
                return UNDEFINED
            current = EntityRef(current.ids[0])
        assert isinstance(current, EntityRef)
        ent = model.entities.get(current.id)
        if ent is None:
            return UNDEFINED
        scope.add(ent.id)
        if step in ent.attrs:
            current = ent.attrs[step]
        else:
            # Declared reference (load-time checked); missing key = no links.
            current = Collection(ent.links.get(step, ()))
    return current


def _as_collection(value: EvalValue) -> Collection | _UndefinedType:
    if isinstance(value, Collection):
        return value
    if isinstance(value, EntityRef):
        return Collection((value.id,))
    return UNDEFINED


def _compare(op: str, lhs: EvalValue, rhs: EvalValue) -> bool:
    if lhs is UNDEFINED or rhs is UNDEFINED:
        return False
    lhs = _collapse(lhs)
    rhs = _collapse(rhs)
    if lhs is UNDEFINED or rhs is UNDEFINED:
        return False
    if isinstance(lhs, EntityRef) or isinstance(rhs, EntityRef):
        if not (isinstance(lhs, EntityRef) and isinstance(rhs, EntityRef)):
            return False
        if op == "=":
            return lhs.id == rhs.id
        if op == "<>":
            return lhs.id != rhs.id
        return False
    if isinstance(lhs, bool) != isinstance(rhs, bool):
        return False
    if isinstance(lhs, str) != isinstance(rhs, str):
        return False
    if op == "=":
        return lhs == rhs
    if op == "<>":
        return lhs != rhs
    if isinstance(lhs, (bool, str)) or isinstance(rhs, (bool, str)):
        return False  # ordering only on ints
    return {"<": lhs < rhs, "<=": lhs <= rhs, ">": lhs > rhs, ">=": lhs >= rhs}[op]


def _collapse(value: EvalValue) -> EvalValue:
    """A singleton collection stands for its element; other sizes are undefined."""
    if isinstance(value, Collection):
        if len(value.ids) == 1:
            return EntityRef(value.ids[0])
        return UNDEFINED
    return value


def _eval(expr: Expr, env: dict[str, str], model: Model, scope: set[str]) -> EvalValue:
    if isinstance(expr, Literal):
        return expr.value
    if isinstance(expr, Path):
        return _navigate(expr, env, model, scope)
    if isinstance(expr, Compare):
        return _compare(expr.op, _eval(expr.lhs, env, model, scope), _eval(expr.rhs, env, model, scope))
    if isinstance(expr, Not):
        return not _as_bool(_eval(expr.operand, env, model, scope))
    if isinstance(expr, BoolOp):
        lhs = _as_bool(_eval(expr.lhs, env, model, scope))
        # No short-circuit: the scope must cover everything a re-check could read.
        rhs = _as_bool(_eval(expr.rhs, env, model, scope))
        if expr.op == "and":
            return lhs and rhs
        if expr.op == "or":
            return lhs or rhs
        return (not lhs) or rhs
    if isinstance(expr, Size):
        coll = _as_collection(_navigate(expr.target, env, model, scope))
        if coll is UNDEFINED:
            return UNDEFINED
        return len(coll.ids)
    if isinstance(expr, EmptyCheck):
        coll = _as_collection(_navigate(expr.target, env, model, scope))
        if coll is UNDEFINED:
            return False
        empty = len(coll.ids) == 0
        return not empty if expr.negated else empty
    if isinstance(expr, Includes):
        coll = _as_collection(_navigate(expr.target, env, model, scope))
        member = _collapse(_navigate(expr.member, env, model, scope))
        if coll is UNDEFINED or not isinstance(member, EntityRef):
            return False
        return member.id in coll.ids
    if isinstance(expr, Quantifier):
        coll = _as_collection(_navigate(expr.target, env, model, scope))
        if coll is UNDEFINED:
            return False
        results = []
        for eid in coll.ids:
            inner = dict(env)
            inner[expr.var] = eid
            results.append(_as_bool(_eval(expr.body, inner, model, scope)))
        if expr.kind == "exists":
            return any(results)
        return all(results)
    raise TypeError(f"unknown AST node {expr!r}")


def _as_bool(value: EvalValue) -> bool:
    return value is True


def evaluate_constraint(constraint: Constraint, entity_id: str, model: Model) -> EvalResult:
    """Evaluate on one context entity; returns the verdict and the read scope."""
    scope: set[str] = {entity_id}
    holds = _as_bool(_eval(constraint.expr, {"self": entity_id}, model, scope))
    return EvalResult(holds=holds, scope=frozenset(scope))


# ---------------------------------------------------------------------------
# Model-wide checking with optional incremental re-evaluation
# ---------------------------------------------------------------------------

CacheKey = tuple[str, str]  # (constraint name, entity id)
EvalCache = dict[CacheKey, EvalResult]


def violations_of(
    model: Model,
    constraints: list[Constraint] | tuple[Constraint, ...],
    dirty: frozenset[str] | set[str] | None = None,
    cache: EvalCache | None = None,
) -> list[Violation]:
    """All (constraint, context entity) pairs that fail, sorted.

    Without ``dirty``: every pair is (re-)evaluated; ``cache`` is filled if
    given. With ``dirty``: ``cache`` must hold the previous snapshot's results;
    only pairs whose recorded scope intersects ``dirty`` (plus pairs on new or
    dirty context entities) are re-evaluated, and the cache is updated in place
    to describe ``model``.
    """
    if dirty is not None and cache is None:
        raise ValueError("incremental re-checking requires the previous cache")
    out: list[Violation] = []
    live: set[CacheKey] = set()
    for constraint in constraints:
        for eid in model.instances_of(constraint.context_class):
            key = (constraint.name, eid)
            live.add(key)
            prior = cache.get(key) if cache is not None else None
            if dirty is None or prior is None or eid in dirty or prior.scope & dirty:
                result = evaluate_constraint(constraint, eid, model)
                if cache is not None:
                    cache[key] = result
            else:
                result = prior
            if not result.holds:
                out.append(Violation(constraint.name, eid))
    if cache is not None:
        for stale in set(cache) - live:
            del cache[stale]
    out.sort(key=lambda v: (v.constraint, v.entity))
    return out
