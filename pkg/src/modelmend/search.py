"""Change propagation as state-space search.

The initial state is the model after the primary change script. Successors
apply one candidate repair action; a goal state has no constraint violations
and no multiplicity violations. Plans never touch a slot the primary change
wrote, and goal states are never expanded further, so no returned path passes
through an intermediate consistent state.

Strategies:

* ``ucs``        uniform-cost search; first plan cost is minimal within the bound
* ``astar``      uniform-cost plus an admissible heuristic; same optimality
* ``exhaustive`` enumerate every state within the depth bound, then rank goals
* ``greedy``     best-heuristic-first; fast, no optimality claim

Equal-cost goals are ordered by structural similarity to the original
(pre-primary) model, higher first, then by canonical state key. Everything is
deterministic; repeated runs produce identical results.
"""

from __future__ import annotations

import heapq
import time
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Iterable

from .checker import EvalCache, Violation, violations_of
from .core import (
    ChangeAction,
    Cost,
    CostConfig,
    Metamodel,
    Model,
    ModelError,
    MultiplicityViolation,
    Plan,
    apply_action,
    apply_script,
    canonical_facts,
    canonical_key,
    check_wellformed,
    touched_entities,
)
from .dsl import Constraint
from .proximity import combined_similarity
from .repair import (
    ProtectedSlots,
    _order_key,
    generate_repairs,
    multiplicity_repairs,
    protected_slots_of,
)

STRATEGIES = ("ucs", "astar", "greedy", "exhaustive")


class NoPlanWithinBound(ModelError):
    """Search exhausted the depth bound without reaching a consistent state."""

    def __init__(self, message: str, stats: "SearchStats", violations: list[Violation], wellformed: list[MultiplicityViolation]):
        super().__init__(message)
        self.stats = stats
        self.violations = violations
        self.wellformed = wellformed


@dataclass(frozen=True)
class SearchConfig:
    strategy: str = "astar"
    costs: CostConfig = field(default_factory=CostConfig)
    max_depth: int = 8
    k: int = 1
    heuristic: str = "admissible"  # or "weighted" (may overestimate; not for optimality)

    def __post_init__(self) -> None:
        if self.strategy not in STRATEGIES:
            raise ModelError(f"unknown strategy {self.strategy!r}")
        if self.max_depth < 0:
            raise ModelError("max_depth must be >= 0")
        if self.k < 1:
            raise ModelError("k must be >= 1")
        if self.heuristic not in ("admissible", "weighted"):
            raise ModelError(f"unknown heuristic mode {self.heuristic!r}")


@dataclass
class SearchStats:
    nodes_expanded: int = 0
    states_deduped: int = 0
    wall_time_ms: float = 0.0


@dataclass(frozen=True)
class SearchState:
    model: Model
    applied: tuple[ChangeAction, ...]
    g: Cost
    violations: tuple[Violation, ...]
    wellformed: tuple[MultiplicityViolation, ...]
    key: frozenset  # canonical facts; fresh-id-independent state identity
    cache: EvalCache = field(compare=False, repr=False, default_factory=dict)

    @property
    def consistent(self) -> bool:
        return not self.violations and not self.wellformed


@dataclass(frozen=True)
class PropagationResult:
    plans: tuple[Plan, ...]
    result_models: tuple[Model, ...]
    original_model: Model  # before the primary change
    initial_model: Model  # after the primary change
    protected: ProtectedSlots
    initial_violations: tuple[Violation, ...]
    initial_wellformed: tuple[MultiplicityViolation, ...]
    stats: SearchStats
    config: SearchConfig
    postulate_report: dict | None = None

    def with_postulates(self, report: dict) -> "PropagationResult":
        return replace(self, postulate_report=report)


def heuristic_estimate(state: SearchState, costs: CostConfig, mode: str = "admissible") -> Cost:
    """Lower-bound estimate of remaining cost to a consistent state.

    Admissible mode: 0 when consistent, otherwise the cheapest action kind --
    any goal path from an inconsistent state contains at least one action.
    Weighted mode scales with the violation count and may overestimate.
    """
    if state.consistent:
        return Fraction(0)
    c_min = costs.min_cost()
    if mode == "weighted":
        estimate = c_min * len(state.violations)
        return estimate if estimate > 0 else c_min
    return c_min


def _make_state(
    model: Model,
    applied: tuple[ChangeAction, ...],
    g: Cost,
    constraints: list[Constraint] | tuple[Constraint, ...],
    cache: EvalCache,
    dirty: frozenset[str] | None,
) -> SearchState:
    violations = tuple(violations_of(model, constraints, dirty=dirty, cache=cache))
    wf = tuple(check_wellformed(model))
    return SearchState(
        model=model,
        applied=applied,
        g=g,
        violations=violations,
        wellformed=wf,
        key=canonical_facts(model),
        cache=cache,
    )


def _successors(
    state: SearchState,
    constraints: list[Constraint] | tuple[Constraint, ...],
    protected: ProtectedSlots,
    costs: CostConfig,
) -> Iterable[tuple[ChangeAction, SearchState]]:
    candidates: dict[ChangeAction, None] = {}
    for violation in state.violations:
        for cand in generate_repairs(violation, state.model, constraints, protected):
            candidates.setdefault(cand.action, None)
    for wf_violation in state.wellformed:
        for cand in multiplicity_repairs(wf_violation, state.model, protected):
            candidates.setdefault(cand.action, None)
    for action in sorted(candidates, key=_order_key):
        cost = costs.of(action)
        if cost == float("inf"):
            continue
        binding: dict[str, str] = {}
        try:
            next_model = apply_action(state.model, action, binding)
        except ModelError:
            continue
        dirty = touched_entities(action, binding)
        next_cache = dict(state.cache)
        yield action, _make_state(
            next_model,
            state.applied + (action,),
            state.g + cost,
            constraints,
            next_cache,
            dirty,
        )


def propagate(
    original: Model,
    primary: list[ChangeAction] | tuple[ChangeAction, ...],
    constraints: list[Constraint] | tuple[Constraint, ...],
    metamodel: Metamodel | None = None,
    config: SearchConfig | None = None,
) -> PropagationResult:
    """Find up to k cheapest secondary-change plans restoring consistency.

    ``metamodel`` defaults to the model's own; it is accepted separately so
    callers holding the pieces individually can pass what they have.
    """
    cfg = config or SearchConfig()
    if metamodel is not None and metamodel != original.metamodel:
        raise ModelError("metamodel does not match the model's own")
    started = time.perf_counter()
    stats = SearchStats()

    initial_model, binding = apply_script(original, primary)
    protected = protected_slots_of(primary, binding)

    root_cache: EvalCache = {}
    root = _make_state(initial_model, (), Fraction(0), constraints, root_cache, None)

    if root.consistent:
        stats.wall_time_ms = (time.perf_counter() - started) * 1000.0
        return PropagationResult(
            plans=(Plan((), Fraction(0)),),
            result_models=(initial_model,),
            original_model=original,
            initial_model=initial_model,
            protected=protected,
            initial_violations=root.violations,
            initial_wellformed=root.wellformed,
            stats=stats,
            config=cfg,
        )

    goals = _run_search(root, constraints, protected, cfg, stats)
    stats.wall_time_ms = (time.perf_counter() - started) * 1000.0
    if not goals:
        raise NoPlanWithinBound(
            f"no consistent state within depth {cfg.max_depth}",
            stats,
            list(root.violations),
            list(root.wellformed),
        )

    ranked = sorted(
        goals.values(),
        key=lambda s: (s.g, -combined_similarity(s.model, original), canonical_key(s.model)),
    )[: cfg.k]
    plans = tuple(Plan.of(s.applied, cfg.costs) for s in ranked)
    return PropagationResult(
        plans=plans,
        result_models=tuple(s.model for s in ranked),
        original_model=original,
        initial_model=initial_model,
        protected=protected,
        initial_violations=root.violations,
        initial_wellformed=root.wellformed,
        stats=stats,
        config=cfg,
    )


def _priority(state: SearchState, cfg: SearchConfig) -> tuple:
    if cfg.strategy == "ucs":
        return (state.g,)
    if cfg.strategy == "astar":
        return (state.g + heuristic_estimate(state, cfg.costs, cfg.heuristic),)
    if cfg.strategy == "greedy":
        return (heuristic_estimate(state, cfg.costs, cfg.heuristic), state.g)
    return (len(state.applied),)  # exhaustive: breadth order


def _run_search(
    root: SearchState,
    constraints: list[Constraint] | tuple[Constraint, ...],
    protected: ProtectedSlots,
    cfg: SearchConfig,
    stats: SearchStats,
) -> dict[str, SearchState]:
    optimal = cfg.strategy in ("ucs", "astar")
    goals: dict[str, SearchState] = {}
    best_g: dict[str, Cost] = {root.key: root.g}
    counter = 0
    frontier: list[tuple[tuple, int, SearchState]] = [(_priority(root, cfg), counter, root)]

    while frontier:
        priority, _, state = heapq.heappop(frontier)
        if state.g > best_g.get(state.key, state.g):
            continue  # stale entry superseded by a cheaper path

        if optimal and len(goals) >= cfg.k:
            cutoff = sorted(s.g for s in goals.values())[cfg.k - 1]
            if priority[0] > cutoff:
                break  # every remaining goal would cost more than the k-th plan

        if state.consistent:
            known = goals.get(state.key)
            if known is None or state.g < known.g:
                goals[state.key] = state
            if cfg.strategy == "greedy" and len(goals) >= cfg.k:
                break
            continue  # goal states are terminal: no consistent intermediate states

        if len(state.applied) >= cfg.max_depth:
            continue
        stats.nodes_expanded += 1
        for _action, nxt in _successors(state, constraints, protected, cfg.costs):
            prior = best_g.get(nxt.key)
            if prior is not None and prior <= nxt.g:
                stats.states_deduped += 1
                continue
            best_g[nxt.key] = nxt.g
            counter += 1
            heapq.heappush(frontier, (_priority(nxt, cfg), counter, nxt))
    return goals
