"""Distance metrics between model versions.

Three families:

* cost distance -- the summed exchange rates of a plan's actions
* structural proximity -- set-based measures over fact sets: Jaccard
  similarity per fact category and combined (cardinality-oriented), plus
  containment degrees in both directions (inclusion-oriented)
* semantic proximity -- best-match Jaccard between the effect-scenario sets
  of two annotated process graphs, averaged symmetrically

All similarity values are exact rationals in [0, 1].
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping

from .core import Cost, CostConfig, FactSet, Model, ModelError, Plan

# ---------------------------------------------------------------------------
# Cost and structural distance
# ---------------------------------------------------------------------------


def cost_distance(plan: Plan, costs: CostConfig) -> Cost:
    total: Cost = Fraction(0)
    for action in plan.actions:
        total = total + costs.of(action)
    return total


@dataclass(frozen=True)
class StructuralProximity:
    node_jaccard: Fraction
    attr_jaccard: Fraction
    link_jaccard: Fraction
    combined: Fraction  # cardinality similarity over all facts
    inclusion_ab: Fraction  # |F(a) n F(b)| / |F(a)|
    inclusion_ba: Fraction


def _jaccard(a: frozenset, b: frozenset) -> Fraction:
    union = len(a | b)
    if union == 0:
        return Fraction(1)
    return Fraction(len(a & b), union)


def structural_proximity(a: Model, b: Model) -> StructuralProximity:
    if a.metamodel != b.metamodel:
        raise ModelError("cannot compare models over different metamodels")
    fa, fb = FactSet.of(a), FactSet.of(b)
    ca, cb = fa.combined(), fb.combined()
    inter = len(ca & cb)
    return StructuralProximity(
        node_jaccard=_jaccard(fa.nodes, fb.nodes),
        attr_jaccard=_jaccard(fa.attrs, fb.attrs),
        link_jaccard=_jaccard(fa.links, fb.links),
        combined=_jaccard(ca, cb),
        inclusion_ab=Fraction(inter, len(ca)) if ca else Fraction(1),
        inclusion_ba=Fraction(inter, len(cb)) if cb else Fraction(1),
    )


def combined_similarity(a: Model, b: Model) -> Fraction:
    """Cardinality similarity over all facts; the search tie-break metric."""
    ca, cb = FactSet.of(a).combined(), FactSet.of(b).combined()
    return _jaccard(ca, cb)


# ---------------------------------------------------------------------------
# Process graphs with effect annotations
# ---------------------------------------------------------------------------

NODE_TYPES = ("start", "end", "activity", "decision", "merge", "fork", "join")

SignedLiteral = tuple[str, bool]  # (atom, polarity); True = positive


class GraphError(Exception):
    """The process graph violates its structural invariants."""


class EffectConflictError(Exception):
    """Parallel branches assert opposite polarities of the same atom."""


@dataclass(frozen=True)
class ProcessNode:
    id: str
    type: str
    effects: tuple[SignedLiteral, ...] = ()


@dataclass(frozen=True)
class ProcessGraph:
    nodes: tuple[ProcessNode, ...]
    edges: tuple[tuple[str, str], ...]

    def __post_init__(self) -> None:
        ids = [n.id for n in self.nodes]
        if len(set(ids)) != len(ids):
            raise GraphError("duplicate node ids")
        by_id = {n.id: n for n in self.nodes}
        for n in self.nodes:
            if n.type not in NODE_TYPES:
                raise GraphError(f"node {n.id!r}: unknown type {n.type!r}")
        for s, t in self.edges:
            if s not in by_id or t not in by_id:
                raise GraphError(f"edge ({s!r}, {t!r}) references unknown node")
        starts = [n for n in self.nodes if n.type == "start"]
        ends = [n for n in self.nodes if n.type == "end"]
        if len(starts) != 1:
            raise GraphError(f"expected exactly one start node, found {len(starts)}")
        if not ends:
            raise GraphError("expected at least one end node")
        out_deg: dict[str, int] = {n.id: 0 for n in self.nodes}
        for s, _ in self.edges:
            out_deg[s] += 1
        for n in self.nodes:
            if n.type == "decision" and out_deg[n.id] < 2:
                raise GraphError(f"decision node {n.id!r} needs at least 2 outgoing edges")
            if n.type == "fork" and out_deg[n.id] < 2:
                raise GraphError(f"fork node {n.id!r} needs at least 2 outgoing edges")
        self._check_acyclic()

    def _check_acyclic(self) -> None:
        succ = self.successors()
        indeg = {n.id: 0 for n in self.nodes}
        for _, t in self.edges:
            indeg[t] += 1
        queue = [nid for nid, d in indeg.items() if d == 0]
        seen = 0
        while queue:
            nid = queue.pop()
            seen += 1
            for nxt in succ[nid]:
                indeg[nxt] -= 1
                if indeg[nxt] == 0:
                    queue.append(nxt)
        if seen != len(self.nodes):
            raise GraphError("process graph is cyclic")

    def successors(self) -> dict[str, list[str]]:
        succ: dict[str, list[str]] = {n.id: [] for n in self.nodes}
        for s, t in self.edges:
            succ[s].append(t)
        return succ

    def node(self, node_id: str) -> ProcessNode:
        return next(n for n in self.nodes if n.id == node_id)

    @property
    def start_id(self) -> str:
        return next(n.id for n in self.nodes if n.type == "start")


def parse_literal(text: str) -> SignedLiteral:
    if text.startswith("+"):
        return (text[1:], True)
    if text.startswith("-"):
        return (text[1:], False)
    raise GraphError(f"effect literal {text!r} must start with '+' or '-'")


def render_literal(lit: SignedLiteral) -> str:
    return ("+" if lit[1] else "-") + lit[0]


def process_graph_from_dict(doc: dict) -> ProcessGraph:
    try:
        nodes = tuple(
            ProcessNode(
                id=n["id"],
                type=n["type"],
                effects=tuple(parse_literal(e) for e in n.get("effects", [])),
            )
            for n in doc["nodes"]
        )
        edges = tuple((s, t) for s, t in doc["edges"])
    except (KeyError, TypeError) as exc:
        raise GraphError(f"malformed process graph document: {exc}") from exc
    return ProcessGraph(nodes, edges)


EffectScenario = frozenset[SignedLiteral]


def _apply_effects(base: Mapping[str, bool], effects: Iterable[SignedLiteral]) -> dict[str, bool]:
    # Later literals override earlier opposite-polarity ones of the same atom.
    merged = dict(base)
    for atom, polarity in effects:
        merged[atom] = polarity
    return merged


def effect_scenarios(graph: ProcessGraph) -> frozenset[EffectScenario]:
    """All end-of-process effect sets, one per decision-choice combination.

    Effects accumulate along paths with override; fork branches contribute the
    union of their accumulated effects, with opposite-polarity pairs across
    branches reported as conflicts.
    """
    succ = graph.successors()
    decisions = sorted(n.id for n in graph.nodes if n.type == "decision")
    choice_lists = [sorted(succ[d]) for d in decisions]

    def scenarios_for(choice: dict[str, str]) -> list[dict[str, bool]]:
        # Accumulated effect map per node, following only chosen decision edges.
        pred: dict[str, list[str]] = {n.id: [] for n in graph.nodes}
        active_edges = []
        for s, t in graph.edges:
            if graph.node(s).type == "decision" and choice[s] != t:
                continue
            active_edges.append((s, t))
        reachable = {graph.start_id}
        frontier = [graph.start_id]
        active_succ: dict[str, list[str]] = {n.id: [] for n in graph.nodes}
        for s, t in active_edges:
            active_succ[s].append(t)
        while frontier:
            nid = frontier.pop()
            for nxt in active_succ[nid]:
                pred[nxt].append(nid)
                if nxt not in reachable:
                    reachable.add(nxt)
                    frontier.append(nxt)
        # Topological accumulation over the reachable subgraph.
        order = _topo_order(reachable, active_succ)
        acc: dict[str, dict[str, bool]] = {}
        for nid in order:
            node = graph.node(nid)
            incoming = [acc[p] for p in pred[nid] if p in acc]
            merged: dict[str, bool] = {}
            for inc in incoming:
                for atom, polarity in inc.items():
                    if atom in merged and merged[atom] != polarity:
                        raise EffectConflictError(
                            f"conflicting polarities for {atom!r} meeting at node {nid!r}"
                        )
                    merged[atom] = polarity
            acc[nid] = _apply_effects(merged, node.effects)
        return [acc[n.id] for n in graph.nodes if n.type == "end" and n.id in acc]

    out: set[EffectScenario] = set()
    if not decisions:
        for state in scenarios_for({}):
            out.add(frozenset(state.items()))
        return frozenset(out)
    for combo in itertools.product(*choice_lists):
        choice = dict(zip(decisions, combo))
        for state in scenarios_for(choice):
            out.add(frozenset(state.items()))
    return frozenset(out)


def _topo_order(reachable: set[str], succ: Mapping[str, list[str]]) -> list[str]:
    indeg = {nid: 0 for nid in reachable}
    for nid in reachable:
        for nxt in succ[nid]:
            if nxt in reachable:
                indeg[nxt] += 1
    queue = sorted(nid for nid, d in indeg.items() if d == 0)
    order: list[str] = []
    while queue:
        nid = queue.pop(0)
        order.append(nid)
        for nxt in succ[nid]:
            if nxt in reachable:
                indeg[nxt] -= 1
                if indeg[nxt] == 0:
                    queue.append(nxt)
    return order


# ---------------------------------------------------------------------------
# Semantic proximity between scenario sets
# ---------------------------------------------------------------------------


def _scenario_jaccard(a: EffectScenario, b: EffectScenario) -> Fraction:
    union = len(a | b)
    if union == 0:
        return Fraction(1)
    return Fraction(len(a & b), union)


def _directed(from_set: frozenset[EffectScenario], to_set: frozenset[EffectScenario]) -> Fraction:
    if not from_set:
        return Fraction(1) if not to_set else Fraction(0)
    if not to_set:
        return Fraction(0)
    total = Fraction(0)
    for scenario in from_set:
        total += max(_scenario_jaccard(scenario, other) for other in to_set)
    return total / len(from_set)


def semantic_proximity(a: frozenset[EffectScenario], b: frozenset[EffectScenario]) -> Fraction:
    """Symmetric best-match similarity of two effect-scenario sets."""
    if not a and not b:
        return Fraction(1)
    if not a or not b:
        return Fraction(0)
    return (_directed(a, b) + _directed(b, a)) / 2
