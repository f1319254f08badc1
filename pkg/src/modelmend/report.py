"""Deterministic, machine-readable run reports.

The serialized report is byte-stable: keys are sorted, rationals are rendered
exactly ("7/9", never 0.777...), and volatile measurements (wall time) stay
out of the canonical payload so that equal runs produce equal bytes.
"""

from __future__ import annotations

import json
from fractions import Fraction

from .core import Cost, CostConfig, Model, action_to_dict, model_to_dict
from .proximity import StructuralProximity, structural_proximity
from .search import NoPlanWithinBound, PropagationResult, SearchConfig


def render_cost(value: Cost) -> str:
    if value == float("inf"):
        return "inf"
    return str(Fraction(value))


def costs_to_dict(costs: CostConfig) -> dict:
    return {kind: render_cost(costs.of_kind(kind)) for kind in ("create", "delete", "addlink", "removelink", "setattr")}


def config_to_dict(cfg: SearchConfig) -> dict:
    return {
        "strategy": cfg.strategy,
        "costs": costs_to_dict(cfg.costs),
        "max_depth": cfg.max_depth,
        "k": cfg.k,
        "heuristic": cfg.heuristic,
    }


def proximity_to_dict(prox: StructuralProximity) -> dict:
    return {
        "node_jaccard": str(prox.node_jaccard),
        "attr_jaccard": str(prox.attr_jaccard),
        "link_jaccard": str(prox.link_jaccard),
        "combined": str(prox.combined),
        "inclusion_ab": str(prox.inclusion_ab),
        "inclusion_ba": str(prox.inclusion_ba),
    }


def _protected_to_dict(result: PropagationResult) -> dict:
    p = result.protected
    return {
        "attr_slots": [list(slot) for slot in sorted(p.attr_slots)],
        "created": sorted(p.created),
        "links_added": [list(t) for t in sorted(p.links_added)],
        "links_removed": [list(t) for t in sorted(p.links_removed)],
    }


def propagation_report(
    result: PropagationResult,
    metric: str = "structural",
    semantic_view=None,
) -> dict:
    """Report dict for a finished run. ``semantic_view`` maps a model to an
    effect-scenario set when the semantic metric applies (None = not derivable)."""
    plans = []
    for plan, model in zip(result.plans, result.result_models):
        entry: dict = {
            "actions": [action_to_dict(a) for a in plan.actions],
            "cost": render_cost(plan.total_cost),
            "result_model": model_to_dict(model),
        }
        if metric != "none":
            prox = proximity_to_dict(structural_proximity(result.original_model, model))
            entry["proximity"] = {
                "cost_distance": render_cost(plan.total_cost),
                "structural": prox,
                "semantic": _semantic_value(result.original_model, model, metric, semantic_view),
            }
        plans.append(entry)
    report = {
        "status": "ok",
        "config": config_to_dict(result.config),
        "initial": {
            "consistent": not result.initial_violations and not result.initial_wellformed,
            "violations": [
                {"constraint": v.constraint, "entity": v.entity} for v in result.initial_violations
            ],
            "multiplicity_violations": [
                {
                    "entity": w.entity,
                    "reference": w.reference,
                    "count": w.count,
                    "lower": w.lower,
                    "upper": w.upper,
                }
                for w in result.initial_wellformed
            ],
        },
        "protected": _protected_to_dict(result),
        "plans": plans,
        "stats": {
            "nodes_expanded": result.stats.nodes_expanded,
            "states_deduped": result.stats.states_deduped,
        },
    }
    if result.postulate_report is not None:
        report["postulates"] = result.postulate_report
    return report


def _semantic_value(original: Model, repaired: Model, metric: str, semantic_view) -> str | None:
    if metric != "semantic" or semantic_view is None:
        return None
    from .proximity import semantic_proximity

    a = semantic_view(original)
    b = semantic_view(repaired)
    if a is None or b is None:
        return None
    return str(semantic_proximity(a, b))


def no_plan_report(error: NoPlanWithinBound, cfg: SearchConfig) -> dict:
    return {
        "status": "no_plan",
        "error": str(error),
        "config": config_to_dict(cfg),
        "initial": {
            "consistent": False,
            "violations": [{"constraint": v.constraint, "entity": v.entity} for v in error.violations],
            "multiplicity_violations": [
                {
                    "entity": w.entity,
                    "reference": w.reference,
                    "count": w.count,
                    "lower": w.lower,
                    "upper": w.upper,
                }
                for w in error.wellformed
            ],
        },
        "plans": [],
        "stats": {
            "nodes_expanded": error.stats.nodes_expanded,
            "states_deduped": error.stats.states_deduped,
        },
    }


def canonical_json(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, indent=2, ensure_ascii=False) + "\n"
