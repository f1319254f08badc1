"""modelmend: minimal-cost change propagation for typed-graph models.

Given a model, its metamodel, consistency constraints, and a primary change,
the engine searches for the cheapest secondary changes that restore a
well-formed, consistent model -- without ever undoing the primary change.
"""

from .checker import EvalResult, Violation, evaluate_constraint, violations_of
from .core import (
    ActionError,
    AddLink,
    ChangeAction,
    ClassDef,
    ConformanceError,
    CostConfig,
    Create,
    Delete,
    Entity,
    FactSet,
    Metamodel,
    MetamodelError,
    Model,
    ModelDiff,
    ModelError,
    MultiplicityViolation,
    Plan,
    RefDef,
    RemoveLink,
    SetAttr,
    apply_action,
    apply_script,
    canonical_key,
    check_wellformed,
    metamodel_from_dict,
    metamodel_to_dict,
    model_diff,
    model_from_dict,
    model_to_dict,
    parse_costs,
    script_from_list,
)
from .dsl import Constraint, ParseError, ResolutionError, parse_constraint_file, pretty_expr
from .harness import (
    GenParams,
    PostulateCheck,
    RandomInstance,
    check_postulates,
    equivalent_primary_scripts,
    exhaustive_oracle,
    random_instance,
    recheck_consistent,
)
from .proximity import (
    EffectConflictError,
    GraphError,
    ProcessGraph,
    ProcessNode,
    cost_distance,
    effect_scenarios,
    process_graph_from_dict,
    semantic_proximity,
    structural_proximity,
)
from .repair import (
    ProtectedSlots,
    RepairCandidate,
    generate_repairs,
    is_reverting,
    multiplicity_repairs,
    protected_slots_of,
)
from .run import RunConfig, RunOutcome, execute_run, process_view
from .search import (
    NoPlanWithinBound,
    PropagationResult,
    SearchConfig,
    SearchState,
    heuristic_estimate,
    propagate,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
