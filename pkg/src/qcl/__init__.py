"""Exact simulation and analysis of quantized consensus on directed graphs.

Agents with scalar continuous-time dynamics exchange quantized state values
over a (possibly time-varying) weighted directed graph.  The discontinuous
right-hand side is integrated exactly as an event-driven hybrid system with
sliding-mode resolution on the quantizer thresholds, and the analysis layer
measures convergence times, checks conservation laws, and evaluates
worst-case bounds.
"""

from .analysis import (
    ConvergenceReport,
    EnvelopeAudit,
    LimitCheck,
    UnsupportedQuantizerError,
    audit_trajectory,
    average_conservation,
    consensus_level,
    consensus_level_set,
    convergence_report,
    convergence_time,
    envelopes,
    kq_envelope,
    limit_value_check,
    tcon_bound,
)
from .dynamics import (
    ContractViolation,
    FixedAlpha,
    NetworkState,
    NoSlidingSelection,
    RegularizationUnstable,
    RegularizedRun,
    Resolution,
    SelectionPolicy,
    SequentialSlow,
    SimulationLimitError,
    Sliding,
    SurfaceMode,
    Trajectory,
    TrajectoryEvent,
    next_event,
    policy_from_json,
    resolve_sliding,
    selection_velocity,
    simulate,
    simulate_regularized,
)
from .graphs import (
    Condensation,
    GraphSchedule,
    WeightedDigraph,
    has_globally_reachable_node,
    is_weight_balanced,
    laplacian,
    schedule_from_json,
    strongly_connected_components,
    unbounded_interactions_graph,
)
from .quantizers import (
    GeneralQuantizer,
    InputError,
    Quantizer,
    UniformQuantizer,
    quantizer_from_json,
)
from .scenarios import (
    ExpectedOutcome,
    ScenarioConfig,
    SplitMix64,
    example1_line,
    example2_sliding,
    line_graph,
    random_connected,
    scenario_from_json,
)

__version__ = "0.1.0"

__all__ = [
    "Condensation",
    "ContractViolation",
    "ConvergenceReport",
    "EnvelopeAudit",
    "ExpectedOutcome",
    "FixedAlpha",
    "GeneralQuantizer",
    "GraphSchedule",
    "InputError",
    "LimitCheck",
    "NetworkState",
    "NoSlidingSelection",
    "Quantizer",
    "RegularizationUnstable",
    "RegularizedRun",
    "Resolution",
    "ScenarioConfig",
    "SelectionPolicy",
    "SequentialSlow",
    "SimulationLimitError",
    "Sliding",
    "SplitMix64",
    "SurfaceMode",
    "Trajectory",
    "TrajectoryEvent",
    "UniformQuantizer",
    "UnsupportedQuantizerError",
    "WeightedDigraph",
    "audit_trajectory",
    "average_conservation",
    "consensus_level",
    "consensus_level_set",
    "convergence_report",
    "convergence_time",
    "envelopes",
    "example1_line",
    "example2_sliding",
    "has_globally_reachable_node",
    "is_weight_balanced",
    "kq_envelope",
    "laplacian",
    "line_graph",
    "next_event",
    "policy_from_json",
    "quantizer_from_json",
    "random_connected",
    "resolve_sliding",
    "scenario_from_json",
    "schedule_from_json",
    "selection_velocity",
    "simulate",
    "simulate_regularized",
    "strongly_connected_components",
    "tcon_bound",
    "unbounded_interactions_graph",
]
