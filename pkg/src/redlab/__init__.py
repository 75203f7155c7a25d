"""redlab: simulation and analysis of redundancy-d multi-server queues.

A job arriving to a system of K servers is dispatched to a uniformly drawn
set of d of them, either as d independent copies or as d identical copies,
and leaves as soon as one copy finishes (cancel-on-complete). The package
simulates these systems under FCFS, processor sharing, and random order of
service, computes saturated-system throughput and the matching stability
thresholds, integrates fluid models, and evaluates light-traffic expansions.
"""

from .config_io import (
    config_hash,
    csv_text,
    emit_config,
    format_number,
    parse_config,
    parse_config_text,
    write_csv,
)
from .engine import (
    BoundingMode,
    EventRecord,
    Job,
    RunMetrics,
    SimState,
    StopRule,
    advance_to_next_event,
    inject_workload,
    replicated_time_average,
    seed_initial_jobs,
    simulate,
)
from .errors import (
    BudgetExhausted,
    DegenerateState,
    DimensionError,
    DomainError,
    NoBracket,
    NotClosedForm,
    ParseError,
    RedlabError,
    SingularSystem,
    StepTooLarge,
    TooFewCycles,
    TruncationNotConverged,
    ValidationError,
)
from .fluid import (
    FluidState,
    FluidTrajectory,
    drift_iid_server,
    drift_lb_server,
    drift_ros_server,
    integrate_fluid,
)
from .lab import (
    UNKNOWN,
    BoundaryEstimate,
    SweepPoint,
    estimate_boundary,
    sweep,
    theoretical_threshold,
)
from .lighttraffic import (
    LtResult,
    lt_first_derivative_oracle,
    lt_mean_jobs,
    lt_result,
    optimal_redundancy,
    redundancy_ties,
)
from .manifest import (
    Anchor,
    Experiment,
    ExperimentManifest,
    ManifestReport,
    load_manifest,
    manifest_from_dict,
    manifest_hash,
    run_experiment,
    run_manifest,
)
from .model import (
    CopyMode,
    Deterministic,
    DegenerateHyperExp,
    Exponential,
    RngSpec,
    ServiceDist,
    SystemConfig,
    TypeTable,
    build_type_table,
    effective_load,
)
from .policies import PolicyId, priority_drift, priority_drift_root, service_rates
from .saturated import (
    EllBarResult,
    SaturatedState,
    ell_bar_closed_form,
    ell_bar_exact,
    ell_bar_mc,
    saturated_scan,
    stability_threshold_fcfs,
)
from .stats import (
    Cycle,
    CycleAccumulator,
    batch_mean_ci,
    divergence_slope,
    drop_warmup_cycles,
    regenerative_mean,
)

__version__ = "0.1.0"

__all__ = [
    "Anchor",
    "BoundaryEstimate",
    "BoundingMode",
    "BudgetExhausted",
    "CopyMode",
    "Cycle",
    "CycleAccumulator",
    "DegenerateHyperExp",
    "DegenerateState",
    "Deterministic",
    "DimensionError",
    "DomainError",
    "EllBarResult",
    "EventRecord",
    "Experiment",
    "ExperimentManifest",
    "Exponential",
    "FluidState",
    "FluidTrajectory",
    "Job",
    "LtResult",
    "ManifestReport",
    "NoBracket",
    "NotClosedForm",
    "ParseError",
    "PolicyId",
    "RedlabError",
    "RngSpec",
    "RunMetrics",
    "SaturatedState",
    "ServiceDist",
    "SimState",
    "SingularSystem",
    "StepTooLarge",
    "StopRule",
    "SweepPoint",
    "SystemConfig",
    "TooFewCycles",
    "UNKNOWN",
    "TruncationNotConverged",
    "TypeTable",
    "ValidationError",
    "advance_to_next_event",
    "batch_mean_ci",
    "build_type_table",
    "config_hash",
    "csv_text",
    "divergence_slope",
    "emit_config",
    "estimate_boundary",
    "drift_iid_server",
    "drift_lb_server",
    "drift_ros_server",
    "drop_warmup_cycles",
    "effective_load",
    "ell_bar_closed_form",
    "ell_bar_exact",
    "ell_bar_mc",
    "format_number",
    "inject_workload",
    "integrate_fluid",
    "load_manifest",
    "lt_first_derivative_oracle",
    "lt_mean_jobs",
    "lt_result",
    "manifest_from_dict",
    "manifest_hash",
    "optimal_redundancy",
    "parse_config",
    "parse_config_text",
    "priority_drift",
    "priority_drift_root",
    "redundancy_ties",
    "regenerative_mean",
    "replicated_time_average",
    "run_experiment",
    "run_manifest",
    "seed_initial_jobs",
    "saturated_scan",
    "service_rates",
    "simulate",
    "stability_threshold_fcfs",
    "sweep",
    "theoretical_threshold",
    "write_csv",
]
