"""Budget-optimal GPU rental scheduling toolkit.

Computes fixed-width allocation plans that minimize mean job completion time
under a time-average GPU-hour budget, and simulates them against an
efficiency-target autoscaling baseline on bursty training workloads.
"""

from .errors import FeasibilityError, PlanCoverageError, TraceParseError
from .optimizer import (
    GpuTypeSpec,
    HeterogeneousPlan,
    PlanEvaluation,
    WidthPlan,
    analytic_eval,
    evaluate_heterogeneous,
    kkt_check,
    read_plan,
    solve_boa,
    solve_heterogeneous,
    write_plan,
)
from .simulator import (
    CompareRow,
    EfficiencyTargetPolicy,
    FixedWidthPolicy,
    SimConfig,
    SimMetrics,
    compare,
    compute_metrics,
    simulate,
)
from .speedup import ConcaveHull, SpeedupProfile, build_hull, round_to_hull
from .width_calculator import (
    GlueConfig,
    GluedWorkload,
    boa_width_calculator,
    glue,
    harmonic_speedup,
    recompute_schedule,
)
from .workload import (
    ArrivalModel,
    EpochSpec,
    JobClassSpec,
    Loads,
    Trace,
    TraceEvent,
    WorkloadSpec,
    check_feasibility,
    compute_loads,
    gen_trace,
    read_trace,
    read_workload,
    write_trace,
    write_workload,
)

__version__ = "0.1.0"
