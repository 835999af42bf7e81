"""Sequential stepdown and stepup multiple testing with generalized error control.

Modules:
    step_values: step values for gamma-FDP and k-FWER control.
    critical_values: critical-value ladders and standardizing functions.
    statistics: sequential test statistics.
    procedures: the staged stepdown / stepup procedures.
    fixed_baseline: fixed-sample comparators and sample-size matching.
    simulation: correlated streams, error accounting and Monte Carlo reports.
"""

__version__ = "0.1.0"

from .critical_values import (
    DEFAULT_RHO,
    CriticalLadder,
    RejectiveLadder,
    StandardizedLadder,
    Standardizer,
    glr_t_calibrate,
    rejective_ladder,
    sprt_ladder,
    standardize,
    wald_boundaries,
)
from .procedures import (
    ArraySource,
    Mode,
    ProcedureConfig,
    ProcedureState,
    run_procedure,
    run_rejective_stepdown,
    run_rejective_stepup,
    run_stepdown,
    run_stepup,
    stage_decide,
)
from .step_values import (
    StepValueLadder,
    d1,
    d2,
    d3,
    stepdown_fdp_values,
    stepdown_kfwe_values,
    stepup_fdp_values,
    stepup_kfwe_values,
)

__all__ = [
    "DEFAULT_RHO",
    "CriticalLadder",
    "RejectiveLadder",
    "StandardizedLadder",
    "Standardizer",
    "glr_t_calibrate",
    "rejective_ladder",
    "sprt_ladder",
    "standardize",
    "wald_boundaries",
    "ArraySource",
    "Mode",
    "ProcedureConfig",
    "ProcedureState",
    "run_procedure",
    "run_rejective_stepdown",
    "run_rejective_stepup",
    "run_stepdown",
    "run_stepup",
    "stage_decide",
    "StepValueLadder",
    "d1",
    "d2",
    "d3",
    "stepdown_fdp_values",
    "stepdown_kfwe_values",
    "stepup_fdp_values",
    "stepup_kfwe_values",
]
