"""Dynamic module selection for software testing.

Chooses which module to test in each period so as to maximize the worst-case
expected utility of delivered reliability at release.
"""
__version__ = "0.1.0"

from .core import (
    BinomialKernel,
    CapacityError,
    DefectState,
    DomainError,
    ModelSpec,
    ModselError,
    OperationalProfile,
    UnsupportedError,
    UtilitySpec,
    ValidationError,
    binomial_kernel,
    reliability,
    utility_eval,
    validate_model,
)
from .uncertainty import (
    InfeasibleError,
    UncertaintySet,
    UnsupportedGeometryError,
    WorstCaseResult,
    contains,
    interval_m2,
    interval_m2_reduce,
    worst_case,
)
from .dp import (
    PolicyTable,
    SolveReport,
    ValueTable,
    bellman_step,
    closed_form_Tminus1_choice,
    evaluate_policy,
    gap,
    reliability_moments,
    solve,
    solve_min_defects,
)
from .simulate import SimulationConfig, SimulationStats, export_histogram, simulate_many, simulate_once
