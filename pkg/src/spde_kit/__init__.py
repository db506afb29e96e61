"""spde-kit: spectral Galerkin time stepping for semilinear parabolic SPDEs
with trace-class commutative noise, plus an information-cost model and a
coupled strong-convergence laboratory."""

from .spectral import (
    OperatorSpectrum,
    RegularityParams,
    SpectralError,
    SpectralVector,
    apply_fractional_power,
    apply_resolvent,
    apply_semigroup,
    hoelder_envelope,
    project,
    smoothing_envelope,
    sobolev_norm,
)
from .noise import (
    NoiseError,
    NoiseIncrement,
    QSpectrum,
    RngStream,
    aggregate_increments,
    sample_increment,
    second_order_weights,
    truncate_noise,
)
from .problems import (
    NemytskijDiffusion,
    ProblemError,
    ProblemSpec,
    RankOneDiffusion,
    apply_B,
    apply_BprimeB,
    apply_F,
    build_problem,
    check_commutativity,
    problem_ids,
)
from .schemes import (
    BlowUpError,
    SchemeError,
    StepRecord,
    simulate_batch,
    simulate_path,
    step_dfm,
    step_dfmm,
    step_ees,
    step_lie,
    step_mil,
)
from .costs import (
    CostLedger,
    CostModelError,
    SchemeId,
    effective_order,
    optimal_allocation,
    per_step_cost,
    total_cost,
)
from .convergence import (
    ConvergenceError,
    ErrorTable,
    ExperimentConfig,
    emit_csv,
    fit_order,
    load_csv,
    strong_error,
    theoretical_bound,
)
from .config import ConfigError, RunConfig, load_config

__version__ = "0.1.0"

__all__ = [
    "OperatorSpectrum", "RegularityParams", "SpectralError", "SpectralVector",
    "apply_fractional_power", "apply_resolvent", "apply_semigroup",
    "hoelder_envelope", "project", "smoothing_envelope", "sobolev_norm",
    "NoiseError", "NoiseIncrement", "QSpectrum", "RngStream",
    "aggregate_increments", "sample_increment", "second_order_weights",
    "truncate_noise",
    "NemytskijDiffusion", "ProblemError", "ProblemSpec", "RankOneDiffusion",
    "apply_B", "apply_BprimeB", "apply_F", "build_problem",
    "check_commutativity", "problem_ids",
    "BlowUpError", "SchemeError", "StepRecord", "simulate_batch",
    "simulate_path", "step_dfm", "step_dfmm", "step_ees", "step_lie",
    "step_mil",
    "CostLedger", "CostModelError", "SchemeId", "effective_order",
    "optimal_allocation", "per_step_cost", "total_cost",
    "ConvergenceError", "ErrorTable", "ExperimentConfig", "emit_csv",
    "fit_order", "load_csv", "strong_error", "theoretical_bound",
    "ConfigError", "RunConfig", "load_config",
    "__version__",
]
