"""Variance-based sensitivity indices with the current (Saltelli / Sobol-Jansen)
and the symmetric IA pick-freeze estimators."""

from .core import (
    CURRENT,
    FIRST,
    IA,
    TOTAL,
    ConfigError,
    DegenerateSampleError,
    ExperimentConfig,
    FactorGroup,
    FactorSpace,
    FunctionModel,
    InsufficientSampleError,
    InvalidGroupError,
    ModelEvaluator,
    PickFreezeBlock,
    SensikitError,
    SobolEstimate,
    call_budget,
    complement,
    singletons,
)
from .estimators import (
    asymptotic_variance,
    estimate_block,
    ia_gap,
    s_first_ia,
    s_first_saltelli,
    st_total_ia,
    st_total_jansen,
    variance_normalizer,
)
from .harness import (
    ReplicateTable,
    VarianceComparison,
    empirical_stats,
    run_replicates,
    shift_experiment,
    variance_comparison,
)
from .sampling import Design, SeedStream, build_design, evaluate_design, lhs_matrix, mix_columns, uniform_matrix
from .testfuncs import AdditivePolynomial, GFunction, Ishigami, make_model

__version__ = "0.1.0"
