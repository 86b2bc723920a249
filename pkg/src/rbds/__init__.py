"""Serial-independence testing from correlation integrals.

Public API: time-series containers and proximity structures (:mod:`.core`),
proximity-pattern estimators (:mod:`.patterns`), the correlation integral and
its near/far split (:mod:`.correlation`), the asymptotic z-test
(:mod:`.bds`), the finite-sample centered and scaled test (:mod:`.rbds`),
simulation models (:mod:`.dgp`), the Monte Carlo harness (:mod:`.harness`),
and the command line front end (:mod:`.cli`).
"""

from .errors import (
    RbdsError,
    NonFiniteInput,
    NonPositiveEpsilon,
    SeriesTooShort,
    ConstantSeries,
    DegenerateScale,
    NonPositiveVariance,
    ExponentNegative,
    OracleTooLarge,
    PatternTooLarge,
    NonStationaryParams,
    ZeroResidual,
    InvalidPatternParams,
)
from .core import (
    TimeSeries,
    TestConfig,
    CombinatoricFactors,
    ProximityStructure,
    combinatoric_factors,
    build_proximity,
    epsilon_from_fraction,
    shift_packed_rows,
    normal_cdf,
    normal_two_sided_p,
    step_negative,
    ratio_product,
)
from .patterns import (
    PatternGraph,
    PatternKey,
    EstimatorSet,
    build_pattern,
    chain,
    omega,
    eta,
    xi,
    canonical_form,
    estimate_pattern_v,
    enumerate_pattern_exact,
    estimate_pattern_u_exact,
    omega12_hat,
    estimator_closure,
    forest_from_edges,
)

__version__ = "0.1.0"

__all__ = [
    "RbdsError",
    "NonFiniteInput",
    "NonPositiveEpsilon",
    "SeriesTooShort",
    "ConstantSeries",
    "DegenerateScale",
    "NonPositiveVariance",
    "ExponentNegative",
    "OracleTooLarge",
    "PatternTooLarge",
    "NonStationaryParams",
    "ZeroResidual",
    "InvalidPatternParams",
    "TimeSeries",
    "TestConfig",
    "CombinatoricFactors",
    "ProximityStructure",
    "combinatoric_factors",
    "build_proximity",
    "epsilon_from_fraction",
    "shift_packed_rows",
    "normal_cdf",
    "normal_two_sided_p",
    "step_negative",
    "ratio_product",
    "PatternGraph",
    "PatternKey",
    "EstimatorSet",
    "build_pattern",
    "chain",
    "omega",
    "eta",
    "xi",
    "canonical_form",
    "estimate_pattern_v",
    "enumerate_pattern_exact",
    "estimate_pattern_u_exact",
    "omega12_hat",
    "estimator_closure",
    "forest_from_edges",
    "__version__",
]
