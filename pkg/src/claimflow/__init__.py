"""claimflow: simulation and pricing of non-life insurance liability cash flows.

The package simulates claim portfolios as marked point processes (stochastic
accident intensity, mixed reporting delays, compound Poisson development),
prices the remaining payments with an explicit two-component reserve formula,
and validates every closed form against an independent Monte Carlo oracle.
"""

from .errors import (
    ClaimflowError,
    ConfigurationError,
    DegenerateStateError,
    GridRangeError,
    InsufficientDataError,
    SchemaError,
    UnsupportedRegimeError,
)
from .grids import DEFAULT_STEP, TimeGrid
from .intensity import (
    ConstantIntensity,
    IntensityModel,
    IntensityPath,
    LogOUIntensity,
    PiecewiseConstantIntensity,
    is_deterministic,
    simulate_intensity_path,
)
from .claims import (
    ClaimRecord,
    DelayLaw,
    DevelopmentLaw,
    ExponentialDelay,
    FirstMarkLaw,
    GammaDelay,
    MarkLaw,
    PortfolioState,
    VisibleClaim,
    invert_hazard,
    observed_state,
    sample_accident_time,
    sample_delay,
    sample_development,
    simulate_portfolio,
)
from .market import (
    DeterministicDeflator,
    MarketModel,
    MarketPath,
    MartingaleDeflator,
    benchmarked_cashflow,
    simulate_market,
)
from .pricing import (
    ReportingCurve,
    ReserveResult,
    expected_development,
    ibnr_probability,
    reporting_cdf,
    reporting_curve,
    reporting_density,
    reserve,
)
from .mc import (
    BLOCK_SIZE,
    ComparisonReport,
    McConfig,
    McEstimate,
    compare,
    mc_conditional_reserve,
    mc_reserve,
)

__all__ = [
    "BLOCK_SIZE",
    "ClaimRecord",
    "ClaimflowError",
    "ComparisonReport",
    "ConfigurationError",
    "ConstantIntensity",
    "DEFAULT_STEP",
    "DegenerateStateError",
    "DelayLaw",
    "DeterministicDeflator",
    "DevelopmentLaw",
    "ExponentialDelay",
    "FirstMarkLaw",
    "GammaDelay",
    "GridRangeError",
    "InsufficientDataError",
    "IntensityModel",
    "IntensityPath",
    "LogOUIntensity",
    "MarkLaw",
    "MarketModel",
    "MarketPath",
    "MartingaleDeflator",
    "McConfig",
    "McEstimate",
    "PiecewiseConstantIntensity",
    "PortfolioState",
    "ReportingCurve",
    "ReserveResult",
    "SchemaError",
    "TimeGrid",
    "UnsupportedRegimeError",
    "VisibleClaim",
    "benchmarked_cashflow",
    "compare",
    "expected_development",
    "ibnr_probability",
    "invert_hazard",
    "is_deterministic",
    "mc_conditional_reserve",
    "mc_reserve",
    "observed_state",
    "reporting_cdf",
    "reporting_curve",
    "reporting_density",
    "reserve",
    "sample_accident_time",
    "sample_delay",
    "sample_development",
    "simulate_intensity_path",
    "simulate_market",
    "simulate_portfolio",
]

__version__ = "0.1.0"
