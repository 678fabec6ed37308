"""Capacity of the amplitude-constrained discrete-time Poisson channel with dark current."""

from .bounds import (
    BoundsReport,
    LocationBounds,
    Regime,
    bounds_report,
    interior_location_bounds,
    lambert_w0,
    lambert_wm1,
    lapidoth_exp_capacity_lower,
    regime,
    support_lower_bound,
    support_upper_bound,
)
from .channel import ChannelParams, DomainError, TruncationPolicy, choose_truncation, log_pmf, output_pmf
from .info import (
    DiscreteInput,
    OutputPmf,
    exact_support_identity,
    info_density,
    kl_chain_rule_check,
    mutual_information,
    posterior_mismatch_divergence,
    relative_entropy,
    support_mass_identity,
)
from .posterior import (
    PosteriorTable,
    build_posterior,
    cumulant_ratio,
    g_function,
    derivative_terms,
    moment_ratio_property,
    product_identity_check,
    series_G,
    turing_identity_check,
    zero_count_diagnostic,
)
from .document import InvariantViolation, MalformedDocument, load_solution, write_solution
from .solver import (
    CapacitySolution,
    SolverConfig,
    kkt_scan,
    optimize_locations,
    optimize_probabilities,
    solve,
    two_point_capacity_oracle,
)
from .sweep import SweepRecord, run_sweep, trend_slope
from .verify import VerificationReport, verify, verify_solution

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
