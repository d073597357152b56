"""Two-layer spectrum market: a controller sells channels to primary operators,
which reserve some and auction the rest to secondary operators."""

from .auctions import (
    beta_optimal_allocate,
    beta_optimal_auction,
    beta_optimal_payments,
    co_balanced_allocate,
    co_efficient_allocate,
    efficient_benchmark,
    socially_aware_allocate,
    vcg_payment,
    vcg_payment_regulated,
)
from .contributions import (
    RegularityError,
    beta_contribution,
    check_regularity,
    contribution,
    threshold_bid,
)
from .dynamic import DynamicSchedule, run_dynamic
from .market import (
    Allocation,
    DomainError,
    FeasibilityError,
    MarketInstance,
    MarketReport,
    TypeDistribution,
    ValuationProfile,
    Welfare,
    co_objective,
    welfare_of,
)
from .mechanism import (
    FeedbackChannel,
    MechanismConfig,
    OffsetError,
    run_regulated,
    run_unregulated,
)

__all__ = [name for name in dir() if not name.startswith("_")]
