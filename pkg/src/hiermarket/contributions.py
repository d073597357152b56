"""Bidder contributions (virtual valuations), regularity checks and threshold bids."""

from __future__ import annotations

import math
from functools import lru_cache
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .market import DomainError, TypeDistribution, ValuationProfile

BISECT_TOL = 1e-9
BISECT_MAX_ITER = 200
REGULARITY_TOL = 1e-12

# Returned by threshold_bid when no type in the support reaches the cutoff.
UNATTAINABLE = math.inf


class RegularityError(ValueError):
    pass


class SingularityError(ZeroDivisionError):
    pass


@dataclass(frozen=True)
class ContributionEntry:
    """One candidate channel in a score vector.

    ``owner`` is ``"po"`` (the seller keeps the channel) or ``"so"``.
    """

    owner: str
    po: int
    so: Optional[int]
    k: int
    score: float
    raw_valuation: float


def contribution_raw(profile, dist, k, bid, beta=0.0) -> float:
    if profile.family == "reciprocal" and dist.kind == "uniform" and 0.0 < bid <= dist.upper:
        return profile.scale * ((1.0 + beta) * bid - (dist.upper - bid)) / k
    f = dist.pdf(bid)
    if f <= 0:
        raise SingularityError(f"density is zero at bid {bid!r}")
    return (1.0 + beta) * profile.value(bid, k) - profile.derivative(bid, k) * (
        1.0 - dist.cdf(bid)
    ) / f


def _check_bid(profile, dist, bid, k):
    if not dist.in_support(bid) or not profile.in_support(bid):
        raise DomainError(f"bid {bid!r} outside (0, {dist.upper}]")
    if int(k) != k or k < 1:
        raise ValueError(f"channel index must be a positive integer, got {k!r}")


def contribution(so_profile: ValuationProfile, so_dist: TypeDistribution, k: int, bid: float) -> float:
    """Expected marginal revenue of selling channel ``k`` to a bidder of type ``bid``."""
    _check_bid(so_profile, so_dist, bid, k)
    return contribution_raw(so_profile, so_dist, int(k), bid, 0.0)


def beta_contribution(so_profile, so_dist, k: int, bid: float, beta: float) -> float:
    """Contribution plus ``beta`` times the bidder's own marginal valuation."""
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    _check_bid(so_profile, so_dist, bid, k)
    return contribution_raw(so_profile, so_dist, int(k), bid, beta)


def score_row(profile, dist, bid, beta, n) -> list:
    """beta-contributions for channels 1..n."""
    if profile.family == "reciprocal" and dist.kind == "uniform" and 0.0 < bid <= dist.upper:
        base = profile.scale * ((1.0 + beta) * bid - (dist.upper - bid))
        return [base / k for k in range(1, n + 1)]
    return [contribution_raw(profile, dist, k, bid, beta) for k in range(1, n + 1)]


def value_row(profile, t, n) -> list:
    if profile.family == "reciprocal":
        base = profile.scale * t
        return [base / k for k in range(1, n + 1)]
    return [profile.value(t, k) for k in range(1, n + 1)]


@dataclass
class RegularityReport:
    ok: bool
    violation: Optional[str] = None
    type_: Optional[float] = None
    k: Optional[int] = None

    def __bool__(self):
        return self.ok


def check_regularity(so_profile, so_dist, beta: float, grid_resolution: int = 200, k_max: int = 12):
    """Grid check that beta-contributions rise with type and fall with ``k`` where positive."""
    if grid_resolution < 2:
        raise ValueError("grid_resolution must be at least 2")
    if so_profile.family == "custom-table":
        # rows past the table are identically zero
        k_max = min(k_max, len(so_profile.table))
    upper = min(so_dist.upper, so_profile.type_max)
    xs = np.linspace(upper / grid_resolution, upper, grid_resolution)
    scores = np.array(
        [[contribution_raw(so_profile, so_dist, k, x, beta) for x in xs] for k in range(1, k_max + 1)]
    )
    for k in range(k_max):
        bad = np.nonzero(np.diff(scores[k]) <= 0)[0]
        if bad.size:
            x = float(xs[bad[0] + 1])
            return RegularityReport(False, "not strictly increasing in type", x, k + 1)
    for k in range(1, k_max):
        bad = np.nonzero((scores[k] > REGULARITY_TOL) & (scores[k] > scores[k - 1] + REGULARITY_TOL))[0]
        if bad.size:
            return RegularityReport(False, "increasing in channel index", float(xs[bad[0]]), k + 1)
    return RegularityReport(True)


@lru_cache(maxsize=256)
def _cached_regularity(so_profile, so_dist, beta):
    return check_regularity(so_profile, so_dist, beta)


def require_regular(so_profile, so_dist, beta: float) -> None:
    report = _cached_regularity(so_profile, so_dist, float(beta))
    if not report.ok:
        raise RegularityError(f"{report.violation} at type={report.type_:.6g}, k={report.k}")


def threshold_bid(
    so_profile, so_dist, k: int, beta: float, cutoff: float, tol: float = BISECT_TOL, check: bool = True
) -> float:
    """Smallest type whose beta-contribution for channel ``k`` reaches ``cutoff``.

    Returns the support infimum (0) when every type qualifies and
    ``UNATTAINABLE`` when even the top type falls short.
    """
    if check:
        require_regular(so_profile, so_dist, beta)
    upper = min(so_dist.upper, so_profile.type_max)

    def score(x):
        return contribution_raw(so_profile, so_dist, k, x, beta)

    if score(upper) < cutoff:
        return UNATTAINABLE
    lo, hi = 0.0, upper
    # The score at 0 itself may be singular; its right limit decides the infimum case.
    if score(math.ulp(0.0)) >= cutoff:
        return lo
    for _ in range(BISECT_MAX_ITER):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        s = score(mid)
        if s >= cutoff:
            hi = mid
        else:
            lo = mid
    else:
        raise RegularityError("bisection did not converge; is the problem regular?")
    return hi
