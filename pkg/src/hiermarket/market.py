"""Domain types for a three-layer spectrum market and the objective evaluators.

A controller (CO) sells ``K`` identical channels to ``M`` primary operators
(POs); each PO reserves some channels and auctions the rest to the ``N``
secondary operators (SOs) of its own market. Every operator is described by a
scalar type that parameterises a family of decreasing marginal valuations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

# Scores closer than this are treated as ties when ranking.
TIE_DECIMALS = 12

FD_STEP = 1e-6


class DomainError(ValueError):
    """A type lies outside the support of its valuation family or distribution."""


class FeasibilityError(ValueError):
    """An allocation violates channel-count constraints."""


def score_key(score: float) -> float:
    return round(score, TIE_DECIMALS)


@dataclass(frozen=True)
class ValuationProfile:
    """Marginal valuation family ``value(type, k)`` over types in ``(0, type_max]``.

    ``reciprocal`` is ``scale * type / k``. ``custom-table`` linearly
    interpolates ``table[k-1]`` over ``grid`` and is zero for ``k`` beyond
    the table.
    """

    family: str = "reciprocal"
    scale: float = 1.0
    type_max: float = math.inf
    grid: Optional[tuple] = None
    table: Optional[tuple] = None

    def __post_init__(self):
        if self.family not in ("reciprocal", "custom-table"):
            raise ValueError(f"unknown valuation family {self.family!r}")
        if self.family == "custom-table":
            if self.grid is None or self.table is None:
                raise ValueError("custom-table profile needs grid and table")
            grid = np.asarray(self.grid, dtype=float)
            table = np.atleast_2d(np.asarray(self.table, dtype=float))
            if table.shape[1] != grid.size or grid.size < 2:
                raise ValueError("table rows must match the grid length")
            if np.any(np.diff(grid) <= 0):
                raise ValueError("grid must be strictly increasing")
            object.__setattr__(self, "grid", tuple(grid.tolist()))
            object.__setattr__(self, "table", tuple(tuple(r) for r in table.tolist()))
            if math.isinf(self.type_max):
                object.__setattr__(self, "type_max", float(grid[-1]))
        elif self.scale <= 0:
            raise ValueError("scale must be positive")

    @classmethod
    def reciprocal(cls, scale: float = 1.0, type_max: float = math.inf) -> "ValuationProfile":
        return cls("reciprocal", float(scale), float(type_max))

    @classmethod
    def custom_table(cls, grid, table) -> "ValuationProfile":
        return cls("custom-table", 1.0, math.inf, tuple(grid), tuple(map(tuple, table)))

    def in_support(self, t: float) -> bool:
        return 0.0 < t <= self.type_max

    def check_type(self, t: float) -> None:
        if not self.in_support(t):
            raise DomainError(f"type {t!r} outside support (0, {self.type_max}]")

    def value(self, t: float, k: int) -> float:
        """Unchecked evaluation; callers validate the type."""
        if self.family == "reciprocal":
            return self.scale * t / k
        if k > len(self.table):
            return 0.0
        return float(np.interp(t, self.grid, self.table[k - 1]))

    def derivative(self, t: float, k: int) -> float:
        """d value / d type, analytic for reciprocal, central difference otherwise."""
        if self.family == "reciprocal":
            return self.scale / k
        return (self.value(t + FD_STEP, k) - self.value(t - FD_STEP, k)) / (2 * FD_STEP)

    def cumulative(self, t: float, n: int) -> float:
        """Sum of the first ``n`` marginal values."""
        return math.fsum(self.value(t, k) for k in range(1, n + 1))


@dataclass(frozen=True)
class TypeDistribution:
    """Distribution of SO types on ``(0, upper]``.

    ``uniform`` has ``F(x) = x / upper``. ``custom`` takes ``cdf`` and ``pdf``
    callables; sampling then inverts the cdf numerically.
    """

    kind: str = "uniform"
    upper: float = 1.0
    cdf_fn: Optional[Callable[[float], float]] = None
    pdf_fn: Optional[Callable[[float], float]] = None

    def __post_init__(self):
        if self.kind not in ("uniform", "custom"):
            raise ValueError(f"unknown distribution kind {self.kind!r}")
        if not self.upper > 0:
            raise ValueError("upper support bound must be positive")
        if self.kind == "custom" and (self.cdf_fn is None or self.pdf_fn is None):
            raise ValueError("custom distribution needs cdf_fn and pdf_fn")

    @classmethod
    def uniform(cls, upper: float) -> "TypeDistribution":
        return cls("uniform", float(upper))

    def in_support(self, x: float) -> bool:
        return 0.0 < x <= self.upper

    def cdf(self, x: float) -> float:
        if x <= 0:
            return 0.0
        if x >= self.upper:
            return 1.0
        if self.kind == "uniform":
            return x / self.upper
        return float(self.cdf_fn(x))

    def pdf(self, x: float) -> float:
        if x <= 0 or x > self.upper:
            return 0.0
        if self.kind == "uniform":
            return 1.0 / self.upper
        return float(self.pdf_fn(x))

    def hazard_inverse(self, x: float) -> float:
        """(1 - F(x)) / f(x), the inverse hazard rate."""
        f = self.pdf(x)
        if f <= 0:
            raise ZeroDivisionError(f"density vanishes at {x!r}")
        return (1.0 - self.cdf(x)) / f

    def ppf(self, q):
        q = np.asarray(q, dtype=float)
        if self.kind == "uniform":
            return q * self.upper
        out = np.empty_like(q)
        for idx, target in np.ndenumerate(q):
            lo, hi = 0.0, self.upper
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                if self.cdf(mid) < target:
                    lo = mid
                else:
                    hi = mid
                if hi - lo < 1e-12:
                    break
            out[idx] = hi
        return out

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        # 1 - U lies in (0, 1], so draws stay inside the open-at-zero support.
        u = 1.0 - rng.random(size)
        return self.ppf(u)

    def mean(self) -> float:
        if self.kind == "uniform":
            return self.upper / 2.0
        xs = np.linspace(0.0, self.upper, 4001)
        tail = np.array([1.0 - self.cdf(x) for x in xs])
        return float(np.trapezoid(tail, xs))

    def median(self) -> float:
        return float(self.ppf(0.5))


@dataclass(frozen=True)
class MarketInstance:
    K: int
    po_types: tuple
    so_types: tuple
    po_profile: ValuationProfile
    so_profile: ValuationProfile
    so_dist: TypeDistribution
    beta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "po_types", tuple(float(p) for p in self.po_types))
        object.__setattr__(
            self, "so_types", tuple(tuple(float(a) for a in row) for row in self.so_types)
        )
        check_instance(self)

    @property
    def M(self) -> int:
        return len(self.po_types)

    @property
    def N(self) -> int:
        return len(self.so_types[0]) if self.so_types else 0

    def replace(self, **changes) -> "MarketInstance":
        fields = dict(
            K=self.K, po_types=self.po_types, so_types=self.so_types,
            po_profile=self.po_profile, so_profile=self.so_profile,
            so_dist=self.so_dist, beta=self.beta,
        )
        fields.update(changes)
        return MarketInstance(**fields)


def check_instance(inst: MarketInstance) -> MarketInstance:
    """Validate a market instance, raising on the first violation."""
    if int(inst.K) != inst.K or inst.K < 1:
        raise ValueError(f"K must be a positive integer, got {inst.K!r}")
    if inst.beta < 0 or not math.isfinite(inst.beta):
        raise ValueError(f"beta must be finite and nonnegative, got {inst.beta!r}")
    if len(inst.so_types) != len(inst.po_types):
        raise ValueError("need one SO type list per PO")
    if len({len(row) for row in inst.so_types}) > 1:
        raise ValueError("every PO must have the same number of SOs")
    for p in inst.po_types:
        inst.po_profile.check_type(p)
    for row in inst.so_types:
        for a in row:
            if not inst.so_dist.in_support(a):
                raise DomainError(f"SO type {a!r} outside (0, {inst.so_dist.upper}]")
            inst.so_profile.check_type(a)
    return inst


@dataclass(frozen=True)
class Allocation:
    k_cj: tuple
    k_j0: tuple
    k_ji: tuple

    def __post_init__(self):
        object.__setattr__(self, "k_cj", tuple(int(x) for x in self.k_cj))
        object.__setattr__(self, "k_j0", tuple(int(x) for x in self.k_j0))
        object.__setattr__(self, "k_ji", tuple(tuple(int(x) for x in r) for r in self.k_ji))

    def validate(self, K: Optional[int] = None) -> "Allocation":
        counts = list(self.k_cj) + list(self.k_j0) + [x for r in self.k_ji for x in r]
        if any(c < 0 for c in counts):
            raise FeasibilityError("negative channel count")
        for j, (kc, k0, row) in enumerate(zip(self.k_cj, self.k_j0, self.k_ji)):
            if k0 + sum(row) != kc:
                raise FeasibilityError(f"PO {j}: reserved + sold != acquired")
        if K is not None and sum(self.k_cj) > K:
            raise FeasibilityError(f"{sum(self.k_cj)} channels allocated, only {K} exist")
        return self

    @property
    def po_channels(self) -> int:
        return sum(self.k_j0)

    @property
    def so_channels(self) -> int:
        return sum(sum(r) for r in self.k_ji)

    @property
    def totals(self) -> list:
        return [self.po_channels, self.so_channels]


@dataclass(frozen=True)
class Welfare:
    """Per-PO welfare components; ``contribution`` is the expected-revenue surrogate."""

    po_valuation: tuple
    so_valuation: tuple
    revenue: tuple
    contribution: tuple
    beta: float

    @property
    def c_beta(self) -> float:
        return math.fsum(self.po_valuation) + math.fsum(self.contribution) + self.beta * math.fsum(
            self.so_valuation
        )

    @property
    def aggregate_valuation(self) -> float:
        return math.fsum(self.po_valuation) + math.fsum(self.so_valuation)


@dataclass
class MarketReport:
    scenario: str
    allocation: Allocation
    po_bids: tuple
    payments_stage1: tuple
    payments_stage2: tuple
    reimbursements: tuple
    net_payments: Optional[tuple]
    welfare: Welfare
    outcomes: tuple = ()
    offset_y: float = 0.0

    @property
    def revenue_total(self) -> float:
        return math.fsum(self.welfare.revenue)

    @property
    def payments_total(self) -> float:
        return math.fsum(self.payments_stage1)


def marginal_value(profile: ValuationProfile, type_: float, k: int) -> float:
    """Value of the ``k``-th marginal channel to an operator of the given type."""
    profile.check_type(type_)
    if int(k) != k or k < 1:
        raise ValueError(f"channel index must be a positive integer, got {k!r}")
    return profile.value(type_, int(k))


def so_valuation(inst: MarketInstance, j: int, k_row: Sequence[int]) -> float:
    prof = inst.so_profile
    return math.fsum(prof.cumulative(a, n) for a, n in zip(inst.so_types[j], k_row))


def po_objective(inst: MarketInstance, j: int, alloc: Allocation, stage2_payments) -> float:
    """Reserved-channel valuation of PO ``j`` plus the stage-2 revenue it collected."""
    alloc.validate(inst.K)
    reserved = inst.po_profile.cumulative(inst.po_types[j], alloc.k_j0[j])
    return reserved + math.fsum(stage2_payments)


def regulated_po_objective(inst, j, alloc, stage2_payments) -> float:
    """Unregulated objective plus the controller's reimbursement."""
    return po_objective(inst, j, alloc, stage2_payments) + inst.beta * so_valuation(
        inst, j, alloc.k_ji[j]
    )


def welfare_of(inst: MarketInstance, alloc: Allocation, revenue=None) -> Welfare:
    from .contributions import contribution_raw

    prof, dist = inst.so_profile, inst.so_dist
    po_val, so_val, contrib = [], [], []
    for j in range(inst.M):
        po_val.append(inst.po_profile.cumulative(inst.po_types[j], alloc.k_j0[j]))
        so_val.append(so_valuation(inst, j, alloc.k_ji[j]))
        contrib.append(
            math.fsum(
                contribution_raw(prof, dist, k, a, 0.0)
                for a, n in zip(inst.so_types[j], alloc.k_ji[j])
                for k in range(1, n + 1)
            )
        )
    if revenue is None:
        revenue = [0.0] * inst.M
    return Welfare(tuple(po_val), tuple(so_val), tuple(revenue), tuple(contrib), inst.beta)


def co_objective(inst: MarketInstance, alloc: Allocation) -> float:
    """Controller's balanced objective with revenue replaced by winners' contributions.

    Equals the sum of reserved PO valuations plus the beta-contributions of
    every sold channel.
    """
    alloc.validate(inst.K)
    return welfare_of(inst, alloc).c_beta
