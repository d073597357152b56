"""Independent ground truth for the greedy solvers and the auction properties.

Nothing in here calls the greedy allocators: enumeration scores every
feasible integer allocation, and the Monte Carlo check compares realised
payments with an expectation identity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Callable, Optional

import numpy as np

from .auctions import beta_optimal_auction
from .contributions import contribution_raw
from .market import MarketInstance
from .mechanism import po_grid, po_payoff, so_grid, so_payoff

MAX_CHANNELS = 12
MAX_COMPOSITIONS = 2_000_000

KINDS = ("co", "po", "po-beta", "co-bal", "efficient", "socially-aware")


class EnumerationSizeError(ValueError):
    pass


@dataclass
class BruteForceResult:
    labels: list
    counts: tuple
    value: float

    def count_of(self, label) -> int:
        return self.counts[self.labels.index(label)]

    def totals(self) -> list:
        po = sum(c for lab, c in zip(self.labels, self.counts) if lab[0] == "po")
        so = sum(c for lab, c in zip(self.labels, self.counts) if lab[0] == "so")
        return [po, so]


def compositions(total: int, parts: int) -> np.ndarray:
    """All nonnegative integer vectors of length ``parts`` summing to at most ``total``."""
    n = math.comb(total + parts, parts)
    if n > MAX_COMPOSITIONS:
        raise EnumerationSizeError(f"{n} allocations exceed the enumeration bound")
    if parts == 0:
        return np.zeros((1, 0), dtype=np.int64)
    out = np.empty((n, parts), dtype=np.int64)
    # Stars and bars with one slack part: bar positions in total + parts slots.
    for row, bars in enumerate(combinations(range(total + parts), parts)):
        prev = -1
        for c, b in enumerate(bars):
            out[row, c] = b - prev - 1
            prev = b
    return out


def _operator_tables(kind: str, inst: MarketInstance, K: int, j: Optional[int]):
    """Marginal score rows (length ``K``) for every operator in the problem."""
    po, so, dist, beta = inst.po_profile, inst.so_profile, inst.so_dist, inst.beta
    rows, labels = [], []
    markets = range(inst.M) if j is None else [j]
    for m in markets:
        p = inst.po_types[m]
        rows.append([po.value(p, k) for k in range(1, K + 1)])
        labels.append(("po", m, None))
        if kind == "co":
            continue
        for i, a in enumerate(inst.so_types[m]):
            if kind in ("efficient", "socially-aware"):
                row = [so.value(a, k) for k in range(1, K + 1)]
            else:
                b = beta if kind in ("po-beta", "co-bal") else 0.0
                row = [contribution_raw(so, dist, k, a, b) for k in range(1, K + 1)]
            rows.append(row)
            labels.append(("so", m, i))
    return rows, labels


def brute_force_allocate(kind: str, inst: MarketInstance, k_cap: Optional[int] = None,
                         j: Optional[int] = None) -> BruteForceResult:
    """Exact optimum of an allocation problem by scoring every feasible allocation.

    ``co``, ``co-bal`` and ``efficient`` range over all markets with ``k_cap``
    defaulting to ``inst.K``; ``po``, ``po-beta`` and ``socially-aware`` solve
    market ``j`` alone with ``k_cap`` channels.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown problem kind {kind!r}")
    local = kind in ("po", "po-beta", "socially-aware")
    if local and (j is None or k_cap is None):
        raise ValueError(f"{kind} needs a market index j and k_cap")
    K = inst.K if k_cap is None else int(k_cap)
    if K > MAX_CHANNELS:
        raise EnumerationSizeError(f"{K} channels exceed the enumeration bound of {MAX_CHANNELS}")
    rows, labels = _operator_tables(kind, inst, K, j if local else None)
    if K == 0:
        return BruteForceResult(labels, (0,) * len(rows), 0.0)
    comps = compositions(K, len(rows))
    prefix = np.zeros((len(rows), K + 1))
    prefix[:, 1:] = np.cumsum(np.asarray(rows, dtype=float), axis=1)
    values = prefix[np.arange(len(rows)), comps].sum(axis=1)
    best = int(np.argmax(values))
    counts = tuple(int(c) for c in comps[best])
    exact = math.fsum(x for row, c in zip(rows, counts) for x in row[:c])
    return BruteForceResult(labels, counts, exact)


# ---------------------------------------------------------------- revenue equivalence


@dataclass
class RevenueEquivalenceReport:
    n_draws: int
    mean_revenue: float
    mean_contribution: float
    gap: float
    std_error: float
    allocation_freq: np.ndarray
    mean_payment: np.ndarray
    types: np.ndarray
    channels: np.ndarray

    @property
    def within(self) -> float:
        """Gap measured in standard errors."""
        if self.std_error == 0:
            return 0.0 if self.gap == 0 else math.inf
        return self.gap / self.std_error


def mc_revenue_equivalence(so_profile, so_dist, po_type: float, beta: float, k_cj: int,
                           n_draws: int = 10_000, seed: int = 0, *, po_profile,
                           n_sos: int, types: Optional[np.ndarray] = None) -> RevenueEquivalenceReport:
    """Compare mean realised revenue with the mean of winners' plain contributions.

    ``types`` overrides the random draws (shape ``n_draws x n_sos``).
    """
    if types is None:
        if n_draws < 1000:
            raise ValueError("n_draws must be at least 1000")
        types = so_dist.sample(np.random.default_rng(seed), (n_draws, n_sos))
    types = np.asarray(types, dtype=float)
    n_draws = types.shape[0]
    revenue = np.empty(n_draws)
    contrib = np.empty(n_draws)
    channels = np.zeros((n_draws, n_sos), dtype=np.int64)
    pays = np.zeros((n_draws, n_sos))
    for d in range(n_draws):
        bids = types[d].tolist()
        out = beta_optimal_auction(po_type, po_profile, bids, so_profile, so_dist, beta, k_cj)
        channels[d] = out.sold
        pays[d] = out.payments
        revenue[d] = out.revenue
        contrib[d] = math.fsum(
            contribution_raw(so_profile, so_dist, k, a, 0.0)
            for a, n in zip(bids, out.sold)
            for k in range(1, n + 1)
        )
    diff = revenue - contrib
    se = float(diff.std(ddof=1) / math.sqrt(n_draws)) if n_draws > 1 else 0.0
    freq = np.array([[np.mean(channels[:, i] >= k) for k in range(1, k_cj + 1)] for i in range(n_sos)])
    return RevenueEquivalenceReport(
        n_draws=n_draws,
        mean_revenue=float(revenue.mean()),
        mean_contribution=float(contrib.mean()),
        gap=float(abs(diff.mean())),
        std_error=se,
        allocation_freq=freq,
        mean_payment=pays.mean(axis=0),
        types=types,
        channels=channels,
    )


# ---------------------------------------------------------------- deviation sweeps


def deviation_sweep(payoff: Callable[[float], float], truth: float, grid) -> float:
    """Largest gain from misreporting over ``grid``; nonpositive means no profitable deviation."""
    base = payoff(truth)
    return max(payoff(float(x)) - base for x in grid)


def so_regret(inst: MarketInstance, j: int, i: int, beta: float, k_cj: int, grid: int = 100) -> float:
    pts = so_grid(inst, j, i, grid)
    return deviation_sweep(lambda b: so_payoff(inst, j, i, b, beta, k_cj), inst.so_types[j][i], pts)


def po_regret(inst: MarketInstance, j: int, scenario: str, grid: int = 100) -> float:
    pts = po_grid(inst, j, grid)
    return deviation_sweep(lambda r: po_payoff(inst, j, r, scenario), inst.po_types[j], pts)
