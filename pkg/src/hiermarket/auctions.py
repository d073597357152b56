"""Greedy channel auctions for both market layers.

Every solver here merges per-operator score lists and keeps the top ``K``
entries. Scores are nonincreasing in the channel index for each operator, so
the top-``K`` cut is the exact optimum of the corresponding allocation
problem.

Ties (scores equal after rounding to ``TIE_DECIMALS``) resolve seller first,
then lower PO index, lower SO index and lower channel index. The efficient
benchmark alone resolves ties in favour of SOs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .contributions import (
    ContributionEntry,
    contribution_raw,
    require_regular,
    score_row,
    threshold_bid,
    value_row,
)
from .market import Allocation, MarketInstance, ValuationProfile, score_key

SELLER_FIRST = "seller-first"
SO_FIRST = "so-first"


@dataclass
class ScoreVector:
    entries: list
    cutoff_score: float = 0.0

    @property
    def scores(self) -> list:
        return [e.score for e in self.entries]


@dataclass
class Stage2Outcome:
    k_cj: int
    reserved: int
    sold: tuple
    score_vector: ScoreVector
    payments: tuple = field(default=())

    @property
    def revenue(self) -> float:
        return math.fsum(self.payments)


# Internal entries are plain tuples: (score, owner, po, so, k, raw) with
# owner "po" or "so" and so = -1 for the seller's own channels.


def _ranked(entries, tie_rule=SELLER_FIRST):
    so_rank = 1 if tie_rule == SELLER_FIRST else 0
    return sorted(
        entries,
        key=lambda e: (-score_key(e[0]), so_rank if e[1] == "so" else 1 - so_rank, e[2], e[3], e[4]),
    )


def _entry(e) -> ContributionEntry:
    return ContributionEntry(e[1], e[2], None if e[3] < 0 else e[3], e[4], e[0], e[5])


def rank_entries(entries, tie_rule=SELLER_FIRST) -> list:
    """Order ``ContributionEntry`` objects by score with the documented tie rule."""
    tuples = [(e.score, e.owner, e.po, -1 if e.so is None else e.so, e.k, e.raw_valuation) for e in entries]
    return [_entry(e) for e in _ranked(tuples, tie_rule)]


def _po_entries(j, p, profile, n):
    return [(v, "po", j, -1, k, v) for k, v in enumerate(value_row(profile, p, n), 1)]


def _so_entries(j, bids, so_profile, so_dist, beta, n, raw=False):
    out = []
    for i, b in enumerate(bids):
        vals = value_row(so_profile, b, n)
        scores = vals if raw else score_row(so_profile, so_dist, b, beta, n)
        for k, (s, u) in enumerate(zip(scores, vals), 1):
            if s < 0:
                break
            out.append((s, "so", j, i, k, u))
    return out


def _counts(chosen, M, N):
    k_j0 = [0] * M
    k_ji = [[0] * N for _ in range(M)]
    for e in chosen:
        if e[1] == "po":
            k_j0[e[2]] += 1
        else:
            k_ji[e[2]][e[3]] += 1
    k_cj = [k_j0[j] + sum(k_ji[j]) for j in range(M)]
    return Allocation(k_cj, k_j0, k_ji)


# ---------------------------------------------------------------- stage 2


def beta_optimal_allocate(
    po_type: float,
    po_profile: ValuationProfile,
    bids: Sequence[float],
    so_profile: ValuationProfile,
    so_dist,
    beta: float,
    k_cj: int,
    po_index: int = 0,
) -> Stage2Outcome:
    """Allocate ``k_cj`` channels between the PO and its bidders.

    The PO's own valuations compete against the bidders' beta-contributions;
    negative contributions never enter. ``beta=0`` is the revenue-optimal
    auction.
    """
    if k_cj < 0:
        raise ValueError("k_cj must be nonnegative")
    require_regular(so_profile, so_dist, beta)
    entries = _po_entries(po_index, po_type, po_profile, k_cj)
    entries += _so_entries(po_index, bids, so_profile, so_dist, beta, k_cj)
    ranked = _ranked(entries)
    chosen = ranked[:k_cj]
    cutoff = max(0.0, ranked[k_cj][0]) if len(ranked) > k_cj else 0.0
    sold = [0] * len(bids)
    reserved = 0
    for e in chosen:
        if e[1] == "po":
            reserved += 1
        else:
            sold[e[3]] += 1
    return Stage2Outcome(k_cj, reserved, tuple(sold), ScoreVector([_entry(e) for e in chosen], cutoff))


def channel_cutoffs(po_type, po_profile, bids, so_profile, so_dist, beta, k_cj, i) -> list:
    """Cutoff score bidder ``i`` must reach for each of its channels.

    Bidder ``i`` holds at least ``k`` channels iff its ``k``-th score beats the
    ``(k_cj - k + 1)``-th highest competing score, so the cutoffs depend on the
    other bids only.
    """
    others = [b for n, b in enumerate(bids) if n != i]
    competing = value_row(po_profile, po_type, k_cj)
    competing += [e[0] for e in _so_entries(0, others, so_profile, so_dist, beta, k_cj)]
    competing.sort(reverse=True)
    return [max(0.0, competing[k_cj - k]) for k in range(1, k_cj + 1)]


def beta_optimal_payments(
    outcome: Stage2Outcome,
    bids: Sequence[float],
    beta: float,
    po_type: float,
    po_profile: ValuationProfile,
    so_profile: ValuationProfile,
    so_dist,
    only: Optional[int] = None,
) -> tuple:
    """Per-bidder payments: each won channel costs its valuation at the threshold bid.

    With ``only`` set, every other bidder's entry is left at zero.
    """
    pays = []
    for i, n_won in enumerate(outcome.sold):
        if n_won == 0 or (only is not None and i != only):
            pays.append(0.0)
            continue
        cuts = channel_cutoffs(po_type, po_profile, bids, so_profile, so_dist, beta, outcome.k_cj, i)
        total = []
        for k in range(1, n_won + 1):
            z = threshold_bid(so_profile, so_dist, k, beta, cuts[k - 1], check=False)
            if math.isinf(z):
                raise RuntimeError("winning bidder has an unattainable threshold")
            total.append(so_profile.value(z, k))
        pays.append(math.fsum(total))
    return tuple(pays)


def beta_optimal_auction(po_type, po_profile, bids, so_profile, so_dist, beta, k_cj, po_index=0,
                         payments=True) -> Stage2Outcome:
    out = beta_optimal_allocate(po_type, po_profile, bids, so_profile, so_dist, beta, k_cj, po_index)
    if payments:
        out.payments = beta_optimal_payments(out, bids, beta, po_type, po_profile, so_profile, so_dist)
    else:
        out.payments = (0.0,) * len(bids)
    return out


# ---------------------------------------------------------------- stage 1


def co_efficient_allocate(po_types: Sequence[float], po_profile: ValuationProfile, K: int) -> tuple:
    """Channels per PO maximising total declared PO valuation."""
    entries = []
    for j, r in enumerate(po_types):
        entries += _po_entries(j, r, po_profile, K)
    chosen = _ranked(entries)[:K]
    kc = [0] * len(po_types)
    for e in chosen:
        kc[e[2]] += 1
    return tuple(kc)


def po_welfare(po_types, po_profile, kc, exclude=None) -> float:
    return math.fsum(
        po_profile.cumulative(r, n) for m, (r, n) in enumerate(zip(po_types, kc)) if m != exclude
    )


def vcg_payment(j: int, po_types: Sequence[float], po_profile: ValuationProfile, K: int) -> float:
    """Externality PO ``j`` imposes on the other POs."""
    others = [r for m, r in enumerate(po_types) if m != j]
    if not others:
        return 0.0
    without = po_welfare(others, po_profile, co_efficient_allocate(others, po_profile, K))
    with_j = po_welfare(po_types, po_profile, co_efficient_allocate(po_types, po_profile, K), exclude=j)
    return max(0.0, without - with_j)


def co_balanced_allocate(
    po_types: Sequence[float],
    so_feedback: Sequence[Sequence[float]],
    beta: float,
    K: int,
    po_profile: ValuationProfile,
    so_profile: ValuationProfile,
    so_dist,
) -> Allocation:
    """Global top-``K`` over PO valuations and every SO's beta-contributions."""
    require_regular(so_profile, so_dist, beta)
    entries = []
    for j, (r, row) in enumerate(zip(po_types, so_feedback)):
        entries += _po_entries(j, r, po_profile, K)
        entries += _so_entries(j, row, so_profile, so_dist, beta, K)
    chosen = _ranked(entries)[:K]
    N = len(so_feedback[0]) if so_feedback else 0
    return _counts(chosen, len(po_types), N)


def balanced_po_values(po_types, so_feedback, beta, alloc, po_profile, so_profile, so_dist) -> list:
    """Per-PO regulated objective with revenue replaced by winners' contributions."""
    vals = []
    for j, (r, row) in enumerate(zip(po_types, so_feedback)):
        parts = value_row(po_profile, r, alloc.k_j0[j])
        for a, n in zip(row, alloc.k_ji[j]):
            parts += score_row(so_profile, so_dist, a, beta, n)
        vals.append(math.fsum(parts))
    return vals


def vcg_payment_regulated(
    j: int, po_types, so_feedback, beta, K, po_profile, so_profile, so_dist
) -> float:
    """VCG price on the balanced objective; PO ``j``'s whole market is removed."""
    if len(po_types) == 1:
        return 0.0
    keep = [m for m in range(len(po_types)) if m != j]
    r_wo = [po_types[m] for m in keep]
    fb_wo = [so_feedback[m] for m in keep]
    alloc_wo = co_balanced_allocate(r_wo, fb_wo, beta, K, po_profile, so_profile, so_dist)
    without = math.fsum(balanced_po_values(r_wo, fb_wo, beta, alloc_wo, po_profile, so_profile, so_dist))
    alloc = co_balanced_allocate(po_types, so_feedback, beta, K, po_profile, so_profile, so_dist)
    full = balanced_po_values(po_types, so_feedback, beta, alloc, po_profile, so_profile, so_dist)
    with_j = math.fsum(v for m, v in enumerate(full) if m != j)
    return max(0.0, without - with_j)


# ---------------------------------------------------------------- benchmarks


def efficient_benchmark(inst: MarketInstance) -> Allocation:
    """Global top-``K`` over raw PO and SO valuations, ties to SOs."""
    entries = []
    for j, (p, row) in enumerate(zip(inst.po_types, inst.so_types)):
        entries += _po_entries(j, p, inst.po_profile, inst.K)
        entries += _so_entries(j, row, inst.so_profile, inst.so_dist, 0.0, inst.K, raw=True)
    chosen = _ranked(entries, SO_FIRST)[: inst.K]
    return _counts(chosen, inst.M, inst.N)


def socially_aware_allocate(inst: MarketInstance, stage1_kc: Sequence[int]) -> Allocation:
    """Each PO splits its channels by raw SO valuations instead of contributions."""
    k_j0, k_ji = [], []
    for j, (p, row) in enumerate(zip(inst.po_types, inst.so_types)):
        n = stage1_kc[j]
        entries = _po_entries(0, p, inst.po_profile, n)
        entries += _so_entries(0, row, inst.so_profile, inst.so_dist, 0.0, n, raw=True)
        counts = _counts(_ranked(entries)[:n], 1, len(row))
        k_j0.append(counts.k_j0[0])
        k_ji.append(counts.k_ji[0])
    return Allocation(list(stage1_kc), k_j0, k_ji)
