"""End-to-end market pipelines, regulator pricing and unilateral best responses."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .auctions import (
    beta_optimal_allocate,
    beta_optimal_auction,
    beta_optimal_payments,
    co_balanced_allocate,
    co_efficient_allocate,
    vcg_payment,
    vcg_payment_regulated,
)
from .contributions import contribution_raw
from .market import Allocation, MarketInstance, MarketReport, welfare_of

SCENARIOS = ("unregulated-naive", "unregulated-aware", "regulated")
FIDELITIES = ("exact", "average", "none")


class OffsetError(ValueError):
    def __init__(self, violating, net):
        self.violating = violating
        self.net = net
        super().__init__(f"offset too small: negative net payment for PO(s) {violating}")


@dataclass(frozen=True)
class FeedbackChannel:
    """What the controller learns about each secondary market.

    ``exact`` reports true SO types, ``average`` the distribution mean for
    every SO, ``none`` nothing at all.
    """

    fidelity: str = "exact"
    center: str = "mean"

    def __post_init__(self):
        if self.fidelity not in FIDELITIES:
            raise ValueError(f"unknown fidelity {self.fidelity!r}")
        if self.center not in ("mean", "median"):
            raise ValueError(f"unknown center {self.center!r}")

    def observe(self, inst: MarketInstance):
        if self.fidelity == "exact":
            return inst.so_types
        if self.fidelity == "none":
            return None
        c = inst.so_dist.mean() if self.center == "mean" else inst.so_dist.median()
        return tuple((c,) * len(row) for row in inst.so_types)


@dataclass(frozen=True)
class MechanismConfig:
    beta: float = 0.0
    offset_y: Optional[float] = None
    scenario: str = "regulated"

    def __post_init__(self):
        if self.beta < 0:
            raise ValueError("beta must be nonnegative")
        if self.scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario!r}")


def reimbursement(inst: MarketInstance, j: int, alloc: Allocation, so_types=None) -> float:
    """Controller's payment to PO ``j``: beta times its SOs' valuation of the channels sold."""
    types = inst.so_types if so_types is None else so_types
    prof = inst.so_profile
    return inst.beta * math.fsum(prof.cumulative(a, n) for a, n in zip(types[j], alloc.k_ji[j]))


def default_offset(inst: MarketInstance) -> float:
    """An upper bound on any one PO's reimbursement: each of its SOs at the top type winning all ``K`` channels."""
    a_max = min(inst.so_dist.upper, inst.so_profile.type_max)
    return inst.beta * inst.N * inst.so_profile.cumulative(a_max, inst.K)


def net_payment(config: MechanismConfig, j: int, L_j: float, Q_R: float) -> float:
    y = 0.0 if config.offset_y is None else config.offset_y
    net = y - L_j + Q_R
    if net < 0:
        raise OffsetError([j], [net])
    return net


def _po_support(inst: MarketInstance) -> float:
    tmax = inst.po_profile.type_max
    return tmax if math.isfinite(tmax) else 2.0 * max(inst.po_types)


def _stage2(inst, kc, beta, payments=True):
    return tuple(
        beta_optimal_auction(
            inst.po_types[j], inst.po_profile, inst.so_types[j],
            inst.so_profile, inst.so_dist, beta, kc[j], j, payments=payments,
        )
        for j in range(inst.M)
    )


def _allocation_from(kc, outcomes) -> Allocation:
    return Allocation(kc, [o.reserved for o in outcomes], [o.sold for o in outcomes])


def run_unregulated(inst: MarketInstance, aware: bool = False, grid: int = 200,
                    payments: bool = True) -> MarketReport:
    """VCG sale to the POs followed by a revenue-optimal auction in every secondary market.

    With ``aware`` each PO bids its unilateral best response to truthful
    opponents under its combined valuation-revenue objective.
    """
    if aware:
        bids = tuple(po_best_response(inst, j, "unregulated-aware", grid) for j in range(inst.M))
    else:
        bids = inst.po_types
    kc = co_efficient_allocate(bids, inst.po_profile, inst.K)
    outcomes = _stage2(inst, kc, 0.0, payments)
    alloc = _allocation_from(kc, outcomes).validate(inst.K)
    q = tuple(vcg_payment(j, bids, inst.po_profile, inst.K) for j in range(inst.M))
    revenue = [o.revenue for o in outcomes]
    return MarketReport(
        scenario="unregulated-aware" if aware else "unregulated-naive",
        allocation=alloc,
        po_bids=tuple(bids),
        payments_stage1=q,
        payments_stage2=tuple(o.payments for o in outcomes),
        reimbursements=(0.0,) * inst.M,
        net_payments=None,
        welfare=welfare_of(inst, alloc, revenue),
        outcomes=outcomes,
    )


def run_regulated(inst: MarketInstance, config: Optional[MechanismConfig] = None,
                  feedback: Optional[FeedbackChannel] = None, payments: bool = True) -> MarketReport:
    """Run the regulated mechanism at ``config.beta`` (defaults to the instance's beta).

    Stage 1 solves the balanced problem on truthful PO bids and the SO
    feedback; stage 2 runs a beta-optimal auction in each market; the
    controller then reimburses each PO and charges the regulated VCG price.
    """
    if config is None:
        config = MechanismConfig(beta=inst.beta)
    if config.beta != inst.beta:
        inst = inst.replace(beta=config.beta)
    feedback = feedback or FeedbackChannel()
    beta = inst.beta
    bids = inst.po_types
    reported = feedback.observe(inst)
    args = (inst.po_profile, inst.so_profile, inst.so_dist)
    if reported is None:
        kc = co_efficient_allocate(bids, inst.po_profile, inst.K)
    else:
        kc = co_balanced_allocate(bids, reported, beta, inst.K, *args).k_cj
    outcomes = _stage2(inst, kc, beta, payments)
    alloc = _allocation_from(kc, outcomes).validate(inst.K)
    if reported is None:
        q = tuple(vcg_payment(j, bids, inst.po_profile, inst.K) for j in range(inst.M))
    else:
        q = tuple(
            vcg_payment_regulated(j, bids, reported, beta, inst.K, *args) for j in range(inst.M)
        )
    L = tuple(reimbursement(inst, j, alloc) for j in range(inst.M))
    y = default_offset(inst) if config.offset_y is None else config.offset_y
    net = tuple(y - L[j] + q[j] for j in range(inst.M))
    bad = [j for j, v in enumerate(net) if v < 0]
    if bad:
        raise OffsetError(bad, net)
    return MarketReport(
        scenario="regulated",
        allocation=alloc,
        po_bids=tuple(bids),
        payments_stage1=q,
        payments_stage2=tuple(o.payments for o in outcomes),
        reimbursements=L,
        net_payments=net,
        welfare=welfare_of(inst, alloc, [o.revenue for o in outcomes]),
        outcomes=outcomes,
        offset_y=y,
    )


# ---------------------------------------------------------------- best responses


def po_payoff(inst: MarketInstance, j: int, r: float, scenario: str) -> float:
    """Payoff of PO ``j`` bidding ``r`` against truthful POs and SOs."""
    bids = list(inst.po_types)
    bids[j] = r
    p = inst.po_types[j]
    prof = inst.po_profile
    if scenario == "unregulated-naive":
        kc = co_efficient_allocate(bids, prof, inst.K)
        return prof.cumulative(p, kc[j]) - vcg_payment(j, bids, prof, inst.K)
    if scenario == "unregulated-aware":
        kc = co_efficient_allocate(bids, prof, inst.K)
        out = beta_optimal_auction(p, prof, inst.so_types[j], inst.so_profile, inst.so_dist, 0.0, kc[j])
        return prof.cumulative(p, out.reserved) + out.revenue - vcg_payment(j, bids, prof, inst.K)
    if scenario == "regulated":
        beta = inst.beta
        args = (prof, inst.so_profile, inst.so_dist)
        kc = co_balanced_allocate(bids, inst.so_types, beta, inst.K, *args).k_cj
        out = beta_optimal_allocate(p, prof, inst.so_types[j], inst.so_profile, inst.so_dist, beta, kc[j])
        gained = [prof.cumulative(p, out.reserved)]
        for a, n in zip(inst.so_types[j], out.sold):
            gained += [contribution_raw(inst.so_profile, inst.so_dist, k, a, beta) for k in range(1, n + 1)]
        q_r = vcg_payment_regulated(j, bids, inst.so_types, beta, inst.K, *args)
        return math.fsum(gained) - q_r
    raise ValueError(f"unknown scenario {scenario!r}")


def _argmax_closest(values, grid, truth):
    values = np.asarray(values)
    best = values.max()
    idx = np.nonzero(values >= best - 1e-12)[0]
    return float(grid[idx[np.argmin(np.abs(grid[idx] - truth))]])


def po_grid(inst: MarketInstance, j: int, grid: int) -> np.ndarray:
    top = _po_support(inst)
    return np.union1d(np.linspace(top / grid, top, grid), [inst.po_types[j]])


def po_best_response(inst: MarketInstance, j: int, scenario: str, grid: int = 200) -> float:
    """Grid-search the bid maximising PO ``j``'s payoff; ties go to the bid nearest the truth."""
    pts = po_grid(inst, j, grid)
    vals = [po_payoff(inst, j, r, scenario) for r in pts]
    return _argmax_closest(vals, pts, inst.po_types[j])


def so_payoff(inst: MarketInstance, j: int, i: int, bid: float, beta: float, k_cj: int) -> float:
    """Utility of SO ``i`` in market ``j`` bidding ``bid`` while everyone else is truthful."""
    bids = list(inst.so_types[j])
    bids[i] = bid
    p = inst.po_types[j]
    out = beta_optimal_allocate(p, inst.po_profile, bids, inst.so_profile, inst.so_dist, beta, k_cj, j)
    pay = beta_optimal_payments(out, bids, beta, p, inst.po_profile, inst.so_profile, inst.so_dist, only=i)
    return inst.so_profile.cumulative(inst.so_types[j][i], out.sold[i]) - pay[i]


def so_grid(inst: MarketInstance, j: int, i: int, grid: int) -> np.ndarray:
    top = min(inst.so_dist.upper, inst.so_profile.type_max)
    return np.union1d(np.linspace(top / grid, top, grid), [inst.so_types[j][i]])


def so_best_response(inst: MarketInstance, j: int, i: int, beta: float, grid: int = 100,
                     k_cj: Optional[int] = None) -> float:
    """Grid argmax of an SO's utility; stage-1 channels are held fixed (SOs are price takers)."""
    if k_cj is None:
        k_cj = stage1_channels(inst.replace(beta=beta))[j]
    pts = so_grid(inst, j, i, grid)
    vals = [so_payoff(inst, j, i, b, beta, k_cj) for b in pts]
    return _argmax_closest(vals, pts, inst.so_types[j][i])


def stage1_channels(inst: MarketInstance) -> tuple:
    """Channels per PO under truthful regulated stage 1 (unregulated when beta is 0)."""
    if inst.beta == 0:
        return co_efficient_allocate(inst.po_types, inst.po_profile, inst.K)
    return co_balanced_allocate(
        inst.po_types, inst.so_types, inst.beta, inst.K, inst.po_profile, inst.so_profile, inst.so_dist
    ).k_cj
