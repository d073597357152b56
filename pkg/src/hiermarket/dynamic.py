"""Two-timescale markets: stage 1 once per period, stage-2 auctions every slot."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .auctions import beta_optimal_auction, co_balanced_allocate, co_efficient_allocate
from .market import Allocation, MarketInstance, welfare_of
from .mechanism import FeedbackChannel


@dataclass(frozen=True)
class DynamicSchedule:
    """``periods`` x ``slots_per_period`` slots; SO types are redrawn i.i.d. every slot.

    The draw for (period ``t``, slot ``s``) uses
    ``numpy.random.default_rng([seed, t, s])``, so any single slot can be
    reproduced on its own.
    """

    periods: int = 1
    slots_per_period: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.periods < 1 or self.slots_per_period < 1:
            raise ValueError("periods and slots_per_period must be at least 1")

    def slot_types(self, inst: MarketInstance, period: int, slot: int) -> tuple:
        rng = np.random.default_rng([self.seed, period, slot])
        draws = inst.so_dist.sample(rng, (inst.M, inst.N))
        return tuple(tuple(map(float, row)) for row in draws)


@dataclass
class SlotReport:
    so_types: tuple
    allocation: Allocation
    payments: tuple
    reimbursements: tuple
    c_beta: float


@dataclass
class PeriodReport:
    period: int
    k_cj: tuple
    slots: list = field(default_factory=list)
    period_prices: tuple = ()

    @property
    def c_beta(self) -> float:
        return math.fsum(s.c_beta for s in self.slots)


def period_stage1(inst: MarketInstance, beta: float, regulated: bool, center: str = "mean") -> tuple:
    """Per-PO channels for a whole period, from average SO demand when regulated."""
    if not regulated:
        return co_efficient_allocate(inst.po_types, inst.po_profile, inst.K)
    avg = FeedbackChannel("average", center).observe(inst)
    return co_balanced_allocate(
        inst.po_types, avg, beta, inst.K, inst.po_profile, inst.so_profile, inst.so_dist
    ).k_cj


def run_slot(inst: MarketInstance, so_types, k_cj, beta: float, regulated: bool,
             payments: bool = True) -> SlotReport:
    """One slot of stage-2 auctions at fixed ``k_cj``.

    ``c_beta`` is always evaluated at ``beta`` so regulated and unregulated
    slots are comparable.
    """
    slot_inst = inst.replace(so_types=so_types, beta=beta)
    auction_beta = beta if regulated else 0.0
    outs = [
        beta_optimal_auction(
            inst.po_types[j], inst.po_profile, so_types[j], inst.so_profile, inst.so_dist,
            auction_beta, k_cj[j], j, payments=payments,
        )
        for j in range(inst.M)
    ]
    alloc = Allocation(k_cj, [o.reserved for o in outs], [o.sold for o in outs]).validate(inst.K)
    w = welfare_of(slot_inst, alloc, [o.revenue for o in outs])
    reimb = tuple(beta * s for s in w.so_valuation) if regulated else (0.0,) * inst.M
    return SlotReport(so_types, alloc, tuple(o.payments for o in outs), reimb, w.c_beta)


def period_price(slot_reports, beta: Optional[float] = None) -> tuple:
    """End-of-period reimbursement per PO: the sum of its per-slot reimbursements."""
    if not slot_reports:
        return ()
    M = len(slot_reports[0].reimbursements)
    return tuple(math.fsum(s.reimbursements[j] for s in slot_reports) for j in range(M))


def run_dynamic(inst: MarketInstance, schedule: DynamicSchedule, beta: float, regulated: bool = True,
                k_cj=None, center: str = "mean", payments: bool = True) -> list:
    """Simulate every period of ``schedule``.

    ``inst.so_types`` is ignored; slots draw fresh types. Pass ``k_cj`` to pin
    the stage-1 allocation (for like-for-like comparisons).
    """
    reports = []
    for t in range(schedule.periods):
        kc = tuple(k_cj) if k_cj is not None else period_stage1(inst, beta, regulated, center)
        rep = PeriodReport(t, kc)
        for s in range(schedule.slots_per_period):
            types = schedule.slot_types(inst, t, s)
            rep.slots.append(run_slot(inst, types, kc, beta, regulated, payments))
        rep.period_prices = period_price(rep.slots, beta)
        reports.append(rep)
    return reports


def clairvoyant_c_beta(inst: MarketInstance, so_types, beta: float) -> float:
    """Balanced objective when stage 1 sees the realised slot types."""
    slot_inst = inst.replace(so_types=so_types, beta=beta)
    alloc = co_balanced_allocate(
        inst.po_types, so_types, beta, inst.K, inst.po_profile, inst.so_profile, inst.so_dist
    )
    return welfare_of(slot_inst, alloc).c_beta
