import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hiermarket.auctions import co_balanced_allocate
from hiermarket.contributions import contribution_raw
from hiermarket.experiments import appendix_instance
from hiermarket.market import TypeDistribution, ValuationProfile
from hiermarket.oracle import (
    EnumerationSizeError,
    brute_force_allocate,
    compositions,
    deviation_sweep,
    mc_revenue_equivalence,
    po_regret,
)

from strategies import small_markets


@given(st.integers(0, 6), st.integers(0, 4))
def test_compositions_complete(total, parts):
    comps = compositions(total, parts)
    assert len(comps) == math.comb(total + parts, parts)
    assert np.all(comps >= 0) and np.all(comps.sum(axis=1) <= total)
    assert len({tuple(r) for r in comps}) == len(comps)


def test_enumeration_bound(appendix):
    with pytest.raises(EnumerationSizeError):
        brute_force_allocate("co", appendix.replace(K=13))
    with pytest.raises(ValueError):
        brute_force_allocate("po", appendix)
    with pytest.raises(ValueError):
        brute_force_allocate("nope", appendix)


def test_zero_channels(appendix):
    res = brute_force_allocate("po-beta", appendix, k_cap=0, j=0)
    assert res.value == 0.0 and sum(res.counts) == 0


def test_appendix_balanced_value(appendix):
    res = brute_force_allocate("co-bal", appendix)
    alloc = co_balanced_allocate(appendix.po_types, appendix.so_types, 0.2, 12,
                                 appendix.po_profile, appendix.so_profile, appendix.so_dist)
    assert res.totals() == alloc.totals
    greedy = math.fsum(
        [appendix.po_profile.cumulative(p, n) for p, n in zip(appendix.po_types, alloc.k_j0)]
        + [contribution_raw(appendix.so_profile, appendix.so_dist, k, a, 0.2)
           for row, nrow in zip(appendix.so_types, alloc.k_ji) for a, n in zip(row, nrow)
           for k in range(1, n + 1)]
    )
    assert res.value == pytest.approx(greedy, abs=1e-12)


def test_two_candidate_case(appendix):
    inst = appendix.replace(K=1, po_types=(0.3,), so_types=((1.9,),))
    res = brute_force_allocate("po-beta", inst, k_cap=1, j=0)
    # V_1 = 0.9 against pi^beta_1 = 2.2 * 1.9 - 2 = 2.18
    assert res.counts == (0, 1)


@settings(max_examples=30, deadline=None)
@given(small_markets())
def test_efficient_is_max_aggregate(inst):
    res = brute_force_allocate("efficient", inst)
    rng = np.random.default_rng(0)
    comps = compositions(inst.K, len(res.labels))
    for row in comps[rng.choice(len(comps), min(50, len(comps)), replace=False)]:
        val = 0.0
        for (owner, m, i), c in zip(res.labels, row):
            prof, t = (inst.po_profile, inst.po_types[m]) if owner == "po" else (inst.so_profile, inst.so_types[m][i])
            val += prof.cumulative(t, int(c))
        assert val <= res.value + 1e-12


def _reference_market():
    return (ValuationProfile.reciprocal(0.1, 4.0), TypeDistribution.uniform(4.0),
            ValuationProfile.reciprocal(1.0, 6.0))


def test_zero_type_population():
    so, dist, po = _reference_market()
    types = np.full((1000, 3), 1e-12)
    rep = mc_revenue_equivalence(so, dist, 5.5, 0.2, 10, po_profile=po, n_sos=3, types=types)
    assert rep.mean_revenue == 0.0 and rep.gap == 0.0 and rep.mean_contribution <= 0


def test_mc_small_sample_refused():
    so, dist, po = _reference_market()
    with pytest.raises(ValueError):
        mc_revenue_equivalence(so, dist, 5.5, 0.0, 10, n_draws=10, po_profile=po, n_sos=3)


def test_mc_beta_lowers_seller_objective():
    # revenue plus reserved valuation is what the beta = 0 auction maximises
    so, dist, po = _reference_market()
    means = []
    for beta in (0.0, 0.2):
        rep = mc_revenue_equivalence(so, dist, 5.5, beta, 20, n_draws=2000, seed=4, po_profile=po, n_sos=5)
        reserved = [po.cumulative(5.5, 20 - int(c.sum())) for c in rep.channels]
        means.append(rep.mean_revenue + float(np.mean(reserved)))
        assert rep.within <= 3
    assert means[1] <= means[0]


def test_allocation_frequency_monotone_in_type():
    so, dist, po = _reference_market()
    rep = mc_revenue_equivalence(so, dist, 5.5, 0.2, 20, n_draws=4000, seed=9, po_profile=po, n_sos=5)
    # bin bidder 0 by type; the win frequency of its first channel never falls
    bins = np.digitize(rep.types[:, 0], np.linspace(0, 4, 9)[1:-1])
    freq = [np.mean(rep.channels[bins == b, 0] >= 1) for b in range(8)]
    assert all(x <= y + 1e-12 for x, y in zip(freq, freq[1:]))


def test_deviation_sweep():
    assert deviation_sweep(lambda x: -(x - 1) ** 2, 1.0, np.linspace(0, 2, 11)) == 0.0
    assert deviation_sweep(lambda x: x, 1.0, [0.5, 2.0]) == 1.0


def test_aware_regret_positive():
    inst = appendix_instance(0.0)
    assert max(po_regret(inst, j, "unregulated-aware", 100) for j in range(2)) > 0
