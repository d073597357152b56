import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hiermarket import (
    Allocation,
    DomainError,
    FeasibilityError,
    MarketInstance,
    TypeDistribution,
    ValuationProfile,
    co_objective,
    welfare_of,
)
from hiermarket.market import marginal_value, po_objective, regulated_po_objective


def test_marginal_value_examples():
    assert marginal_value(ValuationProfile.reciprocal(1.0), 1.2, 2) == pytest.approx(0.6, abs=1e-15)
    assert marginal_value(ValuationProfile.reciprocal(3.0), 1.2, 1) == pytest.approx(3.6, abs=1e-15)


@pytest.mark.parametrize("t,k", [(0.0, 1), (-1.0, 1), (1.0, 0), (1.0, 1.5), (3.0, 1)])
def test_marginal_value_domain(t, k):
    prof = ValuationProfile.reciprocal(1.0, 2.0)
    with pytest.raises((DomainError, ValueError)):
        marginal_value(prof, t, k)


@given(st.floats(0.01, 10), st.floats(0.01, 5), st.integers(1, 30))
def test_reciprocal_diminishing_and_increasing(scale, t, k):
    prof = ValuationProfile.reciprocal(scale)
    assert prof.value(t, k) >= prof.value(t, k + 1) >= 0
    assert prof.value(t * 1.01, k) > prof.value(t, k)
    assert prof.derivative(t, k) == pytest.approx(scale / k)


def test_custom_table_interpolates_and_truncates():
    prof = ValuationProfile.custom_table([0.0, 1.0, 2.0], [[0.0, 2.0, 4.0], [0.0, 1.0, 2.0]])
    assert prof.value(0.5, 1) == pytest.approx(1.0)
    assert prof.value(1.5, 2) == pytest.approx(1.5)
    assert prof.value(1.5, 3) == 0.0
    assert prof.derivative(1.5, 1) == pytest.approx(2.0, rel=1e-6)
    with pytest.raises(ValueError):
        ValuationProfile.custom_table([0.0, 1.0], [[0.0, 1.0, 2.0]])


def test_uniform_distribution():
    d = TypeDistribution.uniform(4.0)
    assert d.cdf(1.0) == 0.25 and d.pdf(1.0) == 0.25
    assert d.mean() == 2.0 and d.median() == 2.0
    draws = d.sample(np.random.default_rng(0), 1000)
    assert np.all((draws > 0) & (draws <= 4.0))


def test_custom_distribution_ppf_and_mean():
    d = TypeDistribution("custom", 1.0, lambda x: x * x, lambda x: 2 * x)
    assert d.ppf(0.25) == pytest.approx(0.5, abs=1e-8)
    assert d.mean() == pytest.approx(2 / 3, abs=1e-4)


def test_instance_validation(appendix):
    with pytest.raises(ValueError):
        appendix.replace(K=-1)
    with pytest.raises(ValueError):
        appendix.replace(beta=-0.1)
    with pytest.raises(ValueError):
        appendix.replace(so_types=((1.2,), (1.3, 1.4)))
    with pytest.raises(DomainError):
        appendix.replace(so_types=((1.2, 2.5), (1.3, 1.4)))
    assert appendix.M == 2 and appendix.N == 2


def test_allocation_feasibility():
    Allocation([5, 7], [4, 5], [[0, 1], [1, 1]]).validate(12)
    with pytest.raises(FeasibilityError):
        Allocation([5, 7], [4, 5], [[0, 1], [1, 1]]).validate(11)
    with pytest.raises(FeasibilityError):
        Allocation([5], [3], [[1]]).validate(12)
    with pytest.raises(FeasibilityError):
        Allocation([1], [2], [[-1]]).validate(12)


def test_po_objective_examples(appendix0):
    empty = Allocation([0, 0], [0, 0], [[0, 0], [0, 0]])
    assert po_objective(appendix0, 0, empty, []) == 0.0
    alloc = Allocation([5, 0], [4, 0], [[0, 1], [0, 0]])
    assert po_objective(appendix0, 0, alloc, [1.3]) == pytest.approx(3 + 1.5 + 1 + 0.75 + 1.3)
    assert regulated_po_objective(appendix0, 0, alloc, [1.3]) == po_objective(appendix0, 0, alloc, [1.3])


def test_co_objective_reserved_only(appendix0):
    alloc = Allocation([5, 7], [5, 7], [[0, 0], [0, 0]])
    assert co_objective(appendix0, alloc) == pytest.approx(
        3 * sum(1 / k for k in range(1, 6)) + 3.6 * sum(1 / k for k in range(1, 8))
    )


def test_co_objective_increases_with_beta(appendix):
    alloc = Allocation([5, 7], [4, 5], [[0, 1], [1, 1]])
    vals = [co_objective(appendix.replace(beta=b), alloc) for b in (0.0, 0.1, 0.2, 1.0)]
    assert vals == sorted(vals)


def test_welfare_surrogate_decomposition(appendix):
    # C(beta) = reserved V + plain contributions + beta * SO valuation
    alloc = Allocation([5, 7], [4, 5], [[0, 1], [1, 1]])
    w = welfare_of(appendix, alloc)
    pi_b = [(2.2 * 1.5 - 2) / 1, (2.2 * 1.3 - 2) / 1, (2.2 * 1.4 - 2) / 1]
    reserved = 3 * sum(1 / k for k in range(1, 5)) + 3.6 * sum(1 / k for k in range(1, 6))
    assert w.c_beta == pytest.approx(reserved + math.fsum(pi_b), abs=1e-12)
    assert w.aggregate_valuation == pytest.approx(reserved + 1.5 + 1.3 + 1.4, abs=1e-12)
