from itertools import combinations_with_replacement
from math import log

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from moneykin import (DistributionEstimate, Ensemble, PriceVector, UsageError,
                      entropy, gini, gini_weighted, max_entropy_at_mean,
                      temperature, wealth)


def test_estimate_counts_partition_population():
    est = DistributionEstimate.from_values([-2, 0, 1, 1, 5, 99], lo=0, n_bins=10)
    assert est.underflow == 1 and est.overflow == 1
    assert est.counts.sum() == 4
    assert est.population == 6
    assert est.edges[0] == 0 and est.edges[-1] == 10


def test_temperature_is_money_per_agent():
    assert temperature(Ensemble.init_equal(100, 10)) == 10.0
    assert temperature(Ensemble(np.array([7]))) == 7.0


def test_entropy_delta_is_zero_both_modes():
    est = DistributionEstimate.from_values(np.full(500, 3), 0, 10)
    assert entropy(est, "shannon") == 0.0
    assert entropy(est, "multiplicity") == 0.0


def test_entropy_two_equal_bins_is_ln2():
    est = DistributionEstimate.from_values([0] * 50 + [1] * 50, 0, 4)
    assert entropy(est, "shannon") == pytest.approx(log(2))


def test_entropy_modes_agree_for_large_populations():
    rng = np.random.default_rng(0)
    values = rng.geometric(1 / 11, size=20_000) - 1
    est = DistributionEstimate.from_values(values, 0, 200)
    s, m = entropy(est, "shannon"), entropy(est, "multiplicity")
    # Stirling gap is ~ K ln N / (2N) for K occupied bins
    k_occ = int((est.counts > 0).sum())
    n = est.population
    assert abs(s - m) < k_occ * log(n) / n


def test_entropy_bounded_by_log_occupied_bins():
    rng = np.random.default_rng(1)
    values = rng.integers(0, 7, size=300)
    est = DistributionEstimate.from_values(values, 0, 10)
    occupied = int((est.counts > 0).sum())
    assert entropy(est, "shannon") <= log(occupied) + 1e-12


def test_entropy_errors():
    est = DistributionEstimate(0, 1, np.zeros(4, dtype=np.int64))
    with pytest.raises(UsageError):
        entropy(est)
    good = DistributionEstimate.from_values([1, 2], 0, 4)
    with pytest.raises(UsageError):
        entropy(good, mode="renyi")


def test_discrete_exponential_maximizes_entropy_small_grid():
    """Exhaustive search over all 8-agent integer histograms with mean 2:
    no reachable histogram beats the geometric (unit-binned exponential)
    entropy bound at the same mean, and the best one is exponential-shaped
    (non-increasing in the balance)."""
    n_agents, total = 8, 16
    bound = max_entropy_at_mean(total / n_agents)
    best_s, best_hist = -1.0, None
    for balances in combinations_with_replacement(range(total + 1), n_agents):
        if sum(balances) != total:
            continue
        est = DistributionEstimate.from_values(list(balances), 0, total + 1)
        s = entropy(est, "shannon")
        if s > best_s:
            best_s = s
            best_hist = np.bincount(balances, minlength=total + 1)
    assert best_s <= bound
    assert best_s > 0.85 * bound  # the finite-population gap stays moderate
    assert (np.diff(best_hist[:n_agents]) <= 0).all()


def test_gini_all_equal_is_zero():
    assert gini(np.full(50, 7)) == 0.0
    assert gini(np.zeros(5)) == 0.0


def test_gini_single_holder_small_population():
    assert gini([100, 0, 0, 0]) == pytest.approx(0.75)  # 1 - 1/N


def test_gini_exponential_sample_is_half():
    x = np.random.default_rng(3).exponential(10.0, 200_000)
    assert gini(x) == pytest.approx(0.5, abs=0.01)


def test_gini_paths_agree():
    rng = np.random.default_rng(4)
    x = rng.exponential(5.0, 2_000)
    small = gini(x)
    big = gini(np.tile(x, 6))  # 12000 points: the sorted-identity path
    assert small == pytest.approx(big, abs=1e-9)


def test_gini_weighted_matches_expansion():
    values = np.array([0.0, 5.0, 20.0])
    weights = np.array([3, 2, 1])
    expanded = np.repeat(values, weights)
    assert gini_weighted(values, weights) == pytest.approx(gini(expanded))


def test_gini_rejects_negative_balances():
    with pytest.raises(UsageError):
        gini([-1.0, 2.0])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(min_value=0, max_value=10**6), min_size=2,
                max_size=40),
       st.integers(min_value=1, max_value=1000))
def test_gini_scale_invariance(balances, c):
    x = np.array(balances, dtype=np.float64)
    if x.sum() == 0:
        assert gini(x) == 0.0
    else:
        assert gini(c * x) == pytest.approx(gini(x), abs=1e-9)


def test_wealth_marks_holdings_to_market():
    ens = Ensemble(np.array([100, 300]))
    ens.set_holding(0, commodity=1, volume=2)
    prices = PriceVector({1: 100})
    assert wealth(ens.agent(0), prices) == 300


def test_wealth_unchanged_by_trade_at_quoted_price():
    ens = Ensemble(np.array([100, 300]))
    ens.set_holding(0, 1, 2)
    ens.set_holding(1, 1, 0)
    prices = PriceVector({1: 100})
    w_before = [wealth(ens.agent(i), prices) for i in (0, 1)]
    # agent 1 buys one unit from agent 0 at the quoted price
    assert ens.transfer(1, 0, 100)
    ens.set_holding(0, 1, 1)
    ens.set_holding(1, 1, 1)
    w_after = [wealth(ens.agent(i), prices) for i in (0, 1)]
    assert w_before == w_after


def test_wealth_changes_between_transactions_on_price_move():
    ens = Ensemble(np.array([100]))
    ens.set_holding(0, 1, 2)
    assert wealth(ens.agent(0), PriceVector({1: 200})) \
        - wealth(ens.agent(0), PriceVector({1: 100})) == 200


def test_wealth_missing_price_is_usage_error():
    ens = Ensemble(np.array([10]))
    ens.set_holding(0, 9, 1)
    with pytest.raises(UsageError):
        wealth(ens.agent(0), PriceVector({}))
