import numpy as np
import pytest

from moneykin import (ADDITIVE_FIXED, ADDITIVE_UNIFORM, MULTIPLICATIVE,
                      NON_REVERSIBLE, RANDOM_SPLIT_POOL, TIME_REVERSIBLE,
                      ConfigError, ExchangeKernel, LetsLedger, UsageError,
                      classify_symmetry, propose_delta)
from moneykin.kernels import round_half_even
from moneykin.rng import CounterRng


def rng():
    return CounterRng(12345)


def test_multiplicative_five_percent_of_100_is_5():
    k = ExchangeKernel(MULTIPLICATIVE, gamma=0.05)
    assert propose_delta(k, 100, 50, rng()) == 5


def test_additive_fixed_always_returns_delta0():
    k = ExchangeKernel(ADDITIVE_FIXED, delta0=1)
    for payer in (0, 1, 5, 10**9):
        assert propose_delta(k, payer, 3, rng()) == 1


def test_multiplicative_empty_payer_is_noop():
    k = ExchangeKernel(MULTIPLICATIVE, gamma=0.05)
    assert propose_delta(k, 0, 10, rng()) == 0


def test_multiplicative_minimum_one_unit():
    k = ExchangeKernel(MULTIPLICATIVE, gamma=0.05)
    assert propose_delta(k, 1, 0, rng()) == 1
    assert propose_delta(k, 9, 0, rng()) == 1


def test_additive_uniform_stays_in_range():
    k = ExchangeKernel(ADDITIVE_UNIFORM, delta_max=7)
    r = rng()
    draws = {propose_delta(k, 100, 100, r) for _ in range(500)}
    assert draws == set(range(1, 8))


def test_random_split_redivides_pool():
    k = ExchangeKernel(RANDOM_SPLIT_POOL)
    r = rng()
    for _ in range(200):
        d = propose_delta(k, 6, 4, r)
        assert -4 <= d <= 6  # payer keeps 0..10 of the pooled sum


@pytest.mark.parametrize("x,expected", [
    (0.4, 0), (0.5, 0), (1.5, 2), (2.5, 2), (3.5, 4), (4.5, 4), (5.0, 5),
    (5.500000000001, 6),
])
def test_round_half_even(x, expected):
    assert round_half_even(x) == expected


def test_symmetry_classification():
    assert classify_symmetry(ExchangeKernel(ADDITIVE_FIXED, delta0=1)) \
        == TIME_REVERSIBLE
    assert classify_symmetry(ExchangeKernel(ADDITIVE_UNIFORM, delta_max=3)) \
        == TIME_REVERSIBLE
    assert classify_symmetry(ExchangeKernel(RANDOM_SPLIT_POOL)) \
        == TIME_REVERSIBLE
    assert classify_symmetry(ExchangeKernel(MULTIPLICATIVE, gamma=0.05)) \
        == NON_REVERSIBLE


def test_classification_matches_exact_detailed_balance():
    """The declared class must agree with an enumerated detailed-balance check."""
    from moneykin.exact import (build_master, detailed_balance_residual,
                                stationary)

    cases = [
        (ExchangeKernel(ADDITIVE_FIXED, delta0=1), 3, 4),
        (ExchangeKernel(ADDITIVE_UNIFORM, delta_max=2), 3, 4),
        (ExchangeKernel(RANDOM_SPLIT_POOL), 3, 4),
        (ExchangeKernel(MULTIPLICATIVE, gamma=0.5), 3, 6),
    ]
    for kernel, n, m in cases:
        _, q = build_master(n, m, kernel)
        pi = stationary(q)
        reversible = detailed_balance_residual(q, pi) < 1e-12
        assert reversible == (kernel.symmetry_class == TIME_REVERSIBLE), kernel


@pytest.mark.parametrize("bad", [
    dict(kind=ADDITIVE_FIXED, delta0=0),
    dict(kind=ADDITIVE_UNIFORM, delta_max=0),
    dict(kind=MULTIPLICATIVE, gamma=0.0),
    dict(kind=MULTIPLICATIVE, gamma=1.0),
    dict(kind="saving-propensity"),
])
def test_kernel_validation(bad):
    with pytest.raises(ConfigError):
        ExchangeKernel(**bad)


def test_kernel_config_round_trip():
    for k in (ExchangeKernel(ADDITIVE_FIXED, delta0=3),
              ExchangeKernel(MULTIPLICATIVE, gamma=0.1),
              ExchangeKernel(RANDOM_SPLIT_POOL)):
        assert ExchangeKernel.from_config(k.to_config()) == k
    with pytest.raises(ConfigError):
        ExchangeKernel.from_config({"kind": ADDITIVE_FIXED, "bogus": 1})


# ---------------------------------------------------------------------------
# Mutual credit (LETS)
# ---------------------------------------------------------------------------

def test_lets_trade_is_zero_sum():
    ledger = LetsLedger(4, lower_bound=-10)
    assert ledger.trade(provider=0, receiver=1, delta=3)
    assert ledger.balances.tolist() == [3, -3, 0, 0]
    assert ledger.balances.sum() == 0


def test_lets_receiver_at_lower_bound_rejected():
    ledger = LetsLedger(2, lower_bound=-2)
    assert ledger.trade(0, 1, 2)
    before = ledger.balances.copy()
    assert not ledger.trade(0, 1, 1)
    assert (ledger.balances == before).all()


def test_lets_provider_upper_bound_rejected():
    ledger = LetsLedger(2, lower_bound=-10, upper_bound=2)
    assert ledger.trade(0, 1, 2)
    assert not ledger.trade(0, 1, 1)


def test_lets_trade_usage_errors():
    ledger = LetsLedger(3, lower_bound=-5)
    with pytest.raises(UsageError):
        ledger.trade(0, 0, 1)
    with pytest.raises(UsageError):
        ledger.trade(0, 1, 0)


def test_lets_shift_example():
    ledger = LetsLedger(2, lower_bound=-10)
    ledger.balances[:] = (3, -3)
    ens = ledger.shift_to_money()
    assert ens.money.tolist() == [13, 7]
    assert ens.total_money == 20
    assert ens.total_money / ens.n == 10  # mean equals |lower bound|
    assert ens.audit().ok


def test_lets_shift_all_zero():
    ledger = LetsLedger(4, lower_bound=-5)
    ens = ledger.shift_to_money()
    assert (ens.money == 5).all()


def test_lets_symmetric_bounds_give_symmetric_distribution():
    """With bounds -K..K the stationary law obeys P(b) = P(-b)."""
    from moneykin import LETS_SERVICE, SimulationConfig, run

    cfg = SimulationConfig(n=500, per_capita=0,
                           kernel=ExchangeKernel(LETS_SERVICE, delta0=1),
                           steps=2_000_000, seed=99, measure_every=100_000,
                           m_min=-8, m_max=8)
    rep = run(cfg)[0]
    pooled = rep.hist[10:, 1:-1].sum(axis=0).astype(float)
    p = pooled / pooled.sum()
    sym_gap = np.abs(p - p[::-1]).max()
    assert sym_gap < 0.01
