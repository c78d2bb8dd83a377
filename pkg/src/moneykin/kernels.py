"""Transaction rules: how much money moves when a (payer, payee) pair trades.

A kernel only computes the amount; pair selection and boundary enforcement
belong to the engine. Each kernel family carries its time-reversal symmetry
class: families whose transition rate depends only on the amount (or only on
the pooled pair sum) are time-reversible and relax to the exponential
distribution, the multiplicative family is not.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ledger import ConfigError, Ensemble, UsageError
from .rng import CounterRng

ADDITIVE_FIXED = "additive-fixed"
ADDITIVE_UNIFORM = "additive-uniform"
MULTIPLICATIVE = "multiplicative"
RANDOM_SPLIT_POOL = "random-split-pool"
LETS_SERVICE = "lets-service"

TIME_REVERSIBLE = "time-reversible"
NON_REVERSIBLE = "non-reversible"

# integer codes for the numba event loops
KERNEL_CODES = {
    ADDITIVE_FIXED: 0,
    ADDITIVE_UNIFORM: 1,
    MULTIPLICATIVE: 2,
    RANDOM_SPLIT_POOL: 3,
    LETS_SERVICE: 0,  # same amount rule as additive-fixed, signed balances
}


def round_half_even(x: float) -> int:
    """Round a float64 product to the nearest integer, ties to even.

    Used to integerize multiplicative amounts. The engine's compiled loop
    applies the identical float64 arithmetic, so both paths agree bit-for-bit.
    """
    f = np.floor(x)
    q = int(f)
    r = x - f
    if r > 0.5:
        q += 1
    elif r == 0.5 and q % 2 != 0:
        q += 1
    return q


@dataclass(frozen=True)
class ExchangeKernel:
    """Parameterized transaction rule with a declared symmetry class."""

    kind: str
    delta0: int = 1          # additive-fixed / lets-service
    delta_max: int = 1       # additive-uniform
    gamma: float = 0.05      # multiplicative

    def __post_init__(self):
        if self.kind not in KERNEL_CODES:
            raise ConfigError(f"unknown kernel kind {self.kind!r}")
        if self.kind in (ADDITIVE_FIXED, LETS_SERVICE) and self.delta0 < 1:
            raise ConfigError("delta0 must be >= 1 minor unit")
        if self.kind == ADDITIVE_UNIFORM and self.delta_max < 1:
            raise ConfigError("delta_max must be >= 1 minor unit")
        if self.kind == MULTIPLICATIVE and not 0.0 < self.gamma < 1.0:
            raise ConfigError("gamma must lie in (0, 1)")

    @property
    def symmetry_class(self) -> str:
        return classify_symmetry(self)

    def code_and_params(self) -> tuple[int, float, float]:
        """(numba code, param1, param2) for the compiled event loops."""
        if self.kind in (ADDITIVE_FIXED, LETS_SERVICE):
            return KERNEL_CODES[self.kind], float(self.delta0), 0.0
        if self.kind == ADDITIVE_UNIFORM:
            return KERNEL_CODES[self.kind], float(self.delta_max), 0.0
        if self.kind == MULTIPLICATIVE:
            return KERNEL_CODES[self.kind], float(self.gamma), 0.0
        return KERNEL_CODES[self.kind], 0.0, 0.0

    def to_config(self) -> dict:
        cfg = {"kind": self.kind}
        if self.kind in (ADDITIVE_FIXED, LETS_SERVICE):
            cfg["delta0"] = self.delta0
        elif self.kind == ADDITIVE_UNIFORM:
            cfg["delta_max"] = self.delta_max
        elif self.kind == MULTIPLICATIVE:
            cfg["gamma"] = self.gamma
        return cfg

    @classmethod
    def from_config(cls, cfg: dict) -> "ExchangeKernel":
        try:
            kind = cfg["kind"]
        except KeyError:
            raise ConfigError("kernel config needs a 'kind' field") from None
        known = {"kind", "delta0", "delta_max", "gamma"}
        extra = set(cfg) - known
        if extra:
            raise ConfigError(f"unknown kernel fields: {sorted(extra)}")
        return cls(kind=kind, **{k: v for k, v in cfg.items() if k != "kind"})


def classify_symmetry(kernel: ExchangeKernel) -> str:
    """Time-reversible iff the rate depends only on the amount or the pair sum.

    Additive families propose amounts independent of the payer's balance and
    the pooled redivision depends only on m + m', so both are reversible. The
    multiplicative amount is a fraction of the payer's balance, which breaks
    the forward/reverse rate equality.
    """
    if kernel.kind == MULTIPLICATIVE:
        return NON_REVERSIBLE
    return TIME_REVERSIBLE


def propose_delta(kernel: ExchangeKernel, payer_money: int, payee_money: int,
                  rng: CounterRng) -> int:
    """Amount the payer hands over; 0 means a no-op event.

    For the pooled-split rule the returned amount is the payer's loss and may
    be negative (the redivision favored the payer).
    """
    if kernel.kind in (ADDITIVE_FIXED, LETS_SERVICE):
        return kernel.delta0
    if kernel.kind == ADDITIVE_UNIFORM:
        return rng.integers(1, kernel.delta_max)
    if kernel.kind == MULTIPLICATIVE:
        if payer_money < 1:
            return 0
        return max(1, round_half_even(kernel.gamma * float(payer_money)))
    # random split of the pooled sum: payer keeps u, loses m - u
    s = payer_money + payee_money
    u = rng.integers(0, s)
    return payer_money - u


# ---------------------------------------------------------------------------
# Mutual-credit ledger with signed balances (sum pinned to zero)
# ---------------------------------------------------------------------------

class LetsLedger:
    """Signed service balances; conservation holds in the algebraic sense."""

    def __init__(self, n: int, lower_bound: int, upper_bound: int | None = None):
        if lower_bound >= 0:
            raise ConfigError("lower bound must be negative")
        if upper_bound is not None and upper_bound <= 0:
            raise ConfigError("finite upper bound must be positive")
        self.balances = np.zeros(n, dtype=np.int64)
        self.lower_bound = lower_bound
        self.upper_bound = upper_bound

    @property
    def n(self) -> int:
        return int(self.balances.size)

    def trade(self, provider: int, receiver: int, delta: int) -> bool:
        """Provider's balance rises, receiver's falls by the same amount.

        Rejected (state untouched) if the receiver would drop below the lower
        bound or the provider would exceed a finite upper bound.
        """
        if delta <= 0:
            raise UsageError("trade amount must be positive")
        if provider == receiver:
            raise UsageError("provider and receiver must differ")
        if self.balances[receiver] - delta < self.lower_bound:
            return False
        if self.upper_bound is not None \
                and self.balances[provider] + delta > self.upper_bound:
            return False
        self.balances[provider] += delta
        self.balances[receiver] -= delta
        return True

    def shift_to_money(self) -> Ensemble:
        """Rebase balances as nonnegative money, m_i = balance - lower_bound.

        Equivalent to granting every member the amount |lower_bound|; the mean
        of the new money equals |lower_bound|.
        """
        from .ledger import FluxEntry

        money = self.balances - np.int64(self.lower_bound)
        ens = Ensemble(money, m_min=0)
        ens.flux_log.append(FluxEntry(0, -1, ens.total_money, "lets-shift"))
        return ens
