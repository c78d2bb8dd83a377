"""Agent ensemble state and the money conservation ledger.

Balances are signed 64-bit integers in minor currency units, so conservation
of money under agent-to-agent transfers is an exact accounting identity, not
a floating-point approximation. Total money changes only through explicitly
logged boundary flux (exogenous injection or withdrawal).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class ConfigError(ValueError):
    """Invalid configuration value."""


class UsageError(ValueError):
    """Operation called with arguments outside its contract."""


@dataclass(frozen=True)
class FluxEntry:
    """One vertical (boundary-crossing) money movement."""

    tick: int
    agent: int
    amount: int
    tag: str


@dataclass
class AuditReport:
    ok: bool
    total_matches_sum: bool
    total_matches_flux: bool
    first_violation_tick: int | None = None
    detail: str = ""


@dataclass
class AgentState:
    """Read-only view of a single agent (money plus commodity holdings)."""

    id: int
    money: int
    holdings: dict[int, int] = field(default_factory=dict)


class Ensemble:
    """N agents, their integer balances, and the boundary-flux log.

    Invariants (checked by :meth:`audit`):
      * ``total_money == money.sum()`` at all times,
      * ``total_money == sum(flux_log amounts)`` (the genesis allocation is
        itself a flux entry), so all vertical movements are accounted for.
    """

    def __init__(self, money: np.ndarray, m_min: int | None = 0,
                 m_max: int | None = None):
        self.money = np.asarray(money, dtype=np.int64)
        if self.money.ndim != 1 or self.money.size < 1:
            raise ConfigError("ensemble needs at least one agent")
        self.n = int(self.money.size)
        self.m_min = m_min
        self.m_max = m_max
        self.total_money = int(self.money.sum())
        self.flux_log: list[FluxEntry] = []
        self.holdings: dict[int, dict[int, int]] = {}
        self.tick = 0

    # -- construction ------------------------------------------------------

    @classmethod
    def init_equal(cls, n: int, per_capita: int, m_min: int | None = 0,
                   m_max: int | None = None) -> "Ensemble":
        """Equal initial balances; the allocation is logged as genesis flux."""
        if n < 1:
            raise ConfigError(f"population must be >= 1, got {n}")
        if per_capita < 0:
            raise ConfigError(f"per-capita money must be >= 0, got {per_capita}")
        ens = cls(np.full(n, per_capita, dtype=np.int64), m_min=m_min, m_max=m_max)
        ens.flux_log.append(FluxEntry(0, -1, n * per_capita, "genesis"))
        return ens

    # -- horizontal transactions -------------------------------------------

    def transfer(self, payer: int, payee: int, amount: int) -> bool:
        """Move money payer -> payee. Returns False (state untouched) on a
        boundary breach; the attempt still consumes a tick."""
        if amount <= 0:
            raise UsageError(f"transfer amount must be positive, got {amount}")
        if payer == payee:
            raise UsageError("payer and payee must differ")
        self._check_agent(payer)
        self._check_agent(payee)
        self.tick += 1
        if self.m_min is not None and self.money[payer] - amount < self.m_min:
            return False
        if self.m_max is not None and self.money[payee] + amount > self.m_max:
            return False
        self.money[payer] -= amount
        self.money[payee] += amount
        return True

    # -- vertical transactions ---------------------------------------------

    def exogenous_inject(self, recipient: int, amount: int, tag: str) -> bool:
        """Money crossing the system boundary (negative amount = withdrawal).

        The injector is a pure source/sink, not an agent with a balance.
        """
        if amount == 0:
            raise UsageError("injection amount must be nonzero")
        self._check_agent(recipient)
        self.tick += 1
        if amount < 0 and self.m_min is not None \
                and self.money[recipient] + amount < self.m_min:
            return False
        self.money[recipient] += amount
        self.total_money += amount
        self.flux_log.append(FluxEntry(self.tick, recipient, amount, tag))
        return True

    # -- commodities ---------------------------------------------------------

    def set_holding(self, agent: int, commodity: int, volume: int) -> None:
        if volume < 0:
            raise UsageError("holding volumes must be nonnegative")
        self._check_agent(agent)
        self.holdings.setdefault(agent, {})[commodity] = volume

    def agent(self, i: int) -> AgentState:
        self._check_agent(i)
        return AgentState(i, int(self.money[i]), dict(self.holdings.get(i, {})))

    # -- auditing ------------------------------------------------------------

    def audit(self) -> AuditReport:
        """Verify both conservation invariants against the flux log."""
        actual = int(self.money.sum())
        flux = sum(e.amount for e in self.flux_log)
        ok_sum = actual == self.total_money
        ok_flux = actual == flux
        ok = ok_sum and ok_flux
        detail = ""
        if not ok:
            detail = (f"sum(money)={actual} cached_total={self.total_money} "
                      f"cumulative_flux={flux}")
        return AuditReport(ok, ok_sum, ok_flux,
                           None if ok else self.tick, detail)

    def _check_agent(self, i: int) -> None:
        if not 0 <= i < self.n:
            raise UsageError(f"unknown agent id {i} (population {self.n})")
