"""Peer-to-peer IOUs, net worth accounting, and fractional-reserve banking.

Borrowing is pair creation: money moves from lender to borrower against a
promissory note, so neither party's net worth (money plus net debt position)
changes and total money is untouched. Settlement annihilates the pair, by
repayment (money moves back, plus interest) or by default (both sides of the
obligation are erased). The bank aggregates the same mechanics one-to-many
and is limited by a required-reserve ratio.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import ceil

import numpy as np

from .ledger import ConfigError, Ensemble, UsageError
from .rng import CounterRng

OPEN = "open"
REPAID = "repaid"
DEFAULTED = "defaulted"

ALWAYS_DEFAULT = "always-default"
ALWAYS_ROLLOVER = "always-rollover"
COIN_FLIP = "coin-flip"


def _as_rate(rate) -> Fraction:
    f = rate if isinstance(rate, Fraction) else Fraction(str(rate))
    if f < 0:
        raise UsageError("interest rate must be >= 0")
    return f


def round_half_even_exact(value: Fraction) -> int:
    """Exact banker's rounding of a rational amount to integer minor units."""
    return round(value)


@dataclass
class Iou:
    lender: int
    borrower: int
    principal: int
    accrued: int = 0
    due_tick: int = 0
    status: str = OPEN

    def __post_init__(self):
        if self.principal <= 0:
            raise UsageError("IOU principal must be positive")
        if self.lender == self.borrower:
            raise UsageError("an agent cannot lend to itself")

    @property
    def balance(self) -> int:
        return self.principal + self.accrued


class CreditBook:
    """All IOUs of one replica plus the per-agent net positions they imply."""

    def __init__(self, n: int):
        self.n = n
        self.ious: list[Iou] = []
        self.net = np.zeros(n, dtype=np.int64)  # d_i: assets minus liabilities

    def open_ious(self) -> list[Iou]:
        return [iou for iou in self.ious if iou.status == OPEN]

    def ious_of(self, agent: int) -> list[Iou]:
        """Open notes the agent participates in, as lender or borrower."""
        return [i for i in self.open_ious()
                if agent in (i.lender, i.borrower)]

    def liability(self, agent: int) -> int:
        """Total open principal+accrued the agent owes (the debt-limit base)."""
        return sum(i.balance for i in self.open_ious() if i.borrower == agent)

    def debt_matrix(self) -> dict[tuple[int, int], int]:
        """Net antisymmetric positions d[i, j] = amount j owes i (open only)."""
        d: dict[tuple[int, int], int] = {}
        for iou in self.open_ious():
            key = (iou.lender, iou.borrower)
            d[key] = d.get(key, 0) + iou.balance
            rev = (iou.borrower, iou.lender)
            d[rev] = d.get(rev, 0) - iou.balance
        return d

    def net_worth(self, ensemble: Ensemble) -> np.ndarray:
        return ensemble.money + self.net


def borrow(ensemble: Ensemble, book: CreditBook, lender: int, borrower: int,
           amount: int, due_tick: int = 0,
           debt_limit: int | None = None) -> Iou | None:
    """Create a lender->borrower loan; None (state unchanged) on rejection.

    Rejected when the lender cannot spare the cash within the money bound or
    the borrower's total open liability would exceed the debt limit. On
    success both net worths are exactly unchanged.
    """
    if amount <= 0:
        raise UsageError("loan amount must be positive")
    if debt_limit is not None and book.liability(borrower) + amount > debt_limit:
        return None
    if not ensemble.transfer(lender, borrower, amount):
        return None
    iou = Iou(lender, borrower, amount, due_tick=due_tick)
    book.ious.append(iou)
    book.net[lender] += amount
    book.net[borrower] -= amount
    return iou


def accrue_interest(book: CreditBook, rate) -> None:
    """Grow every open IOU by round-half-even(rate * balance); no money moves.

    Both sides of each note change by the same amount, so the net positions
    stay an exact antisymmetric system with zero sum.
    """
    frac = _as_rate(rate)
    if frac == 0:
        return
    for iou in book.open_ious():
        add = round_half_even_exact(frac * iou.balance)
        iou.accrued += add
        book.net[iou.lender] += add
        book.net[iou.borrower] -= add


class SettlementError(UsageError):
    """Repayment demanded from a borrower who cannot pay."""


def settle(ensemble: Ensemble, book: CreditBook, iou: Iou, mode: str,
           new_due_tick: int | None = None) -> Iou | None:
    """Close an open IOU by repayment, default, or rollover.

    repay     money borrower -> lender for principal+accrued; net worths move
              only by the interest part.
    default   no money moves; the obligation is erased on both sides (the
              lender's paper asset annihilates with the borrower's liability).
    rollover  replaces the note with a new one whose principal capitalizes
              the accrued interest; returns the new IOU.
    """
    if iou.status != OPEN:
        raise UsageError("IOU is already closed")
    if mode == "repay":
        if ensemble.money[iou.borrower] < iou.balance \
                or not ensemble.transfer(iou.borrower, iou.lender, iou.balance):
            raise SettlementError("borrower cannot repay; choose default or "
                                  "rollover")
        book.net[iou.lender] -= iou.balance
        book.net[iou.borrower] += iou.balance
        iou.status = REPAID
        return None
    if mode == "default":
        book.net[iou.lender] -= iou.balance
        book.net[iou.borrower] += iou.balance
        iou.status = DEFAULTED
        return None
    if mode == "rollover":
        if new_due_tick is None or new_due_tick <= iou.due_tick:
            raise UsageError("rollover needs a later due tick")
        iou.status = REPAID  # superseded; positions carry over to the new note
        book.net[iou.lender] -= iou.balance
        book.net[iou.borrower] += iou.balance
        return borrow_rolled(book, iou, new_due_tick)
    raise UsageError(f"unknown settlement mode {mode!r}")


def borrow_rolled(book: CreditBook, old: Iou, due_tick: int) -> Iou:
    iou = Iou(old.lender, old.borrower, old.balance, due_tick=due_tick)
    book.ious.append(iou)
    book.net[iou.lender] += iou.principal
    book.net[iou.borrower] -= iou.principal
    return iou


@dataclass(frozen=True)
class SettlementPolicy:
    """What to do at the due tick when the borrower cannot repay."""

    mode: str = ALWAYS_DEFAULT
    coin_p: float = 0.5

    def resolve(self, rng: CounterRng) -> str:
        if self.mode == ALWAYS_DEFAULT:
            return "default"
        if self.mode == ALWAYS_ROLLOVER:
            return "rollover"
        if self.mode == COIN_FLIP:
            return "default" if rng.random() < self.coin_p else "rollover"
        raise ConfigError(f"unknown settlement policy {self.mode!r}")


def settle_due(ensemble: Ensemble, book: CreditBook, tick: int,
               policy: SettlementPolicy, rng: CounterRng,
               rollover_extension: int = 1) -> dict:
    """Apply the policy to every IOU at or past its due tick."""
    outcome = {"repaid": 0, "defaulted": 0, "rolled": 0}
    for iou in list(book.open_ious()):
        if iou.due_tick > tick:
            continue
        try:
            settle(ensemble, book, iou, "repay")
            outcome["repaid"] += 1
        except SettlementError:
            mode = policy.resolve(rng)
            if mode == "default":
                settle(ensemble, book, iou, "default")
                outcome["defaulted"] += 1
            else:
                settle(ensemble, book, iou, "rollover",
                       new_due_tick=iou.due_tick + rollover_extension)
                outcome["rolled"] += 1
    return outcome


# ---------------------------------------------------------------------------
# Fractional-reserve banking and the money multiplier
# ---------------------------------------------------------------------------

@dataclass
class CascadeRound:
    deposits: float
    loans: float
    lent_this_round: float


@dataclass
class CascadeResult:
    deposits: float
    loans: float
    multiplier: float
    rounds: list[CascadeRound] = field(default_factory=list)


def multiplier_cascade(m0, reserve_ratio, rounds: int | None = None,
                       integer_units: bool = False) -> CascadeResult:
    """Deposit-lend-redeposit cascade for base money m0 at reserve ratio R.

    Real-valued mode iterates the geometric progression (to convergence when
    ``rounds`` is None), approaching deposits/m0 = 1/R and loans/m0 = (1-R)/R.
    Integer mode mirrors the in-simulation bank exactly: required reserves
    round up to whole units, lendable headroom is deposits - ceil(R*deposits)
    minus loans already outstanding.
    """
    if m0 <= 0:
        raise ConfigError("base money must be positive")
    r = _as_rate(reserve_ratio)
    if not 0 < r <= 1:
        raise ConfigError("reserve ratio must lie in (0, 1]")
    # round 0 is the base deposit itself; each later round redeposits what the
    # previous round lent
    if integer_units:
        deposits = int(m0)
        loans = 0
        history = [CascadeRound(deposits, loans, deposits)]
        k = 1
        while rounds is None or k < rounds:
            headroom = deposits - ceil_ratio(r.numerator * deposits,
                                             r.denominator) - loans
            if headroom <= 0:
                break
            deposits += headroom
            loans += headroom
            history.append(CascadeRound(deposits, loans, headroom))
            k += 1
        return CascadeResult(deposits, loans, deposits / m0, history)
    deposits = float(m0)
    loans = 0.0
    history = [CascadeRound(deposits, loans, float(m0))]
    lend = float(m0) * (1.0 - float(r))
    k = 1
    eps = float(m0) * 1e-14
    while lend > eps and (rounds is None or k < rounds):
        deposits += lend
        loans += lend
        history.append(CascadeRound(deposits, loans, lend))
        lend *= 1.0 - float(r)
        k += 1
    return CascadeResult(deposits, loans, deposits / m0, history)


def ceil_ratio(num: int, den: int) -> int:
    return -((-num) // den)


class BankState:
    """One aggregate bank: cash reserves, checking deposits, loan book.

    Reserves obey the conservation law (they change only when cash crosses
    the counter); deposits are the bank's own liability record and grow when
    loans are credited to borrowers' accounts.
    """

    def __init__(self, reserve_ratio):
        self.reserve_ratio = _as_rate(reserve_ratio)
        if not 0 < self.reserve_ratio <= 1:
            raise ConfigError("reserve ratio must lie in (0, 1]")
        self.deposits: dict[int, int] = {}
        self.reserves = 0
        self.outstanding_loans = 0
        self.loan_book: list[Iou] = []

    BANK_ID = -1

    @property
    def total_deposits(self) -> int:
        return sum(self.deposits.values())

    def required_reserves(self) -> int:
        r = self.reserve_ratio
        return ceil_ratio(r.numerator * self.total_deposits, r.denominator)

    def constraint_ok(self) -> bool:
        return self.reserves >= self.required_reserves()

    def deposit_cash(self, ensemble: Ensemble, agent: int, amount: int) -> bool:
        """Move agent cash across the counter into a checking balance."""
        if amount <= 0:
            raise UsageError("deposit must be positive")
        if not ensemble.exogenous_inject(agent, -amount, "bank-deposit"):
            return False
        self.reserves += amount
        self.deposits[agent] = self.deposits.get(agent, 0) + amount
        return True

    def withdraw_cash(self, ensemble: Ensemble, agent: int, amount: int) -> bool:
        if amount <= 0:
            raise UsageError("withdrawal must be positive")
        if self.deposits.get(agent, 0) < amount or self.reserves < amount:
            return False
        if self.reserves - amount < ceil_ratio(
                self.reserve_ratio.numerator * (self.total_deposits - amount),
                self.reserve_ratio.denominator):
            return False
        self.deposits[agent] -= amount
        self.reserves -= amount
        ensemble.exogenous_inject(agent, amount, "bank-withdrawal")
        return True

    def headroom(self) -> int:
        return self.total_deposits - self.required_reserves() \
            - self.outstanding_loans

    def lend(self, borrower: int, amount: int) -> Iou | None:
        """Credit a borrower's checking account against a new IOU.

        Creates deposit money and debt in equal measure; reserves are
        untouched, so the required-reserve constraint decides how far this
        can go.
        """
        if amount <= 0:
            raise UsageError("loan must be positive")
        if amount > self.headroom():
            return None
        iou = Iou(self.BANK_ID, borrower, amount)
        self.loan_book.append(iou)
        self.deposits[borrower] = self.deposits.get(borrower, 0) + amount
        self.outstanding_loans += amount
        return iou


def bank_loop_step(bank: BankState, ensemble: Ensemble,
                   rng: CounterRng) -> int:
    """One deposit-lend-redeposit round: lend the full current headroom to a
    randomly chosen agent, whose loan proceeds sit as a new deposit. Returns
    the amount lent (0 when the bank is fully lent)."""
    if not bank.constraint_ok():
        raise UsageError("required-reserve constraint violated before step")
    amount = bank.headroom()
    if amount <= 0:
        return 0
    borrower = rng.below(ensemble.n)
    iou = bank.lend(borrower, amount)
    assert iou is not None and bank.constraint_ok()
    return amount
